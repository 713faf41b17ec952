"""Wire-protocol model server for the variable-renaming attack engine."""

from .app import create_app
from .engine import InferenceEngine

__version__ = "0.1.0"

__all__ = ["InferenceEngine", "create_app", "__version__"]
