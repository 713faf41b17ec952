"""varflip: a black-box adversarial variable-renaming attack for code classifiers."""

from .core import (
    AttackConfig,
    AttackOutcome,
    Chromosome,
    Gene,
    Identifier,
    Language,
    OccurrenceSpan,
    Prediction,
    SourceUnit,
    Stage,
    SubstituteCandidate,
    SubstituteSet,
    Verdict,
    seeded_rng,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackOutcome",
    "Chromosome",
    "Gene",
    "Identifier",
    "Language",
    "OccurrenceSpan",
    "Prediction",
    "SourceUnit",
    "Stage",
    "SubstituteCandidate",
    "SubstituteSet",
    "Verdict",
    "seeded_rng",
    "__version__",
]
