"""Exception hierarchy shared across the attack engine."""


class VarflipError(Exception):
    """Base class for all engine errors."""


# --- language / rename layer ---------------------------------------------

class UnsupportedLanguage(VarflipError):
    """The requested language tag has no parser backend."""


class ParseError(VarflipError):
    """Input does not lex/parse under the language grammar."""


class SpanError(VarflipError):
    """A byte span does not cleanly slice an identifier token."""


class InvalidName(VarflipError):
    """A substitute violates the identifier lexical rule or is a keyword."""


class CollisionError(VarflipError):
    """A substitute already occurs as an identifier in the snippet."""


class RenameIntegrityError(VarflipError):
    """A rename changed the snippet's structure; the variant was discarded."""


# --- gateway ---------------------------------------------------------------

class GatewayError(VarflipError):
    """Base class for victim/substitute backend failures."""


class TransportError(GatewayError):
    """Backend unreachable, connection dropped, or timed out."""


class ProtocolError(GatewayError):
    """Backend answered, but the response violates the wire contract."""


class BudgetExhausted(GatewayError):
    """The classify-query budget has been spent."""


# --- search ----------------------------------------------------------------

class DegeneratePopulation(VarflipError):
    """Crossover is impossible: chromosomes carry fewer than two genes."""


class NoMutationPossible(VarflipError):
    """Every gene's candidate pool is empty; mutation cannot change anything."""


# --- surrogate / campaign ---------------------------------------------------

class MissingVocabulary(VarflipError):
    """The surrogate substitute backend has no vocabulary loaded."""


class DatasetError(VarflipError):
    """A dataset file is malformed (bad JSONL, missing fields, duplicate ids)."""


class ConfigError(VarflipError):
    """An attack configuration value is out of range or inconsistent."""
