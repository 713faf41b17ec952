"""Shared domain types, attack configuration, and deterministic randomness.

Everything in this module is an immutable value object: instances are safe to
share between workers, to reuse across attack stages, and to use as dict keys.
All byte offsets index into the UTF-8 encoding of a snippet's text.
"""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass, field

from .errors import ConfigError, UnsupportedLanguage


class Language(enum.Enum):
    """Source languages the rename engine understands."""

    C = "c"
    PYTHON = "python"
    JAVA = "java"

    @classmethod
    def from_tag(cls, tag: str) -> "Language":
        try:
            return cls(tag.strip().lower())
        except ValueError:
            raise UnsupportedLanguage(f"unknown language tag: {tag!r}") from None


@dataclass(frozen=True)
class SourceUnit:
    """One code snippet: language tag, UTF-8 text, and an opaque origin id."""

    language: Language
    text: str
    origin_id: str = ""

    @property
    def blob(self) -> bytes:
        return self.text.encode("utf-8")

    def with_text(self, text: str) -> "SourceUnit":
        return SourceUnit(self.language, text, self.origin_id)


@dataclass(frozen=True, order=True)
class OccurrenceSpan:
    """Half-open byte range [byte_start, byte_end) slicing one identifier token."""

    byte_start: int
    byte_end: int

    def __post_init__(self) -> None:
        if not (0 <= self.byte_start < self.byte_end):
            raise ValueError(f"bad span [{self.byte_start}, {self.byte_end})")

    def slice(self, blob: bytes) -> bytes:
        return blob[self.byte_start:self.byte_end]


@dataclass(frozen=True)
class Identifier:
    """A renameable local variable and every occurrence span bound to it."""

    name: str
    occurrences: tuple[OccurrenceSpan, ...]

    def __post_init__(self) -> None:
        if not self.occurrences:
            raise ValueError(f"identifier {self.name!r} has no occurrences")
        starts = [o.byte_start for o in self.occurrences]
        if starts != sorted(starts):
            raise ValueError(f"occurrences of {self.name!r} not in ascending order")

    @property
    def first_offset(self) -> int:
        return self.occurrences[0].byte_start


@dataclass(frozen=True)
class SubstituteCandidate:
    """A candidate replacement name with its similarity score in [-1, 1]."""

    name: str
    similarity: float


@dataclass(frozen=True)
class SubstituteSet:
    """Per-variable candidate lists, each sorted by descending similarity."""

    by_variable: "dict[str, tuple[SubstituteCandidate, ...]]"

    def candidates(self, variable: str) -> tuple[SubstituteCandidate, ...]:
        return self.by_variable.get(variable, ())

    def names(self, variable: str) -> tuple[str, ...]:
        return tuple(c.name for c in self.candidates(variable))


@dataclass(frozen=True)
class Gene:
    """One (variable, substitute) pair; substitute == variable means unchanged."""

    variable: str
    substitute: str

    @property
    def changed(self) -> bool:
        return self.substitute != self.variable


@dataclass(frozen=True)
class Chromosome:
    """A full variable-to-substitute mapping in a fixed canonical gene order.

    The canonical order is the extraction order of the variables (ascending
    first-occurrence byte offset, ties by name); every chromosome produced for
    one snippet shares it, which is what makes crossover position-aligned.
    """

    genes: tuple[Gene, ...]

    @classmethod
    def identity(cls, variables: "tuple[str, ...] | list[str]") -> "Chromosome":
        return cls(tuple(Gene(v, v) for v in variables))

    @classmethod
    def from_pairs(cls, pairs: "list[tuple[str, str]] | list[list[str]]") -> "Chromosome":
        return cls(tuple(Gene(v, s) for v, s in pairs))

    def to_pairs(self) -> list[tuple[str, str]]:
        return [(g.variable, g.substitute) for g in self.genes]

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(g.variable for g in self.genes)

    @property
    def is_identity(self) -> bool:
        return all(not g.changed for g in self.genes)

    @property
    def changed_count(self) -> int:
        return sum(1 for g in self.genes if g.changed)

    def changes(self) -> dict[str, str]:
        return {g.variable: g.substitute for g in self.genes if g.changed}

    def substitute_for(self, variable: str) -> str:
        for g in self.genes:
            if g.variable == variable:
                return g.substitute
        raise KeyError(variable)

    def with_substitute(self, variable: str, substitute: str) -> "Chromosome":
        if variable not in self.variables:
            raise KeyError(variable)
        return Chromosome(tuple(
            Gene(g.variable, substitute) if g.variable == variable else g
            for g in self.genes
        ))

    def replace_gene(self, index: int, substitute: str) -> "Chromosome":
        genes = list(self.genes)
        genes[index] = Gene(genes[index].variable, substitute)
        return Chromosome(tuple(genes))

    def sort_key(self) -> tuple[str, ...]:
        # Deterministic total order over chromosomes of one snippet.
        return tuple(g.substitute for g in self.genes)


@dataclass(frozen=True)
class Prediction:
    """A victim model's answer: class label plus the confidence vector."""

    label: int
    confidences: tuple[float, ...]

    #: |sum(confidences) - 1| tolerated at the gateway boundary.
    SUM_TOLERANCE = 1e-6

    @classmethod
    def build(cls, label: int, confidences: "list[float] | tuple[float, ...]") -> "Prediction":
        """Validate the prediction invariants; raises ValueError on violation."""
        conf = tuple(float(c) for c in confidences)
        if len(conf) < 2:
            raise ValueError(f"confidence vector too short: {len(conf)}")
        if any(c < 0.0 for c in conf):
            raise ValueError(f"negative confidence in {conf}")
        total = sum(conf)
        if abs(total - 1.0) > cls.SUM_TOLERANCE:
            raise ValueError(f"confidences sum to {total!r}, not 1")
        if not isinstance(label, int) or isinstance(label, bool):
            raise ValueError(f"label must be an int, got {label!r}")
        if not (0 <= label < len(conf)):
            raise ValueError(f"label {label} outside class range 0..{len(conf) - 1}")
        if conf[label] != max(conf):
            raise ValueError(f"label {label} does not attain max confidence in {conf}")
        return cls(label, conf)


class Verdict(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    SKIPPED = "skipped"


class Stage(enum.Enum):
    GREEDY = "greedy"
    GA = "ga"
    NONE = "none"


@dataclass(frozen=True)
class QueryBreakdown:
    """Classify-query counts split by attack phase.

    `rank` includes the single baseline prediction of the item; `verify`
    counts the extra confirmation query issued before any Success is
    reported. The total is what NoQ measures.
    """

    rank: int = 0
    greedy: int = 0
    ga: int = 0
    verify: int = 0

    @property
    def total(self) -> int:
        return self.rank + self.greedy + self.ga + self.verify


@dataclass(frozen=True)
class AttackOutcome:
    """Result of attacking one snippet, with full query accounting."""

    verdict: Verdict
    stage: Stage
    adversarial: "SourceUnit | None"
    chromosome: "Chromosome | None"
    classify_queries: int
    mlm_queries: int
    breakdown: QueryBreakdown = field(default_factory=QueryBreakdown)
    variable_count: int = 0
    #: Lowest-confidence-on-y explored variant (feeds the training-set export).
    best_variant: "SourceUnit | None" = None
    best_variant_confidence: "float | None" = None
    skip_reason: "str | None" = None
    error: "str | None" = None

    def changes(self) -> dict[str, str]:
        return self.chromosome.changes() if self.chromosome is not None else {}


@dataclass(frozen=True)
class AttackConfig:
    """Attack hyper-parameters; shipped defaults are the evaluated settings."""

    top_j: int = 60
    top_k: int = 30
    child_size: int = 64
    crossover_rate: float = 0.7
    mask_token: str = "<unk>"
    rng_seed: int = 0
    query_budget: "int | None" = None
    include_parameters: bool = False

    def __post_init__(self) -> None:
        if self.top_j < 0 or self.top_k < 0:
            raise ConfigError("top_j and top_k must be non-negative")
        if self.top_k > self.top_j:
            raise ConfigError(f"top_k ({self.top_k}) must not exceed top_j ({self.top_j})")
        if self.child_size < 1:
            raise ConfigError("child_size must be at least 1")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise ConfigError("crossover_rate must lie in [0, 1]")
        if self.query_budget is not None and self.query_budget < 0:
            raise ConfigError("query_budget must be non-negative")

    def max_iterations(self, variable_count: int) -> int:
        """Generation cap for the genetic stage: max(5 x #vars, 10)."""
        return max(5 * variable_count, 10)


def seeded_rng(seed: int, item_id: str) -> random.Random:
    """Deterministic per-item random stream, a pure function of (seed, item_id).

    Independent of scheduling order: two workers asking for the same pair get
    identical streams, and different pairs diverge immediately.
    """
    material = f"{seed}\x1f{item_id}".encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=16).digest()
    return random.Random(int.from_bytes(digest, "big"))
