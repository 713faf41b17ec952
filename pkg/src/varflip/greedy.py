"""Importance-guided greedy search.

A variable's importance is measured by masking each of its occurrences in
turn and watching the victim's confidence on the ground-truth label drop;
the per-occurrence scores sum (in occurrence order, plain float accumulation)
into the variable's overall importance. The greedy stage then walks variables
in descending overall importance, trying every candidate on top of the
current working snippet, returning immediately on a verified label flip and
otherwise committing the variant that lowered confidence the most.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AttackConfig,
    Chromosome,
    Identifier,
    Prediction,
    SourceUnit,
    SubstituteSet,
)
from .errors import BudgetExhausted, CollisionError, InvalidName, RenameIntegrityError
from .gateway import Gateway
from .lang import mask_occurrence, rename


@dataclass
class ExplorationLog:
    """Chronological trackers shared by both stages.

    `best_*` follows the explored variant with the lowest confidence on the
    ground-truth label (strict improvement, so the first minimum wins);
    it feeds the adversarial-training export for failed attacks.
    """

    best_confidence: "float | None" = None
    best_variant: "SourceUnit | None" = None
    best_chromosome: "Chromosome | None" = None

    def note(self, variant: SourceUnit, chromosome: Chromosome, confidence: float) -> None:
        if self.best_confidence is None or confidence < self.best_confidence:
            self.best_confidence = confidence
            self.best_variant = variant
            self.best_chromosome = chromosome


@dataclass(frozen=True)
class RankedVariable:
    name: str
    overall_importance: float
    per_occurrence: tuple[float, ...]
    first_offset: int


@dataclass(frozen=True)
class VariableRanking:
    entries: tuple[RankedVariable, ...]

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)


def importance_score(src: SourceUnit, occ, y: int, base: Prediction, gw: Gateway,
                     mask_token: str = "<unk>",
                     pair: "SourceUnit | None" = None) -> float:
    """Confidence drop on label y when one occurrence is masked; one query."""
    masked = mask_occurrence(src, occ, mask_token)
    return base.confidences[y] - gw.classify(masked, pair).confidences[y]


def rank_variables(src: SourceUnit, variables: list[Identifier], y: int, gw: Gateway,
                   base: "Prediction | None" = None,
                   mask_token: str = "<unk>",
                   pair: "SourceUnit | None" = None) -> VariableRanking:
    """Rank by descending overall importance; queries = 1 + total occurrences.

    The single baseline query is reused for every occurrence; pass `base` if
    the item was already classified to keep that query out of this phase.
    """
    if not variables:
        raise ValueError("rank_variables needs at least one variable")
    if base is None:
        base = gw.classify(src, pair)
    entries = []
    for var in variables:
        scores = []
        total = 0.0
        for occ in var.occurrences:
            score = importance_score(src, occ, y, base, gw,
                                     mask_token=mask_token, pair=pair)
            scores.append(score)
            total += score
        entries.append(RankedVariable(var.name, total, tuple(scores), var.first_offset))
    entries.sort(key=lambda e: (-e.overall_importance, e.first_offset, e.name))
    return VariableRanking(tuple(entries))


@dataclass
class GreedyResult:
    success: bool
    adversarial: "SourceUnit | None"
    chromosome: "Chromosome | None"
    greedy_best: dict[str, str]
    working: Chromosome
    working_confidence: float
    search_queries: int = 0
    verify_queries: int = 0
    budget_exhausted: bool = False


def greedy_attack(src: SourceUnit, y: int, subs: SubstituteSet,
                  ranking: VariableRanking, cfg: AttackConfig, gw: Gateway,
                  identifiers: "tuple[Identifier, ...]",
                  base: Prediction,
                  pair: "SourceUnit | None" = None,
                  log: "ExplorationLog | None" = None) -> GreedyResult:
    """Greedy stage; on failure, carries each variable's best-found substitute.

    Candidates whose rename collides with an identifier introduced by an
    earlier committed substitution are skipped without spending a query.
    """
    if log is None:
        log = ExplorationLog()
    names = tuple(i.name for i in identifiers)
    working = Chromosome.identity(names)
    current_confidence = base.confidences[y]
    greedy_best: dict[str, str] = {}
    result = GreedyResult(False, None, None, greedy_best, working, current_confidence)

    for entry in ranking.entries:
        candidates = subs.candidates(entry.name)
        if not candidates:
            continue
        iteration_best: "tuple[float, str, Chromosome, SourceUnit] | None" = None
        for cand in candidates:
            trial = working.with_substitute(entry.name, cand.name)
            try:
                variant = rename(src, trial, identifiers)
            except (CollisionError, InvalidName, RenameIntegrityError):
                continue
            try:
                pred = gw.classify(variant, pair)
                result.search_queries += 1
            except BudgetExhausted:
                result.budget_exhausted = True
                result.working = working
                result.working_confidence = current_confidence
                return result
            confidence = pred.confidences[y]
            if pred.label != y:
                try:
                    verify = gw.classify(variant, pair)
                    result.verify_queries += 1
                except BudgetExhausted:
                    result.budget_exhausted = True
                    result.working = working
                    result.working_confidence = current_confidence
                    return result
                if verify.label != y:
                    greedy_best[entry.name] = cand.name
                    result.success = True
                    result.adversarial = variant
                    result.chromosome = trial
                    result.working = trial
                    result.working_confidence = confidence
                    return result
                confidence = verify.confidences[y]
            log.note(variant, trial, confidence)
            if iteration_best is None or confidence < iteration_best[0]:
                iteration_best = (confidence, cand.name, trial, variant)
        if iteration_best is not None:
            confidence, cand_name, trial, _variant = iteration_best
            greedy_best[entry.name] = cand_name
            if confidence < current_confidence:
                working = trial
                current_confidence = confidence

    result.working = working
    result.working_confidence = current_confidence
    return result
