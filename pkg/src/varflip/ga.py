"""Genetic search, seeded by the greedy stage and run only after it fails.

The population holds exactly one chromosome per extractable variable. Each
generation draws child_size children, by single-point crossover between two
uniformly drawn parents with the configured probability and by single-gene
mutation otherwise, then truncation selection keeps the fittest chromosomes
of parents plus children. Fitness is the baseline ground-truth confidence
minus the variant's, memoized per chromosome so repeats cost no queries; the
identity chromosome is 0 by definition and collision-broken chromosomes sink
to -inf without a query. The search stops the moment any evaluated variant
flips the label and the flip re-verifies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import AttackConfig, Chromosome, Identifier, SourceUnit, SubstituteSet
from .errors import (
    BudgetExhausted,
    CollisionError,
    DegeneratePopulation,
    InvalidName,
    NoMutationPossible,
    RenameIntegrityError,
)
from .gateway import Gateway
from .greedy import ExplorationLog
from .lang import rename

NEG_INF = float("-inf")


def init_population(variables: "tuple[str, ...] | list[str]",
                    greedy_best: dict[str, str]) -> list[Chromosome]:
    """One chromosome per variable, each changing only that variable.

    A variable without a discovered substitute contributes an all-identity
    chromosome, keeping the population size equal to the variable count.
    """
    variables = tuple(variables)
    population = []
    for var in variables:
        chromosome = Chromosome.identity(variables)
        substitute = greedy_best.get(var)
        if substitute is not None and substitute != var:
            chromosome = chromosome.with_substitute(var, substitute)
        population.append(chromosome)
    return population


def crossover(c1: Chromosome, c2: Chromosome, h: int) -> Chromosome:
    """Single cut-off recombination: genes up to h from c1, the rest from c2."""
    n = len(c1.genes)
    if n < 2:
        raise DegeneratePopulation("crossover needs at least two genes")
    if c1.variables != c2.variables:
        raise ValueError("parents do not share a gene order")
    if not (1 <= h < n):
        raise ValueError(f"cut-off {h} outside 1..{n - 1}")
    return Chromosome(c1.genes[:h] + c2.genes[h:])


def mutate(chromosome: Chromosome, subs: SubstituteSet,
           rng: random.Random) -> Chromosome:
    """Replace one gene's substitute with a different draw from its pool.

    The pool is that variable's candidates plus the identity, minus the
    current value; genes whose candidate list is empty cannot change.
    """
    mutable = [i for i, gene in enumerate(chromosome.genes)
               if subs.candidates(gene.variable)]
    if not mutable:
        raise NoMutationPossible("every candidate list is empty")
    index = mutable[rng.randrange(len(mutable))]
    gene = chromosome.genes[index]
    pool = [c.name for c in subs.candidates(gene.variable)] + [gene.variable]
    pool = [name for name in pool if name != gene.substitute]
    return chromosome.replace_gene(index, pool[rng.randrange(len(pool))])


class FitnessEvaluator:
    """Memoized fitness with flip detection and verification."""

    def __init__(self, src: SourceUnit, identifiers: "tuple[Identifier, ...]",
                 y: int, baseline: float, gw: Gateway,
                 pair: "SourceUnit | None", log: ExplorationLog):
        self.src = src
        self.identifiers = identifiers
        self.y = y
        self.baseline = baseline
        self.gw = gw
        self.pair = pair
        self.log = log
        self.search_queries = 0
        self.verify_queries = 0
        identity = Chromosome.identity(tuple(i.name for i in identifiers))
        self._memo: dict[Chromosome, float] = {identity: 0.0}

    def evaluate(self, chromosome: Chromosome) -> "tuple[float, SourceUnit | None]":
        """Returns (fitness, flipped_variant); the variant is set only on a
        verified label flip. Memo hits and broken chromosomes cost nothing."""
        if chromosome.is_identity:
            return 0.0, None
        cached = self._memo.get(chromosome)
        if cached is not None:
            return cached, None
        try:
            variant = rename(self.src, chromosome, self.identifiers)
        except (CollisionError, InvalidName, RenameIntegrityError):
            self._memo[chromosome] = NEG_INF
            return NEG_INF, None
        pred = self.gw.classify(variant, self.pair)
        self.search_queries += 1
        confidence = pred.confidences[self.y]
        if pred.label != self.y:
            verify = self.gw.classify(variant, self.pair)
            self.verify_queries += 1
            if verify.label != self.y:
                fitness = self.baseline - confidence
                self._memo[chromosome] = fitness
                return fitness, variant
            confidence = verify.confidences[self.y]
        fitness = self.baseline - confidence
        self._memo[chromosome] = fitness
        self.log.note(variant, chromosome, confidence)
        return fitness, None


def _selection_key(memo: dict[Chromosome, float]):
    # Ties break toward fewer changed genes, then canonical gene order;
    # chromosomes never evaluated (budget ran out) sink to the bottom.
    def key(chromosome: Chromosome):
        return (-memo.get(chromosome, NEG_INF), chromosome.changed_count,
                chromosome.sort_key())
    return key


@dataclass
class GAStats:
    generations: int = 0
    best_fitness_per_generation: list[float] = field(default_factory=list)
    population_sizes: list[int] = field(default_factory=list)


@dataclass
class GAResult:
    success: bool
    adversarial: "SourceUnit | None"
    chromosome: "Chromosome | None"
    stats: GAStats
    search_queries: int = 0
    verify_queries: int = 0
    budget_exhausted: bool = False


def ga_attack(src: SourceUnit, y: int, subs: SubstituteSet,
              greedy_best: dict[str, str], cfg: AttackConfig, gw: Gateway,
              identifiers: "tuple[Identifier, ...]",
              baseline: float,
              rng: random.Random,
              pair: "SourceUnit | None" = None,
              log: "ExplorationLog | None" = None) -> GAResult:
    """Run the genetic stage to the generation cap or the first verified flip."""
    if log is None:
        log = ExplorationLog()
    names = tuple(i.name for i in identifiers)
    stats = GAStats()
    result = GAResult(False, None, None, stats)
    if not any(subs.candidates(name) for name in names):
        return result  # nothing can change; no queries spent

    evaluator = FitnessEvaluator(src, identifiers, y, baseline, gw, pair, log)

    def finish(best: "Chromosome | None") -> GAResult:
        result.chromosome = best
        result.search_queries = evaluator.search_queries
        result.verify_queries = evaluator.verify_queries
        return result

    def succeed(chromosome: Chromosome, variant: SourceUnit) -> GAResult:
        result.success = True
        result.adversarial = variant
        return finish(chromosome)

    key = _selection_key(evaluator._memo)
    population = init_population(names, greedy_best)
    try:
        for chromosome in population:
            fitness, flipped = evaluator.evaluate(chromosome)
            if flipped is not None:
                return succeed(chromosome, flipped)
    except BudgetExhausted:
        result.budget_exhausted = True
        return finish(sorted(population, key=key)[0])

    population.sort(key=key)
    stats.best_fitness_per_generation.append(evaluator._memo[population[0]])

    max_iter = cfg.max_iterations(len(names))
    size = len(population)
    for _generation in range(max_iter):
        queries_before = evaluator.search_queries
        children: list[Chromosome] = []
        try:
            while len(children) < cfg.child_size:
                if len(names) >= 2 and rng.random() < cfg.crossover_rate:
                    p1 = population[rng.randrange(size)]
                    p2 = population[rng.randrange(size)]
                    h = rng.randint(1, len(names) - 1)
                    child = crossover(p1, p2, h)
                else:
                    parent = population[rng.randrange(size)]
                    child = mutate(parent, subs, rng)
                children.append(child)
                fitness, flipped = evaluator.evaluate(child)
                if flipped is not None:
                    return succeed(child, flipped)
        except BudgetExhausted:
            result.budget_exhausted = True
            pool = population + children
            pool.sort(key=key)
            return finish(pool[0])
        assert evaluator.search_queries - queries_before <= cfg.child_size

        pool = population + children
        pool.sort(key=key)
        population = pool[:size]
        stats.generations += 1
        stats.population_sizes.append(len(population))
        stats.best_fitness_per_generation.append(evaluator._memo[population[0]])

    return finish(population[0])
