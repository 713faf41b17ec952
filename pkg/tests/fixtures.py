"""Seeded attack fixtures with an exhaustive ground-truth oracle.

Fixtures are small C snippets (at most three variables, at most five
candidates each) classified by the surrogate; the oracle enumerates every
rename combination through the real rename machinery and the surrogate
formula directly, completely independent of the search code it judges.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from backends import counting_surrogate
from varflip.core import AttackConfig, Chromosome, Identifier, Language, SourceUnit
from varflip.errors import CollisionError, InvalidName, RenameIntegrityError
from varflip.gateway import Gateway
from varflip.lang import extract_variables
from varflip.subgen import generate_substitutes
from varflip.surrogate import surrogate_classify

FIXTURE_VOCABULARY = (
    "acc", "accumulator", "amount", "answer", "base", "batch", "bucket",
    "carry", "cell", "chunk", "cursor", "delta", "depth", "digit", "edge",
    "entry", "factor", "frame", "gap", "grade", "hold", "item", "jump",
    "karma", "level", "margin", "node", "notch", "order", "pace", "phase",
    "pivot", "quota", "rate", "ridge", "slot", "spare", "stack", "stride",
    "tempo", "tier", "trace", "unit", "vault", "wedge", "yield_", "zone",
)

_VAR_POOL = ("count", "total", "index", "value", "score", "width", "accum",
             "limit", "shift", "grain", "probe", "ratio")

_FILLERS = ("alpha", "omega", "gamma", "sigma", "kappa", "theta")


@dataclass
class AttackFixture:
    src: SourceUnit
    label: int
    cfg: AttackConfig
    identifiers: tuple[Identifier, ...]
    subs: object  # SubstituteSet

    def gateway(self, budget: "int | None" = None):
        backend = counting_surrogate(FIXTURE_VOCABULARY)
        return Gateway(backend, budget=budget), backend


def make_fixture(seed: int, top_k: int = 5) -> AttackFixture:
    """One seeded snippet with 1..3 variables and candidate sets of <= top_k."""
    rng = random.Random(f"fixture-{seed}")
    var_count = rng.randrange(1, 4)
    names = rng.sample(_VAR_POOL, var_count)
    filler = rng.sample(_FILLERS, 2)
    lines = [f"int probe{seed}(int {filler[0]}) {{"]
    lines.append(f"    int {names[0]} = {filler[0]} + {rng.randrange(1, 7)};")
    for extra in names[1:]:
        lhs = rng.choice(names[:names.index(extra)])
        lines.append(f"    int {extra} = {lhs} * {rng.randrange(2, 5)};")
    for name in names:
        if rng.random() < 0.6:
            lines.append(f"    {name} += {rng.randrange(1, 4)};")
    body_filler = f"    /* {filler[1]} */"
    lines.append(body_filler)
    lines.append(f"    return {' + '.join(names)};")
    lines.append("}")
    code = "\n".join(lines) + "\n"

    src = SourceUnit(Language.C, code, f"fixture-{seed}")
    label = surrogate_classify(src).label
    cfg = AttackConfig(top_k=top_k, rng_seed=seed)
    identifiers = tuple(extract_variables(src, cfg))
    gw, _ = AttackFixture(src, label, cfg, identifiers, None).gateway()
    subs = generate_substitutes(src, list(identifiers), cfg, gw)
    return AttackFixture(src, label, cfg, identifiers, subs)


def oracle_flips(fx: AttackFixture) -> list[Chromosome]:
    """Every rename combination that flips the surrogate's label.

    Enumerates the full cartesian space (candidates plus identity per
    variable), applying the same validity rules renaming enforces; the
    classification itself goes straight through the surrogate formula.
    """
    pools = []
    for ident in fx.identifiers:
        pool = [ident.name] + [c.name for c in fx.subs.candidates(ident.name)]
        pools.append(pool)
    flips = []
    names = tuple(i.name for i in fx.identifiers)
    for combo in itertools.product(*pools):
        chromosome = Chromosome.from_pairs(list(zip(names, combo)))
        if chromosome.is_identity:
            continue
        try:
            from varflip.lang import rename
            variant = rename(fx.src, chromosome, fx.identifiers)
        except (CollisionError, InvalidName, RenameIntegrityError):
            continue
        if surrogate_classify(variant).label != fx.label:
            flips.append(chromosome)
    return flips
