"""Substitute-set construction: per-occurrence candidates, union, filter.

Candidates are requested from the backend once per variable occurrence and
unioned; when the same name arrives from several occurrences it keeps its
best similarity. The filter then drops duplicates, the variable's own name,
and anything that is not a valid fresh identifier for the snippet, and
truncates to the configured size. An empty result for a variable is not an
error; that variable is simply unperturbable.
"""

from __future__ import annotations

from .core import AttackConfig, Identifier, SourceUnit, SubstituteCandidate, SubstituteSet
from .gateway import Gateway
from .lang import is_valid_substitute


def generate_substitutes(src: SourceUnit, variables: list[Identifier],
                         cfg: AttackConfig, gw: Gateway,
                         cache: "dict[str, list[SubstituteCandidate]] | None" = None,
                         ) -> SubstituteSet:
    """Build the per-variable candidate lists for one snippet.

    `cache` replays previously recorded backend output (wire-response shape,
    keyed by variable name) without any substitute queries.
    """
    by_variable: dict[str, tuple[SubstituteCandidate, ...]] = {}
    for var in variables:
        best: dict[str, float] = {}
        if cache is not None:
            raw_lists = [cache.get(var.name, [])]
        else:
            raw_lists = []
            for occ in var.occurrences:
                raw = gw.mlm_substitutes(
                    src, [Identifier(var.name, (occ,))], cfg.top_j, cfg.top_k)
                raw_lists.append(raw.get(var.name, []))
        for candidates in raw_lists:
            for cand in candidates:
                have = best.get(cand.name)
                if have is None or cand.similarity > have:
                    best[cand.name] = cand.similarity
        filtered = [
            SubstituteCandidate(name, similarity)
            for name, similarity in best.items()
            if name != var.name and is_valid_substitute(name, src)
        ]
        filtered.sort(key=lambda c: (-c.similarity, c.name))
        by_variable[var.name] = tuple(filtered[:cfg.top_k])
    return SubstituteSet(by_variable)
