"""Language layer: parsing, local-variable extraction, and span-safe renaming.

Extraction returns only variables that are declared and given a value inside
the snippet, excluding formal parameters (unless configured in), names that
collide with field names, and anything the per-language analyzers cannot
rename safely. Every rename is re-checked for parse equivalence: the output's
structure, with identifier text erased, must equal the input's.
"""

from __future__ import annotations

from functools import lru_cache

from ..core import AttackConfig, Chromosome, Identifier, Language, OccurrenceSpan, SourceUnit
from ..errors import (
    CollisionError,
    InvalidName,
    ParseError,
    RenameIntegrityError,
    SpanError,
    UnsupportedLanguage,
)
from . import c as _c
from . import java as _java
from . import pysrc as _py
from .cfamily import analyze as _analyze_cfamily


@lru_cache(maxsize=256)
def parse_source(src: SourceUnit):
    """Parse a snippet, returning its analysis handle; raises ParseError."""
    if not src.text:
        raise ParseError("empty source unit")
    if src.language is Language.C:
        return _analyze_cfamily(src.blob, _c.RULES)
    if src.language is Language.JAVA:
        return _analyze_cfamily(src.blob, _java.RULES)
    if src.language is Language.PYTHON:
        return _py.analyze(src.blob)
    raise UnsupportedLanguage(str(src.language))


def extract_variables(src: SourceUnit, cfg: "AttackConfig | None" = None) -> list[Identifier]:
    """Renameable local variables in canonical order (first occurrence, then name)."""
    include_parameters = bool(cfg.include_parameters) if cfg is not None else False
    return list(parse_source(src).identifiers(include_parameters))


def occurring_identifiers(src: SourceUnit) -> frozenset[str]:
    return parse_source(src).occurring_names


def lexically_valid(name: str, language: Language) -> bool:
    """True when `name` matches the identifier rule and is not reserved."""
    if language is Language.PYTHON:
        return _py.valid_identifier(name)
    rules = _c.RULES if language is Language.C else _java.RULES
    if not rules.ident_re.fullmatch(name):
        return False
    return name not in rules.reserved_substitutes


def is_valid_substitute(name: str, src: SourceUnit,
                        language: "Language | None" = None) -> bool:
    lang = language if language is not None else src.language
    if not lexically_valid(name, lang):
        return False
    return name not in occurring_identifiers(src)


def fingerprint(src: SourceUnit):
    """Structure of the snippet with identifier token text erased."""
    return parse_source(src).fingerprint


def parse_equivalent(a: SourceUnit, b: SourceUnit) -> bool:
    return a.language is b.language and fingerprint(a) == fingerprint(b)


def _splice(blob: bytes, replacements: list[tuple[int, int, bytes]]) -> bytes:
    parts = []
    pos = 0
    for start, end, rep in sorted(replacements):
        if start < pos:
            raise SpanError(f"overlapping spans at byte {start}")
        if end > len(blob):
            raise SpanError(f"span [{start}, {end}) beyond end of text")
        parts.append(blob[pos:start])
        parts.append(rep)
        pos = end
    parts.append(blob[pos:])
    return b"".join(parts)


def rename(src: SourceUnit, chromosome: Chromosome,
           identifiers: "tuple[Identifier, ...] | list[Identifier] | None" = None) -> SourceUnit:
    """Apply a full variable mapping; the result is parse-equivalent or it raises.

    Raises InvalidName / CollisionError for bad substitutes, and
    RenameIntegrityError if the spliced output fails the structural check
    (which would indicate an extraction bug, not caller error).
    """
    analysis = parse_source(src)
    if identifiers is None:
        identifiers = analysis.identifiers(False)
    if tuple(chromosome.variables) != tuple(i.name for i in identifiers):
        raise ValueError("chromosome genes do not match the extracted variable order")

    changed = chromosome.changes()
    if not changed:
        return src

    occurring = analysis.occurring_names
    seen: set[str] = set()
    for variable, substitute in changed.items():
        if not lexically_valid(substitute, src.language):
            raise InvalidName(f"{substitute!r} is not a legal {src.language.value} identifier")
        if substitute in occurring:
            raise CollisionError(f"{substitute!r} already occurs in the snippet")
        if substitute in seen:
            raise CollisionError(f"{substitute!r} used for more than one variable")
        seen.add(substitute)

    replacements = []
    for ident in identifiers:
        substitute = changed.get(ident.name)
        if substitute is None:
            continue
        encoded = substitute.encode("utf-8")
        for occ in ident.occurrences:
            replacements.append((occ.byte_start, occ.byte_end, encoded))
    out = src.with_text(_splice(src.blob, replacements).decode("utf-8"))

    try:
        out_fp = parse_source(out).fingerprint
    except ParseError as exc:
        raise RenameIntegrityError(f"renamed variant no longer parses: {exc}") from exc
    if out_fp != analysis.fingerprint:
        raise RenameIntegrityError("renamed variant is not parse-equivalent to the input")
    return out


_IDENT_CONT = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_$")


def mask_occurrence(src: SourceUnit, occ: OccurrenceSpan, mask_token: str) -> SourceUnit:
    """Replace one identifier occurrence with the mask token, bytes untouched elsewhere.

    The output is a model probe; it is not required to parse.
    """
    blob = src.blob
    if occ.byte_end > len(blob):
        raise SpanError(f"span [{occ.byte_start}, {occ.byte_end}) beyond end of text")
    sliced = blob[occ.byte_start:occ.byte_end]
    try:
        name = sliced.decode("utf-8")
    except UnicodeDecodeError:
        raise SpanError("span does not slice valid UTF-8") from None
    if not lexically_valid(name, src.language):
        raise SpanError(f"span slices {name!r}, which is not an identifier")
    if occ.byte_start > 0 and blob[occ.byte_start - 1] in _IDENT_CONT:
        raise SpanError("span starts inside an identifier")
    if occ.byte_end < len(blob) and blob[occ.byte_end] in _IDENT_CONT:
        raise SpanError("span ends inside an identifier")
    new_blob = blob[:occ.byte_start] + mask_token.encode("utf-8") + blob[occ.byte_end:]
    return src.with_text(new_blob.decode("utf-8"))
