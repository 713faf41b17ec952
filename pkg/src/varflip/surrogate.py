"""Deterministic in-process victim and substitute backend.

The classifier assigns every identifier-ish token a fixed hash-derived weight
so that renaming a single variable measurably moves the score; that makes
attack successes constructible and independently checkable at desk scale. It
makes no claim of resembling a real model.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from .core import Prediction, SourceUnit
from .errors import MissingVocabulary

_TOKEN_RE = re.compile(rb"[A-Za-z0-9_]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def token_weight(token: str) -> float:
    """Fixed per-token weight in [-1, 1]."""
    return ((fnv1a64(token.encode("utf-8")) % 2001) - 1000) / 1000.0


def raw_score(text: str) -> float:
    """Sum of token weights; tokens are maximal identifier-character runs."""
    return sum(token_weight(m.group().decode("utf-8"))
               for m in _TOKEN_RE.finditer(text.encode("utf-8")))


def classify_text(code: str, code_pair: "str | None" = None) -> tuple[int, tuple[float, float]]:
    s = raw_score(code)
    if code_pair is not None:
        s += raw_score(code_pair)
    m = max(s, -s)
    e_pos = math.exp(s - m)
    e_neg = math.exp(-s - m)
    total = e_pos + e_neg
    confidences = (e_pos / total, e_neg / total)
    label = 0 if confidences[0] >= confidences[1] else 1
    return label, confidences


def char_bigrams(word: str) -> frozenset[str]:
    return frozenset(word[i:i + 2] for i in range(len(word) - 1))


def dice_similarity(a: str, b: str) -> float:
    """Dice coefficient over character bigram sets; 0 when both are empty."""
    ba, bb = char_bigrams(a), char_bigrams(b)
    denom = len(ba) + len(bb)
    if denom == 0:
        return 0.0
    return 2.0 * len(ba & bb) / denom


DEFAULT_VOCABULARY = Path(__file__).parent / "data" / "surrogate_vocab.txt"


def load_vocabulary(path: "str | Path") -> tuple[str, ...]:
    """One identifier per line, UTF-8, LF-terminated; order-preserving dedupe."""
    text = Path(path).read_text(encoding="utf-8")
    seen: dict[str, None] = {}
    for line in text.split("\n"):
        word = line.strip()
        if word:
            seen.setdefault(word, None)
    return tuple(seen)


class SurrogateBackend:
    """In-process backend with the same surface as the wire gateway's backends."""

    model_name = "surrogate"

    def __init__(self, vocabulary: "tuple[str, ...] | list[str] | str | Path | None" = None):
        if vocabulary is None:
            vocabulary = DEFAULT_VOCABULARY
        if isinstance(vocabulary, (str, Path)):
            vocabulary = load_vocabulary(vocabulary)
        self._vocabulary = tuple(dict.fromkeys(vocabulary))

    def classify(self, code: str, code_pair: "str | None") -> tuple[int, list[float]]:
        label, confidences = classify_text(code, code_pair)
        return label, list(confidences)

    def substitutes(self, code: str, top_j: int, top_k: int,
                    variables: list[dict]) -> dict[str, list[tuple[str, float]]]:
        if self._vocabulary is None:
            raise MissingVocabulary("surrogate backend has no vocabulary")
        out: dict[str, list[tuple[str, float]]] = {}
        for var in variables:
            name = var["name"]
            ranked = sorted(self._vocabulary,
                            key=lambda w: (-dice_similarity(name, w), w))
            out[name] = [(w, dice_similarity(name, w)) for w in ranked[:top_j][:top_k]]
        return out

    def health(self) -> tuple[str, str]:
        return "ok", self.model_name


def surrogate_classify(src: SourceUnit, pair: "SourceUnit | None" = None) -> Prediction:
    """Classify through the surrogate directly (test oracle convenience)."""
    label, confidences = classify_text(src.text, pair.text if pair else None)
    return Prediction.build(label, confidences)
