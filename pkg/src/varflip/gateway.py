"""Uniform client over victim classifiers and substitute providers.

A Gateway wraps one backend (remote wire protocol or in-process surrogate)
together with a per-item QueryLedger. Only classify calls count toward the
victim-query total; substitute generation is tallied separately because it
queries the pre-trained model, not the fine-tuned victim. The gateway never
caches: two identical classify calls cost two queries.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

import requests

from .core import Identifier, Prediction, SourceUnit, SubstituteCandidate
from .errors import BudgetExhausted, ProtocolError, TransportError


@dataclass
class QueryLedger:
    """Monotone query counters; classify_count never exceeds the budget."""

    classify_count: int = 0
    mlm_count: int = 0
    budget: "int | None" = None


class Backend:
    """Interface the gateway drives; responses mirror the wire schema.

    classify(code, code_pair) -> (label, confidences)
    substitutes(code, top_j, top_k, variables) -> {name: [(candidate, score), ...]}
    health() -> (status, model)
    """

    def classify(self, code: str, code_pair: "str | None") -> tuple[int, list[float]]:
        raise NotImplementedError

    def substitutes(self, code: str, top_j: int, top_k: int,
                    variables: list[dict]) -> dict[str, list[tuple[str, float]]]:
        raise NotImplementedError

    def health(self) -> tuple[str, str]:
        raise NotImplementedError


class HttpBackend(Backend):
    """Client for the HTTP/1.1 JSON protocol (single-item requests only)."""

    def __init__(self, base_url: str, timeout: float = 30.0,
                 session: "requests.Session | None" = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = self.base_url + path
        try:
            resp = self._session.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"POST {url}: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"POST {url}: HTTP {resp.status_code}")
        try:
            body = resp.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"POST {url}: body is not JSON") from exc
        if not isinstance(body, dict):
            raise ProtocolError(f"POST {url}: body is not a JSON object")
        return body

    def classify(self, code: str, code_pair: "str | None") -> tuple[int, list[float]]:
        body = self._post("/v1/classify", {"code": code, "code_pair": code_pair})
        if "label" not in body or "confidences" not in body:
            raise ProtocolError("classify response missing 'label'/'confidences'")
        label = body["label"]
        confidences = body["confidences"]
        if not isinstance(label, int) or isinstance(label, bool):
            raise ProtocolError(f"label is not an integer: {label!r}")
        if not isinstance(confidences, list) or \
                not all(isinstance(c, (int, float)) and not isinstance(c, bool)
                        for c in confidences):
            raise ProtocolError("confidences is not a list of numbers")
        return label, [float(c) for c in confidences]

    def substitutes(self, code: str, top_j: int, top_k: int,
                    variables: list[dict]) -> dict[str, list[tuple[str, float]]]:
        payload = {"code": code, "top_j": top_j, "top_k": top_k, "variables": variables}
        body = self._post("/v1/substitutes", payload)
        subs = body.get("substitutes")
        if not isinstance(subs, dict):
            raise ProtocolError("substitutes response missing 'substitutes' object")
        out: dict[str, list[tuple[str, float]]] = {}
        for name, entries in subs.items():
            if not isinstance(entries, list):
                raise ProtocolError(f"substitutes[{name!r}] is not a list")
            parsed = []
            for entry in entries:
                if not isinstance(entry, dict) or "name" not in entry or "score" not in entry:
                    raise ProtocolError(f"malformed substitute entry for {name!r}")
                cand, score = entry["name"], entry["score"]
                if not isinstance(cand, str) or \
                        not isinstance(score, (int, float)) or isinstance(score, bool):
                    raise ProtocolError(f"malformed substitute entry for {name!r}")
                parsed.append((cand, float(score)))
            out[name] = parsed
        return out

    def health(self) -> tuple[str, str]:
        url = self.base_url + "/v1/health"
        try:
            resp = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {url}: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"GET {url}: HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"GET {url}: body is not JSON") from exc
        if body.get("status") != "ok":
            raise ProtocolError(f"unhealthy backend: {body!r}")
        return "ok", str(body.get("model", ""))


class Gateway:
    """One backend plus one query ledger (typically one gateway per item).

    `retry_transport=True` allows a single idempotent retry after a
    TransportError; failed attempts never increment the ledger, so retries
    cannot distort query accounting.
    """

    def __init__(self, backend: Backend, budget: "int | None" = None,
                 retry_transport: bool = False):
        self.backend = backend
        self.ledger = QueryLedger(budget=budget)
        self.retry_transport = retry_transport
        self._lock = threading.Lock()
        self._class_count: "int | None" = None

    # -- victim queries ----------------------------------------------------

    def classify(self, src: SourceUnit, pair: "SourceUnit | None" = None) -> Prediction:
        with self._lock:
            if self.ledger.budget is not None and \
                    self.ledger.classify_count >= self.ledger.budget:
                raise BudgetExhausted(
                    f"classify budget of {self.ledger.budget} queries spent")
        code_pair = pair.text if pair is not None else None
        try:
            label, confidences = self.backend.classify(src.text, code_pair)
        except TransportError:
            if not self.retry_transport:
                raise
            label, confidences = self.backend.classify(src.text, code_pair)
        # the victim was queried, even if its answer turns out malformed
        with self._lock:
            self.ledger.classify_count += 1
        try:
            prediction = Prediction.build(label, confidences)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        with self._lock:
            if self._class_count is None:
                self._class_count = len(prediction.confidences)
            elif self._class_count != len(prediction.confidences):
                raise ProtocolError(
                    f"class count changed from {self._class_count} "
                    f"to {len(prediction.confidences)}")
        return prediction

    # -- substitute-provider queries ----------------------------------------

    def mlm_substitutes(self, src: SourceUnit, variables: list[Identifier],
                        top_j: int, top_k: int) -> dict[str, list[SubstituteCandidate]]:
        wire_vars = [
            {"name": v.name,
             "occurrences": [{"byte_start": o.byte_start, "byte_end": o.byte_end}
                             for o in v.occurrences]}
            for v in variables
        ]
        try:
            raw = self.backend.substitutes(src.text, top_j, top_k, wire_vars)
        except TransportError:
            if not self.retry_transport:
                raise
            raw = self.backend.substitutes(src.text, top_j, top_k, wire_vars)
        with self._lock:
            self.ledger.mlm_count += 1
        out: dict[str, list[SubstituteCandidate]] = {}
        for name, entries in raw.items():
            if len(entries) > top_k:
                raise ProtocolError(
                    f"{len(entries)} candidates for {name!r} exceed top_k={top_k}")
            previous = None
            parsed = []
            for cand, score in entries:
                if not (-1.0 <= score <= 1.0):
                    raise ProtocolError(f"similarity {score!r} outside [-1, 1]")
                if previous is not None and score > previous:
                    raise ProtocolError(f"candidates for {name!r} not in descending order")
                previous = score
                parsed.append(SubstituteCandidate(cand, score))
            out[name] = parsed
        return out

    def health(self) -> tuple[str, str]:
        return self.backend.health()
