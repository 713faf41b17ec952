"""Inference engine: victim classification and substitute generation.

Substitute generation works per occurrence: the occurrence's byte span is
mapped to sub-token positions through the tokenizer's offset mapping, those
positions are masked and the masked-language head proposes top-j sub-tokens
per position. Whole-name candidates are formed rank-aligned (the rank-q
candidate takes the rank-q prediction at every masked position), then scored
by cosine similarity between the concatenated contextual embeddings of the
candidate sub-tokens and of the original sub-tokens, ranked descending, and
truncated to top_k. Occurrences that fall beyond the model's input truncation
are dropped and reported in the response's warnings list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)


class BadRequest(ValueError):
    """Client-side problem with a request body (HTTP 400)."""


@dataclass
class SubstituteResult:
    substitutes: dict[str, list[tuple[str, float]]]
    warnings: list[str] = field(default_factory=list)


class InferenceEngine:
    """One checkpoint loaded twice: victim head and masked-language head."""

    def __init__(self, checkpoint: str, task: str = "classification",
                 device: str = "cpu", max_length: int = 512):
        torch.manual_seed(0)  # heads missing from the checkpoint init reproducibly
        self.checkpoint = checkpoint
        self.task = task
        self.device = torch.device(device)
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint, use_fast=True)
        self.victim = AutoModelForSequenceClassification.from_pretrained(
            checkpoint).to(self.device).eval()
        self.mlm = AutoModelForMaskedLM.from_pretrained(
            checkpoint).to(self.device).eval()
        self.encoder = self.mlm.base_model
        positions = int(getattr(self.victim.config, "max_position_embeddings", max_length))
        self.max_length = max(8, min(max_length, positions - 2))
        self.model_name = f"{checkpoint.rstrip('/').rsplit('/', 1)[-1]}:{task}"

    # -- classification ------------------------------------------------------

    def classify(self, code: str, code_pair: "str | None") -> tuple[int, list[float]]:
        if not isinstance(code, str) or not code:
            raise BadRequest("'code' must be a non-empty string")
        with torch.no_grad():
            encoded = self.tokenizer(
                code, code_pair, truncation=True, max_length=self.max_length,
                return_tensors="pt").to(self.device)
            logits = self.victim(**encoded).logits[0]
            confidences = torch.softmax(logits, dim=-1)
        label = int(torch.argmax(confidences).item())
        return label, [float(c) for c in confidences.tolist()]

    # -- substitutes -----------------------------------------------------------

    def substitutes(self, code: str, top_j: int, top_k: int,
                    variables: list[dict]) -> SubstituteResult:
        if not isinstance(code, str) or not code:
            raise BadRequest("'code' must be a non-empty string")
        if top_j < 0 or top_k < 0:
            raise BadRequest("top_j and top_k must be non-negative")
        blob = code.encode("utf-8")

        encoded = self.tokenizer(
            code, truncation=True, max_length=self.max_length,
            return_offsets_mapping=True, return_tensors="pt")
        input_ids = encoded["input_ids"][0]
        offsets = encoded["offset_mapping"][0].tolist()
        special = set(self.tokenizer.all_special_ids)
        mask_id = self.tokenizer.mask_token_id
        if mask_id is None:
            raise BadRequest("tokenizer has no mask token")

        with torch.no_grad():
            base_hidden = self.encoder(
                input_ids.unsqueeze(0).to(self.device)).last_hidden_state[0]

        result = SubstituteResult(substitutes={})
        for var in variables:
            name = var["name"]
            best: dict[str, float] = {}
            for occ in var["occurrences"]:
                positions = self._occurrence_positions(
                    blob, code, offsets, input_ids, special, occ)
                if positions is None:
                    result.warnings.append(
                        f"occurrence of {name!r} at bytes "
                        f"[{occ['byte_start']}, {occ['byte_end']}) lies beyond "
                        f"the truncated input; dropped")
                    continue
                for cand, score in self._candidates_for(
                        input_ids, base_hidden, positions, mask_id, special, top_j):
                    if cand not in best or score > best[cand]:
                        best[cand] = score
            ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
            result.substitutes[name] = ranked[:top_k]
        return result

    def _occurrence_positions(self, blob: bytes, code: str, offsets, input_ids,
                              special: set, occ: dict) -> "list[int] | None":
        byte_start, byte_end = occ["byte_start"], occ["byte_end"]
        if not (0 <= byte_start < byte_end <= len(blob)):
            raise BadRequest(f"span [{byte_start}, {byte_end}) out of range")
        try:
            char_start = len(blob[:byte_start].decode("utf-8"))
            char_end = len(blob[:byte_end].decode("utf-8"))
        except UnicodeDecodeError:
            raise BadRequest(
                f"span [{byte_start}, {byte_end}) does not fall on "
                f"character boundaries") from None
        positions = []
        for idx, (start, end) in enumerate(offsets):
            if int(input_ids[idx]) in special or start == end:
                continue
            if start < char_end and end > char_start:
                positions.append(idx)
        return positions or None

    def _candidates_for(self, input_ids, base_hidden, positions: list[int],
                        mask_id: int, special: set, top_j: int):
        if top_j == 0:
            return []
        masked = input_ids.clone()
        for pos in positions:
            masked[pos] = mask_id
        with torch.no_grad():
            logits = self.mlm(masked.unsqueeze(0).to(self.device)).logits[0]
            width = min(top_j, logits.shape[-1])
            top_ids = torch.topk(logits[positions], width, dim=-1).indices  # [P, width]

            # rank-aligned whole-name candidates: one batched encoder pass
            batch = input_ids.unsqueeze(0).repeat(width, 1).clone()
            for col, pos in enumerate(positions):
                batch[:, pos] = top_ids[col]
            hidden = self.encoder(batch.to(self.device)).last_hidden_state

        original = base_hidden[positions].reshape(-1)
        out = []
        seen: set[str] = set()
        for rank in range(width):
            ids = [int(top_ids[col][rank]) for col in range(len(positions))]
            if any(i in special for i in ids):
                continue
            name = self.tokenizer.decode(ids).strip()
            if not name or name in seen:
                continue
            seen.add(name)
            candidate = hidden[rank, positions, :].reshape(-1)
            score = torch.nn.functional.cosine_similarity(
                original, candidate, dim=0).item()
            out.append((name, max(-1.0, min(1.0, float(score)))))
        return out
