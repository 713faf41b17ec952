"""Campaign orchestration: dataset ingestion, per-item pipeline, metrics, export.

Per record the pipeline is: parse and extract variables (skip on parse errors
or when nothing is extractable), classify once (skip when the victim is
already wrong), generate substitutes, rank variables by overall importance,
run the greedy stage, and fall back to the genetic stage when greedy fails.
Backend failures mark the item a Failure without aborting the campaign.

Attack success rate counts succeeded over attacked (non-skipped) records.
Variable change rate is computed over succeeded records only: renamed-variable
counts summed over their extractable-variable counts, with 0/0 defined as 0.
Query totals count classify calls only; the mean is taken over attacked
records. Output files are written in dataset order regardless of worker
scheduling, and an identical campaign (dataset, seed, backend recording)
produces byte-identical outcome files.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    AttackConfig,
    AttackOutcome,
    Language,
    QueryBreakdown,
    SourceUnit,
    Stage,
    SubstituteCandidate,
    Verdict,
    seeded_rng,
)
from .errors import DatasetError, GatewayError, ParseError, UnsupportedLanguage
from .ga import ga_attack
from .gateway import Backend, Gateway
from .greedy import ExplorationLog, greedy_attack, rank_variables
from .lang import extract_variables
from .subgen import generate_substitutes


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    language: Language
    code: str
    label: int
    code_pair: "str | None" = None


def load_dataset(path: "str | Path") -> list[DatasetRecord]:
    """Read a JSONL dataset; fails fast on any schema problem."""
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise DatasetError(f"{path}:{lineno}: record is not an object")
        for key in ("id", "language", "code", "label"):
            if key not in obj:
                raise DatasetError(f"{path}:{lineno}: missing field {key!r}")
        rid = obj["id"]
        if not isinstance(rid, str) or not rid:
            raise DatasetError(f"{path}:{lineno}: id must be a non-empty string")
        if rid in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate id {rid!r}")
        seen.add(rid)
        try:
            language = Language.from_tag(str(obj["language"]))
        except UnsupportedLanguage as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        code = obj["code"]
        if not isinstance(code, str) or not code:
            raise DatasetError(f"{path}:{lineno}: code must be a non-empty string")
        label = obj["label"]
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise DatasetError(f"{path}:{lineno}: label must be a non-negative int")
        code_pair = obj.get("code_pair")
        if code_pair is not None and not isinstance(code_pair, str):
            raise DatasetError(f"{path}:{lineno}: code_pair must be a string or null")
        records.append(DatasetRecord(rid, language, code, label, code_pair))
    if not records:
        raise DatasetError(f"{path}: dataset is empty")
    return records


def _skip(reason: str, queries: int, variable_count: int = 0) -> AttackOutcome:
    return AttackOutcome(
        verdict=Verdict.SKIPPED, stage=Stage.NONE, adversarial=None, chromosome=None,
        classify_queries=queries, mlm_queries=0,
        breakdown=QueryBreakdown(rank=queries), variable_count=variable_count,
        skip_reason=reason)


def attack_item(record: DatasetRecord, cfg: AttackConfig, backend: Backend,
                substitutes_cache: "dict[str, list[SubstituteCandidate]] | None" = None,
                ) -> AttackOutcome:
    """Attack one record with a fresh gateway/ledger and a per-item seed."""
    gw = Gateway(backend, budget=cfg.query_budget)
    src = SourceUnit(record.language, record.code, record.id)
    pair = None
    if record.code_pair is not None:
        # only the first snippet of a pair is ever perturbed
        pair = SourceUnit(record.language, record.code_pair, record.id + "#pair")

    try:
        identifiers = tuple(extract_variables(src, cfg))
    except (ParseError, UnsupportedLanguage) as exc:
        return _skip(f"parse error: {exc}", queries=0)
    if not identifiers:
        return _skip("no extractable variables", queries=0)

    log = ExplorationLog()
    try:
        base = gw.classify(src, pair)
        if base.label != record.label:
            return _skip("victim misclassifies the original", queries=1,
                         variable_count=len(identifiers))

        subs = generate_substitutes(src, list(identifiers), cfg, gw,
                                    cache=substitutes_cache)
        ranking = rank_variables(src, list(identifiers), record.label, gw,
                                 base=base, mask_token=cfg.mask_token, pair=pair)
        rank_queries = gw.ledger.classify_count

        greedy = greedy_attack(src, record.label, subs, ranking, cfg, gw,
                               identifiers=identifiers, base=base, pair=pair, log=log)
        occurrences = sum(len(v.occurrences) for v in identifiers)
        assert rank_queries + greedy.search_queries <= \
            1 + occurrences + len(identifiers) * cfg.top_k
        if greedy.success:
            breakdown = QueryBreakdown(rank=rank_queries, greedy=greedy.search_queries,
                                       ga=0, verify=greedy.verify_queries)
            assert gw.ledger.classify_count == breakdown.total
            return AttackOutcome(
                verdict=Verdict.SUCCESS, stage=Stage.GREEDY,
                adversarial=greedy.adversarial, chromosome=greedy.chromosome,
                classify_queries=breakdown.total, mlm_queries=gw.ledger.mlm_count,
                breakdown=breakdown, variable_count=len(identifiers),
                best_variant=log.best_variant,
                best_variant_confidence=log.best_confidence)

        ga = None
        if not greedy.budget_exhausted:
            rng = seeded_rng(cfg.rng_seed, record.id)
            ga = ga_attack(src, record.label, subs, greedy.greedy_best, cfg, gw,
                           identifiers=identifiers, baseline=base.confidences[record.label],
                           rng=rng, pair=pair, log=log)

        breakdown = QueryBreakdown(
            rank=rank_queries, greedy=greedy.search_queries,
            ga=ga.search_queries if ga else 0,
            verify=greedy.verify_queries + (ga.verify_queries if ga else 0))
        assert gw.ledger.classify_count == breakdown.total
        if ga is not None and ga.success:
            return AttackOutcome(
                verdict=Verdict.SUCCESS, stage=Stage.GA,
                adversarial=ga.adversarial, chromosome=ga.chromosome,
                classify_queries=breakdown.total, mlm_queries=gw.ledger.mlm_count,
                breakdown=breakdown, variable_count=len(identifiers),
                best_variant=log.best_variant,
                best_variant_confidence=log.best_confidence)
        return AttackOutcome(
            verdict=Verdict.FAILURE,
            stage=Stage.GA if ga is not None else Stage.GREEDY,
            adversarial=None,
            chromosome=ga.chromosome if ga is not None else greedy.working,
            classify_queries=breakdown.total, mlm_queries=gw.ledger.mlm_count,
            breakdown=breakdown, variable_count=len(identifiers),
            best_variant=log.best_variant,
            best_variant_confidence=log.best_confidence)
    except GatewayError as exc:
        return AttackOutcome(
            verdict=Verdict.FAILURE, stage=Stage.NONE, adversarial=None,
            chromosome=None, classify_queries=gw.ledger.classify_count,
            mlm_queries=gw.ledger.mlm_count, variable_count=len(identifiers),
            best_variant=log.best_variant, best_variant_confidence=log.best_confidence,
            error=f"{type(exc).__name__}: {exc}")


def outcome_row(record: DatasetRecord, outcome: AttackOutcome) -> dict:
    """The JSONL line written for one record."""
    return {
        "id": record.id,
        "verdict": outcome.verdict.value,
        "stage": outcome.stage.value,
        "adversarial_code": outcome.adversarial.text if outcome.adversarial else None,
        "changes": [{"from": f, "to": t} for f, t in sorted(outcome.changes().items())],
        "classify_queries": outcome.classify_queries,
        "mlm_queries": outcome.mlm_queries,
        "variable_count": outcome.variable_count,
    }


@dataclass
class MetricsReport:
    asr: float
    vcr: float
    noq_total: int
    noq_mean: float
    counts: dict[str, int]
    per_item: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "asr": self.asr,
            "vcr": self.vcr,
            "noq_total": self.noq_total,
            "noq_mean": self.noq_mean,
            "counts": dict(self.counts),
            "per_item": list(self.per_item),
        }


def compute_metrics(rows: list[dict]) -> MetricsReport:
    """Pure recomputation of the campaign metrics from outcome rows."""
    skipped = sum(1 for r in rows if r["verdict"] == Verdict.SKIPPED.value)
    succeeded = sum(1 for r in rows if r["verdict"] == Verdict.SUCCESS.value)
    attacked = len(rows) - skipped

    changed_total = 0
    variable_total = 0
    per_item = []
    for row in rows:
        if row["verdict"] == Verdict.SKIPPED.value:
            continue
        renamed = len(row["changes"]) if row["verdict"] == Verdict.SUCCESS.value else 0
        per_item.append({"id": row["id"], "variables": row["variable_count"],
                         "renamed": renamed})
        if row["verdict"] == Verdict.SUCCESS.value:
            changed_total += renamed
            variable_total += row["variable_count"]

    asr = succeeded / attacked if attacked else 0.0
    vcr = changed_total / variable_total if variable_total else 0.0
    noq_total = sum(r["classify_queries"] for r in rows)
    attacked_queries = sum(r["classify_queries"] for r in rows
                           if r["verdict"] != Verdict.SKIPPED.value)
    noq_mean = attacked_queries / attacked if attacked else 0.0
    return MetricsReport(
        asr=asr, vcr=vcr, noq_total=noq_total, noq_mean=noq_mean,
        counts={"records": len(rows), "attacked": attacked,
                "succeeded": succeeded, "skipped": skipped},
        per_item=per_item)


def run_campaign(records: list[DatasetRecord], cfg: AttackConfig, backend: Backend,
                 out_dir: "str | Path",
                 export_path: "str | Path | None" = None,
                 substitutes_cache: "dict | None" = None,
                 workers: int = 1) -> MetricsReport:
    """Attack every record, writing outcomes.jsonl and report.json under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(record: DatasetRecord) -> AttackOutcome:
        return attack_item(record, cfg, backend, substitutes_cache=substitutes_cache)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, records))
    else:
        outcomes = [run_one(record) for record in records]

    rows = [outcome_row(record, outcome) for record, outcome in zip(records, outcomes)]
    with open(out_dir / "outcomes.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    report = compute_metrics(rows)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")

    if export_path is not None:
        export_adv_training_set(records, outcomes, export_path)
    return report


def export_adv_training_set(records: list[DatasetRecord],
                            outcomes: list[AttackOutcome],
                            path: "str | Path") -> int:
    """Write at most one adversarial example per input, dataset schema, labels kept.

    Skipped records are omitted. Successes export the first-found flipping
    variant; failures export the explored variant with the lowest confidence
    on the true label, or nothing if no variant was ever evaluated.
    """
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record, outcome in zip(records, outcomes):
            if outcome.verdict is Verdict.SKIPPED:
                continue
            if outcome.verdict is Verdict.SUCCESS:
                code = outcome.adversarial.text
            elif outcome.best_variant is not None:
                code = outcome.best_variant.text
            else:
                continue
            row = {"id": record.id, "language": record.language.value,
                   "code": code, "label": record.label}
            if record.code_pair is not None:
                row["code_pair"] = record.code_pair
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            written += 1
    return written
