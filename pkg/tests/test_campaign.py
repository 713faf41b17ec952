"""Campaign pipeline, metrics, export rules, CLI surface."""

import json
from pathlib import Path

import pytest

from backends import counting_surrogate
from fixtures import FIXTURE_VOCABULARY
from varflip.campaign import (
    DatasetRecord,
    attack_item,
    compute_metrics,
    load_dataset,
    run_campaign,
)
from varflip.cli import main, parse_config_file
from varflip.core import AttackConfig, Language, Verdict
from varflip.errors import ConfigError, DatasetError
from varflip.lang import extract_variables, parse_equivalent
from varflip.core import SourceUnit
from varflip.surrogate import SurrogateBackend, classify_text


def _record(idx: int, code: str, language="c", label=None, pair=None) -> dict:
    if label is None:
        label, _ = classify_text(code, pair)
    row = {"id": f"item-{idx}", "language": language, "code": code, "label": label}
    if pair is not None:
        row["code_pair"] = pair
    return row


def _write_dataset(path: Path, rows: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


SNIPPETS = [
    "int f0(int seed) {\n    int count = seed + 2;\n    int total = count * 3;\n    count += 1;\n    return count + total;\n}\n",
    "int f1(int seed) {\n    int index = seed + 1;\n    int value = index * 2;\n    return index + value;\n}\n",
    "int f2(void) {\n    return 7;\n}\n",  # no extractable variables
    "int f3(int seed) {\n    int width = seed + 5;\n    width += 2;\n    return width;\n}\n",
]


class TestLoadDataset:
    def test_round_trip(self, tmp_path):
        path = _write_dataset(tmp_path / "d.jsonl", [_record(i, s) for i, s in enumerate(SNIPPETS)])
        records = load_dataset(path)
        assert len(records) == 4
        assert records[0].language is Language.C

    @pytest.mark.parametrize("mutate", [
        lambda r: r.pop("id"),
        lambda r: r.update(language="ruby"),
        lambda r: r.update(label="one"),
        lambda r: r.update(code=""),
    ])
    def test_schema_errors_fail_fast(self, tmp_path, mutate):
        row = _record(0, SNIPPETS[0])
        mutate(row)
        path = _write_dataset(tmp_path / "d.jsonl", [row])
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        row = _record(0, SNIPPETS[0])
        path = _write_dataset(tmp_path / "d.jsonl", [row, row])
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("{not json}\n", encoding="utf-8")
        with pytest.raises(DatasetError):
            load_dataset(path)


class TestAttackItem:
    def test_skip_paths(self):
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        cfg = AttackConfig(rng_seed=3)

        no_vars = DatasetRecord("nv", Language.C, SNIPPETS[2], 0)
        outcome = attack_item(no_vars, cfg, backend)
        assert outcome.verdict is Verdict.SKIPPED
        assert outcome.classify_queries == 0

        label, _ = classify_text(SNIPPETS[0])
        mis = DatasetRecord("mis", Language.C, SNIPPETS[0], 1 - label)
        outcome = attack_item(mis, cfg, backend)
        assert outcome.verdict is Verdict.SKIPPED
        assert outcome.classify_queries == 1

        bad = DatasetRecord("bad", Language.C, "int f( {", 0)
        outcome = attack_item(bad, cfg, backend)
        assert outcome.verdict is Verdict.SKIPPED
        assert outcome.classify_queries == 0

    def test_breakdown_matches_ledger_total(self):
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        label, _ = classify_text(SNIPPETS[0])
        record = DatasetRecord("x", Language.C, SNIPPETS[0], label)
        outcome = attack_item(record, AttackConfig(rng_seed=1), backend)
        assert outcome.classify_queries == outcome.breakdown.total
        occurrences = sum(
            len(v.occurrences)
            for v in extract_variables(SourceUnit(Language.C, SNIPPETS[0], "x")))
        assert outcome.breakdown.rank == 1 + occurrences

    def test_backend_error_marks_failure_not_crash(self):
        class Exploding:
            def classify(self, code, code_pair):
                raise ConnectionError("boom")  # not a gateway error

            def substitutes(self, *a):
                return {}

            def health(self):
                return "ok", "x"

        from varflip.errors import TransportError

        class Failing:
            def classify(self, code, code_pair):
                raise TransportError("unreachable")

            def substitutes(self, *a):
                return {}

            def health(self):
                return "ok", "x"

        record = DatasetRecord("x", Language.C, SNIPPETS[0], 0)
        outcome = attack_item(record, AttackConfig(), Failing())
        assert outcome.verdict is Verdict.FAILURE
        assert outcome.error and "TransportError" in outcome.error

    def test_budget_exhaustion_is_graceful_failure(self):
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        label, _ = classify_text(SNIPPETS[0])
        record = DatasetRecord("x", Language.C, SNIPPETS[0], label)
        outcome = attack_item(record, AttackConfig(rng_seed=1, query_budget=4), backend)
        assert outcome.verdict in (Verdict.FAILURE, Verdict.SUCCESS)
        assert outcome.classify_queries <= 4

    def test_clone_pair_is_never_perturbed(self):
        pair_code = "int pairfn(void) { return 3; }\n"
        code = SNIPPETS[3]
        label, _ = classify_text(code, pair_code)
        record = DatasetRecord("cl", Language.C, code, label, code_pair=pair_code)
        backend = counting_surrogate(FIXTURE_VOCABULARY)
        attack_item(record, AttackConfig(rng_seed=5), backend)
        assert backend.classify_calls  # the pipeline really ran
        assert all(call[1] == pair_code for call in backend.classify_calls)


class TestComputeMetrics:
    @staticmethod
    def _row(rid, verdict, changes=0, variables=0, queries=0):
        return {"id": rid, "verdict": verdict, "stage": "none",
                "adversarial_code": None,
                "changes": [{"from": f"v{i}", "to": f"w{i}"} for i in range(changes)],
                "classify_queries": queries, "mlm_queries": 0,
                "variable_count": variables}

    def test_asr_definition(self):
        rows = [self._row("a", "skipped"),
                self._row("b", "success", 1, 4, 5),
                self._row("c", "success", 2, 6, 7),
                self._row("d", "failure", 0, 3, 9)]
        report = compute_metrics(rows)
        assert report.asr == pytest.approx(2 / 3)
        assert report.counts == {"records": 4, "attacked": 3, "succeeded": 2, "skipped": 1}

    def test_vcr_worked_example(self):
        rows = [self._row("a", "success", 1, 4, 5),
                self._row("b", "success", 2, 6, 7)]
        report = compute_metrics(rows)
        assert report.vcr == pytest.approx(3 / 10)

    def test_zero_succeeded_gives_zero_by_convention(self):
        rows = [self._row("a", "failure", 0, 3, 2), self._row("b", "skipped")]
        report = compute_metrics(rows)
        assert report.asr == 0.0 and report.vcr == 0.0

    def test_all_variables_renamed_gives_vcr_one(self):
        rows = [self._row("a", "success", 3, 3, 2), self._row("b", "success", 2, 2, 2)]
        assert compute_metrics(rows).vcr == 1.0

    def test_hand_built_five_outcome_fixture_exact(self):
        rows = [
            self._row("r1", "success", changes=1, variables=4, queries=11),
            self._row("r2", "success", changes=2, variables=6, queries=17),
            self._row("r3", "failure", changes=0, variables=3, queries=40),
            self._row("r4", "skipped", queries=1),
            self._row("r5", "skipped", queries=0),
        ]
        report = compute_metrics(rows)
        assert report.asr == 2 / 3
        assert report.vcr == 3 / 10
        assert report.noq_total == 69
        assert report.noq_mean == (11 + 17 + 40) / 3
        assert report.counts == {"records": 5, "attacked": 3,
                                 "succeeded": 2, "skipped": 2}

    def test_noq_mean_over_attacked_only(self):
        rows = [self._row("a", "failure", 0, 1, 10), self._row("b", "skipped", queries=1)]
        report = compute_metrics(rows)
        assert report.noq_total == 11
        assert report.noq_mean == 10.0


class TestRunCampaign:
    def _dataset(self, tmp_path):
        rows = [_record(i, s) for i, s in enumerate(SNIPPETS)]
        mis = dict(rows[1])
        mis["id"] = "item-mis"
        mis["label"] = 1 - mis["label"]
        rows.append(mis)
        return [DatasetRecord(r["id"], Language.C, r["code"], r["label"]) for r in rows]

    def test_outcome_file_line_count_matches_dataset(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "out")
        lines = (tmp_path / "out" / "outcomes.jsonl").read_text().splitlines()
        assert len(lines) == len(records)
        ids = [json.loads(l)["id"] for l in lines]
        assert ids == [r.id for r in records]

    def test_metrics_recomputed_from_file_match_report(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        report = run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "out")
        rows = [json.loads(l) for l in
                (tmp_path / "out" / "outcomes.jsonl").read_text().splitlines()]
        again = compute_metrics(rows)
        assert again == report
        on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
        assert on_disk == report.to_dict()

    def test_identical_campaigns_are_byte_identical(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "a")
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "b")
        assert (tmp_path / "a" / "outcomes.jsonl").read_bytes() == \
            (tmp_path / "b" / "outcomes.jsonl").read_bytes()
        assert (tmp_path / "a" / "report.json").read_bytes() == \
            (tmp_path / "b" / "report.json").read_bytes()

    def test_worker_pool_matches_sequential_output(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "seq")
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "par",
                     workers=4)
        assert (tmp_path / "seq" / "outcomes.jsonl").read_bytes() == \
            (tmp_path / "par" / "outcomes.jsonl").read_bytes()

    def test_adversarial_outputs_parse_equivalent(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "out")
        rows = [json.loads(l) for l in
                (tmp_path / "out" / "outcomes.jsonl").read_text().splitlines()]
        by_id = {r.id: r for r in records}
        for row in rows:
            if row["adversarial_code"] is not None:
                original = SourceUnit(Language.C, by_id[row["id"]].code, row["id"])
                variant = SourceUnit(Language.C, row["adversarial_code"], row["id"])
                assert parse_equivalent(original, variant)

    def test_export_rules_unit(self, tmp_path):
        from varflip.campaign import export_adv_training_set
        from varflip.core import (
            AttackOutcome,
            Chromosome,
            QueryBreakdown,
            Stage,
            SourceUnit as SU,
        )

        records = [
            DatasetRecord("ok", Language.C, "int a;", 0),
            DatasetRecord("fail-tracked", Language.C, "int b;", 1),
            DatasetRecord("fail-untracked", Language.C, "int c;", 0),
            DatasetRecord("skip", Language.C, "int d;", 1),
        ]

        def outcome(verdict, stage, adversarial=None, best=None, best_conf=None):
            return AttackOutcome(
                verdict=verdict, stage=stage, adversarial=adversarial,
                chromosome=None, classify_queries=0, mlm_queries=0,
                breakdown=QueryBreakdown(), variable_count=1,
                best_variant=best, best_variant_confidence=best_conf)

        outcomes = [
            outcome(Verdict.SUCCESS, Stage.GREEDY,
                    adversarial=SU(Language.C, "int a_flip;", "ok")),
            outcome(Verdict.FAILURE, Stage.GA,
                    best=SU(Language.C, "int b_low;", "fail-tracked"),
                    best_conf=0.51),
            outcome(Verdict.FAILURE, Stage.GREEDY),  # nothing ever evaluated
            outcome(Verdict.SKIPPED, Stage.NONE),
        ]
        path = tmp_path / "adv.jsonl"
        written = export_adv_training_set(records, outcomes, path)
        rows = {json.loads(l)["id"]: json.loads(l) for l in path.read_text().splitlines()}
        assert written == 2
        assert rows["ok"]["code"] == "int a_flip;"       # first-found flip
        assert rows["ok"]["label"] == 0                  # original label kept
        assert rows["fail-tracked"]["code"] == "int b_low;"  # min-confidence variant
        assert rows["fail-tracked"]["label"] == 1
        assert "fail-untracked" not in rows
        assert "skip" not in rows

    def test_export_rules(self, tmp_path):
        records = self._dataset(tmp_path)
        backend = SurrogateBackend(FIXTURE_VOCABULARY)
        export = tmp_path / "adv.jsonl"
        run_campaign(records, AttackConfig(rng_seed=7), backend, tmp_path / "out",
                     export_path=export)
        rows = [json.loads(l) for l in
                (tmp_path / "out" / "outcomes.jsonl").read_text().splitlines()]
        exported = {json.loads(l)["id"]: json.loads(l)
                    for l in export.read_text().splitlines()}
        by_id = {r.id: r for r in records}
        for row in rows:
            if row["verdict"] == "skipped":
                assert row["id"] not in exported
            elif row["verdict"] == "success":
                assert exported[row["id"]]["code"] == row["adversarial_code"]
                assert exported[row["id"]]["label"] == by_id[row["id"]].label
        # at most one exported example per record
        assert len(exported) <= len(records)


class TestCli:
    def _dataset_file(self, tmp_path):
        rows = [_record(i, s) for i, s in enumerate(SNIPPETS)]
        return _write_dataset(tmp_path / "d.jsonl", rows)

    def test_full_run_exit_zero(self, tmp_path, capsys):
        ds = self._dataset_file(tmp_path)
        rc = main(["--dataset", str(ds), "--backend", "surrogate",
                   "--seed", "3", "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "report.json").exists()

    def test_usage_error_exit_one(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["--backend", "surrogate"])  # missing --dataset/--out
        assert exc.value.code == 1

    def test_dataset_error_exit_two(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{}\n", encoding="utf-8")
        rc = main(["--dataset", str(bad), "--backend", "surrogate",
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_backend_unreachable_exit_three(self, tmp_path):
        ds = self._dataset_file(tmp_path)
        rc = main(["--dataset", str(ds), "--backend", "http://127.0.0.1:1",
                   "--out", str(tmp_path / "out")])
        assert rc == 3

    def test_config_file_and_flag_overrides(self, tmp_path):
        cfg_file = tmp_path / "attack.cfg"
        cfg_file.write_text(
            "# attack settings\n"
            "top_j = 40\n"
            "top_k = 10\n"
            "child_size = 8\n"
            "crossover_rate = 0.5\n"
            "mask_token = <unk>\n"
            "rng_seed = 1\n"
            "query_budget = 500\n"
            "include_parameters = false\n",
            encoding="utf-8")
        values = parse_config_file(cfg_file)
        assert values == {"top_j": 40, "top_k": 10, "child_size": 8,
                          "crossover_rate": 0.5, "mask_token": "<unk>",
                          "rng_seed": 1, "query_budget": 500,
                          "include_parameters": False}
        cfg = AttackConfig(**values)
        assert cfg.top_k == 10

        ds = self._dataset_file(tmp_path)
        rc = main(["--dataset", str(ds), "--backend", "surrogate",
                   "--config", str(cfg_file), "--seed", "9",
                   "--out", str(tmp_path / "o1")])
        assert rc == 0
        # flag seed (9) overrides the file seed (1): same as running seed 9 directly
        rc = main(["--dataset", str(ds), "--backend", "surrogate",
                   "--config", str(cfg_file), "--seed", "9",
                   "--out", str(tmp_path / "o2")])
        assert (tmp_path / "o1" / "outcomes.jsonl").read_bytes() == \
            (tmp_path / "o2" / "outcomes.jsonl").read_bytes()

    def test_bad_config_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "attack.cfg"
        cfg_file.write_text("unknown_key = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            parse_config_file(cfg_file)

    def test_substitutes_cache_replay(self, tmp_path):
        ds = self._dataset_file(tmp_path)
        cache_file = tmp_path / "cache.json"
        vocab_names = ["alpha", "beta", "gamma"]
        cache_file.write_text(json.dumps({
            "substitutes": {
                name: [{"name": v, "score": 0.5 - i * 0.1}
                       for i, v in enumerate(vocab_names)]
                for name in ("count", "total", "index", "value", "width")
            }}), encoding="utf-8")
        rc = main(["--dataset", str(ds), "--backend", "surrogate",
                   "--seed", "3", "--out", str(tmp_path / "out"),
                   "--substitutes-cache", str(cache_file)])
        assert rc == 0
        rows = [json.loads(l) for l in
                (tmp_path / "out" / "outcomes.jsonl").read_text().splitlines()]
        assert all(r["mlm_queries"] == 0 for r in rows)
