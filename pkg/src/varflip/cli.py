"""Command line front end.

    attack --dataset F --backend (surrogate|URL) --config F --seed N \
           --out DIR --budget N --export-adv F

Config files are line-oriented `key = value` pairs mirroring the attack
configuration fields; command line flags override file values. Exit codes:
0 success, 1 usage error, 2 dataset error, 3 backend unreachable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .campaign import load_dataset, run_campaign
from .core import AttackConfig, SubstituteCandidate
from .errors import ConfigError, DatasetError, GatewayError
from .gateway import HttpBackend
from .surrogate import SurrogateBackend

_INT_KEYS = {"top_j", "top_k", "child_size", "rng_seed", "query_budget"}
_FLOAT_KEYS = {"crossover_rate"}
_BOOL_KEYS = {"include_parameters"}
_STR_KEYS = {"mask_token"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS


def parse_config_file(path: "str | Path") -> dict:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = None if value.lower() == "none" else int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _BOOL_KEYS:
                lowered = value.lower()
                if lowered in ("true", "yes", "1"):
                    values[key] = True
                elif lowered in ("false", "no", "0"):
                    values[key] = False
                else:
                    raise ValueError(value)
            else:
                if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                    value = value[1:-1]
                values[key] = value
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def load_substitutes_cache(path: "str | Path") -> dict[str, list[SubstituteCandidate]]:
    """Recorded wire response: {"substitutes": {var: [{"name", "score"}, ...]}}."""
    with open(path, encoding="utf-8") as fh:
        body = json.load(fh)
    subs = body.get("substitutes")
    if not isinstance(subs, dict):
        raise ConfigError(f"{path}: missing 'substitutes' object")
    out: dict[str, list[SubstituteCandidate]] = {}
    for name, entries in subs.items():
        out[name] = [SubstituteCandidate(e["name"], float(e["score"])) for e in entries]
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attack", description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", required=True, help="JSONL dataset to attack")
    parser.add_argument("--backend", required=True,
                        help="'surrogate' or the base URL of a model server")
    parser.add_argument("--config", help="key = value attack configuration file")
    parser.add_argument("--seed", type=int, help="campaign seed (overrides config)")
    parser.add_argument("--out", required=True, help="directory for outcomes and report")
    parser.add_argument("--budget", type=int,
                        help="classify-query budget per item (overrides config)")
    parser.add_argument("--export-adv", dest="export_adv",
                        help="write the adversarial training set to this JSONL file")
    parser.add_argument("--substitutes-cache", dest="substitutes_cache",
                        help="replay recorded substitute responses from this JSON file")
    parser.add_argument("--surrogate-vocab", dest="surrogate_vocab",
                        help="vocabulary file for the surrogate backend")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel items (default 1)")
    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    values: dict = {}
    try:
        if args.config:
            values.update(parse_config_file(args.config))
        if args.seed is not None:
            values["rng_seed"] = args.seed
        if args.budget is not None:
            values["query_budget"] = args.budget
        cfg = AttackConfig(**values)
        cache = load_substitutes_cache(args.substitutes_cache) \
            if args.substitutes_cache else None
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"attack: configuration error: {exc}", file=sys.stderr)
        return 1

    try:
        records = load_dataset(args.dataset)
    except (DatasetError, OSError) as exc:
        print(f"attack: dataset error: {exc}", file=sys.stderr)
        return 2

    if args.backend == "surrogate":
        try:
            backend = SurrogateBackend(args.surrogate_vocab)
        except OSError as exc:
            print(f"attack: cannot load vocabulary: {exc}", file=sys.stderr)
            return 1
    else:
        backend = HttpBackend(args.backend)

    try:
        backend.health()
    except GatewayError as exc:
        print(f"attack: backend unreachable: {exc}", file=sys.stderr)
        return 3

    report = run_campaign(records, cfg, backend, args.out,
                          export_path=args.export_adv,
                          substitutes_cache=cache,
                          workers=max(1, args.workers))
    counts = report.counts
    print(f"attacked {counts['attacked']}/{counts['records']} records: "
          f"{counts['succeeded']} succeeded, {counts['skipped']} skipped | "
          f"ASR {report.asr:.4f}  VCR {report.vcr:.4f}  "
          f"NoQ total {report.noq_total} mean {report.noq_mean:.2f}")
    print(f"outcomes: {Path(args.out) / 'outcomes.jsonl'}")
    print(f"report:   {Path(args.out) / 'report.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
