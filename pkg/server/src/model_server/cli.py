"""Server entry point: load a checkpoint and serve the wire protocol."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .engine import InferenceEngine


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-server")
    parser.add_argument("--checkpoint", required=True,
                        help="path or hub id of the fine-tuned model directory")
    parser.add_argument("--task", default="classification",
                        choices=["classification", "clone"],
                        help="victim head flavor (clone accepts code pairs)")
    parser.add_argument("--device", default="cpu", help="torch device (default cpu)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    engine = InferenceEngine(args.checkpoint, task=args.task, device=args.device)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
