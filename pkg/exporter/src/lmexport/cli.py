"""Command line for the exporter: `lmexport export --model ID --task TASK ...`."""

from __future__ import annotations

import argparse
import json
import sys

from .extract import TASKS, ExportJob, run_job

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="lmexport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("export", help="run one extraction task")
    p.add_argument("--model", required=True, help="model directory or identifier")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pooling", choices=("first", "mean"), default="first")
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--pll-mode", choices=("cps", "aul"), default="cps")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    job = ExportJob(
        model=args.model,
        task=args.task,
        input_path=args.input,
        output_path=args.out,
        k=args.k,
        max_length=args.max_length,
        pooling=args.pooling,
        seed=args.seed,
        pll_mode=args.pll_mode,
    )
    try:
        written = run_job(job)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # model loading failures land here
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {written} records to {args.out}")
    if written == 0:
        print("lmexport: no records produced", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
