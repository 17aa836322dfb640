"""Command-line entry point: one subcommand per pipeline stage, plus ``synth`` and ``run``."""

from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import STAGES, PipelineConfig, run_all, run_stage, synthesize

log = logging.getLogger("codeintent")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codeintent", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="pipeline config (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--language", choices=["csharp", "java"])
        return p

    for stage in STAGES:
        p = add(stage, f"run the {stage} stage")
        p.add_argument("--k", type=int, help="k-anonymity threshold")
        p.add_argument("--model", choices=["logistic", "cnn"])
        p.add_argument("--label-mode", choices=["hard", "soft"])
    p = add("run", "run every stage in order")
    p.add_argument("--k", type=int)
    p.add_argument("--model", choices=["logistic", "cnn"])
    p.add_argument("--label-mode", choices=["hard", "soft"])
    p = add("synth", "write a synthetic query log to the configured log path")
    p.add_argument("--size", type=int)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        "seed": args.seed,
        "language": args.language,
        "k": getattr(args, "k", None),
        "model": getattr(args, "model", None),
        "label_mode": getattr(args, "label_mode", None),
    }
    try:
        config = PipelineConfig.load(args.config, **overrides)
        if args.command == "synth":
            logs, truth = synthesize(config, size=args.size)
            print(f"wrote {logs} and {truth}")
        elif args.command == "run":
            for stage, outputs in run_all(config).items():
                print(f"{stage}: " + ", ".join(str(p) for p in outputs))
        else:
            outputs = run_stage(args.command, config)
            print(", ".join(str(p) for p in outputs))
    except Exception as exc:  # every failure becomes a diagnostic and a nonzero exit
        if args.verbose:
            log.exception("%s failed", args.command)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
