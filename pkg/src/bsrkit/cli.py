"""Command-line entry point.

Subcommands: extract, synthesize, train, score, fuse, report, selftest.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 partial
failure (some clips failed, or selftest checks failed).
"""

from __future__ import annotations

import argparse
import logging
import sys

from bsrkit import selftest as selftest_mod
from bsrkit.audio_io import DatasetError, WavError
from bsrkit.pipeline import (
    CLEAR,
    FEATURE_KINDS,
    ConfigError,
    PipelineConfig,
    StageError,
    load_config,
    run_extract,
    run_fuse,
    run_report,
    run_score,
    run_synthesize,
    run_train,
)

log = logging.getLogger("bsrkit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--jobs", type=int, help="worker pool size (default: cpu count)")
    common.add_argument("--out", help="override out_dir")

    p = _Parser(prog="bsrkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    ext = sub.add_parser("extract", parents=[common], help="extract feature files + manifest")
    ext.add_argument("--kind", choices=FEATURE_KINDS, help="one kind (default: all in config)")
    sub.add_parser("synthesize", parents=[common], help="build the noisy condition datasets")
    tr = sub.add_parser("train", parents=[common], help="train per-feature classifiers")
    tr.add_argument("--kind", choices=FEATURE_KINDS)
    sc = sub.add_parser("score", parents=[common], help="score the test split per condition")
    sc.add_argument("--kind", choices=FEATURE_KINDS)
    sc.add_argument("--condition", help="one condition (default: all, incl. clear)")
    fu = sub.add_parser("fuse", parents=[common], help="fuse score files for a feature subset")
    fu.add_argument("--sources", required=True, help="comma-separated feature kinds")
    fu.add_argument("--condition")
    sub.add_parser("report", parents=[common], help="accuracy table + confusion artifacts")
    sub.add_parser("selftest", parents=[common], help="run built-in invariant checks")
    return p


def _config(args) -> PipelineConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.out:
        cfg.out_dir = args.out
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = _build_parser().parse_args(argv)

    if args.cmd == "selftest":
        return 0 if selftest_mod.run() else 3

    try:
        cfg = _config(args)
        if args.cmd == "extract":
            kinds = [args.kind] if args.kind else cfg.features
            failed = 0
            for kind in kinds:
                failed += len(run_extract(cfg, kind)["failures"])
            return 3 if failed else 0
        if args.cmd == "synthesize":
            run_synthesize(cfg)
            return 0
        if args.cmd == "train":
            for kind in [args.kind] if args.kind else cfg.features:
                run_train(cfg, kind)
            return 0
        if args.cmd == "score":
            kinds = [args.kind] if args.kind else cfg.features
            conditions = [args.condition] if args.condition else cfg.conditions()
            for kind in kinds:
                for cond in conditions:
                    run_score(cfg, kind, cond)
            return 0
        if args.cmd == "fuse":
            subset = args.sources.split(",")
            for cond in [args.condition] if args.condition else cfg.conditions():
                run_fuse(cfg, subset, cond)
            return 0
        if args.cmd == "report":
            out = run_report(cfg)
            print(out["report"])
            return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (DatasetError, WavError, StageError, ValueError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled subcommand {args.cmd}")


if __name__ == "__main__":
    sys.exit(main())
