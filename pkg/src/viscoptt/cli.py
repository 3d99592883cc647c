"""Batch command line: records in, beat tables, models and reports out.

Exit codes: 0 success (even when the AAMI criterion fails), 1 usage or
configuration error, 2 every record failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import glob
import logging
import sys

from .errors import PipelineError
from .pipeline import AllRecordsFailed, PipelineConfig, load_config, run_pipeline

EXIT_OK, EXIT_USAGE, EXIT_ALL_FAILED = 0, 1, 2
log = logging.getLogger("viscoptt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="viscoptt", description="Cuffless BP estimation from synchronized ECG/PPG records.")
    p.add_argument("--records", action="append", default=[], metavar="GLOB",
                   help="record file or glob pattern (repeatable)")
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--ablation", action="store_true", help="also train without v_visco and report the delta")
    p.add_argument("--seed", type=int, help="seed for EEMD noise and forest bootstraps")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--pooled", action="store_true", help="report one pooled model as the primary scope")
    p.add_argument("--workers", type=int, help="parallel record workers")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_records(patterns) -> list[str]:
    """Expand globs; literal paths without wildcards are kept as given."""
    out = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if hits:
            out += hits
        elif not glob.has_magic(pat):
            out.append(pat)
    return list(dict.fromkeys(out))


def config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.ablation:
        changes["ablation"] = True
    if args.out:
        changes["output_dir"] = args.out
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.seed is not None:
        changes["eemd"] = dataclasses.replace(cfg.eemd, rng_seed=args.seed)
        changes["forest"] = dataclasses.replace(cfg.forest, rng_seed=args.seed)
    if args.pooled:
        changes["split"] = dataclasses.replace(cfg.split, scope="pooled")
    return dataclasses.replace(cfg, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (PipelineError, ValueError, OSError) as exc:
        print(f"viscoptt: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    paths = resolve_records(args.records)
    if not paths:
        print("viscoptt: no record files given (use --records)", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_pipeline(cfg, paths)
    except AllRecordsFailed as exc:
        print(f"viscoptt: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except PipelineError as exc:
        print(f"viscoptt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with open(f"{cfg.output_dir}/report.txt") as fh:
        sys.stdout.write(fh.read())
    log.info("processed %d of %d records", result.records_processed, len(paths))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
