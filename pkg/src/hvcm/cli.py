"""Command-line surface: simulate | fit | ppc | stats | overlap."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .dataio import (
    IngestError,
    atomic_write_text,
    export_report,
    export_stats,
    export_trace,
    emit_log,
    header_lines,
    ingest,
    ingest_tolerant,
    load_trace,
)
from .gibbs import FitConfig, default_priors, fit
from .netstats import subject_overlap_matrix
from .params import HvcmParams
from .ppc import coverage_report, generate_replicates
from .seating import marginal_likelihood_bruteforce  # noqa: F401  (re-export for scripts)
from .generative import simulate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvcm",
        description="Hierarchical vertex components models for structured interaction networks",
    )
    parser.add_argument("--version", action="version", version=f"hvcm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic interaction log")
    p.add_argument("--n", type=int, required=True, help="number of interactions")
    p.add_argument("--params", help="JSON file of model parameters (default: stock parameters)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")

    p = sub.add_parser("fit", help="run the Gibbs sampler on a log")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--preset", choices=["conjugate", "enron", "hollywood-fitted"],
                   default="conjugate")
    p.add_argument("--z-mc", type=int, default=25, help="Monte Carlo samples per attribution candidate")
    p.add_argument("--skip-malformed", action="store_true",
                   help="skip bad input lines (each is itemized on stderr)")
    p.add_argument("--output", required=True, help="output prefix for trace files")

    p = sub.add_parser("ppc", help="posterior predictive coverage report")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--trace", required=True, help="prefix used by 'fit --output'")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--thresholds", default="1,10,100",
                   help="comma-separated exact degrees to check")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True, help="output prefix for report files")

    p = sub.add_parser("stats", help="emit network statistic tables")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--checkpoints", type=int, default=8)
    p.add_argument("--output", required=True, help="output prefix for stat tables")

    p = sub.add_parser("overlap", help="pairwise sender overlap scores from a fitted trace")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--trace", required=True)
    p.add_argument("--min-count", type=int, default=1,
                   help="minimum co-listings for a pair to be scored")
    p.add_argument("--output", required=True)
    return parser


def _load_params(path) -> HvcmParams:
    if path is None:
        return HvcmParams(local_size_default={1: 0.5, 2: 0.3, 3: 0.2})
    with open(path, encoding="utf-8") as fh:
        params = HvcmParams.from_dict(json.load(fh))
    params.validate()
    return params


def _ingest(args):
    if getattr(args, "skip_malformed", False):
        log, skipped = ingest_tolerant(args.input, args.format)
        for lineno, reason in skipped:
            print(f"skipped line {lineno}: {reason}", file=sys.stderr)
        return log
    return ingest(args.input, args.format)


def _cmd_simulate(args) -> int:
    params = _load_params(args.params)
    rng = np.random.default_rng(args.seed)
    log = simulate(args.n, params, rng)
    config = {"n": args.n, "params": params.to_dict(), "seed": args.seed}
    emit_log(log, args.output, fmt=args.format, seed=args.seed, config=config)
    print(f"wrote {log.n} interactions to {args.output}")
    return 0


def _cmd_fit(args) -> int:
    log = _ingest(args)
    priors = default_priors(args.preset.replace("-", "_"))
    config = FitConfig(
        iterations=args.iterations,
        burn_in=args.burn_in,
        seed=args.seed,
        z_mc_samples=args.z_mc,
    )
    trace = fit(log, priors, config)
    paths = export_trace(trace, args.output)
    print(
        f"fit {log.n} interactions for {args.iterations} iterations "
        f"(posterior mean alpha={trace.posterior_mean_alpha():.4f}, "
        f"theta={trace.posterior_mean_theta():.2f})"
    )
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_ppc(args) -> int:
    log = _ingest(args)
    trace = load_trace(args.trace)
    thresholds = tuple(int(t) for t in args.thresholds.split(",") if t.strip())
    rng = np.random.default_rng(args.seed)
    replicates = generate_replicates(trace, log, args.replicates, rng)
    report = coverage_report(replicates, log, level=args.level, degree_thresholds=thresholds)
    config = {
        "replicates": args.replicates,
        "level": args.level,
        "thresholds": thresholds,
        "seed": args.seed,
    }
    for path in export_report(report, args.output, seed=args.seed, config=config):
        print(f"wrote {path}")
    return 0


def _cmd_stats(args) -> int:
    log = _ingest(args)
    for path in export_stats(log, args.output, n_checkpoints=args.checkpoints):
        print(f"wrote {path}")
    return 0


def _cmd_overlap(args) -> int:
    log = _ingest(args)
    if all(rec.k1 == 1 for rec in log.records):
        print("no qualifying interactions: every interaction has a single sender",
              file=sys.stderr)
        return 1
    trace = load_trace(args.trace)
    scores = subject_overlap_matrix(trace, log, min_count=args.min_count)
    if not scores:
        print("no qualifying interactions: no sender pair is co-listed often enough",
              file=sys.stderr)
        return 1
    lines = header_lines("subject-overlap", seed=trace.seed)
    lines.append("sender_1\tsender_2\toverlap")
    for (a, b), score in sorted(scores.items()):
        lines.append(f"{a}\t{b}\t{score!r}")
    atomic_write_text(args.output, "\n".join(lines) + "\n")
    print(f"wrote {args.output} ({len(scores)} pairs)")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "ppc": _cmd_ppc,
    "stats": _cmd_stats,
    "overlap": _cmd_overlap,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (IngestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
