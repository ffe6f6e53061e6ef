"""Wire formats and file emission.

Interaction logs travel as JSON lines (one object per interaction) or as a
long CSV (one row per constituent slot).  All emitted files start with
comment headers recording the package version, the seed, and a hash of the
run configuration; bodies contain no timestamps, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile

import numpy as np

from . import __version__
from .gibbs import GibbsTrace
from .interactions import InteractionLog
from .netstats import compute_stats, growth_checkpoints, node_sharing_histogram
from .ppc import PpcReport


class IngestError(ValueError):
    """A malformed input line; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def header_lines(kind: str, seed=None, config=None) -> list[str]:
    lines = [f"# hvcm {kind} v{__version__}"]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    if config is not None:
        lines.append(f"# config: {config_hash(config)}")
    return lines


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hvcm-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# Interaction logs
# --------------------------------------------------------------------------

def emit_log(log: InteractionLog, path, fmt: str = "jsonl", seed=None, config=None) -> None:
    if fmt == "jsonl":
        head = {
            "_header": {
                "kind": "interaction-log",
                "version": __version__,
                "shared_population": log.senders_equal_receivers,
            }
        }
        if seed is not None:
            head["_header"]["seed"] = seed
        if config is not None:
            head["_header"]["config"] = config_hash(config)
        lines = [json.dumps(head, separators=(",", ":"), sort_keys=True)]
        for rec in log.records:
            obj = {
                "senders": [log.sender_vocab.name_of(s) for s in rec.senders],
                "receivers": [log.receiver_vocab.name_of(r) for r in rec.receivers],
            }
            lines.append(json.dumps(obj, separators=(",", ":"), sort_keys=True))
        atomic_write_text(path, "\n".join(lines) + "\n")
    elif fmt == "csv":
        buf = io.StringIO()
        for line in header_lines("interaction-log", seed=seed, config=config):
            buf.write(line + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["interaction_id", "role", "name"])
        for i, rec in enumerate(log.records):
            for s in rec.senders:
                writer.writerow([i, "sender", log.sender_vocab.name_of(s)])
            for r in rec.receivers:
                writer.writerow([i, "receiver", log.receiver_vocab.name_of(r)])
        atomic_write_text(path, buf.getvalue())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _parse_jsonl(lines, collect):
    named = []
    shared = False
    for lineno, raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            collect(lineno, f"invalid JSON at column {exc.colno}: {exc.msg}")
            continue
        if isinstance(obj, dict) and "_header" in obj:
            shared = bool(obj["_header"].get("shared_population", False))
            continue
        if not isinstance(obj, dict):
            collect(lineno, "expected an object with senders and receivers")
            continue
        senders = obj.get("senders")
        receivers = obj.get("receivers")
        if not isinstance(senders, list) or not senders:
            collect(lineno, "senders must be a non-empty list")
            continue
        if not isinstance(receivers, list) or not receivers:
            collect(lineno, "receivers must be a non-empty list")
            continue
        if any(not isinstance(x, (str, int)) for x in senders + receivers):
            collect(lineno, "constituent names must be strings or integers")
            continue
        named.append((senders, receivers))
    return named, shared


def _parse_csv(lines, collect):
    rows = []
    header_seen = False
    for lineno, raw in lines:
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parsed = next(csv.reader([raw]))
        if not header_seen:
            header_seen = True
            if [c.strip().lower() for c in parsed[:3]] == ["interaction_id", "role", "name"]:
                continue
        if len(parsed) != 3:
            collect(lineno, f"expected 3 columns, got {len(parsed)}")
            continue
        ident, role, name = (c.strip() for c in parsed)
        if role not in ("sender", "receiver"):
            collect(lineno, f"unknown role {role!r}")
            continue
        if not name:
            collect(lineno, "empty constituent name")
            continue
        rows.append((ident, role, name, lineno))
    order: list[str] = []
    groups: dict[str, tuple[list, list]] = {}
    for ident, role, name, lineno in rows:
        if ident not in groups:
            groups[ident] = ([], [])
            order.append(ident)
        groups[ident][0 if role == "sender" else 1].append(name)
    named = []
    for ident in order:
        senders, receivers = groups[ident]
        if not senders or not receivers:
            collect(0, f"interaction {ident!r} is missing a sender or a receiver")
            continue
        named.append((senders, receivers))
    return named, False


def ingest(path, fmt: str = "jsonl") -> InteractionLog:
    """Parse and validate a log file; raises IngestError on the first bad line."""

    def fail(lineno, reason):
        raise IngestError(lineno, reason)

    return _ingest(path, fmt, fail)


def ingest_tolerant(path, fmt: str = "jsonl"):
    """Like ``ingest`` but collects (line, reason) pairs for every skipped line."""
    skipped: list[tuple[int, str]] = []
    log = _ingest(path, fmt, lambda lineno, reason: skipped.append((lineno, reason)))
    return log, skipped


def _ingest(path, fmt, collect) -> InteractionLog:
    with open(path, encoding="utf-8") as fh:
        lines = list(enumerate(fh, start=1))
    if not lines:
        raise IngestError(0, "empty file")
    if fmt == "jsonl":
        named, shared = _parse_jsonl(lines, collect)
    elif fmt == "csv":
        named, shared = _parse_csv(lines, collect)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if not named:
        raise IngestError(0, "no interactions found")
    log = InteractionLog.from_named(named, shared_population=shared)
    log.validate()
    return log


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------

def _table(header_comment: list[str], columns: list[str], rows) -> str:
    lines = list(header_comment)
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def export_trace(trace: GibbsTrace, prefix, seed=None) -> list[str]:
    """Write the trace as delimited text plus a JSON meta file.

    ``<prefix>.trace.tsv`` holds one row per iteration of the global scalars;
    ``<prefix>.local.tsv`` the per-sender parameters in long format;
    ``<prefix>.z.tsv`` the attribution samples (multi-sender interactions
    only); ``<prefix>.meta.json`` the run metadata.  Returns written paths.
    """
    seed = trace.seed if seed is None else seed
    head = header_lines("gibbs-trace", seed=seed, config=trace.config)
    paths = []

    path = f"{prefix}.trace.tsv"
    rows = (
        (
            it,
            trace.theta[it],
            trace.alpha[it],
            trace.sender_theta[it],
            trace.sender_alpha[it],
            trace.log_lik[it],
            int(trace.k_global[it]),
            int(trace.m_global[it]),
        )
        for it in range(trace.iterations)
    )
    atomic_write_text(
        path,
        _table(
            head,
            ["iteration", "theta", "alpha", "sender_theta", "sender_alpha",
             "log_lik", "k_global", "m_global"],
            rows,
        ),
    )
    paths.append(path)

    path = f"{prefix}.local.tsv"
    rows = (
        (it, s, trace.local_theta[it, col], trace.local_alpha[it, col])
        for it in range(trace.iterations)
        for col, s in enumerate(trace.local_senders)
    )
    atomic_write_text(
        path, _table(head, ["iteration", "sender_id", "theta_s", "alpha_s"], rows)
    )
    paths.append(path)

    if trace.z_samples:
        path = f"{prefix}.z.tsv"
        rows = (
            (it, i, int(trace.z_samples[i][it]))
            for it in range(trace.iterations)
            for i in sorted(trace.z_samples)
        )
        atomic_write_text(
            path, _table(head, ["iteration", "interaction", "z"], rows)
        )
        paths.append(path)

    path = f"{prefix}.meta.json"
    meta = {
        "kind": "gibbs-trace-meta",
        "version": __version__,
        "seed": seed,
        "burn_in": trace.burn_in,
        "iterations": trace.iterations,
        "config": trace.config,
        "config_hash": config_hash(trace.config),
        "local_senders": trace.local_senders,
        "z_final": trace.z_final,
    }
    atomic_write_text(path, json.dumps(meta, indent=1, sort_keys=True) + "\n")
    paths.append(path)
    return paths


def load_trace(prefix) -> GibbsTrace:
    """Rebuild a GibbsTrace from the files written by ``export_trace``."""
    with open(f"{prefix}.meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    iters = meta["iterations"]
    local_senders = [int(s) for s in meta["local_senders"]]
    col = {s: c for c, s in enumerate(local_senders)}

    theta = np.zeros(iters)
    alpha = np.zeros(iters)
    s_theta = np.zeros(iters)
    s_alpha = np.zeros(iters)
    log_lik = np.zeros(iters)
    k_global = np.zeros(iters, dtype=np.int64)
    m_global = np.zeros(iters, dtype=np.int64)
    for row in _read_table(f"{prefix}.trace.tsv"):
        it = int(row["iteration"])
        theta[it] = float(row["theta"])
        alpha[it] = float(row["alpha"])
        s_theta[it] = float(row["sender_theta"])
        s_alpha[it] = float(row["sender_alpha"])
        log_lik[it] = float(row["log_lik"])
        k_global[it] = int(row["k_global"])
        m_global[it] = int(row["m_global"])

    local_theta = np.zeros((iters, len(local_senders)))
    local_alpha = np.zeros((iters, len(local_senders)))
    for row in _read_table(f"{prefix}.local.tsv"):
        it = int(row["iteration"])
        c = col[int(row["sender_id"])]
        local_theta[it, c] = float(row["theta_s"])
        local_alpha[it, c] = float(row["alpha_s"])

    z_samples: dict[int, np.ndarray] = {}
    zpath = f"{prefix}.z.tsv"
    if os.path.exists(zpath):
        for row in _read_table(zpath):
            i = int(row["interaction"])
            if i not in z_samples:
                z_samples[i] = np.zeros(iters, dtype=np.int64)
            z_samples[i][int(row["iteration"])] = int(row["z"])

    return GibbsTrace(
        theta=theta,
        alpha=alpha,
        sender_alpha=s_alpha,
        sender_theta=s_theta,
        local_senders=local_senders,
        local_theta=local_theta,
        local_alpha=local_alpha,
        log_lik=log_lik,
        k_global=k_global,
        m_global=m_global,
        z_samples=z_samples,
        z_final=[int(z) for z in meta["z_final"]],
        burn_in=meta["burn_in"],
        seed=meta["seed"],
        config=meta["config"],
    )


def _read_table(path):
    with open(path, encoding="utf-8") as fh:
        columns = None
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if columns is None:
                columns = parts
                continue
            yield dict(zip(columns, parts))


def export_report(report: PpcReport, prefix, seed=None, config=None) -> list[str]:
    """Write a PPC report as a TSV plus a readable summary; returns paths."""
    head = header_lines("ppc-report", seed=seed, config=config)
    rows = []
    for c in report.global_checks:
        rows.append(("global", "-", c.name, c.lo, c.hi, c.actual, c.covered))
    for c in report.node_sharing:
        rows.append(("node_sharing", "-", c.name, c.lo, c.hi, c.actual, c.covered))
    for s in sorted(report.local_checks):
        for c in report.local_checks[s]:
            rows.append(("local", s, c.name, c.lo, c.hi, c.actual, c.covered))
    for name, (num, den) in report.coverage_rates.items():
        rows.append(("coverage_rate", "-", name, num, den, "-", "-"))
    path_tsv = f"{prefix}.report.tsv"
    atomic_write_text(
        path_tsv,
        _table(head, ["section", "sender_id", "statistic", "lo", "hi", "actual", "covered"], rows),
    )

    lines = list(head)
    lines.append("")
    lines.append(f"posterior predictive check: {report.n_replicates} replicates, "
                 f"{report.level:.0%} intervals")
    lines.append("(replicates condition on the observed sender sequence and arities;"
                 " new senders cannot appear, new receivers can)")
    lines.append("")
    lines.append("global statistics:")
    for c in report.global_checks:
        mark = "covered" if c.covered else "OUTSIDE"
        lines.append(
            f"  {c.name:28s} actual={c.actual:>12.1f}  interval=({c.lo:.1f}, {c.hi:.1f})  {mark}"
        )
    lines.append("")
    lines.append("local coverage rates (senders with a nonzero observed value):")
    for name, (num, den) in report.coverage_rates.items():
        lines.append(f"  {name:28s} {num} / {den}")
    path_txt = f"{prefix}.summary.txt"
    atomic_write_text(path_txt, "\n".join(lines) + "\n")
    return [path_tsv, path_txt]


def export_stats(log: InteractionLog, prefix, seed=None, n_checkpoints: int = 8) -> list[str]:
    """Emit degree distributions, node sharing, and growth checkpoints as TSVs."""
    head = header_lines("net-stats", seed=seed)
    stats = compute_stats(log)
    paths = []

    path = f"{prefix}.degree.tsv"
    rows = []
    for k, c in stats.degree_hist.items():
        rows.append(("global", "-", k, c, c / stats.v))
    for s, loc in sorted(stats.local.items()):
        for k, c in loc.degree_hist.items():
            rows.append(("local", s, k, c, c / loc.v))
    atomic_write_text(
        path, _table(head, ["scope", "sender_id", "degree", "count", "fraction"], rows)
    )
    paths.append(path)

    path = f"{prefix}.summary.tsv"
    rows = [("global", "-", stats.v, stats.e, stats.mean_arity)]
    for s, loc in sorted(stats.local.items()):
        rows.append(("local", s, loc.v, loc.e, loc.mean_arity))
    atomic_write_text(
        path,
        _table(head, ["scope", "sender_id", "unique_receivers", "interactions", "mean_arity"], rows),
    )
    paths.append(path)

    path = f"{prefix}.node_sharing.tsv"
    sharing = node_sharing_histogram(log)
    atomic_write_text(
        path,
        _table(head, ["n_local_sets", "receivers"], sorted(sharing.items())),
    )
    paths.append(path)

    if log.n >= 2:
        ns, vs = growth_checkpoints(log, n_points=n_checkpoints)
        path = f"{prefix}.growth.tsv"
        atomic_write_text(
            path,
            _table(head, ["n", "unique_receivers"], zip(ns.astype(int), vs.astype(int))),
        )
        paths.append(path)
    return paths
