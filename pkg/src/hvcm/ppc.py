"""Posterior predictive replication and coverage reporting.

Replicate datasets are regenerated from posterior parameter samples while
holding the observed sender sequence and per-interaction receiver counts
fixed, so every replicate matches the data in interaction count and arity
and differs only in which receivers were drawn.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .generative import simulate_conditional
from .interactions import InteractionLog
from .netstats import compute_stats, degree_distribution_distance, node_sharing_histogram
from .params import HvcmParams


def worker_count() -> int:
    """Worker cap from HVCM_THREADS (default 1, serial)."""
    raw = os.environ.get("HVCM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _replicate_task(args):
    senders_seq, sizes, params_dict, z, seed = args
    params = HvcmParams.from_dict(params_dict)
    rng = np.random.default_rng(seed)
    return simulate_conditional(senders_seq, sizes, params, rng, z_seq=z)


def generate_replicates(trace, log: InteractionLog, m: int, rng, base_params: HvcmParams | None = None):
    """Draw ``m`` conditional replicates from evenly thinned posterior samples.

    Each replicate takes one post-burn-in iteration's parameters (and its
    attribution sample for multi-sender interactions) and re-simulates only
    the receiver draws.  Replicates reuse the observed sender vocabulary, so
    per-sender statistics stay aligned.  Parallel across replicates when
    HVCM_THREADS is above one; results are ordered and seed-derived either way.
    """
    if m == 0:
        return []
    n_post = trace.iterations - trace.burn_in
    if n_post < m:
        raise ValueError(f"trace has {n_post} post-burn-in samples, need {m}")
    base = base_params or HvcmParams()
    picks = np.linspace(trace.burn_in, trace.iterations - 1, m).round().astype(int)
    senders_seq = [rec.senders for rec in log.records]
    sizes = [rec.k2 for rec in log.records]
    seeds = rng.bit_generator.seed_seq.spawn(m)

    tasks = []
    for it, seed in zip(picks, seeds):
        params_i = trace.params_at(int(it), base)
        tasks.append((senders_seq, sizes, params_i.to_dict(), trace.z_at(int(it)), seed))

    workers = worker_count()
    if workers > 1:
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                reps = list(pool.map(_replicate_task, tasks))
        except OSError:
            reps = [_replicate_task(t) for t in tasks]
    else:
        reps = [_replicate_task(t) for t in tasks]
    out = []
    for rep in reps:
        out.append(
            InteractionLog(rep.records, log.sender_vocab, rep.receiver_vocab, False)
        )
    return out


def interval(values, level: float = 0.95) -> tuple[float, float]:
    """Central empirical interval: quantiles (1-level)/2 and 1-(1-level)/2."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two values")
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


@dataclass
class StatisticCheck:
    name: str
    values: np.ndarray
    lo: float
    hi: float
    actual: float
    covered: bool


@dataclass
class PpcReport:
    """Coverage summary of replicate statistics against the observed log."""

    level: float
    n_replicates: int
    global_checks: list[StatisticCheck]
    local_checks: dict[int, list[StatisticCheck]]
    coverage_rates: dict[str, tuple[int, int]]
    node_sharing: list[StatisticCheck] = field(default_factory=list)

    def global_check(self, name: str) -> StatisticCheck:
        for c in self.global_checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _check(name, values, actual, level) -> StatisticCheck:
    lo, hi = interval(values, level)
    return StatisticCheck(
        name=name,
        values=np.asarray(values, dtype=float),
        lo=lo,
        hi=hi,
        actual=float(actual),
        covered=bool(lo <= actual <= hi),
    )


def coverage_report(
    replicates,
    log: InteractionLog,
    level: float = 0.95,
    degree_thresholds: tuple[int, ...] = (1, 10, 100),
) -> PpcReport:
    """Intervals and coverage for the standard global and per-sender statistics.

    Global: distinct receivers, receivers at each exact degree threshold, the
    node-sharing histogram, and the degree-distribution TV distance to the
    observed log (actual value 0 by construction).  Local: distinct receivers
    and degree-threshold counts per sender; the aggregated coverage rate for
    a local statistic counts only senders whose observed value is nonzero.
    """
    if len(replicates) < 2:
        raise ValueError("need at least two replicates")
    obs = compute_stats(log)
    obs_sharing = node_sharing_histogram(log)
    rep_stats = [compute_stats(rep) for rep in replicates]
    rep_sharing = [node_sharing_histogram(rep) for rep in replicates]

    global_checks = [
        _check("unique_receivers", [st.v for st in rep_stats], obs.v, level)
    ]
    for k in degree_thresholds:
        global_checks.append(
            _check(
                f"receivers_degree_{k}",
                [st.receivers_with_degree(k) for st in rep_stats],
                obs.receivers_with_degree(k),
                level,
            )
        )
    tv = [
        degree_distribution_distance(st.degree_dist, obs.degree_dist, "TV")
        for st in rep_stats
    ]
    global_checks.append(_check("degree_dist_tv_distance", tv, 0.0, level))

    sharing_keys = sorted(set(obs_sharing) | {k for h in rep_sharing for k in h})
    node_sharing = [
        _check(
            f"receivers_in_{c}_local_sets",
            [h.get(c, 0) for h in rep_sharing],
            obs_sharing.get(c, 0),
            level,
        )
        for c in sharing_keys
    ]

    local_checks: dict[int, list[StatisticCheck]] = {}
    rates: dict[str, list[int]] = {
        "unique_receivers": [0, 0],
        **{f"receivers_degree_{k}": [0, 0] for k in degree_thresholds},
    }
    for s, loc in obs.local.items():
        checks = []
        rep_local = [st.local.get(s) for st in rep_stats]
        v_values = [rl.v if rl else 0 for rl in rep_local]
        c = _check("unique_receivers", v_values, loc.v, level)
        checks.append(c)
        if loc.e > 0:
            rates["unique_receivers"][1] += 1
            rates["unique_receivers"][0] += int(c.covered)
        for k in degree_thresholds:
            values = [rl.degree_hist.get(k, 0) if rl else 0 for rl in rep_local]
            actual = loc.degree_hist.get(k, 0)
            ck = _check(f"receivers_degree_{k}", values, actual, level)
            checks.append(ck)
            if actual > 0:
                rates[f"receivers_degree_{k}"][1] += 1
                rates[f"receivers_degree_{k}"][0] += int(ck.covered)
        local_checks[s] = checks

    return PpcReport(
        level=level,
        n_replicates=len(replicates),
        global_checks=global_checks,
        local_checks=local_checks,
        coverage_rates={k: (v[0], v[1]) for k, v in rates.items()},
        node_sharing=node_sharing,
    )
