"""Network statistics: degree structure, growth slopes, overlap scores."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .interactions import InteractionLog


@dataclass
class LocalStats:
    v: int
    e: int
    arity_hist: dict[int, int]
    degree_hist: dict[int, int]

    @property
    def mean_arity(self) -> float:
        return sum(k * c for k, c in self.arity_hist.items()) / self.e if self.e else 0.0

    @property
    def degree_dist(self) -> dict[int, float]:
        return {k: c / self.v for k, c in sorted(self.degree_hist.items())} if self.v else {}


@dataclass
class NetStats:
    """Receiver-side summary of a log.

    v: distinct receivers; e: interactions; arity_hist[k]: interactions with
    k receivers; degree_hist[k]: receivers appearing exactly k times.  Local
    sections hold the same fields restricted to each sender's interactions
    (a multi-sender interaction counts once for every listed sender).
    """

    v: int
    e: int
    arity_hist: dict[int, int]
    degree_hist: dict[int, int]
    local: dict[int, LocalStats] = field(default_factory=dict)

    @property
    def mean_arity(self) -> float:
        return sum(k * c for k, c in self.arity_hist.items()) / self.e if self.e else 0.0

    @property
    def degree_dist(self) -> dict[int, float]:
        return {k: c / self.v for k, c in sorted(self.degree_hist.items())} if self.v else {}

    def receivers_with_degree(self, k: int) -> int:
        return self.degree_hist.get(k, 0)

    def check_conservation(self) -> None:
        if sum(self.degree_hist.values()) != self.v:
            raise AssertionError("degree histogram does not partition the receivers")
        if sum(self.arity_hist.values()) != self.e:
            raise AssertionError("arity histogram does not partition the interactions")
        slots = sum(k * c for k, c in self.arity_hist.items())
        mass = sum(k * c for k, c in self.degree_hist.items())
        if slots != mass:
            raise AssertionError("receiver slots and degree mass disagree")


def compute_stats(log: InteractionLog, with_local: bool = True) -> NetStats:
    """Exact global and per-sender receiver statistics."""
    deg: Counter = Counter()
    arity: Counter = Counter()
    local_deg: dict[int, Counter] = {}
    local_arity: dict[int, Counter] = {}
    for rec in log.records:
        arity[rec.k2] += 1
        deg.update(rec.receivers)
        if with_local:
            for s in set(rec.senders):
                local_arity.setdefault(s, Counter())[rec.k2] += 1
                local_deg.setdefault(s, Counter()).update(rec.receivers)
    degree_hist = Counter(deg.values())
    local = {}
    if with_local:
        for s in sorted(local_deg):
            dh = Counter(local_deg[s].values())
            local[s] = LocalStats(
                v=len(local_deg[s]),
                e=sum(local_arity[s].values()),
                arity_hist=dict(sorted(local_arity[s].items())),
                degree_hist=dict(sorted(dh.items())),
            )
    return NetStats(
        v=len(deg),
        e=log.n,
        arity_hist=dict(sorted(arity.items())),
        degree_hist=dict(sorted(degree_hist.items())),
        local=local,
    )


def growth_checkpoints(log: InteractionLog, n_points: int = 8, sender=None):
    """Geometrically spaced prefix sizes with distinct-receiver counts.

    Returns (ns, vs): prefix lengths and the distinct-receiver count of each
    prefix.  With ``sender`` (a vocabulary name) only that sender's
    interactions contribute receivers.  Single pass over the log.
    """
    if log.n < 2:
        raise ValueError("need at least two interactions")
    ns = np.unique(
        np.round(np.geomspace(max(2, log.n // 100), log.n, n_points)).astype(int)
    )
    sid = None
    if sender is not None:
        sid = log.sender_vocab.id_of(sender)
    seen: set = set()
    vs = []
    ci = 0
    for i, rec in enumerate(log.records, start=1):
        if sid is None or sid in rec.senders:
            seen.update(rec.receivers)
        while ci < len(ns) and i == ns[ci]:
            vs.append(len(seen))
            ci += 1
    return np.asarray(ns, dtype=float), np.asarray(vs, dtype=float)


def slope_of_loglog(ns, vs) -> float:
    """Least-squares slope of log v against log n."""
    ns = np.asarray(ns, dtype=float)
    vs = np.asarray(vs, dtype=float)
    keep = (ns > 0) & (vs > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two checkpoints")
    return float(np.polyfit(np.log(ns[keep]), np.log(vs[keep]), 1)[0])


def sparsity_slope(logs, sender=None) -> float:
    """Least-squares slope of log v against log n over a growth sequence.

    ``logs`` is a sequence of logs of increasing size (prefixes of one run).
    With ``sender`` (a vocabulary name), the count is restricted to that
    sender's interactions.  Slopes below 1 indicate sub-linear growth of
    distinct receivers; under partial pooling the exponent approaches the
    product of the global discount and the largest local discount.
    """
    ns, vs = [], []
    for lg in logs:
        if sender is None:
            stats = compute_stats(lg, with_local=False)
            ns.append(lg.n)
            vs.append(stats.v)
        else:
            if sender not in lg.sender_vocab:
                continue
            sid = lg.sender_vocab.id_of(sender)
            stats = compute_stats(lg, with_local=True)
            loc = stats.local.get(sid)
            if loc is None or loc.v == 0:
                continue
            ns.append(loc.e)
            vs.append(loc.v)
    return slope_of_loglog(ns, vs)


def sparsity_ratios(logs) -> np.ndarray:
    """e / v**mean_arity per checkpoint; decreasing toward 0 indicates sparsity."""
    out = []
    for lg in logs:
        st = compute_stats(lg, with_local=False)
        out.append(st.e / st.v ** st.mean_arity if st.v > 0 else math.inf)
    return np.asarray(out)


def powerlaw_slope(degree_dist: dict[int, float], k_range: tuple[int, int]) -> float:
    """Log-log least-squares exponent of d_k ~ C * k**(-gamma) over ``k_range``."""
    lo, hi = k_range
    ks = [k for k, p in degree_dist.items() if lo <= k <= hi and p > 0]
    if len(ks) < 5:
        raise ValueError("need at least five support points in the range")
    x = np.log(np.asarray(ks, dtype=float))
    y = np.log(np.asarray([degree_dist[k] for k in ks]))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def yule_reference(k, alpha: float):
    """Limit degree law alpha * k**-(1+alpha) / Gamma(1-alpha) (full pooling)."""
    k = np.asarray(k, dtype=float)
    return alpha * k ** (-(1.0 + alpha)) / math.exp(gammaln(1.0 - alpha))


def node_sharing_histogram(log: InteractionLog) -> dict[int, int]:
    """How many receivers appear in exactly c senders' local interaction sets."""
    senders_of: dict[int, set] = {}
    for rec in log.records:
        for s in set(rec.senders):
            for r in rec.receivers:
                senders_of.setdefault(r, set()).add(s)
    hist = Counter(len(ss) for ss in senders_of.values())
    return dict(sorted(hist.items()))


def degree_distribution_distance(d1: dict[int, float], d2: dict[int, float], metric: str = "TV") -> float:
    """L1 or total-variation distance between two degree distributions.

    Supports are merged with implicit zeros.  Inputs must each sum to one.
    """
    for name, d in (("first", d1), ("second", d2)):
        total = math.fsum(d.values())
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"{name} distribution sums to {total}, not 1")
    keys = set(d1) | set(d2)
    l1 = math.fsum(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys)
    if metric.upper() == "L1":
        return l1
    if metric.upper() == "TV":
        return l1 / 2.0
    raise ValueError(f"unknown metric {metric!r}")


def shannon_entropy(probs) -> float:
    """Base-2 entropy; zero-probability terms contribute nothing."""
    return -math.fsum(p * math.log2(p) for p in probs if p > 0.0)


def subject_overlap(trace, log: InteractionLog, s1: int, s2: int) -> float:
    """Mean posterior attribution entropy over interactions listing both senders.

    For every interaction whose sender multiset contains both ``s1`` and
    ``s2``, the posterior attribution distribution is restricted to the pair,
    renormalized, and scored by base-2 entropy; the score is the average.
    Symmetric in the pair and always in [0, 1].
    """
    if s1 == s2:
        raise ValueError("overlap needs two distinct senders")
    scores = []
    for i, rec in enumerate(log.records):
        ss = set(rec.senders)
        if s1 not in ss or s2 not in ss:
            continue
        post = trace.z_posterior(i)
        p1 = post.get(s1, 0.0)
        p2 = post.get(s2, 0.0)
        if p1 + p2 <= 0.0:
            continue
        scores.append(shannon_entropy([p1 / (p1 + p2), p2 / (p1 + p2)]))
    if not scores:
        raise ValueError(f"no qualifying interactions for senders {s1} and {s2}")
    return float(np.mean(scores))


def subject_overlap_matrix(trace, log: InteractionLog, min_count: int = 1) -> dict[tuple[int, int], float]:
    """Overlap scores for every sender pair co-listed at least ``min_count`` times."""
    pair_counts: Counter = Counter()
    for rec in log.records:
        ss = sorted(set(rec.senders))
        for a in range(len(ss)):
            for b in range(a + 1, len(ss)):
                pair_counts[(ss[a], ss[b])] += 1
    out = {}
    for (a, b), c in sorted(pair_counts.items()):
        if c >= min_count:
            out[(a, b)] = subject_overlap(trace, log, a, b)
    return out
