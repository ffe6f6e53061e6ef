"""Forward simulation of the sequential hierarchical urn process.

Receivers are drawn through a two-level scheme: each sender owns a local urn
whose mass splits into direct repeats of locally seen receivers and an escape
route through a shared global urn.  Escapes drive the latent degrees V(s, r)
that partially pool receiver popularity across senders.

Two sampling paths coexist: explicit-weight functions (``sample_sender``,
``sample_receiver``, ``sample_z``) that enumerate the predictive weights of a
frozen state, and a token-list simulator used by ``simulate`` that draws from
the identical distribution in O(1) per draw.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .interactions import HistoryState, Interaction, InteractionLog, Vocabulary
from .params import Categorical, HvcmParams, validate_urn

NEW = -1  # sentinel id for a brand-new constituent


@dataclass
class LatentDegreeState:
    """Latent escape counts and attribution history.

    ``latent[s][r]`` is V(s, r), the number of draws of receiver r for sender
    s that went through the global urn; row and column totals and the grand
    total m are maintained incrementally.  ``z_degree`` counts how often each
    sender was chosen as the attribution of an interaction.
    """

    latent: dict = field(default_factory=dict)                 # s -> {r: V(s, r)}
    latent_sender_total: dict = field(default_factory=dict)    # s -> V(s, .)
    latent_receiver_total: dict = field(default_factory=dict)  # r -> V(., r)
    latent_grand_total: int = 0                                # m
    z_degree: dict = field(default_factory=dict)               # s -> D^z(s)

    @property
    def z_seen(self) -> set:
        return set(self.z_degree)

    @property
    def n_global_receivers(self) -> int:
        return len(self.latent_receiver_total)

    def v(self, s: int, r: int) -> int:
        return self.latent.get(s, {}).get(r, 0)

    def v_sender(self, s: int) -> int:
        return self.latent_sender_total.get(s, 0)

    def v_receiver(self, r: int) -> int:
        return self.latent_receiver_total.get(r, 0)

    def record_escape(self, s: int, r: int) -> None:
        bucket = self.latent.setdefault(s, {})
        bucket[r] = bucket.get(r, 0) + 1
        self.latent_sender_total[s] = self.latent_sender_total.get(s, 0) + 1
        self.latent_receiver_total[r] = self.latent_receiver_total.get(r, 0) + 1
        self.latent_grand_total += 1

    def record_attribution(self, s: int) -> None:
        self.z_degree[s] = self.z_degree.get(s, 0) + 1

    def copy(self) -> "LatentDegreeState":
        return LatentDegreeState(
            latent={s: dict(d) for s, d in self.latent.items()},
            latent_sender_total=dict(self.latent_sender_total),
            latent_receiver_total=dict(self.latent_receiver_total),
            latent_grand_total=self.latent_grand_total,
            z_degree=dict(self.z_degree),
        )

    def check_against(self, hist: HistoryState) -> None:
        """Raise AssertionError on any latent-count inconsistency."""
        for s, row in self.latent.items():
            if sum(row.values()) != self.latent_sender_total.get(s, 0):
                raise AssertionError(f"sender total mismatch for {s}")
            for r, v in row.items():
                d = hist.local_in_degree.get(s, {}).get(r, 0)
                if not (1 <= v <= d):
                    raise AssertionError(f"V({s},{r})={v} outside [1, D={d}]")
        col = Counter()
        for row in self.latent.values():
            col.update(row)
        if dict(col) != self.latent_receiver_total:
            raise AssertionError("receiver totals mismatch")
        if sum(col.values()) != self.latent_grand_total:
            raise AssertionError("grand total mismatch")


# --------------------------------------------------------------------------
# Explicit-weight predictive distributions
# --------------------------------------------------------------------------

def sender_weights(hist: HistoryState, params: HvcmParams):
    """Predictive weights for the next sender slot.

    Returns (ids, weights, new_weight); the normalizer is
    ``hist.n_sender_slots + params.sender_theta``.
    """
    ids = sorted(hist.out_degree)
    w = [hist.out_degree[s] - params.sender_alpha for s in ids]
    new_w = params.sender_theta + params.sender_alpha * len(ids)
    if new_w < -1e-9:
        raise AssertionError("new-sender mass went negative; population overrun")
    return ids, w, max(new_w, 0.0)


def sample_sender(hist: HistoryState, params: HvcmParams, rng) -> int:
    """Draw the next sender; a fresh sender gets the next dense id."""
    ids, w, new_w = sender_weights(hist, params)
    u = rng.random() * (hist.n_sender_slots + params.sender_theta)
    for s, ws in zip(ids, w):
        if u < ws:
            return s
        u -= ws
    if new_w <= 0.0 and ids:
        return ids[-1]
    return max(hist.out_degree, default=-1) + 1


def receiver_weights(hist: HistoryState, lat: LatentDegreeState, s: int, params: HvcmParams):
    """Joint predictive weights for the next receiver drawn for sender ``s``.

    Returns (ids, total, escape_part, new_weight, denom) where ``total[i]``
    is the full weight of receiver ``ids[i]``, ``escape_part[i]`` the share
    routed through the global urn, and ``new_weight`` the aggregate mass of
    all brand-new receivers.  Weights are normalized by ``denom``; they sum
    to one together with ``new_weight``.
    """
    alpha_s, theta_s = params.local_params(s)
    m_s = hist.local_total.get(s, 0)
    denom = m_s + theta_s
    esc_mass = theta_s + alpha_s * lat.v_sender(s)
    m = lat.latent_grand_total
    k = lat.n_global_receivers
    g_denom = m + params.theta
    new_global = max(params.theta + params.alpha * k, 0.0)

    local = hist.local_in_degree.get(s, {})
    ids = sorted(set(local) | set(lat.latent_receiver_total))
    total, escape_part = [], []
    for r in ids:
        g = (lat.v_receiver(r) - params.alpha) / g_denom if lat.v_receiver(r) > 0 else 0.0
        esc = esc_mass * g / denom
        loc = (local.get(r, 0) - alpha_s * lat.v(s, r)) / denom
        escape_part.append(esc)
        total.append(loc + esc)
    new_w = esc_mass * new_global / g_denom / denom
    return ids, total, escape_part, new_w, denom


def sample_receiver(hist: HistoryState, lat: LatentDegreeState, s: int, params: HvcmParams, rng):
    """Draw the next receiver for sender ``s``; returns (receiver, escaped).

    ``escaped`` reports whether the draw went through the global urn, which
    is exactly the event that the latent degree V(s, r) increments.  A fresh
    receiver gets the next dense id.
    """
    alpha_s, theta_s = params.local_params(s)
    m_s = hist.local_total.get(s, 0)
    v_s = lat.v_sender(s)
    esc_mass = theta_s + alpha_s * v_s
    if esc_mass < -1e-9:
        raise AssertionError("escape mass went negative")
    local_mass = m_s - alpha_s * v_s
    local = hist.local_in_degree.get(s, {})
    u = rng.random() * (m_s + theta_s)
    if local and (u < local_mass or esc_mass <= 0.0):
        vrow = lat.latent.get(s, {})
        last = None
        for r, d in local.items():
            w = d - alpha_s * vrow.get(r, 0)
            last = r
            if u < w:
                return r, False
            u -= w
        if esc_mass <= 0.0:
            return last, False
    # escape: draw from the global urn
    m = lat.latent_grand_total
    k = lat.n_global_receivers
    new_global = max(params.theta + params.alpha * k, 0.0)
    u = rng.random() * (m + params.theta)
    last = None
    for r, v in lat.latent_receiver_total.items():
        w = v - params.alpha
        last = r
        if u < w:
            return r, True
        u -= w
    if new_global <= 0.0 and last is not None:
        return last, True
    fresh = max(
        max(hist.seen_receivers, default=-1),
        max(lat.latent_receiver_total, default=-1),
    )
    return fresh + 1, True


def escape_probability(hist: HistoryState, lat: LatentDegreeState, s: int, params: HvcmParams) -> float:
    """Probability that the next receiver draw for ``s`` defers to the global urn."""
    alpha_s, theta_s = params.local_params(s)
    m_s = hist.local_total.get(s, 0)
    return (theta_s + alpha_s * lat.v_sender(s)) / (m_s + theta_s)


def update_latent(
    lat: LatentDegreeState,
    hist: HistoryState,
    s: int,
    r: int,
    escaped: bool | None = None,
    params: HvcmParams | None = None,
    rng=None,
) -> bool:
    """Apply the latent-degree update for a draw of (s, r).

    Must be called with the pre-draw history (before the draw is recorded
    via ``hist.observe_receiver``).  The first occurrence of a pair always
    routes through the global urn, setting V(s, r) to one.  When ``escaped``
    is None the route is drawn from its conditional distribution given r,
    which requires ``params`` and ``rng``.  Returns whether V incremented.
    """
    d = hist.local_in_degree.get(s, {}).get(r, 0)
    if d == 0:
        lat.record_escape(s, r)
        return True
    if escaped is None:
        if params is None or rng is None:
            raise ValueError("drawing the route needs params and rng")
        alpha_s, theta_s = params.local_params(s)
        v = lat.v(s, r)
        local_part = d - alpha_s * v
        esc_mass = theta_s + alpha_s * lat.v_sender(s)
        g = (lat.v_receiver(r) - params.alpha) / (lat.latent_grand_total + params.theta)
        esc = esc_mass * g
        escaped = rng.random() * (local_part + esc) < esc
    if escaped:
        lat.record_escape(s, r)
    return bool(escaped)


def z_weights(lat: LatentDegreeState, senders, params: HvcmParams):
    """Attribution weights over the distinct senders of one interaction."""
    cands = sorted(set(senders))
    n_seen = len(lat.z_degree)
    ws = []
    for s in cands:
        if s in lat.z_degree:
            ws.append(lat.z_degree[s] - params.z_alpha)
        else:
            ws.append(params.z_theta + params.z_alpha * n_seen)
    return cands, ws


def sample_z(lat: LatentDegreeState, senders, params: HvcmParams, rng) -> int:
    """Draw the attribution of an interaction and record it in ``lat``."""
    if not senders:
        raise ValueError("empty sender multiset")
    cands, ws = z_weights(lat, senders, params)
    z = cands[-1]
    if len(cands) > 1:
        u = rng.random() * sum(ws)
        for s, w in zip(cands, ws):
            if u < w:
                z = s
                break
            u -= w
    else:
        z = cands[0]
    lat.record_attribution(z)
    return z


# --------------------------------------------------------------------------
# Token-list simulator (same distributions, O(1) per draw in regime 1)
# --------------------------------------------------------------------------

@dataclass
class SimulationResult:
    log: InteractionLog
    z: list[int]
    hist: HistoryState
    lat: LatentDegreeState
    escape_counts: Counter


class _Simulator:
    def __init__(self, params: HvcmParams, rng, sender_vocab: Vocabulary | None = None):
        params.validate()
        self.params = params
        self.rng = rng
        self.hist = HistoryState()
        self.lat = LatentDegreeState()
        self._sender_tokens: list[int] = []
        self._global_tokens: list[int] = []
        self._local_tokens: dict[int, list[int]] = {}
        self._n_receivers = 0
        self._records: list[Interaction] = []
        self._z_seq: list[int] = []
        self._escapes: Counter = Counter()
        self._given_sender_vocab = sender_vocab
        self._k1_cat = Categorical(params.size_dist) if params.size_dist else None
        self._k2_cats: dict[int, Categorical] = {}
        self._k2_default = (
            Categorical(params.local_size_default) if params.local_size_default else None
        )

    def _k2_cat(self, s: int) -> Categorical | None:
        dist = self.params.local_size_dist.get(s)
        if dist is None:
            return self._k2_default
        cat = self._k2_cats.get(s)
        if cat is None:
            cat = self._k2_cats[s] = Categorical(dist)
        return cat

    def _draw_sender(self) -> int:
        p, rng = self.params, self.rng
        n = self.hist.n_sender_slots
        s_count = len(self.hist.out_degree)
        if p.sender_alpha >= 0:
            u = rng.random() * (n + p.sender_theta)
            if u < n:
                s = self._sender_tokens[int(u)]
                if p.sender_alpha > 0:
                    if rng.random() * self.hist.out_degree[s] < p.sender_alpha:
                        s = s_count
            else:
                s = s_count
        else:
            new_w = p.sender_theta + p.sender_alpha * s_count
            if new_w < -1e-9:
                raise AssertionError("sender population overrun")
            u = rng.random() * (n + p.sender_theta)
            s = None
            last = None
            for sid, d in self.hist.out_degree.items():
                w = d - p.sender_alpha
                last = sid
                if u < w:
                    s = sid
                    break
                u -= w
            if s is None:
                s = s_count if new_w > 0 else last
        self.hist.observe_sender(s)
        self._sender_tokens.append(s)
        return s

    def _draw_global(self) -> int:
        p, rng = self.params, self.rng
        m = self.lat.latent_grand_total
        k = self.lat.n_global_receivers
        if p.alpha >= 0:
            u = rng.random() * (m + p.theta)
            if u < m:
                r = self._global_tokens[int(u)]
                if p.alpha > 0:
                    if rng.random() * self.lat.latent_receiver_total[r] < p.alpha:
                        r = NEW
            else:
                r = NEW
        else:
            new_w = p.theta + p.alpha * k
            u = rng.random() * (m + p.theta)
            r = NEW
            last = NEW
            for rid, v in self.lat.latent_receiver_total.items():
                w = v - p.alpha
                last = rid
                if u < w:
                    r = rid
                    break
                u -= w
            if r is NEW and new_w <= 0:
                r = last
        if r is NEW:
            r = self._n_receivers
        return r

    def _escape(self, s: int) -> int:
        r = self._draw_global()
        if r == self._n_receivers:
            self._n_receivers += 1
        self.lat.record_escape(s, r)
        self._global_tokens.append(r)
        self._escapes[(s, r)] += 1
        return r

    def _draw_receiver(self, s: int) -> tuple[int, bool]:
        p, rng = self.params, self.rng
        alpha_s, theta_s = p.local_params(s)
        m_s = self.hist.local_total.get(s, 0)
        r = None
        escaped = False
        if alpha_s >= 0:
            u = rng.random() * (m_s + theta_s)
            if u < m_s:
                cand = self._local_tokens[s][int(u)]
                if alpha_s > 0:
                    d = self.hist.local_in_degree[s][cand]
                    v = self.lat.latent[s][cand]
                    if rng.random() * d < alpha_s * v:
                        escaped = True
                    else:
                        r = cand
                else:
                    r = cand
            else:
                escaped = True
        else:
            esc_mass = theta_s + alpha_s * self.lat.v_sender(s)
            u = rng.random() * (m_s + theta_s)
            local = self.hist.local_in_degree.get(s, {})
            vrow = self.lat.latent.get(s, {})
            last = None
            for rid, d in local.items():
                w = d - alpha_s * vrow[rid]
                last = rid
                if u < w:
                    r = rid
                    break
                u -= w
            if r is None:
                if esc_mass > 0:
                    escaped = True
                else:
                    r = last
        if escaped:
            r = self._escape(s)
        self.hist.observe_receiver(s, r)
        self._local_tokens.setdefault(s, []).append(r)
        return r, escaped

    def _draw_z(self, senders) -> int:
        cands = sorted(set(senders))
        if len(cands) == 1:
            z = cands[0]
        else:
            p, rng = self.params, self.rng
            _, ws = z_weights(self.lat, cands, p)
            u = rng.random() * sum(ws)
            z = cands[-1]
            for s, w in zip(cands, ws):
                if u < w:
                    z = s
                    break
                u -= w
        self.lat.record_attribution(z)
        return z

    def step(self) -> None:
        k1 = self._k1_cat.sample(self.rng) if self._k1_cat else 1
        senders = sorted(self._draw_sender() for _ in range(k1))
        z = self._draw_z(senders)
        cat = self._k2_cat(z)
        k2 = cat.sample(self.rng) if cat else 1
        receivers = tuple(self._draw_receiver(z)[0] for _ in range(k2))
        self._records.append(Interaction(tuple(senders), receivers))
        self._z_seq.append(z)

    def step_conditional(self, senders, k2: int, z: int | None = None) -> None:
        if k2 < 1:
            raise ValueError("each interaction needs at least one receiver")
        senders = tuple(sorted(senders))
        if not senders:
            raise ValueError("each interaction needs at least one sender")
        for s in senders:
            self.hist.observe_sender(s)
            self._sender_tokens.append(s)
        if z is None:
            z = self._draw_z(senders)
        else:
            if z not in senders:
                raise ValueError("attribution must be one of the interaction's senders")
            self.lat.record_attribution(z)
        receivers = tuple(self._draw_receiver(z)[0] for _ in range(k2))
        self._records.append(Interaction(senders, receivers))
        self._z_seq.append(z)

    def result(self) -> SimulationResult:
        if self._given_sender_vocab is not None:
            svocab = self._given_sender_vocab
        else:
            svocab = Vocabulary(range(len(self.hist.out_degree)))
        rvocab = Vocabulary(range(self._n_receivers))
        log = InteractionLog(tuple(self._records), svocab, rvocab, False)
        return SimulationResult(
            log=log,
            z=list(self._z_seq),
            hist=self.hist,
            lat=self.lat,
            escape_counts=Counter(self._escapes),
        )


def simulate(n: int, params: HvcmParams, rng) -> InteractionLog:
    """Generate ``n`` interactions from the sequential process."""
    return simulate_full(n, params, rng).log


def simulate_full(n: int, params: HvcmParams, rng) -> SimulationResult:
    """Like ``simulate`` but also returns attributions and latent state."""
    sim = _Simulator(params, rng)
    for _ in range(n):
        sim.step()
    return sim.result()


def simulate_conditional(
    sender_seqs,
    sizes,
    params: HvcmParams,
    rng,
    z_seq=None,
    sender_vocab: Vocabulary | None = None,
) -> InteractionLog:
    """Simulate only the receiver draws, given senders and receiver counts.

    ``sender_seqs`` is one sender multiset (iterable of ids) per interaction
    and ``sizes`` the matching receiver counts.  ``z_seq`` fixes the
    attribution of each interaction; when omitted it is drawn.  Passing the
    observed log's ``sender_vocab`` keeps sender ids aligned with it.
    """
    sender_seqs = list(sender_seqs)
    sizes = list(sizes)
    if len(sender_seqs) != len(sizes):
        raise ValueError("sender sequence and size sequence lengths differ")
    if z_seq is not None and len(z_seq) != len(sizes):
        raise ValueError("attribution sequence length differs")
    sim = _Simulator(params, rng, sender_vocab=sender_vocab)
    for i, (senders, k2) in enumerate(zip(sender_seqs, sizes)):
        sim.step_conditional(senders, k2, None if z_seq is None else z_seq[i])
    return sim.result().log


def hollywood_simulate(n: int, alpha: float, theta: float, size_dist, rng) -> InteractionLog:
    """Flat baseline: all constituent slots drawn from one shared urn.

    Each interaction takes one sender and ``k ~ size_dist`` receivers, every
    slot drawn from a single urn over one shared population
    (existing vertex weight: degree - alpha; new vertex: theta + alpha * V).
    """
    validate_urn(alpha, theta, name="flat urn")
    cat = Categorical(size_dist) if size_dist else None
    tokens: list[int] = []
    counts: dict[int, int] = {}

    def draw() -> int:
        m = len(tokens)
        if alpha >= 0:
            u = rng.random() * (m + theta)
            if u < m:
                x = tokens[int(u)]
                if alpha > 0 and rng.random() * counts[x] < alpha:
                    x = len(counts)
            else:
                x = len(counts)
        else:
            new_w = theta + alpha * len(counts)
            u = rng.random() * (m + theta)
            x = None
            last = None
            for xid, d in counts.items():
                w = d - alpha
                last = xid
                if u < w:
                    x = xid
                    break
                u -= w
            if x is None:
                x = len(counts) if new_w > 0 else last
        counts[x] = counts.get(x, 0) + 1
        tokens.append(x)
        return x

    records = []
    for _ in range(n):
        k2 = cat.sample(rng) if cat else 1
        s = draw()
        receivers = tuple(draw() for _ in range(k2))
        records.append(Interaction((s,), receivers))
    vocab = Vocabulary(range(len(counts)))
    return InteractionLog(tuple(records), vocab, vocab, True)


# --------------------------------------------------------------------------
# Stick-breaking construction (zero local discount)
# --------------------------------------------------------------------------

@dataclass
class StickBreakingSample:
    """One draw of the latent frequency object, truncated to finitely many atoms."""

    sender_weights: np.ndarray
    sender_tail: float
    global_weights: np.ndarray
    global_tail: float
    local_weights: dict[int, np.ndarray]
    local_tails: dict[int, float]


def _gem_sticks(alpha: float, theta: float, k: int, rng) -> tuple[np.ndarray, float]:
    betas = np.array([rng.beta(1.0 - alpha, theta + (i + 1) * alpha) for i in range(k)])
    rem = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    w = betas * rem[:-1]
    return w, float(rem[-1])


def stick_breaking_frequencies(
    params: HvcmParams,
    truncation: int,
    rng,
    senders=None,
    adaptive: bool = True,
    tail_tol: float = 1e-6,
    max_atoms: int = 200_000,
) -> StickBreakingSample:
    """Sample the latent paintbox frequencies when all local discounts are zero.

    Sender weights follow the usual size-biased stick construction for
    (sender_alpha, sender_theta); global receiver weights likewise for
    (alpha, theta); each sender's local weights perturb the global ones with
    concentration theta_s, so that E[f_r | global] equals the global weight.
    With ``adaptive`` the truncation grows past ``truncation`` until every
    tail is below ``tail_tol``.
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if senders is None:
        senders = sorted(params.local)
    for s in senders:
        alpha_s, _ = params.local_params(s)
        if alpha_s != 0.0:
            raise ValueError(
                f"stick-breaking form requires zero local discount, sender {s} has {alpha_s}"
            )

    sender_w, sender_tail = _gem_sticks(params.sender_alpha, params.sender_theta, truncation, rng)
    if adaptive:
        while sender_tail > tail_tol and len(sender_w) < max_atoms:
            extra, sender_tail2 = _gem_sticks(
                params.sender_alpha,
                params.sender_theta + len(sender_w) * params.sender_alpha,
                min(len(sender_w), max_atoms - len(sender_w)),
            rng)
            sender_w = np.concatenate([sender_w, extra * sender_tail])
            sender_tail = sender_tail * sender_tail2

    k = truncation
    g_betas = [rng.beta(1.0 - params.alpha, params.theta + (i + 1) * params.alpha) for i in range(k)]
    while adaptive and len(g_betas) < max_atoms:
        rem = float(np.prod(1.0 - np.array(g_betas)))
        if rem <= tail_tol:
            break
        i = len(g_betas)
        g_betas.append(rng.beta(1.0 - params.alpha, params.theta + (i + 1) * params.alpha))
    g_betas = np.array(g_betas)
    rem = np.concatenate([[1.0], np.cumprod(1.0 - g_betas)])
    global_w = g_betas * rem[:-1]
    global_tail = float(rem[-1])

    remaining = 1.0 - np.cumsum(global_w)  # global tail after each atom
    local_weights: dict[int, np.ndarray] = {}
    local_tails: dict[int, float] = {}
    for s in senders:
        _, theta_s = params.local_params(s)
        left = 1.0
        w = np.zeros(len(global_w))
        for i, pi in enumerate(global_w):
            b = max(remaining[i], 0.0)
            if left <= 0.0:
                break
            if b < 1e-14:
                bp = 1.0
            else:
                bp = rng.beta(max(theta_s * pi, 1e-300), max(theta_s * b, 1e-300))
            w[i] = bp * left
            left *= 1.0 - bp
        local_weights[s] = w
        local_tails[s] = max(left, 0.0)

    return StickBreakingSample(
        sender_weights=sender_w,
        sender_tail=sender_tail,
        global_weights=global_w,
        global_tail=global_tail,
        local_weights=local_weights,
        local_tails=local_tails,
    )


def iter_stick_columns(alpha, theta, theta_s, n_samples, rng, tail_tol=1e-6, max_atoms=5000):
    """Yield (global, local) per-atom weight columns of paired stick draws.

    Vectorized over ``n_samples`` independent draws of the zero-discount
    construction; stops once every sample's global and local tails are below
    ``tail_tol``.  Memory stays O(n_samples) because columns are yielded one
    atom at a time.
    """
    g_rem = np.ones(n_samples)
    l_rem = np.ones(n_samples)
    for i in range(max_atoms):
        b = rng.beta(1.0 - alpha, theta + (i + 1) * alpha, size=n_samples)
        pi = b * g_rem
        g_rem = g_rem * (1.0 - b)
        a2 = np.maximum(theta_s * pi, 1e-300)
        b2 = np.maximum(theta_s * g_rem, 1e-300)
        bp = rng.beta(a2, b2)
        bp = np.where(g_rem < 1e-14, 1.0, bp)
        f = bp * l_rem
        l_rem = l_rem * (1.0 - bp)
        yield pi, f
        if g_rem.max() <= tail_tol and l_rem.max() <= tail_tol:
            return


def empirical_size_dists(log: InteractionLog, attribution=None):
    """Empirical distributions of k1 and of k2 per attributed sender.

    Returns (size_dist, local_size_dist) in the form ``HvcmParams`` expects.
    Multi-sender interactions contribute their k2 to the attributed sender
    when ``attribution`` is given, otherwise to every listed sender.
    """
    k1_counts: Counter = Counter()
    k2_counts: dict[int, Counter] = {}
    for i, rec in enumerate(log.records):
        k1_counts[rec.k1] += 1
        if attribution is not None:
            targets = [attribution[i]]
        elif rec.k1 == 1:
            targets = [rec.senders[0]]
        else:
            targets = sorted(set(rec.senders))
        for s in targets:
            k2_counts.setdefault(s, Counter())[rec.k2] += 1
    n = sum(k1_counts.values())
    size_dist = {k: c / n for k, c in sorted(k1_counts.items())}
    local = {}
    for s, counts in k2_counts.items():
        tot = sum(counts.values())
        local[s] = {k: c / tot for k, c in sorted(counts.items())}
    return size_dist, local
