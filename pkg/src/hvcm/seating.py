"""Extended state: per-sender auxiliary vertices, exact likelihood, reseating.

Every escape through the global urn materializes as an auxiliary vertex
(a table) owned by one sender and labeled with one receiver.  The number of
label-r tables of sender s recovers the latent degree V(s, r); table degrees
sum to the observed indegree D(s, r).  Seating assignments make the joint
density tractable and exchangeable, and marginalizing them back out recovers
the sequential process exactly.
"""

from __future__ import annotations

import json
import math
from itertools import product

import numpy as np
from scipy.special import gammaln

from .generative import LatentDegreeState, z_weights
from .interactions import InteractionLog
from .params import HvcmParams

CHECKPOINT_VERSION = 1


class SeatingInvariantError(AssertionError):
    """A seating-state count is inconsistent with the assignments."""


def ascending_factorial_log(a: float, step: float, count: int) -> float:
    """log of a * (a + step) * ... * (a + (count-1) * step); empty product is 0.

    Uses log-gamma for long positive-step products and an explicit sum
    otherwise (short products, and any negative-step regime where the factor
    count is necessarily small).
    """
    if count <= 0:
        return 0.0
    if step > 0 and count >= 32:
        x = a / step
        return count * math.log(step) + float(gammaln(x + count) - gammaln(x))
    total = 0.0
    for i in range(count):
        f = a + i * step
        if f <= 0.0:
            return -math.inf
        total += math.log(f)
    return total


def _degree_products_log(degrees: np.ndarray, one_minus_alpha: float) -> float:
    """Sum over tables of log [1-alpha]_1^(d-1), vectorized."""
    if len(degrees) == 0:
        return 0.0
    if one_minus_alpha <= 0.0:
        if np.any(degrees > 1):
            return -math.inf
        return 0.0
    base = gammaln(one_minus_alpha)
    return float(np.sum(gammaln(one_minus_alpha + degrees - 1.0)) - base * len(degrees))


class _SenderSeating:
    """Arena of one sender's auxiliary vertices."""

    __slots__ = ("label", "degree", "free", "by_label", "n_tables", "customers", "d")

    def __init__(self):
        self.label: list = []     # handle -> receiver id, None when free
        self.degree: list = []    # handle -> table degree
        self.free: list = []      # reusable handles
        self.by_label: dict = {}  # r -> [handles]
        self.n_tables = 0         # V(s, .)
        self.customers = 0        # m(s)
        self.d: dict = {}         # r -> D(s, r)

    def live_degrees(self) -> list:
        return [d for d, lab in zip(self.degree, self.label) if lab is not None]

    def copy(self) -> "_SenderSeating":
        c = _SenderSeating()
        c.label = list(self.label)
        c.degree = list(self.degree)
        c.free = list(self.free)
        c.by_label = {r: list(hs) for r, hs in self.by_label.items()}
        c.n_tables = self.n_tables
        c.customers = self.customers
        c.d = dict(self.d)
        return c


class SeatingState:
    """Seating bookkeeping for a fixed log and attribution.

    Holds the observed sender multisets, receiver lists, the attribution
    z[n] of each interaction, and the assignment phi[(n, j)] of each receiver
    slot to an auxiliary vertex of sender z[n].
    """

    def __init__(self, senders_seq, receivers_seq, z):
        self.senders_seq = [tuple(sorted(s)) for s in senders_seq]
        self.receivers_seq = [tuple(r) for r in receivers_seq]
        self.z = list(z)
        if len(self.z) != len(self.receivers_seq):
            raise ValueError("attribution length mismatch")
        for zi, senders in zip(self.z, self.senders_seq):
            if zi not in senders:
                raise ValueError("attribution must be one of the interaction's senders")
        self._senders: dict[int, _SenderSeating] = {}
        self.v_receiver: dict[int, int] = {}
        self.m = 0
        self.phi: dict[tuple[int, int], int] = {}
        self.audit_mode = False

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_log(
        cls,
        log: InteractionLog,
        params: HvcmParams,
        z=None,
        rng=None,
        track_logp: bool = False,
    ):
        """Seat every observation sequentially by its generative probabilities.

        Needs an rng; returns the state, or (state, logp) with the log of the
        joint probability of the receivers and chosen seats given senders,
        sizes and attribution when ``track_logp`` is set.
        """
        if z is None:
            if any(rec.k1 != 1 for rec in log.records):
                raise ValueError("multi-sender log needs an explicit attribution")
            z = [rec.senders[0] for rec in log.records]
        if rng is None:
            raise ValueError("sequential seating needs an rng")
        state = cls(
            [rec.senders for rec in log.records],
            [rec.receivers for rec in log.records],
            z,
        )
        logp = 0.0
        for n, rec in enumerate(log.records):
            for j in range(rec.k2):
                logp += state.seat_observation(n, j, params, rng)
        if track_logp:
            return state, logp
        return state

    # -- accessors ---------------------------------------------------------

    @property
    def n_interactions(self) -> int:
        return len(self.receivers_seq)

    @property
    def K(self) -> int:
        return len(self.v_receiver)

    def sender_seating(self, s: int) -> _SenderSeating | None:
        return self._senders.get(s)

    def m_sender(self, s: int) -> int:
        sen = self._senders.get(s)
        return sen.customers if sen else 0

    def v_sender(self, s: int) -> int:
        sen = self._senders.get(s)
        return sen.n_tables if sen else 0

    def v_sr(self, s: int, r: int) -> int:
        sen = self._senders.get(s)
        return len(sen.by_label.get(r, ())) if sen else 0

    def d_sr(self, s: int, r: int) -> int:
        sen = self._senders.get(s)
        return sen.d.get(r, 0) if sen else 0

    def latent_state(self) -> LatentDegreeState:
        """Collapse the seating to the latent-degree aggregates."""
        lat = LatentDegreeState()
        for s, sen in self._senders.items():
            for r, handles in sen.by_label.items():
                if handles:
                    lat.latent.setdefault(s, {})[r] = len(handles)
            lat.latent_sender_total[s] = sen.n_tables
        lat.latent_receiver_total = dict(self.v_receiver)
        lat.latent_grand_total = self.m
        for zi in self.z:
            lat.z_degree[zi] = lat.z_degree.get(zi, 0) + 1
        return lat

    # -- seat distribution -------------------------------------------------

    def _label_weight(self, r: int, params: HvcmParams) -> float:
        vr = self.v_receiver.get(r, 0)
        if vr > 0:
            return (vr - params.alpha) / (self.m + params.theta)
        return max(params.theta + params.alpha * self.K, 0.0) / (self.m + params.theta)

    def seat_probabilities(self, s: int, r: int | None, params: HvcmParams):
        """Seating weights for the next observation of sender ``s``.

        With ``r`` given, existing options are the label-r vertices of s and
        the new-vertex mass is multiplied by the label weight of r; with
        ``r=None`` all live vertices are options and the new-vertex mass is
        the bare escape mass.  Returns (handles, weights, new_weight, denom).
        """
        alpha_s, theta_s = params.local_params(s)
        sen = self._senders.get(s)
        v_s = sen.n_tables if sen else 0
        m_s = sen.customers if sen else 0
        new_mass = theta_s + alpha_s * v_s
        if new_mass < -1e-9:
            raise SeatingInvariantError("new-vertex mass went negative")
        new_mass = max(new_mass, 0.0)
        if r is None:
            handles = (
                [h for h, lab in enumerate(sen.label) if lab is not None] if sen else []
            )
        else:
            handles = list(sen.by_label.get(r, ())) if sen else []
            new_mass *= self._label_weight(r, params)
        weights = [sen.degree[h] - alpha_s for h in handles]
        return handles, weights, new_mass, m_s + theta_s

    def seat_observation(self, n: int, j: int, params: HvcmParams, rng) -> float:
        """Draw a seat for observation (n, j) given its observed receiver.

        Returns log of the joint probability of (receiver, chosen seat).
        """
        if (n, j) in self.phi:
            raise SeatingInvariantError(f"observation {(n, j)} already seated")
        s = self.z[n]
        r = self.receivers_seq[n][j]
        handles, weights, new_mass, denom = self.seat_probabilities(s, r, params)
        total = sum(weights) + new_mass
        if total <= 0.0:
            raise SeatingInvariantError("no seating option has positive mass")
        u = rng.random() * total
        chosen = None
        w_chosen = new_mass
        for h, w in zip(handles, weights):
            if u < w:
                chosen = h
                w_chosen = w
                break
            u -= w
        self._apply_seat(n, j, s, r, chosen)
        if self.audit_mode:
            self.audit()
        return math.log(w_chosen) - math.log(denom)

    def force_seat(self, n: int, j: int, handle: int | None, params: HvcmParams) -> float:
        """Seat (n, j) at a prescribed option; returns its joint probability."""
        s = self.z[n]
        r = self.receivers_seq[n][j]
        handles, weights, new_mass, denom = self.seat_probabilities(s, r, params)
        if handle is None:
            p = new_mass / denom
        else:
            p = weights[handles.index(handle)] / denom
        self._apply_seat(n, j, s, r, handle)
        return p

    def _apply_seat(self, n: int, j: int, s: int, r: int, handle: int | None) -> None:
        sen = self._senders.get(s)
        if sen is None:
            sen = self._senders[s] = _SenderSeating()
        if handle is None:
            if sen.free:
                handle = sen.free.pop()
                sen.label[handle] = r
                sen.degree[handle] = 1
            else:
                handle = len(sen.label)
                sen.label.append(r)
                sen.degree.append(1)
            sen.by_label.setdefault(r, []).append(handle)
            sen.n_tables += 1
            self.v_receiver[r] = self.v_receiver.get(r, 0) + 1
            self.m += 1
        else:
            if sen.label[handle] != r:
                raise SeatingInvariantError("seat label does not match the observation")
            sen.degree[handle] += 1
        sen.customers += 1
        sen.d[r] = sen.d.get(r, 0) + 1
        self.phi[(n, j)] = handle

    def remove_observation(self, n: int, j: int) -> None:
        """Unseat observation (n, j), deleting its vertex if emptied."""
        if (n, j) not in self.phi:
            raise SeatingInvariantError(f"observation {(n, j)} is not seated")
        handle = self.phi.pop((n, j))
        s = self.z[n]
        r = self.receivers_seq[n][j]
        sen = self._senders[s]
        sen.degree[handle] -= 1
        sen.customers -= 1
        sen.d[r] -= 1
        if sen.d[r] == 0:
            del sen.d[r]
        if sen.degree[handle] == 0:
            sen.label[handle] = None
            sen.free.append(handle)
            sen.by_label[r].remove(handle)
            if not sen.by_label[r]:
                del sen.by_label[r]
            sen.n_tables -= 1
            self.v_receiver[r] -= 1
            if self.v_receiver[r] == 0:
                del self.v_receiver[r]
            self.m -= 1
        if self.audit_mode:
            self.audit()

    def reseat_observation(self, n: int, j: int, params: HvcmParams, rng) -> None:
        self.remove_observation(n, j)
        self.seat_observation(n, j, params, rng)

    # -- consistency -------------------------------------------------------

    def audit(self) -> None:
        """Recount everything from the assignments; raise on any mismatch."""
        exp: dict[int, dict[int, int]] = {}
        for (n, j), handle in self.phi.items():
            s = self.z[n]
            r = self.receivers_seq[n][j]
            sen = self._senders.get(s)
            if sen is None or handle >= len(sen.label):
                raise SeatingInvariantError("assignment points at a missing vertex")
            if sen.label[handle] != r:
                raise SeatingInvariantError("assignment label mismatch")
            exp.setdefault(s, {})[handle] = exp.get(s, {}).get(handle, 0) + 1
        v_receiver: dict[int, int] = {}
        total_m = 0
        for s, sen in self._senders.items():
            degrees = exp.get(s, {})
            live = 0
            customers = 0
            d_counts: dict[int, int] = {}
            for h, lab in enumerate(sen.label):
                if lab is None:
                    if degrees.get(h, 0) != 0:
                        raise SeatingInvariantError("freed vertex still referenced")
                    continue
                dd = degrees.get(h, 0)
                if dd != sen.degree[h]:
                    raise SeatingInvariantError("vertex degree mismatch")
                if dd < 1:
                    raise SeatingInvariantError("live vertex with zero degree")
                if h not in sen.by_label.get(lab, ()):
                    raise SeatingInvariantError("vertex missing from its label index")
                live += 1
                customers += dd
                d_counts[lab] = d_counts.get(lab, 0) + dd
                v_receiver[lab] = v_receiver.get(lab, 0) + 1
            if live != sen.n_tables:
                raise SeatingInvariantError("vertex count mismatch")
            if customers != sen.customers:
                raise SeatingInvariantError("customer count mismatch")
            if d_counts != sen.d:
                raise SeatingInvariantError("indegree aggregate mismatch")
            if sum(len(hs) for hs in sen.by_label.values()) != live:
                raise SeatingInvariantError("label index size mismatch")
            total_m += live
        if v_receiver != self.v_receiver:
            raise SeatingInvariantError("global label counts mismatch")
        if total_m != self.m:
            raise SeatingInvariantError("global vertex total mismatch")

    # -- copies / permutation ---------------------------------------------

    def copy(self) -> "SeatingState":
        c = SeatingState(self.senders_seq, self.receivers_seq, self.z)
        c._senders = {s: sen.copy() for s, sen in self._senders.items()}
        c.v_receiver = dict(self.v_receiver)
        c.m = self.m
        c.phi = dict(self.phi)
        return c

    def permuted(self, order) -> "SeatingState":
        """State for the reordered log, carrying every seat assignment.

        ``order`` lists old interaction indices in their new order.
        """
        order = list(order)
        if sorted(order) != list(range(self.n_interactions)):
            raise ValueError("order must be a permutation of the interactions")
        c = SeatingState(
            [self.senders_seq[i] for i in order],
            [self.receivers_seq[i] for i in order],
            [self.z[i] for i in order],
        )
        c._senders = {s: sen.copy() for s, sen in self._senders.items()}
        c.v_receiver = dict(self.v_receiver)
        c.m = self.m
        for new_n, old_n in enumerate(order):
            for j in range(len(self.receivers_seq[old_n])):
                c.phi[(new_n, j)] = self.phi[(old_n, j)]
        return c

    # -- checkpointing -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "senders_seq": [list(s) for s in self.senders_seq],
            "receivers_seq": [list(r) for r in self.receivers_seq],
            "z": list(self.z),
            "phi": [[n, j, h] for (n, j), h in sorted(self.phi.items())],
            "vertices": {
                str(s): {
                    "label": [lab if lab is not None else -1 for lab in sen.label],
                    "degree": list(sen.degree),
                }
                for s, sen in sorted(self._senders.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeatingState":
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        state = cls(d["senders_seq"], d["receivers_seq"], d["z"])
        for s_str, rec in d["vertices"].items():
            s = int(s_str)
            sen = state._senders[s] = _SenderSeating()
            for lab, deg in zip(rec["label"], rec["degree"]):
                h = len(sen.label)
                if lab < 0:
                    sen.label.append(None)
                    sen.degree.append(0)
                    sen.free.append(h)
                    continue
                sen.label.append(lab)
                sen.degree.append(deg)
                sen.by_label.setdefault(lab, []).append(h)
                sen.n_tables += 1
                sen.customers += deg
                sen.d[lab] = sen.d.get(lab, 0) + deg
                state.v_receiver[lab] = state.v_receiver.get(lab, 0) + 1
                state.m += 1
        for n, j, h in d["phi"]:
            state.phi[(n, j)] = h
        state.audit()
        return state


def save_checkpoint(path, state: SeatingState, params: HvcmParams | None = None) -> None:
    doc = {"state": state.to_dict()}
    if params is not None:
        doc["params"] = params.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    state = SeatingState.from_dict(doc["state"])
    params = HvcmParams.from_dict(doc["params"]) if "params" in doc else None
    return state, params


# --------------------------------------------------------------------------
# Exact joint likelihood
# --------------------------------------------------------------------------

def seating_log_likelihood(state: SeatingState, params: HvcmParams) -> float:
    """log p(receivers, seats | senders, sizes, attribution).

    Ascending-factorial form over the final counts: a global factor over the
    label counts V(., r), and one factor per sender over its vertex count,
    customer count and table degrees.  Exchangeable across interaction order.
    """
    total = ascending_factorial_log(params.theta + params.alpha, params.alpha, state.K - 1)
    total -= ascending_factorial_log(params.theta + 1.0, 1.0, state.m - 1)
    vr = np.fromiter(state.v_receiver.values(), dtype=float, count=len(state.v_receiver))
    total += _degree_products_log(vr, 1.0 - params.alpha)
    for s, sen in state._senders.items():
        if sen.customers == 0:
            continue
        alpha_s, theta_s = params.local_params(s)
        total += ascending_factorial_log(theta_s + alpha_s, alpha_s, sen.n_tables - 1)
        total -= ascending_factorial_log(theta_s + 1.0, 1.0, sen.customers - 1)
        degrees = np.array(sen.live_degrees(), dtype=float)
        total += _degree_products_log(degrees, 1.0 - alpha_s)
    return total


def sender_log_likelihood(senders_seq, params: HvcmParams) -> float:
    """log p(sender slots) under the sender urn, from the final outdegrees."""
    out: dict[int, int] = {}
    slots = 0
    for senders in senders_seq:
        for s in senders:
            out[s] = out.get(s, 0) + 1
            slots += 1
    total = ascending_factorial_log(
        params.sender_theta + params.sender_alpha, params.sender_alpha, len(out) - 1
    )
    total -= ascending_factorial_log(params.sender_theta + 1.0, 1.0, slots - 1)
    degs = np.fromiter(out.values(), dtype=float, count=len(out))
    total += _degree_products_log(degs, 1.0 - params.sender_alpha)
    return total


def size_log_likelihood(senders_seq, receivers_seq, z, params: HvcmParams) -> float:
    """log p(sizes): k1 factor if modeled, plus per-attribution k2 factor."""
    total = 0.0
    if params.size_dist is not None:
        for senders in senders_seq:
            p = params.size_dist.get(len(senders), 0.0)
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
    if params.local_size_dist or params.local_size_default is not None:
        for zi, receivers in zip(z, receivers_seq):
            dist = params.size_dist_for(zi)
            p = dist.get(len(receivers), 0.0)
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
    return total


def log_likelihood(
    state: SeatingState,
    params: HvcmParams,
    include_sender: bool = True,
    include_sizes: bool = True,
    check: bool = True,
) -> float:
    """Exact log probability of the extended configuration.

    Receiver/seating factor, plus the sender-urn factor and, when size
    distributions are modeled, the size factor.  ``check`` audits the state
    first and raises on inconsistency.
    """
    if check:
        state.audit()
        if len(state.phi) != sum(len(r) for r in state.receivers_seq):
            raise SeatingInvariantError("not every observation is seated")
    total = seating_log_likelihood(state, params)
    if include_sender:
        total += sender_log_likelihood(state.senders_seq, params)
    if include_sizes:
        total += size_log_likelihood(
            state.senders_seq, state.receivers_seq, state.z, params
        )
    return total


# --------------------------------------------------------------------------
# Brute-force marginalization over seatings (tiny instances)
# --------------------------------------------------------------------------

def attribution_log_prob(senders_seq, z, params: HvcmParams) -> float:
    """Sequential log probability of an attribution path."""
    lat = LatentDegreeState()
    total = 0.0
    for senders, zi in zip(senders_seq, z):
        cands, ws = z_weights(lat, senders, params)
        if zi not in cands:
            return -math.inf
        total += math.log(ws[cands.index(zi)] / sum(ws))
        lat.record_attribution(zi)
    return total


def _enumerate_seatings(state: SeatingState, obs, params: HvcmParams, use_leaf: bool):
    """Sum the joint probability over all seat assignments of ``obs``."""
    if not obs:
        if use_leaf:
            return math.exp(seating_log_likelihood(state, params))
        return 1.0
    (n, j), rest = obs[0], obs[1:]
    s = state.z[n]
    r = state.receivers_seq[n][j]
    handles, weights, new_mass, denom = state.seat_probabilities(s, r, params)
    total = 0.0
    for option, w in [*zip(handles, weights), (None, new_mass)]:
        if w <= 0.0:
            continue
        state.force_seat(n, j, option, params)
        sub = _enumerate_seatings(state, rest, params, use_leaf)
        state.remove_observation(n, j)
        total += sub if use_leaf else (w / denom) * sub
    return total


def marginal_likelihood_bruteforce(
    log: InteractionLog,
    params: HvcmParams,
    z=None,
    max_slots: int = 8,
    leaf_likelihood: bool = True,
) -> float:
    """Total probability of a log, marginalized over seatings (and attribution).

    Enumerates every seat assignment, summing ``exp(log_likelihood)`` of each
    complete configuration (or the sequential product of the same path when
    ``leaf_likelihood`` is off), times the sender and size factors.  With
    multi-sender interactions and no ``z``, also sums over attribution
    vectors weighted by their sequential probability.  Exponential cost;
    refuses instances with more than ``max_slots`` receiver slots.
    """
    slots = log.total_receiver_slots()
    if slots > max_slots:
        raise ValueError(f"instance too large: {slots} receiver slots > {max_slots}")
    senders_seq = [rec.senders for rec in log.records]
    receivers_seq = [rec.receivers for rec in log.records]
    obs = [(n, j) for n, rec in enumerate(log.records) for j in range(rec.k2)]

    if z is not None:
        z_options = [list(z)]
    elif all(rec.k1 == 1 for rec in log.records):
        z_options = [[rec.senders[0] for rec in log.records]]
    else:
        z_options = [
            list(zv)
            for zv in product(*[sorted(set(rec.senders)) for rec in log.records])
        ]

    total = 0.0
    for zv in z_options:
        state = SeatingState(senders_seq, receivers_seq, zv)
        inner = _enumerate_seatings(state, obs, params, leaf_likelihood)
        weight = attribution_log_prob(senders_seq, zv, params) + size_log_likelihood(
            senders_seq, receivers_seq, zv, params
        )
        total += math.exp(weight) * inner
    total *= math.exp(sender_log_likelihood(senders_seq, params))
    return total
