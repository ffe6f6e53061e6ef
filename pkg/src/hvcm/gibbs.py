"""Auxiliary-variable Gibbs sampling for the urn parameters.

Each strength parameter gets a Gamma-conjugate update and each discount a
Beta-conjugate update after augmenting with the standard auxiliary variables
for ascending-factorial likelihoods: one Beta-distributed x per restaurant
(handling the rising denominator), Bernoulli y's over new-table events, and
Bernoulli z's over within-table repeat events.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .generative import LatentDegreeState, sample_z, z_weights
from .interactions import InteractionLog
from .params import HvcmParams
from .seating import SeatingState, log_likelihood

_EPS = 1e-12


@dataclass(frozen=True)
class GammaPrior:
    """Gamma prior in (shape, scale) form; the conjugate update works on the rate."""

    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("Gamma hyperparameters must be positive")

    @property
    def rate(self) -> float:
        return 1.0 / self.scale

    @property
    def mean(self) -> float:
        return self.shape * self.scale


@dataclass(frozen=True)
class BetaPrior:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta hyperparameters must be positive")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass
class GibbsPriors:
    """Priors for the sampled parameters.

    ``local_alpha`` fixes a Beta prior for every local discount; when None the
    local discounts are tied to the global one through
    Beta(phi * alpha, phi * (1 - alpha)) with phi = ``local_alpha_concentration``.
    ``local_theta`` may be a single prior or a per-sender map; with
    ``local_theta_from_fits`` the per-sender map is built inside ``fit`` from
    flat-urn fits of each sender's receiver slots.  ``sender_params_mode`` is
    either "fixed" (point estimates from a flat-urn fit of the sender slots)
    or "sampled" (same auxiliary scheme, using the sender_* priors).
    """

    theta: GammaPrior = GammaPrior(1.0, 10_000.0)
    alpha: BetaPrior = BetaPrior(1.0, 1.0)
    local_theta: GammaPrior | dict[int, GammaPrior] = GammaPrior(1.0, 1000.0)
    local_alpha: BetaPrior | None = None
    local_alpha_concentration: float = 10.0
    local_theta_from_fits: bool = False
    sender_params_mode: str = "fixed"
    sender_theta: GammaPrior = GammaPrior(1.0, 10_000.0)
    sender_alpha: BetaPrior = BetaPrior(1.0, 1.0)

    def local_theta_for(self, s: int) -> GammaPrior:
        if isinstance(self.local_theta, dict):
            return self.local_theta.get(s, GammaPrior(1.0, 1000.0))
        return self.local_theta

    def local_alpha_shape(self, alpha: float) -> tuple[float, float]:
        if self.local_alpha is not None:
            return self.local_alpha.a, self.local_alpha.b
        phi = self.local_alpha_concentration
        return max(phi * alpha, _EPS), max(phi * (1.0 - alpha), _EPS)

    def local_alpha_mean(self, alpha: float) -> float:
        a, b = self.local_alpha_shape(alpha)
        return a / (a + b)


def default_priors(mode: str = "conjugate") -> GibbsPriors:
    """Stock prior choices.

    "conjugate": diffuse Gamma(1, 10000) on the global strength, uniform
    global discount, Gamma(1, 1000) local strengths, local discounts tied to
    the global one.  "enron": Gamma(2, 1000) / Beta(1, 1) globally with
    Gamma(1, 20) / Beta(1, 0.9) locally.  "hollywood_fitted": local strength
    priors are deferred to per-sender flat-urn fits, Gamma(theta_hat/100, 100).
    """
    if mode == "conjugate":
        return GibbsPriors()
    if mode == "enron":
        return GibbsPriors(
            theta=GammaPrior(2.0, 1000.0),
            alpha=BetaPrior(1.0, 1.0),
            local_theta=GammaPrior(1.0, 20.0),
            local_alpha=BetaPrior(1.0, 0.9),
        )
    if mode == "hollywood_fitted":
        return GibbsPriors(
            local_alpha=BetaPrior(1.0, 1.0),
            local_theta_from_fits=True,
        )
    raise ValueError(f"unknown prior mode {mode!r}")


@dataclass
class FitConfig:
    iterations: int = 1000
    burn_in: int = 500
    seed: int = 0
    z_mc_samples: int = 25
    z_every: int = 1
    z_alpha: float = 0.5
    z_theta: float = 1.0
    record_z: bool = True

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must be in [0, iterations)")
        if self.seed is None:
            raise ValueError("a seed is mandatory")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "z_mc_samples": self.z_mc_samples,
            "z_every": self.z_every,
            "z_alpha": self.z_alpha,
            "z_theta": self.z_theta,
        }


@dataclass
class AuxiliaryDraws:
    """Auxiliary variables of one restaurant's conjugate update."""

    x: float | None           # Beta(strength + 1, customers - 1); None when degenerate
    y: np.ndarray             # Bernoulli over new-table events, length tables - 1
    z_zeros: int              # number of zero repeat-event indicators
    n_z: int                  # total repeat-event indicators

    @property
    def neg_log_x(self) -> float:
        return 0.0 if self.x is None else -math.log(self.x)


def _draw_auxiliaries(theta, alpha, n_tables, n_customers, table_sizes, rng) -> AuxiliaryDraws:
    x = None
    if n_customers >= 2:
        x = float(rng.beta(theta + 1.0, n_customers - 1))
        x = min(max(x, 1e-300), 1.0 - _EPS)
    if n_tables >= 2:
        i = np.arange(1, n_tables, dtype=float)
        y = rng.random(n_tables - 1) < theta / (theta + alpha * i)
    else:
        y = np.zeros(0, dtype=bool)
    sizes = np.asarray(table_sizes, dtype=np.int64)
    sizes = sizes[sizes >= 2]
    if len(sizes):
        js = np.concatenate([np.arange(1, c) for c in sizes]).astype(float)
        z = rng.random(len(js)) < (js - 1.0) / (js - alpha)
        z_zeros = int(len(js) - z.sum())
        n_z = int(len(js))
    else:
        z_zeros = 0
        n_z = 0
    return AuxiliaryDraws(x=x, y=np.asarray(y, dtype=bool), z_zeros=z_zeros, n_z=n_z)


def _update_pair(aux: AuxiliaryDraws, theta_prior: GammaPrior, alpha_ab, rng):
    y_sum = int(aux.y.sum())
    shape = theta_prior.shape + y_sum
    rate = theta_prior.rate + aux.neg_log_x
    theta = float(rng.gamma(shape, 1.0 / rate))
    theta = max(theta, _EPS)
    a0, b0 = alpha_ab
    alpha = float(rng.beta(a0 + (len(aux.y) - y_sum), b0 + aux.z_zeros))
    alpha = min(max(alpha, _EPS), 1.0 - _EPS)
    return theta, alpha


def gibbs_iteration(state: SeatingState, params: HvcmParams, priors: GibbsPriors, rng) -> HvcmParams:
    """One sweep: reseat every observation, then update all urn parameters.

    Order within the sweep: reseating pass, global auxiliaries, global
    strength and discount, then per-sender auxiliaries and parameters.
    Degenerate count ranges contribute empty sums, so the conjugate updates
    fall back to their priors.
    """
    for n, receivers in enumerate(state.receivers_seq):
        for j in range(len(receivers)):
            state.reseat_observation(n, j, params, rng)

    aux = _draw_auxiliaries(
        params.theta, params.alpha, state.K, state.m,
        list(state.v_receiver.values()), rng,
    )
    theta, alpha = _update_pair(aux, priors.theta, (priors.alpha.a, priors.alpha.b), rng)

    local = dict(params.local)
    for s in sorted(state._senders):
        sen = state._senders[s]
        if sen.customers == 0:
            continue
        alpha_s, theta_s = params.local_params(s)
        aux_s = _draw_auxiliaries(
            theta_s, alpha_s, sen.n_tables, sen.customers, sen.live_degrees(), rng
        )
        theta_s, alpha_s = _update_pair(
            aux_s, priors.local_theta_for(s), priors.local_alpha_shape(alpha), rng
        )
        local[s] = (alpha_s, theta_s)

    out = replace(params, theta=theta, alpha=alpha, local=local)
    if priors.sender_params_mode == "sampled":
        degs = Counter()
        for senders in state.senders_seq:
            degs.update(senders)
        aux_t = _draw_auxiliaries(
            params.sender_theta, params.sender_alpha,
            len(degs), sum(degs.values()), list(degs.values()), rng,
        )
        s_theta, s_alpha = _update_pair(
            aux_t, priors.sender_theta, (priors.sender_alpha.a, priors.sender_alpha.b), rng
        )
        out = replace(out, sender_alpha=s_alpha, sender_theta=s_theta)
    return out


# --------------------------------------------------------------------------
# Flat-urn fit (used for sender-level point estimates and local priors)
# --------------------------------------------------------------------------

def hollywood_fit(
    slots,
    theta_prior: GammaPrior = GammaPrior(1.0, 10_000.0),
    alpha_prior: BetaPrior = BetaPrior(1.0, 1.0),
    iterations: int = 400,
    burn_in: int = 200,
    rng=None,
) -> tuple[float, float]:
    """Posterior means (alpha_hat, theta_hat) of a single flat urn.

    ``slots`` is the flat draw sequence (any hashables); only the multiset of
    per-item counts matters.  Degenerate inputs return the prior means.
    """
    counts = Counter(slots)
    degrees = np.array(sorted(counts.values()), dtype=np.int64)
    v = len(degrees)
    m = int(degrees.sum())
    if m <= 1:
        return alpha_prior.mean, theta_prior.mean
    if rng is None:
        rng = np.random.default_rng(0)
    theta = theta_prior.mean
    alpha = alpha_prior.mean
    acc_t, acc_a, kept = 0.0, 0.0, 0
    for it in range(iterations):
        aux = _draw_auxiliaries(theta, alpha, v, m, degrees, rng)
        theta, alpha = _update_pair(aux, theta_prior, (alpha_prior.a, alpha_prior.b), rng)
        if it >= burn_in:
            acc_t += theta
            acc_a += alpha
            kept += 1
    return acc_a / kept, acc_t / kept


# --------------------------------------------------------------------------
# Attribution resampling for multi-sender interactions
# --------------------------------------------------------------------------

def _mc_receiver_set_loglik(state, s, receivers, params, n_mc, rng) -> float:
    """Monte Carlo estimate of log p(receiver list | attribution s).

    Sequential importance estimate: routes are drawn from their exact
    conditional given each observed receiver, so each run's weight is the
    product of the marginal per-receiver predictives along the run.
    """
    alpha_s, theta_s = params.local_params(s)
    sen = state.sender_seating(s)
    base_d = dict(sen.d) if sen else {}
    base_vrow = (
        {r: len(hs) for r, hs in sen.by_label.items() if hs} if sen else {}
    )
    base_vtot = sen.n_tables if sen else 0
    base_ms = sen.customers if sen else 0
    g_theta, g_alpha = params.theta, params.alpha

    total = 0.0
    runs = np.zeros(n_mc)
    for run in range(n_mc):
        dd: dict[int, int] = {}
        dv: dict[int, int] = {}
        dvr: dict[int, int] = {}
        dvt = 0
        dm = 0
        dk = 0
        logw = 0.0
        for idx, r in enumerate(receivers):
            d = base_d.get(r, 0) + dd.get(r, 0)
            vv = base_vrow.get(r, 0) + dv.get(r, 0)
            vtot = base_vtot + dvt
            m_s = base_ms + idx
            vr = state.v_receiver.get(r, 0) + dvr.get(r, 0)
            m = state.m + dm
            k = state.K + dk
            if vr > 0:
                g = (vr - g_alpha) / (m + g_theta)
            else:
                g = max(g_theta + g_alpha * k, 0.0) / (m + g_theta)
            local_part = d - alpha_s * vv
            esc_part = (theta_s + alpha_s * vtot) * g
            p = (local_part + esc_part) / (m_s + theta_s)
            if p <= 0.0:
                logw = -math.inf
                break
            logw += math.log(p)
            escaped = rng.random() * (local_part + esc_part) < esc_part
            dd[r] = dd.get(r, 0) + 1
            if escaped:
                dv[r] = dv.get(r, 0) + 1
                if vr == 0:
                    dk += 1
                dvr[r] = dvr.get(r, 0) + 1
                dvt += 1
                dm += 1
        runs[run] = logw
    peak = runs.max()
    if not np.isfinite(peak):
        return -math.inf
    return float(peak + np.log(np.exp(runs - peak).mean()))


def sample_z_posterior(
    state: SeatingState,
    i: int,
    params: HvcmParams,
    rng,
    n_mc: int = 25,
    prior_counts: Counter | None = None,
) -> int:
    """Resample the attribution of interaction ``i`` and reseat it.

    The candidate posterior combines the attribution-urn prior (leave-one-out
    counts over the other interactions) with a Monte Carlo estimate of each
    candidate's receiver-list likelihood, marginalized over seatings.
    """
    senders = state.senders_seq[i]
    cands = sorted(set(senders))
    k2 = len(state.receivers_seq[i])
    if len(cands) == 1:
        return state.z[i]
    for j in range(k2):
        state.remove_observation(i, j)
    if prior_counts is None:
        z_deg = Counter(z for l, z in enumerate(state.z) if l != i)
    else:
        z_deg = prior_counts.copy()
        z_deg[state.z[i]] -= 1
        if z_deg[state.z[i]] == 0:
            del z_deg[state.z[i]]
    lat = LatentDegreeState(z_degree=dict(z_deg))
    _, prior_w = z_weights(lat, cands, params)

    logp = np.empty(len(cands))
    for c, s in enumerate(cands):
        logp[c] = math.log(max(prior_w[c], 1e-300)) + _mc_receiver_set_loglik(
            state, s, state.receivers_seq[i], params, n_mc, rng
        )
    w = np.exp(logp - logp.max())
    w /= w.sum()
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(w), u))
    idx = min(idx, len(cands) - 1)
    state.z[i] = cands[idx]
    for j in range(k2):
        state.seat_observation(i, j, params, rng)
    return cands[idx]


def z_posterior_enumerate(state: SeatingState, i: int, params: HvcmParams) -> dict[int, float]:
    """Exact attribution posterior of interaction ``i`` by seat enumeration.

    Oracle-grade; exponential in the interaction's receiver count.  The state
    must not currently include interaction ``i``'s observations.
    """
    senders = state.senders_seq[i]
    cands = sorted(set(senders))
    z_deg = Counter(z for l, z in enumerate(state.z) if l != i)
    lat = LatentDegreeState(z_degree=dict(z_deg))
    _, prior_w = z_weights(lat, cands, params)

    def marginal(s: int) -> float:
        old = state.z[i]
        state.z[i] = s
        obs = [(i, j) for j in range(len(state.receivers_seq[i]))]

        def rec(pos: int) -> float:
            if pos == len(obs):
                return 1.0
            n, j = obs[pos]
            r = state.receivers_seq[n][j]
            handles, weights, new_mass, denom = state.seat_probabilities(s, r, params)
            total = 0.0
            for option, wgt in [*zip(handles, weights), (None, new_mass)]:
                if wgt <= 0.0:
                    continue
                state.force_seat(n, j, option, params)
                total += (wgt / denom) * rec(pos + 1)
                state.remove_observation(n, j)
            return total

        val = rec(0)
        state.z[i] = old
        return val

    post = {s: prior_w[c] * marginal(s) for c, s in enumerate(cands)}
    norm = sum(post.values())
    return {s: p / norm for s, p in post.items()}


# --------------------------------------------------------------------------
# Full fit
# --------------------------------------------------------------------------

@dataclass
class GibbsTrace:
    """Per-iteration posterior samples and diagnostics."""

    theta: np.ndarray
    alpha: np.ndarray
    sender_alpha: np.ndarray
    sender_theta: np.ndarray
    local_senders: list[int]
    local_theta: np.ndarray       # (iterations, len(local_senders))
    local_alpha: np.ndarray
    log_lik: np.ndarray
    k_global: np.ndarray
    m_global: np.ndarray
    z_samples: dict[int, np.ndarray]
    z_final: list[int]
    burn_in: int
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.theta)

    def post_burn(self, arr: np.ndarray) -> np.ndarray:
        return arr[self.burn_in:]

    def posterior_mean_theta(self) -> float:
        return float(self.post_burn(self.theta).mean())

    def posterior_mean_alpha(self) -> float:
        return float(self.post_burn(self.alpha).mean())

    def local_posterior_means(self) -> dict[int, tuple[float, float]]:
        out = {}
        for col, s in enumerate(self.local_senders):
            out[s] = (
                float(self.post_burn(self.local_alpha[:, col]).mean()),
                float(self.post_burn(self.local_theta[:, col]).mean()),
            )
        return out

    def z_posterior(self, i: int) -> dict[int, float]:
        """Post-burn-in attribution frequencies of interaction ``i``."""
        if i not in self.z_samples:
            return {self.z_final[i]: 1.0}
        zs = self.z_samples[i][self.burn_in:]
        counts = Counter(zs.tolist())
        n = len(zs)
        return {int(s): c / n for s, c in sorted(counts.items())}

    def params_at(self, it: int, base: HvcmParams) -> HvcmParams:
        local = {
            s: (float(self.local_alpha[it, col]), float(self.local_theta[it, col]))
            for col, s in enumerate(self.local_senders)
        }
        return replace(
            base,
            theta=float(self.theta[it]),
            alpha=float(self.alpha[it]),
            sender_alpha=float(self.sender_alpha[it]),
            sender_theta=float(self.sender_theta[it]),
            local=local,
        )

    def z_at(self, it: int) -> list[int]:
        z = list(self.z_final)
        for i, arr in self.z_samples.items():
            z[i] = int(arr[it])
        return z


def fit(log: InteractionLog, priors: GibbsPriors | None = None, config: FitConfig | None = None) -> GibbsTrace:
    """Posterior sampling for all parameters given an observed log.

    Seating is initialized by one sequential pass of the generative
    probabilities, attributions of multi-sender interactions are resampled
    every ``z_every`` sweeps, and the trace records every parameter plus the
    joint log likelihood per iteration.  Fully deterministic given the seed.
    """
    if log.n == 0:
        raise ValueError("cannot fit an empty log")
    priors = priors or default_priors()
    config = config or FitConfig()
    rng = np.random.default_rng(config.seed)

    # Sender-level point estimates from the flat sender-slot urn.
    sender_slots = [s for rec in log.records for s in rec.senders]
    if priors.sender_params_mode == "fixed":
        s_alpha, s_theta = hollywood_fit(
            sender_slots, priors.sender_theta, priors.sender_alpha,
            iterations=300, burn_in=150, rng=rng,
        )
    else:
        s_alpha, s_theta = priors.sender_alpha.mean, priors.sender_theta.mean

    # Initial attribution: forced for single-sender records, urn prior otherwise.
    lat = LatentDegreeState()
    z0 = []
    params0 = HvcmParams(z_alpha=config.z_alpha, z_theta=config.z_theta)
    for rec in log.records:
        z0.append(sample_z(lat, rec.senders, params0, rng))
    multi_idx = [i for i, rec in enumerate(log.records) if rec.k1 > 1]

    local_theta_priors = priors.local_theta
    if priors.local_theta_from_fits:
        local_theta_priors = {}
        per_sender_slots: dict[int, list[int]] = {}
        for i, rec in enumerate(log.records):
            per_sender_slots.setdefault(z0[i], []).extend(rec.receivers)
        for s, slots in sorted(per_sender_slots.items()):
            _, theta_hat = hollywood_fit(
                slots, iterations=200, burn_in=100, rng=rng
            )
            local_theta_priors[s] = GammaPrior(max(theta_hat, 1.0) / 100.0, 100.0)
        priors = replace(priors, local_theta=local_theta_priors)

    alpha0 = priors.alpha.mean
    local_alpha0 = priors.local_alpha_mean(alpha0)
    senders_all = sorted({s for rec in log.records for s in rec.senders})
    local0 = {
        s: (local_alpha0, priors.local_theta_for(s).mean) for s in senders_all
    }
    params = HvcmParams(
        sender_alpha=s_alpha,
        sender_theta=s_theta,
        alpha=alpha0,
        theta=priors.theta.mean,
        local=local0,
        local_default=(local_alpha0, priors.local_theta_for(-1).mean),
        z_alpha=config.z_alpha,
        z_theta=config.z_theta,
    )
    state = SeatingState.from_log(log, params, z=z0, rng=rng)

    iters = config.iterations
    n_local = len(senders_all)
    col = {s: c for c, s in enumerate(senders_all)}
    trace = GibbsTrace(
        theta=np.zeros(iters),
        alpha=np.zeros(iters),
        sender_alpha=np.zeros(iters),
        sender_theta=np.zeros(iters),
        local_senders=senders_all,
        local_theta=np.zeros((iters, n_local)),
        local_alpha=np.zeros((iters, n_local)),
        log_lik=np.zeros(iters),
        k_global=np.zeros(iters, dtype=np.int64),
        m_global=np.zeros(iters, dtype=np.int64),
        z_samples={i: np.zeros(iters, dtype=np.int64) for i in multi_idx}
        if config.record_z
        else {},
        z_final=list(z0),
        burn_in=config.burn_in,
        seed=config.seed,
        config=config.to_dict(),
    )

    z_counter = Counter(z0)
    for it in range(iters):
        params = gibbs_iteration(state, params, priors, rng)
        if multi_idx and it % config.z_every == 0:
            for i in multi_idx:
                old = state.z[i]
                new = sample_z_posterior(
                    state, i, params, rng, config.z_mc_samples, prior_counts=z_counter
                )
                if new != old:
                    z_counter[old] -= 1
                    if z_counter[old] == 0:
                        del z_counter[old]
                    z_counter[new] += 1
        trace.theta[it] = params.theta
        trace.alpha[it] = params.alpha
        trace.sender_alpha[it] = params.sender_alpha
        trace.sender_theta[it] = params.sender_theta
        for s, (a_s, t_s) in params.local.items():
            if s in col:
                trace.local_alpha[it, col[s]] = a_s
                trace.local_theta[it, col[s]] = t_s
        trace.log_lik[it] = log_likelihood(state, params, check=False)
        trace.k_global[it] = state.K
        trace.m_global[it] = state.m
        for i in multi_idx:
            if config.record_z:
                trace.z_samples[i][it] = state.z[i]
    trace.z_final = list(state.z)
    return trace
