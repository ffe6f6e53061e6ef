import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats as spstats

from hvcm import (
    HistoryState,
    HvcmParams,
    LatentDegreeState,
    escape_probability,
    hollywood_simulate,
    sample_receiver,
    sample_sender,
    sample_z,
    simulate,
    simulate_conditional,
    simulate_full,
    stick_breaking_frequencies,
    update_latent,
)
from hvcm.generative import receiver_weights, sender_weights, iter_stick_columns

from _oracles import dirichlet_process_new_prob, global_urn_dist


def frozen_state(pairs, escapes):
    """Build (hist, lat) from observed (s, r, count) and escape (s, r, count)."""
    hist = HistoryState()
    lat = LatentDegreeState()
    for s, r, c in pairs:
        for _ in range(c):
            hist.observe_receiver(s, r)
    for s, r, c in escapes:
        for _ in range(c):
            lat.record_escape(s, r)
    return hist, lat


class TestSampleSender:
    def test_empty_history_always_new(self, rng):
        p = HvcmParams(sender_alpha=0.5, sender_theta=1.0)
        hist = HistoryState()
        assert all(sample_sender(hist, p, rng) == 0 for _ in range(20))

    def test_hand_computed_weights(self):
        # three interactions from one sender: P(same)=2.5/4, P(new)=1.5/4
        p = HvcmParams(sender_alpha=0.5, sender_theta=1.0)
        hist = HistoryState()
        for _ in range(3):
            hist.observe_sender(0)
        ids, w, new_w = sender_weights(hist, p)
        assert ids == [0]
        assert w[0] == pytest.approx(2.5)
        assert new_w == pytest.approx(1.5)
        assert hist.n_sender_slots + p.sender_theta == pytest.approx(4.0)

    def test_zero_discount_matches_closed_form(self, rng):
        # zero discount: new-sender probability has the closed form theta/(n+theta)
        p = HvcmParams(sender_alpha=0.0, sender_theta=2.5)
        hist = HistoryState()
        n_draws = 10_000
        new_count = 0
        for _ in range(n_draws):
            pre = len(hist.seen_senders)
            s = sample_sender(hist, p, rng)
            if s >= pre:
                new_count += 1
            hist.observe_sender(s)
        expected = sum(
            dirichlet_process_new_prob(n, 2.5) for n in range(n_draws)
        )
        se = math.sqrt(expected)  # Poisson-binomial scale
        assert abs(new_count - expected) < 4 * se

    def test_finite_population_never_exceeded(self, rng):
        p = HvcmParams(sender_alpha=-0.5, sender_theta=2.0)  # population of 4
        hist = HistoryState()
        for _ in range(500):
            s = sample_sender(hist, p, rng)
            hist.observe_sender(s)
        assert len(hist.seen_senders) <= 4


class TestSampleReceiver:
    def test_empty_history_new_and_escaped(self, rng):
        p = HvcmParams()
        hist, lat = HistoryState(), LatentDegreeState()
        r, escaped = sample_receiver(hist, lat, 0, p, rng)
        assert r == 0 and escaped

    def test_weights_normalize(self, rng):
        p = HvcmParams(alpha=0.4, theta=2.0, local={0: (0.3, 1.0), 1: (0.8, 0.3)},
                       local_default=(0.5, 1.0))
        res = simulate_full(300, p, rng)
        for s in list(res.hist.out_degree)[:8]:
            ids, total, esc, new_w, denom = receiver_weights(res.hist, res.lat, s, p)
            assert sum(total) + new_w == pytest.approx(1.0, abs=1e-12)
            assert all(e <= t + 1e-15 for e, t in zip(esc, total))

    def test_full_discount_collapses_to_global_urn(self):
        # alpha_s = 1 makes local mass D - V vanish, so normalized weights
        # equal the global urn exactly on any state with V = D
        p = HvcmParams(alpha=0.2, theta=3.0, local_default=(1.0, 0.7))
        hist, lat = frozen_state(
            pairs=[(0, 0, 2), (0, 1, 1), (1, 2, 3)],
            escapes=[(0, 0, 2), (0, 1, 1), (1, 2, 3)],
        )
        ids, total, esc, new_w, denom = receiver_weights(hist, lat, 0, p)
        norm = sum(total) + new_w
        urn = global_urn_dist(lat, p)
        for r, t in zip(ids, total):
            assert t / norm == pytest.approx(urn[r], rel=1e-12)
        assert new_w / norm == pytest.approx(urn["new"], rel=1e-12)

    def test_huge_local_strength_approaches_global_urn(self, rng):
        # theta_s -> infinity forces every draw through the global level
        p = HvcmParams(alpha=0.3, theta=2.0, local_default=(0.0, 1e6))
        hist, lat = frozen_state(
            pairs=[(0, r, c) for r, c in enumerate((4, 3, 2, 2, 1))],
            escapes=[(0, r, 1) for r in range(5)],
        )
        urn = global_urn_dist(lat, p)
        counts = Counter()
        n = 100_000
        for _ in range(n):
            r, _ = sample_receiver(hist, lat, 0, p, rng)
            counts[r if r in urn else "new"] += 1
        tv = 0.5 * sum(abs(counts[k] / n - urn[k]) for k in urn)
        assert tv < 0.01

    def test_token_simulator_matches_explicit_weights(self, rng):
        # the O(1) draw path and the explicit weight table target the same law
        p = HvcmParams(alpha=0.4, theta=2.0, local_default=(0.35, 1.2),
                       sender_alpha=0.2, sender_theta=1.0,
                       local_size_default={1: 0.5, 2: 0.5})
        probs = Counter()
        base = simulate_full(60, p, np.random.default_rng(5))
        s = max(base.hist.out_degree, key=base.hist.out_degree.get)
        ids, total, esc, new_w, _ = receiver_weights(base.hist, base.lat, s, p)
        counts = Counter()
        n = 200_000
        for _ in range(n):
            r, _ = sample_receiver(base.hist, base.lat, s, p, rng)
            counts[r if r in set(ids) else "new"] += 1
        for r, t in zip(ids, total):
            assert counts[r] / n == pytest.approx(t, abs=4 * math.sqrt(t / n) + 1e-4)
        assert counts["new"] / n == pytest.approx(new_w, abs=4 * math.sqrt(new_w / n) + 1e-4)


class TestUpdateLatent:
    def test_first_occurrence_forces_latent_one(self, rng):
        p = HvcmParams()
        hist, lat = frozen_state(pairs=[(0, 0, 3)], escapes=[(0, 0, 1)])
        assert update_latent(lat, hist, 0, 1, escaped=None, params=p, rng=rng)
        assert lat.v(0, 1) == 1

    def test_escape_certain_on_empty_local_state(self):
        p = HvcmParams(local_default=(0.3, 2.0))
        hist, lat = HistoryState(), LatentDegreeState()
        assert escape_probability(hist, lat, 0, p) == pytest.approx(1.0)

    def test_empirical_increment_rate(self, rng):
        # V(s,.)=2, m(s)=10, alpha_s=0.3, theta_s=2 -> escape rate (2+0.6)/12
        p = HvcmParams(alpha=0.4, theta=3.0, local_default=(0.3, 2.0))
        hist, lat = frozen_state(
            pairs=[(0, 0, 6), (0, 1, 4)],
            escapes=[(0, 0, 1), (0, 1, 1)],
        )
        assert lat.v_sender(0) == 2 and hist.local_total[0] == 10
        expected = (2.0 + 0.6) / 12.0
        assert escape_probability(hist, lat, 0, p) == pytest.approx(expected)
        n = 100_000
        hits = 0
        for _ in range(n):
            _, escaped = sample_receiver(hist, lat, 0, p, rng)
            hits += escaped
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(hits / n - expected) < 3 * se

    def test_route_draw_matches_conditional(self, rng):
        # escape | r from update_latent agrees with the joint decomposition
        p = HvcmParams(alpha=0.4, theta=3.0, local_default=(0.3, 2.0))
        hits = 0
        n = 50_000
        for _ in range(n):
            hist, lat = frozen_state(
                pairs=[(0, 0, 6), (0, 1, 4)],
                escapes=[(0, 0, 1), (0, 1, 1)],
            )
            hits += update_latent(lat, hist, 0, 0, escaped=None, params=p, rng=rng)
        ids, total, esc, _, _ = receiver_weights(*frozen_state(
            pairs=[(0, 0, 6), (0, 1, 4)], escapes=[(0, 0, 1), (0, 1, 1)]
        ), 0, p)
        expected = esc[ids.index(0)] / total[ids.index(0)]
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(hits / n - expected) < 4 * se


class TestSampleZ:
    def test_singleton_support(self, rng):
        lat = LatentDegreeState()
        p = HvcmParams()
        assert sample_z(lat, (7,), p, rng) == 7
        assert lat.z_degree == {7: 1}

    def test_fresh_pair_uniform(self, rng):
        p = HvcmParams(z_alpha=0.5, z_theta=1.0)
        counts = Counter()
        n = 20_000
        for _ in range(n):
            lat = LatentDegreeState()
            counts[sample_z(lat, (1, 2), p, rng)] += 1
        assert abs(counts[1] / n - 0.5) < 0.02

    def test_hand_computed_weights(self, rng):
        # D^z(a)=4, b unseen, two seen overall: P(a)=3.5/5.5, P(b)=2/5.5
        p = HvcmParams(z_alpha=0.5, z_theta=1.0)
        counts = Counter()
        n = 50_000
        for _ in range(n):
            lat = LatentDegreeState(z_degree={0: 4, 9: 3})
            counts[sample_z(lat, (0, 1), p, rng)] += 1
        assert counts[0] / n == pytest.approx(3.5 / 5.5, abs=0.01)
        assert counts[1] / n == pytest.approx(2.0 / 5.5, abs=0.01)

    def test_repeated_sender_uses_membership(self, rng):
        p = HvcmParams(z_alpha=0.5, z_theta=1.0)
        counts = Counter()
        n = 20_000
        for _ in range(n):
            lat = LatentDegreeState()
            counts[sample_z(lat, (1, 1, 2), p, rng)] += 1
        # multiplicity of sender 1 does not boost its weight
        assert abs(counts[1] / n - 0.5) < 0.02


class TestSimulate:
    def test_empty(self, rng):
        log = simulate(0, HvcmParams(), rng)
        assert log.n == 0

    def test_seed_determinism(self):
        p = HvcmParams(size_dist={1: 0.7, 2: 0.3}, local_size_default={1: 0.5, 2: 0.5})
        a = simulate(200, p, np.random.default_rng(99))
        b = simulate(200, p, np.random.default_rng(99))
        assert a == b

    def test_escape_count_identity(self, rng):
        p = HvcmParams(local_size_default={1: 0.4, 2: 0.4, 3: 0.2})
        res = simulate_full(400, p, rng)
        flat = {(s, r): v for s, row in res.lat.latent.items() for r, v in row.items()}
        assert dict(res.escape_counts) == flat
        col = Counter()
        for row in res.lat.latent.values():
            col.update(row)
        assert dict(col) == res.lat.latent_receiver_total

    def test_states_consistent(self, rng):
        p = HvcmParams(size_dist={1: 0.6, 2: 0.4}, local_size_default={1: 0.5, 2: 0.5})
        res = simulate_full(300, p, rng)
        res.hist.check_conservation()
        res.lat.check_against(res.hist)
        assert sum(res.lat.z_degree.values()) == 300

    def test_finite_sender_population_cap(self, rng):
        p = HvcmParams(sender_alpha=-0.4, sender_theta=1.2)  # three senders
        log = simulate(300, p, rng)
        assert len(log.sender_vocab) <= 3

    def test_finite_global_receiver_population_cap(self, rng):
        p = HvcmParams(alpha=-0.5, theta=1.0, local_default=(0.5, 1.0))  # two receivers
        log = simulate(300, p, rng)
        assert len(log.receiver_vocab) <= 2


class TestSimulateConditional:
    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            simulate_conditional([(0,)], [1, 1], HvcmParams(), rng)

    def test_zero_size_rejected(self, rng):
        with pytest.raises(ValueError):
            simulate_conditional([(0,)], [0], HvcmParams(), rng)

    def test_single_draw(self, rng):
        log = simulate_conditional([(0,)], [1], HvcmParams(), rng)
        assert log.n == 1 and log.records[0].receivers == (0,)

    def test_matches_unconditional_in_distribution(self):
        # resimulating the sender marginal reproduces unconditional v(Y) on average
        p = HvcmParams(
            sender_alpha=0.3, sender_theta=2.0, alpha=0.5, theta=5.0,
            local_default=(0.4, 1.5), local_size_default={1: 0.5, 2: 0.5},
        )
        n = 150
        uncond, cond = [], []
        for seed in range(200):
            rng = np.random.default_rng(1000 + seed)
            res = simulate_full(n, p, rng)
            uncond.append(len(res.log.receiver_vocab))
            rng2 = np.random.default_rng(5000 + seed)
            res2 = simulate_full(n, p, rng2)
            senders = [rec.senders for rec in res2.log.records]
            sizes = [rec.k2 for rec in res2.log.records]
            rep = simulate_conditional(
                senders, sizes, p, np.random.default_rng(9000 + seed), z_seq=res2.z
            )
            cond.append(len(rep.receiver_vocab))
        t = spstats.ttest_ind(uncond, cond)
        lo_u, hi_u = np.percentile(uncond, [2.5, 97.5])
        assert lo_u <= np.mean(cond) <= hi_u
        assert t.pvalue > 0.001


class TestHollywood:
    def test_empty(self, rng):
        assert hollywood_simulate(0, 0.5, 1.0, {1: 1.0}, rng).n == 0

    def test_first_slot_new(self, rng):
        log = hollywood_simulate(1, 0.5, 1.0, {1: 1.0}, rng)
        assert log.records[0].senders == (0,)

    def test_shared_population(self, rng):
        log = hollywood_simulate(50, 0.5, 1.0, {1: 0.5, 2: 0.5}, rng)
        assert log.senders_equal_receivers
        assert log.sender_vocab is log.receiver_vocab

    def test_growth_exponent(self):
        # distinct vertices grow like (slots)^alpha for a flat urn
        log = hollywood_simulate(30_000, 0.6, 1.0, {1: 1.0}, np.random.default_rng(3))
        seen = set()
        ns, vs = [], []
        for i, rec in enumerate(log.records, 1):
            seen.update(rec.senders)
            seen.update(rec.receivers)
            if i in (1000, 3000, 10_000, 20_000, 30_000):
                ns.append(2 * i)
                vs.append(len(seen))
        slope = np.polyfit(np.log(ns), np.log(vs), 1)[0]
        assert abs(slope - 0.6) < 0.05


class TestStickBreaking:
    def test_invalid_regime(self, rng):
        p = HvcmParams(local={0: (0.2, 1.0)})
        with pytest.raises(ValueError):
            stick_breaking_frequencies(p, 10, rng)

    def test_truncation_one(self, rng):
        p = HvcmParams(local={0: (0.0, 2.0)})
        sample = stick_breaking_frequencies(p, 1, rng, adaptive=False)
        assert len(sample.global_weights) == 1
        assert sample.global_tail == pytest.approx(1.0 - sample.global_weights[0])
        assert sample.sender_tail == pytest.approx(1.0 - sample.sender_weights[0])

    def test_adaptive_tail(self, rng):
        # stick tails decay like k**(-(1-a)/a); discounts must stay small for
        # a 1e-6 truncation to be reachable with a sane atom budget
        p = HvcmParams(alpha=0.25, theta=2.0, sender_alpha=0.3, sender_theta=1.0,
                       local={0: (0.0, 2.0)})
        sample = stick_breaking_frequencies(p, 4, rng, tail_tol=1e-6)
        assert sample.global_tail < 1e-6
        assert sample.sender_tail < 1e-6
        assert sample.local_tails[0] < 1e-3  # local tail tracks the global one

    def test_local_mean_matches_global(self):
        # E[f_r | global sticks] equals the global weight
        rng = np.random.default_rng(12)
        alpha, theta, theta_s = 0.3, 2.0, 1.5
        n = 10_000
        sums = []
        pis = []
        for pi, f in iter_stick_columns(alpha, theta, theta_s, n, rng, tail_tol=1e-4):
            pis.append(pi)
            sums.append(f)
            if len(sums) == 5:
                break
        for col in range(5):
            diff = sums[col].mean() - pis[col].mean()
            se = sums[col].std(ddof=1) / math.sqrt(n) + pis[col].std(ddof=1) / math.sqrt(n)
            assert abs(diff) < 3.5 * se
