import math
from collections import Counter

import numpy as np
import pytest

from hvcm import (
    HvcmParams,
    SeatingInvariantError,
    SeatingState,
    load_checkpoint,
    save_checkpoint,
    simulate_full,
)
from hvcm.generative import receiver_weights
from hvcm.interactions import replay_history


def build_state(log, params, z=None, seed=0):
    return SeatingState.from_log(log, params, z=z, rng=np.random.default_rng(seed))


PARAMS = HvcmParams(
    sender_alpha=0.3, sender_theta=2.0, alpha=0.4, theta=2.0,
    local={0: (0.5, 1.0), 1: (0.2, 2.0)}, local_default=(0.5, 1.0),
    local_size_default={1: 0.6, 2: 0.4},
)


class TestSeatProbabilities:
    def test_empty_sender_forces_new_vertex(self):
        state = SeatingState([(0,)], [(0,)], [0])
        handles, weights, new_mass, denom = state.seat_probabilities(0, 0, PARAMS)
        assert handles == [] and weights == []
        assert new_mass > 0

    def test_hand_computed_weights(self):
        # sender 0: one vertex (label 7, degree 3), alpha_s=0.5, theta_s=1;
        # global: V(.,7)=2, m=4, alpha=0.2, theta=5
        # -> existing vertex 2.5, new vertex 1.5 * (1.8 / 9)
        params = HvcmParams(alpha=0.2, theta=5.0, local={0: (0.5, 1.0)})
        state = SeatingState(
            [(0,)] * 3 + [(1,)] * 3,
            [(7,), (7,), (7,), (7,), (8,), (8,)],
            [0] * 3 + [1] * 3,
        )
        state.force_seat(0, 0, None, params)   # sender 0's single vertex, label 7
        state.force_seat(1, 0, 0, params)
        state.force_seat(2, 0, 0, params)      # degree 3
        state.force_seat(3, 0, None, params)   # sender 1: second label-7 vertex
        state.force_seat(4, 0, None, params)   # sender 1: label-8 vertex
        state.force_seat(5, 0, None, params)   # sender 1: another label-8 vertex
        assert state.m == 4 and state.v_receiver[7] == 2
        assert state.v_sender(0) == 1 and state.m_sender(0) == 3
        handles, weights, new_mass, denom = state.seat_probabilities(0, 7, params)
        assert weights == [pytest.approx(2.5)]
        assert new_mass == pytest.approx(1.5 * (1.8 / 9.0))
        assert denom == pytest.approx(3.0 + 1.0)

    def test_seat_marginal_reproduces_sequential_weights(self, rng):
        # summing seat x label weights over outcomes equals the collapsed
        # per-receiver weights, on random mid-simulation states
        for trial in range(50):
            p = HvcmParams(
                sender_alpha=0.3, sender_theta=2.0,
                alpha=float(rng.uniform(0.05, 0.9)),
                theta=float(rng.uniform(0.5, 8.0)),
                local_default=(float(rng.uniform(0.0, 0.95)), float(rng.uniform(0.3, 4.0))),
                local_size_default={1: 0.5, 2: 0.5},
            )
            res = simulate_full(int(rng.integers(5, 40)), p, rng)
            state = build_state(res.log, p, z=res.z, seed=int(rng.integers(1e6)))
            lat = state.latent_state()
            hist = replay_history(res.log, attribution=res.z)
            s = int(rng.choice(list(hist.out_degree)))
            ids, total, esc, new_w, denom = receiver_weights(hist, lat, s, p)
            for r, t in zip(ids, total):
                handles, weights, new_mass, den2 = state.seat_probabilities(s, r, p)
                assert (sum(weights) + new_mass) / den2 == pytest.approx(t, rel=1e-11, abs=1e-13)
            _, _, nm, _ = state.seat_probabilities(s, -1, p)


class TestRemoveReseat:
    def test_single_observation_round_trip(self, rng):
        state = SeatingState([(0,)], [(5,)], [0])
        state.seat_observation(0, 0, PARAMS, rng)
        assert state.m == 1
        state.remove_observation(0, 0)
        assert state.m == 0 and state.v_receiver == {}
        state.seat_observation(0, 0, PARAMS, rng)
        assert state.m == 1 and state.v_receiver == {5: 1}
        state.audit()

    def test_double_removal_raises(self, rng):
        state = SeatingState([(0,)], [(5,)], [0])
        state.seat_observation(0, 0, PARAMS, rng)
        state.remove_observation(0, 0)
        with pytest.raises(SeatingInvariantError):
            state.remove_observation(0, 0)

    def test_invariants_after_many_cycles(self, rng):
        p = PARAMS
        res = simulate_full(60, p, rng)
        state = build_state(res.log, p, z=res.z)
        obs = [(n, j) for n, rec in enumerate(res.log.records) for j in range(rec.k2)]
        for cycle in range(2000):
            n, j = obs[int(rng.integers(len(obs)))]
            state.reseat_observation(n, j, p, rng)
            if cycle % 200 == 0:
                state.audit()
        state.audit()

    def test_reseat_reaches_stationary_conditional(self, rng):
        # long reseating of one 3-observation state matches the enumerated
        # conditional distribution of seat configurations
        p = HvcmParams(alpha=0.4, theta=1.0, local={0: (0.4, 0.8)})
        state = SeatingState([(0,)] * 3, [(1,), (1,), (1,)], [0] * 3)
        for n in range(3):
            state.seat_observation(n, 0, p, rng)

        def config_key(st):
            # partition of the three observations by shared vertex
            groups = {}
            for n in range(3):
                groups.setdefault(st.phi[(n, 0)], []).append(n)
            return tuple(sorted(tuple(g) for g in groups.values()))

        # enumerate stationary probabilities over configurations
        from hvcm.seating import _enumerate_seatings
        probs = {}
        base = SeatingState([(0,)] * 3, [(1,), (1,), (1,)], [0] * 3)

        def walk(pos, logp):
            if pos == 3:
                probs[config_key(base)] = probs.get(config_key(base), 0.0) + math.exp(logp)
                return
            handles, weights, new_mass, denom = base.seat_probabilities(0, 1, p)
            for opt, w in [*zip(handles, weights), (None, new_mass)]:
                if w <= 0:
                    continue
                base.force_seat(pos, 0, opt, p)
                walk(pos + 1, logp + math.log(w / denom))
                base.remove_observation(pos, 0)

        walk(0, 0.0)
        total = sum(probs.values())
        probs = {k: v / total for k, v in probs.items()}

        counts = Counter()
        sweeps = 4000
        for _ in range(sweeps):
            for n in range(3):
                state.reseat_observation(n, 0, p, rng)
            counts[config_key(state)] += 1
        tv = 0.5 * sum(
            abs(counts.get(k, 0) / sweeps - probs.get(k, 0.0))
            for k in set(counts) | set(probs)
        )
        assert tv < 0.02


class TestCheckpoint:
    def test_round_trip_bitstable(self, tmp_path, rng):
        p = PARAMS
        res = simulate_full(40, p, rng)
        state = build_state(res.log, p, z=res.z)
        path = tmp_path / "state.json"
        save_checkpoint(path, state, p)
        loaded, loaded_params = load_checkpoint(path)
        assert loaded_params == p
        assert loaded.to_dict() == state.to_dict()
        from hvcm.seating import seating_log_likelihood
        assert seating_log_likelihood(loaded, p) == seating_log_likelihood(state, p)

    def test_version_check(self, tmp_path):
        state = SeatingState([(0,)], [(0,)], [0])
        doc = state.to_dict()
        doc["version"] = 999
        with pytest.raises(ValueError):
            SeatingState.from_dict(doc)


class TestPermuted:
    def test_counts_preserved(self, rng):
        res = simulate_full(25, PARAMS, rng)
        state = build_state(res.log, PARAMS, z=res.z)
        order = list(rng.permutation(state.n_interactions))
        moved = state.permuted(order)
        moved.audit()
        assert moved.m == state.m
        assert moved.v_receiver == state.v_receiver
