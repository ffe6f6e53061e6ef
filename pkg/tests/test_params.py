import pytest

from hvcm import HvcmParams
from hvcm.params import Categorical, validate_urn


class TestRegimes:
    def test_standard_regime_ok(self):
        HvcmParams(sender_alpha=0.5, sender_theta=1.0, alpha=0.0, theta=3.0).validate()

    def test_local_discount_one_allowed(self):
        HvcmParams(local={0: (1.0, 2.0)}).validate()

    def test_global_discount_one_rejected(self):
        with pytest.raises(ValueError):
            HvcmParams(alpha=1.0).validate()

    def test_negative_strength_rejected(self):
        with pytest.raises(ValueError):
            HvcmParams(theta=-1.0).validate()

    def test_finite_population_regime(self):
        p = HvcmParams(sender_alpha=-0.5, sender_theta=1.0)
        p.validate()
        assert p.sender_population() == 2

    def test_finite_population_mismatch_rejected(self):
        with pytest.raises(ValueError):
            HvcmParams(sender_alpha=-0.5, sender_theta=1.3).validate()

    def test_finite_receiver_population(self):
        p = HvcmParams(alpha=-1.0, theta=3.0)
        p.validate()
        assert p.receiver_population() == 3

    def test_urn_rejects_discount_above_one(self):
        with pytest.raises(ValueError):
            validate_urn(1.2, 1.0)

    def test_size_dist_must_sum_to_one(self):
        with pytest.raises(ValueError):
            HvcmParams(size_dist={1: 0.5, 2: 0.4}).validate()


class TestCategorical:
    def test_sampling_respects_support(self, rng):
        cat = Categorical({1: 0.25, 2: 0.25, 4: 0.5})
        draws = [cat.sample(rng) for _ in range(2000)]
        assert set(draws) <= {1, 2, 4}
        assert abs(sum(d == 4 for d in draws) / 2000 - 0.5) < 0.05

    def test_prob_lookup(self):
        cat = Categorical({1: 0.25, 3: 0.75})
        assert cat.prob(3) == 0.75
        assert cat.prob(2) == 0.0

    def test_sizes_below_one_rejected(self):
        with pytest.raises(ValueError):
            Categorical({0: 1.0})


class TestSerialization:
    def test_round_trip_is_exact(self):
        p = HvcmParams(
            sender_alpha=0.30000000000000004,
            sender_theta=2.0,
            alpha=1 / 3,
            theta=10000.123456789,
            local={3: (0.1, 0.2), 7: (0.9999, 123.456)},
            local_default=(0.25, 1.5),
            z_alpha=0.75,
            z_theta=2.25,
            size_dist={1: 0.7, 2: 0.3},
            local_size_dist={3: {1: 0.5, 4: 0.5}},
            local_size_default={1: 1.0},
        )
        q = HvcmParams.from_dict(p.to_dict())
        assert q == p

    def test_local_fallback(self):
        p = HvcmParams(local={1: (0.9, 9.0)}, local_default=(0.2, 0.5))
        assert p.local_params(1) == (0.9, 9.0)
        assert p.local_params(99) == (0.2, 0.5)
        assert p.size_dist_for(99) == {1: 1.0}
