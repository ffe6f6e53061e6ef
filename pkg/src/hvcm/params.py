"""Model parameters and their validity regimes.

Every urn level carries a (discount, strength) pair.  A level is valid in
one of two regimes: (1) discount in [0, 1) with positive strength, giving an
unbounded population, or (2) negative discount with strength equal to
``-K * discount`` for an integer K, giving a finite population of size K.
Local receiver levels additionally admit discount exactly 1, which collapses
every local draw onto the shared global urn.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Mapping


def _finite_population(alpha: float, theta: float) -> int:
    """Population size K for a regime-2 pair, or raise if invalid."""
    k = theta / (-alpha)
    k_int = round(k)
    if k_int < 1 or abs(k - k_int) > 1e-9:
        raise ValueError(
            f"negative discount {alpha} needs strength = -K*discount, got {theta}"
        )
    return k_int


def validate_urn(alpha: float, theta: float, allow_one: bool = False, name: str = "urn") -> None:
    if alpha < 0.0:
        _finite_population(alpha, theta)
        return
    if alpha > 1.0 or (alpha == 1.0 and not allow_one):
        raise ValueError(f"{name}: discount {alpha} outside valid range")
    if theta <= 0.0:
        raise ValueError(f"{name}: strength must be positive, got {theta}")


class Categorical:
    """Fixed categorical distribution over positive integers with O(log k) draws."""

    __slots__ = ("items", "probs", "_cum")

    def __init__(self, pmf: Mapping[int, float]):
        if not pmf:
            raise ValueError("empty size distribution")
        items = sorted(pmf)
        probs = [float(pmf[k]) for k in items]
        if any(k < 1 for k in items):
            raise ValueError("sizes must be >= 1")
        if any(p < 0 for p in probs):
            raise ValueError("negative probability")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"size distribution sums to {total}, not 1")
        self.items = items
        self.probs = probs
        cum, acc = [], 0.0
        for p in probs:
            acc += p
            cum.append(acc)
        cum[-1] = 1.0
        self._cum = cum

    def sample(self, rng) -> int:
        return self.items[bisect.bisect_left(self._cum, rng.random())]

    def prob(self, k: int) -> float:
        i = bisect.bisect_left(self.items, k)
        if i < len(self.items) and self.items[i] == k:
            return self.probs[i]
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.items, self.probs))


DEGENERATE_ONE = {1: 1.0}


@dataclass
class HvcmParams:
    """All parameters of the hierarchical model.

    ``local`` maps sender id -> (alpha_s, theta_s); senders not in the map
    fall back to ``local_default``, which is how fresh senders appearing
    mid-simulation get their receiver-urn parameters.  ``size_dist`` is the
    distribution of the sender-multiset size k1 (None means always 1);
    ``local_size_dist`` gives per-sender receiver-count distributions with
    ``local_size_default`` as the fallback (None means always 1).
    """

    sender_alpha: float = 0.5
    sender_theta: float = 1.0
    alpha: float = 0.5
    theta: float = 10.0
    local: dict[int, tuple[float, float]] = field(default_factory=dict)
    local_default: tuple[float, float] = (0.5, 1.0)
    z_alpha: float = 0.5
    z_theta: float = 1.0
    size_dist: dict[int, float] | None = None
    local_size_dist: dict[int, dict[int, float]] = field(default_factory=dict)
    local_size_default: dict[int, float] | None = None

    def validate(self) -> None:
        validate_urn(self.sender_alpha, self.sender_theta, name="sender level")
        validate_urn(self.alpha, self.theta, name="global receiver level")
        validate_urn(self.z_alpha, self.z_theta, name="attribution level")
        for s, (a, t) in self.local.items():
            validate_urn(a, t, allow_one=True, name=f"local level of sender {s}")
        validate_urn(*self.local_default, allow_one=True, name="local default")
        for dist in [self.size_dist, self.local_size_default, *self.local_size_dist.values()]:
            if dist is not None:
                Categorical(dist)

    def local_params(self, s: int) -> tuple[float, float]:
        return self.local.get(s, self.local_default)

    def size_dist_for(self, s: int) -> dict[int, float]:
        dist = self.local_size_dist.get(s, self.local_size_default)
        return DEGENERATE_ONE if dist is None else dist

    def sender_population(self) -> int | None:
        """Population size in the finite-sender regime, else None."""
        if self.sender_alpha < 0:
            return _finite_population(self.sender_alpha, self.sender_theta)
        return None

    def receiver_population(self) -> int | None:
        """Global receiver population size in the finite regime, else None."""
        if self.alpha < 0:
            return _finite_population(self.alpha, self.theta)
        return None

    def with_local(self, local: dict[int, tuple[float, float]]) -> "HvcmParams":
        return replace(self, local=dict(local))

    def to_dict(self) -> dict:
        """JSON-ready representation (floats as decimal strings)."""
        return {
            "sender_alpha": repr(self.sender_alpha),
            "sender_theta": repr(self.sender_theta),
            "alpha": repr(self.alpha),
            "theta": repr(self.theta),
            "local": {str(s): [repr(a), repr(t)] for s, (a, t) in self.local.items()},
            "local_default": [repr(self.local_default[0]), repr(self.local_default[1])],
            "z_alpha": repr(self.z_alpha),
            "z_theta": repr(self.z_theta),
            "size_dist": _dist_to_dict(self.size_dist),
            "local_size_dist": {
                str(s): _dist_to_dict(d) for s, d in self.local_size_dist.items()
            },
            "local_size_default": _dist_to_dict(self.local_size_default),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HvcmParams":
        return cls(
            sender_alpha=float(d["sender_alpha"]),
            sender_theta=float(d["sender_theta"]),
            alpha=float(d["alpha"]),
            theta=float(d["theta"]),
            local={int(s): (float(a), float(t)) for s, (a, t) in d.get("local", {}).items()},
            local_default=tuple(float(x) for x in d.get("local_default", ["0.5", "1.0"])),
            z_alpha=float(d.get("z_alpha", 0.5)),
            z_theta=float(d.get("z_theta", 1.0)),
            size_dist=_dist_from_dict(d.get("size_dist")),
            local_size_dist={
                int(s): _dist_from_dict(dist)
                for s, dist in d.get("local_size_dist", {}).items()
            },
            local_size_default=_dist_from_dict(d.get("local_size_default")),
        )


def _dist_to_dict(dist: dict[int, float] | None):
    if dist is None:
        return None
    return {str(k): repr(p) for k, p in sorted(dist.items())}


def _dist_from_dict(d):
    if d is None:
        return None
    return {int(k): float(p) for k, p in d.items()}
