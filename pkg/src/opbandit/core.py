"""Domain types shared by every other module: per-arm statistics, bandit
instances, load normalization, and the deterministic random-stream contract.

Reproducibility contract
------------------------
All randomness flows through :class:`RngStream`, a thin wrapper around the
counter-based Philox4x64-10 generator keyed by ``(seed, stream_id)``.  The
same key always yields the same bit stream, on any platform and in any
execution order, which is what makes replications independently replayable
and safe to parallelize.  Continuous distributions are derived from the
uniform stream by inverse-CDF transforms only, never by rejection sampling,
so the number of uniforms consumed per draw is fixed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaincinv

__all__ = [
    "ArmState",
    "BanditInstance",
    "LoadSample",
    "Thresholds",
    "RngStream",
    "derive_stream_id",
    "normalize_load",
    "binary_normalize",
]


class ArmState:
    """Running pull count and empirical mean reward of a single arm.

    Before the first pull the mean is optimistically pinned at 1.0; the
    first observed reward replaces it entirely.
    """

    __slots__ = ("pulls", "sum_reward", "mean_reward")

    def __init__(self, pulls: int = 0, sum_reward: float = 0.0):
        if pulls < 0:
            raise ValueError(f"pulls must be >= 0, got {pulls}")
        if sum_reward < 0.0:
            raise ValueError(f"sum_reward must be >= 0, got {sum_reward}")
        self.pulls = pulls
        self.sum_reward = sum_reward
        self.mean_reward = sum_reward / pulls if pulls > 0 else 1.0

    def update(self, reward: float) -> None:
        """Fold one observed reward into the running statistics."""
        pulls = self.pulls + 1
        s = self.sum_reward + reward
        self.pulls = pulls
        self.sum_reward = s
        self.mean_reward = s / pulls

    def copy(self) -> "ArmState":
        return ArmState(self.pulls, self.sum_reward)

    def __repr__(self) -> str:
        return f"ArmState(pulls={self.pulls}, mean={self.mean_reward:.6g})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArmState):
            return NotImplemented
        return self.pulls == other.pulls and self.sum_reward == other.sum_reward


@dataclass(frozen=True)
class BanditInstance:
    """True expected nominal rewards of a K-armed instance, plus the derived
    optimality gaps used for pseudo-regret accounting."""

    means: tuple[float, ...]
    best_arm: int = field(init=False)
    best_mean: float = field(init=False)
    gaps: tuple[float, ...] = field(init=False)
    min_gap: float = field(init=False)

    def __post_init__(self):
        means = tuple(float(u) for u in self.means)
        if len(means) < 2:
            raise ValueError("a bandit instance needs at least 2 arms")
        for k, u in enumerate(means):
            if not math.isfinite(u) or not 0.0 <= u <= 1.0:
                raise ValueError(f"mean of arm {k} must be in [0, 1], got {u}")
        best_mean = max(means)
        best_arm = means.index(best_mean)  # lowest index wins ties
        gaps = tuple(best_mean - u for u in means)
        positive = [g for g in gaps if g > 0.0]
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "best_arm", best_arm)
        object.__setattr__(self, "best_mean", best_mean)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "min_gap", min(positive) if positive else 0.0)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    def suboptimal_gaps(self) -> tuple[float, ...]:
        """Gaps of all arms other than the best one, in arm order."""
        return tuple(g for k, g in enumerate(self.gaps) if k != self.best_arm)


@dataclass(frozen=True)
class Thresholds:
    """Lower/upper truncation levels for load normalization.

    ``lower == upper`` is the permitted single-threshold case: normalization
    then degenerates to a step function that is 0 up to and including the
    threshold and 1 strictly above it.
    """

    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("thresholds must be finite")
        if self.lower > self.upper:
            raise ValueError(
                f"lower threshold {self.lower} exceeds upper threshold {self.upper}"
            )


@dataclass(frozen=True)
class LoadSample:
    """A raw load value paired with its normalized form in [0, 1]."""

    raw: float
    normalized: float

    def __post_init__(self):
        if not 0.0 <= self.normalized <= 1.0:
            raise ValueError(f"normalized load must be in [0, 1], got {self.normalized}")

    @classmethod
    def from_raw(cls, raw: float, thresholds: Thresholds) -> "LoadSample":
        return cls(raw=raw, normalized=normalize_load(raw, thresholds))


def normalize_load(raw: float, thresholds: Thresholds) -> float:
    """Map a raw load onto [0, 1] by truncating to the threshold band and
    rescaling.

    Loads outside the band are clamped, never rejected.  In the degenerate
    band ``lower == upper`` the result is 0 for ``raw <= lower`` and 1
    otherwise (the jump sits strictly above the threshold).
    """
    if not math.isfinite(raw):
        raise ValueError(f"raw load must be finite, got {raw}")
    lo = thresholds.lower
    hi = thresholds.upper
    if lo == hi:
        return 0.0 if raw <= lo else 1.0
    if raw <= lo:
        return 0.0
    if raw >= hi:
        return 1.0
    return (raw - lo) / (hi - lo)


def binary_normalize(raw: float, eps0: float, eps1: float) -> float:
    """Normalize one of the two admissible binary load levels.

    With levels ``{eps0, 1 - eps1}`` the convention is a lower threshold at
    ``eps0`` and an upper threshold at 1, so the low level maps to 0 and the
    high level to ``1 - eps1/(1 - eps0)``.  Delegates to
    :func:`normalize_load` so the two paths agree bit-for-bit.
    """
    for name, eps in (("eps0", eps0), ("eps1", eps1)):
        if not 0.0 <= eps < 0.5:
            raise ValueError(f"{name} must be in [0, 0.5), got {eps}")
    if raw != eps0 and raw != 1.0 - eps1:
        raise ValueError(
            f"raw load {raw} is not one of the admissible levels "
            f"{{{eps0}, {1.0 - eps1}}}"
        )
    return normalize_load(raw, Thresholds(eps0, 1.0))


def derive_stream_id(*parts) -> int:
    """Hash a sequence of labels (policy name, replication index, role, ...)
    into a 64-bit stream id.

    Uses BLAKE2b so ids are stable across runs, platforms, and label
    orderings of sibling streams.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update("/".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """A named, replayable stream of random draws.

    Two streams with the same ``(seed, stream_id)`` produce bit-identical
    sequences; distinct ids give statistically independent sequences because
    they select distinct Philox keys.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not 0 <= stream_id < 2**64:
            raise ValueError(f"stream_id must fit in 64 bits, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def random(self, size: int | None = None):
        """Uniform float64 draws in [0, 1)."""
        return self._gen.random(size)

    def beta(self, a, b, size: int | None = None):
        """Beta draws via the inverse regularized incomplete beta function.

        Implemented as a deterministic transform of the uniform stream
        (exactly one uniform per draw), so the stream contract extends to
        beta-distributed values.
        """
        return betaincinv(a, b, self._gen.random(size))

    def clone(self) -> "RngStream":
        """A fresh stream rewound to the start of the same sequence."""
        return RngStream(self.seed, self.stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
