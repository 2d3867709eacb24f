"""Load and nominal-reward generators, plus trace-file ingestion.

Every stochastic model consumes exactly one uniform draw per time step, so
the scalar API (``next_load`` / ``sample_reward``) and the bulk API
(``sample_loads`` / pre-drawn reward uniforms in the simulator) walk the
stream identically.  Time indices are 1-based throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, betaincinv

from .core import RngStream

__all__ = [
    "LoadModel",
    "PeriodicSquareWaveLoad",
    "BinaryRandomLoad",
    "BetaLoad",
    "UniformLoad",
    "TraceLoad",
    "SemiPeriodicLoad",
    "RewardModel",
    "DiracReward",
    "BernoulliReward",
    "TraceReward",
    "TraceData",
    "load_trace",
    "next_load",
    "sample_reward",
]

log = logging.getLogger(__name__)


def _check_eps(name: str, value: float) -> float:
    if not 0.0 <= value < 0.5:
        raise ValueError(f"{name} must be in [0, 0.5), got {value}")
    return float(value)


# ---------------------------------------------------------------------------
# Load models
# ---------------------------------------------------------------------------


class LoadModel:
    """Base class for load generators.

    Subclasses implement :meth:`load_at`, a pure function of the time step
    and (for stochastic models) a single uniform draw.
    """

    #: whether one uniform is consumed per step
    uses_rng: bool = True

    def load_at(self, t: int, u: float | None) -> float:
        raise NotImplementedError

    def next_load(self, t: int, rng: RngStream | None) -> float:
        """Load for step ``t`` (t >= 1), drawing from ``rng`` if stochastic."""
        if t < 1:
            raise ValueError(f"time step must be >= 1, got {t}")
        u = rng.random() if self.uses_rng else None
        return self.load_at(t, u)

    def sample_loads(self, horizon: int, rng: RngStream | None) -> np.ndarray:
        """Loads for steps 1..horizon as one array.

        Produces exactly the sequence that ``horizon`` successive
        :meth:`next_load` calls would.
        """
        us = rng.random(horizon) if self.uses_rng else None
        return self._bulk(horizon, us)

    def _bulk(self, horizon: int, us: np.ndarray | None) -> np.ndarray:
        ts = np.arange(1, horizon + 1)
        out = np.empty(horizon)
        for i, t in enumerate(ts):
            out[i] = self.load_at(int(t), None if us is None else float(us[i]))
        return out

    def quantile(self, p: float) -> float:
        """Inverse CDF of the marginal load distribution (used to resolve
        probability-style truncation thresholds)."""
        raise NotImplementedError(
            f"{type(self).__name__} does not define an analytic load quantile"
        )


@dataclass(frozen=True)
class PeriodicSquareWaveLoad(LoadModel):
    """Deterministic two-level load: ``eps0`` on even steps, ``1 - eps1`` on
    odd steps."""

    eps0: float = 0.0
    eps1: float = 0.0
    uses_rng = False

    def __post_init__(self):
        _check_eps("eps0", self.eps0)
        _check_eps("eps1", self.eps1)

    def load_at(self, t: int, u: float | None = None) -> float:
        return self.eps0 if t % 2 == 0 else 1.0 - self.eps1

    def _bulk(self, horizon: int, us=None) -> np.ndarray:
        ts = np.arange(1, horizon + 1)
        return np.where(ts % 2 == 0, self.eps0, 1.0 - self.eps1)


@dataclass(frozen=True)
class BinaryRandomLoad(LoadModel):
    """I.i.d. two-level load: ``eps0`` with probability ``rho``, else
    ``1 - eps1``.

    ``rho`` may sit at 0 or 1, which degenerates to a constant load (useful
    for baselines and tests).
    """

    eps0: float = 0.0
    eps1: float = 0.0
    rho: float = 0.5

    def __post_init__(self):
        _check_eps("eps0", self.eps0)
        _check_eps("eps1", self.eps1)
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")

    def load_at(self, t: int, u: float) -> float:
        return self.eps0 if u < self.rho else 1.0 - self.eps1

    def _bulk(self, horizon: int, us: np.ndarray) -> np.ndarray:
        return np.where(us < self.rho, self.eps0, 1.0 - self.eps1)

    def quantile(self, p: float) -> float:
        _check_prob(p)
        return self.eps0 if p <= self.rho else 1.0 - self.eps1


@dataclass(frozen=True)
class BetaLoad(LoadModel):
    """I.i.d. Beta(a, b) load on [0, 1], sampled by inverse CDF."""

    a: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"beta shape parameters must be > 0, got ({self.a}, {self.b})")

    def load_at(self, t: int, u: float) -> float:
        return float(betaincinv(self.a, self.b, u))

    def _bulk(self, horizon: int, us: np.ndarray) -> np.ndarray:
        return betaincinv(self.a, self.b, us)

    def quantile(self, p: float) -> float:
        _check_prob(p)
        return float(betaincinv(self.a, self.b, p))

    def cdf(self, x: float) -> float:
        return float(betainc(self.a, self.b, min(max(x, 0.0), 1.0)))


@dataclass(frozen=True)
class UniformLoad(LoadModel):
    """I.i.d. uniform load on [0, 1]."""

    def load_at(self, t: int, u: float) -> float:
        return u

    def _bulk(self, horizon: int, us: np.ndarray) -> np.ndarray:
        return us

    def quantile(self, p: float) -> float:
        _check_prob(p)
        return p

    def conditional_mean_below(self, x: float) -> float:
        """E[L | L <= x] = x / 2 for the uniform marginal."""
        if not 0.0 < x <= 1.0:
            raise ValueError(f"threshold must be in (0, 1] for uniform load, got {x}")
        return x / 2.0


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile probability must be in (0, 1), got {p}")


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceData:
    """Parsed trace: max-scaled loads and optional per-arm nominal rewards."""

    loads: np.ndarray
    rewards: np.ndarray | None
    scale: float  # raw max the load column was divided by

    def __post_init__(self):
        object.__setattr__(self, "loads", np.asarray(self.loads, dtype=float))
        if self.rewards is not None:
            object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=float))

    @property
    def n_rows(self) -> int:
        return len(self.loads)


def load_trace(path) -> TraceData:
    """Read a trace CSV: column 1 is a nonnegative load, optional columns
    2..K+1 are per-arm nominal rewards in [0, 1].

    Loads are scaled into [0, 1] by dividing by the column maximum; reward
    columns are used verbatim.  A header row is detected and skipped.
    Malformed rows are reported with their 1-based line number.
    """
    raw_loads: list[float] = []
    raw_rewards: list[list[float]] = []
    n_cols = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}: line {lineno}: non-numeric cell in {cells!r}")
            if n_cols is None:
                n_cols = len(values)
            elif len(values) != n_cols:
                raise ValueError(
                    f"{path}: line {lineno}: expected {n_cols} columns, got {len(values)}"
                )
            load = values[0]
            if not math.isfinite(load) or load < 0.0:
                raise ValueError(f"{path}: line {lineno}: load must be finite and >= 0, got {load}")
            for j, r in enumerate(values[1:], start=2):
                if not 0.0 <= r <= 1.0:
                    raise ValueError(
                        f"{path}: line {lineno}: reward column {j} value {r} outside [0, 1]"
                    )
            raw_loads.append(load)
            if n_cols > 1:
                raw_rewards.append(values[1:])
    if not raw_loads:
        raise ValueError(f"{path}: trace file contains no data rows")
    loads = np.asarray(raw_loads)
    scale = float(loads.max())
    if scale > 0.0:
        loads = loads / scale
    rewards = np.asarray(raw_rewards) if raw_rewards else None
    return TraceData(loads=loads, rewards=rewards, scale=scale)


@dataclass(frozen=True)
class TraceLoad(LoadModel):
    """Replays the load column of a trace, wrapping around at the end."""

    data: TraceData
    uses_rng = False

    def load_at(self, t: int, u: float | None = None) -> float:
        return float(self.data.loads[(t - 1) % self.data.n_rows])

    def _bulk(self, horizon: int, us=None) -> np.ndarray:
        n = self.data.n_rows
        wraps = (horizon - 1) // n
        if wraps > 0:
            log.info("trace shorter than horizon: wrapping around %d time(s)", wraps)
        idx = np.arange(horizon) % n
        return self.data.loads[idx]

    def quantile(self, p: float) -> float:
        _check_prob(p)
        values = np.sort(self.data.loads)
        rank = max(1, math.ceil(p * len(values)))  # nearest-rank
        return float(values[rank - 1])


@dataclass(frozen=True)
class SemiPeriodicLoad(LoadModel):
    """Synthetic stand-in for operator traffic traces: a sinusoidal daily
    envelope modulated by multiplicative Beta noise.

    load(t) = (base + amplitude * sin(2*pi*t / period)) * Beta(noise_a, noise_b)
    """

    period: int = 288
    base: float = 0.6
    amplitude: float = 0.35
    noise_a: float = 8.0
    noise_b: float = 2.0

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if not 0.0 <= self.base - self.amplitude or not self.base + self.amplitude <= 1.0:
            raise ValueError("envelope base +/- amplitude must stay within [0, 1]")
        if self.noise_a <= 0 or self.noise_b <= 0:
            raise ValueError("noise shape parameters must be > 0")

    def _envelope(self, t) -> np.ndarray:
        return self.base + self.amplitude * np.sin(2.0 * np.pi * np.asarray(t) / self.period)

    def load_at(self, t: int, u: float) -> float:
        return float(self._envelope(t) * betaincinv(self.noise_a, self.noise_b, u))

    def _bulk(self, horizon: int, us: np.ndarray) -> np.ndarray:
        ts = np.arange(1, horizon + 1)
        return self._envelope(ts) * betaincinv(self.noise_a, self.noise_b, us)

    def quantile(self, p: float) -> float:
        """Empirical marginal quantile from a fixed-seed reference sample
        spanning whole periods (the marginal mixes the envelope phase)."""
        _check_prob(p)
        reps = max(1, 200_000 // self.period)
        n = reps * self.period
        sample = np.sort(self.sample_loads(n, RngStream(0x5EED_10AD, 0)))
        rank = max(1, math.ceil(p * n))
        return float(sample[rank - 1])


# ---------------------------------------------------------------------------
# Reward models
# ---------------------------------------------------------------------------


class RewardModel:
    """Base class for nominal-reward generators; rewards always lie in [0, 1]."""

    uses_rng: bool = True

    @property
    def means(self) -> tuple[float, ...]:
        raise NotImplementedError

    def reward_at(self, arm: int, t: int, u: float | None) -> float:
        raise NotImplementedError

    def sample(self, arm: int, t: int, rng: RngStream | None) -> float:
        if not 0 <= arm < len(self.means):
            raise ValueError(f"arm {arm} out of range for {len(self.means)} arms")
        u = rng.random() if self.uses_rng else None
        return self.reward_at(arm, t, u)


@dataclass(frozen=True)
class DiracReward(RewardModel):
    """Deterministic rewards: arm k always pays its mean."""

    arm_means: tuple[float, ...]
    uses_rng = False

    def __post_init__(self):
        object.__setattr__(self, "arm_means", tuple(float(u) for u in self.arm_means))
        _check_means(self.arm_means)

    @property
    def means(self) -> tuple[float, ...]:
        return self.arm_means

    def reward_at(self, arm: int, t: int, u: float | None = None) -> float:
        return self.arm_means[arm]


@dataclass(frozen=True)
class BernoulliReward(RewardModel):
    """Bernoulli rewards with per-arm success probabilities."""

    arm_means: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "arm_means", tuple(float(u) for u in self.arm_means))
        _check_means(self.arm_means)

    @property
    def means(self) -> tuple[float, ...]:
        return self.arm_means

    def reward_at(self, arm: int, t: int, u: float) -> float:
        return 1.0 if u < self.arm_means[arm] else 0.0


@dataclass(frozen=True)
class TraceReward(RewardModel):
    """Replays per-arm reward columns of a trace, wrapping around at the end.

    The trace-wide column means serve as the true arm values for regret
    accounting.
    """

    data: TraceData
    uses_rng = False
    _means: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.data.rewards is None:
            raise ValueError("trace has no reward columns")
        object.__setattr__(self, "_means", tuple(float(m) for m in self.data.rewards.mean(axis=0)))

    @property
    def means(self) -> tuple[float, ...]:
        return self._means

    def reward_at(self, arm: int, t: int, u: float | None = None) -> float:
        return float(self.data.rewards[(t - 1) % self.data.n_rows, arm])


def _check_means(means: tuple[float, ...]) -> None:
    if len(means) < 2:
        raise ValueError("reward model needs at least 2 arms")
    for k, u in enumerate(means):
        if not math.isfinite(u) or not 0.0 <= u <= 1.0:
            raise ValueError(f"mean of arm {k} must be in [0, 1], got {u}")


def next_load(model: LoadModel, t: int, rng: RngStream | None = None) -> float:
    """Load for step ``t`` under ``model`` (free-function form of the model API)."""
    return model.next_load(t, rng)


def sample_reward(model: RewardModel, arm: int, t: int, rng: RngStream | None = None) -> float:
    """Nominal reward of ``arm`` at step ``t`` under ``model``."""
    return model.sample(arm, t, rng)
