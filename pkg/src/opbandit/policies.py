"""Arm-selection strategies behind one stateful interface.

Every policy follows the same per-step protocol driven by the simulator:

    arm = policy.select(t, raw_load, rng)   # t is 1-based
    ...environment draws the nominal reward x for ``arm``...
    policy.update(arm, x, rng)

For the first K steps every learning policy pulls arms 0..K-1 in order (the
forced initialization round); afterwards it ranks arms by its own index or
posterior sample, breaking ties toward the lowest arm index.  Policies that
use the load normalize it themselves, so the simulator always hands over the
raw value.
"""

from __future__ import annotations

import math
from bisect import bisect_left, insort
from collections import deque

import numpy as np

from .core import ArmState, LoadSample, RngStream, Thresholds, normalize_load

__all__ = [
    "Policy",
    "AdaUcbPolicy",
    "EAdaUcbPolicy",
    "UcbPolicy",
    "ThompsonPolicy",
    "LinUcbDisjointPolicy",
    "OraclePolicy",
    "RoundRobinGreedyPolicy",
    "LoadQuantileSketch",
    "adaucb_index",
    "select_arm",
    "POLICY_KINDS",
]


def adaucb_index(state: ArmState, t: int, alpha: float, normalized_load: float) -> float:
    """Load-adaptive upper-confidence index of one arm:

        mean + sqrt(alpha * (1 - normalized_load) * ln(t) / pulls)

    At normalized load 0 this is exactly the plain UCB(alpha) index; at
    normalized load 1 the exploration term vanishes and the index equals the
    empirical mean.
    """
    if t < 2:
        raise ValueError(f"index is defined for t >= 2, got t={t}")
    if state.pulls < 1:
        raise ValueError("index requires at least one pull (run the forced init round)")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not 0.0 <= normalized_load <= 1.0:
        raise ValueError(f"normalized load must be in [0, 1], got {normalized_load}")
    return state.mean_reward + math.sqrt(
        alpha * (1.0 - normalized_load) * math.log(t) / state.pulls
    )


class Policy:
    """Common select/update/reset contract."""

    kind: str = "abstract"

    def __init__(self, n_arms: int):
        if n_arms < 2:
            raise ValueError(f"need at least 2 arms, got {n_arms}")
        self.n_arms = n_arms

    def reset(self) -> None:
        raise NotImplementedError

    def select(self, t: int, load: float, rng: RngStream | None = None) -> int:
        if t < 1:
            raise ValueError(f"time step must be >= 1, got {t}")
        self._observe_load(load)
        if t <= self.n_arms:
            return t - 1  # forced round-robin initialization
        return self._choose(t, load, rng)

    def update(self, arm: int, reward: float, rng: RngStream | None = None) -> None:
        if not 0 <= arm < self.n_arms:
            raise ValueError(f"arm {arm} out of range")
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"nominal reward must be in [0, 1], got {reward}")
        self._update(arm, reward, rng)

    # hooks ---------------------------------------------------------------
    def _observe_load(self, load: float) -> None:
        pass

    def _choose(self, t: int, load: float, rng: RngStream | None) -> int:
        raise NotImplementedError

    def _update(self, arm: int, reward: float, rng: RngStream | None) -> None:
        raise NotImplementedError


class _IndexPolicy(Policy):
    """Shared arm-statistics bookkeeping for mean-plus-bonus policies."""

    def __init__(self, n_arms: int):
        super().__init__(n_arms)
        self.arm_states = [ArmState() for _ in range(n_arms)]

    def reset(self) -> None:
        self.arm_states = [ArmState() for _ in range(self.n_arms)]

    def _update(self, arm: int, reward: float, rng=None) -> None:
        self.arm_states[arm].update(reward)

    def _argmax_index(self, t: int, exploration: float) -> int:
        # exploration = alpha * (1 - normalized_load) * ln(t); ties break low.
        best = -math.inf
        arm = 0
        for k, state in enumerate(self.arm_states):
            v = state.mean_reward + math.sqrt(exploration / state.pulls)
            if v > best:
                best = v
                arm = k
        return arm


class UcbPolicy(_IndexPolicy):
    """Plain UCB(alpha); ignores the load entirely.  alpha=2 is classic UCB1."""

    kind = "ucb"

    def __init__(self, n_arms: int, alpha: float):
        super().__init__(n_arms)
        if alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.alpha = alpha

    def _choose(self, t: int, load: float, rng=None) -> int:
        return self._argmax_index(t, self.alpha * math.log(t))


class AdaUcbPolicy(_IndexPolicy):
    """UCB with a load-adaptive exploration factor alpha * (1 - normalized
    load): explores like UCB(alpha) when the load sits at the lower
    threshold and turns greedy when it reaches the upper one."""

    kind = "adaucb"

    def __init__(self, n_arms: int, alpha: float, thresholds: Thresholds):
        super().__init__(n_arms)
        if alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.alpha = alpha
        self.thresholds = thresholds

    def _choose(self, t: int, load: float, rng=None) -> int:
        ltil = normalize_load(load, self.thresholds)
        return self._argmax_index(t, self.alpha * (1.0 - ltil) * math.log(t))


class LoadQuantileSketch:
    """Exact streaming quantiles over observed loads (sorted multiset),
    optionally restricted to a trailing window.

    Quantiles follow the nearest-rank rule: the q-quantile of n values is the
    ceil(q*n)-th smallest.
    """

    def __init__(self, window: int | None = None):
        if window is not None and window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self._sorted: list[float] = []
        self._recent: deque[float] | None = deque() if window is not None else None

    def __len__(self) -> int:
        return len(self._sorted)

    def insert(self, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"load must be finite, got {value}")
        if self._recent is not None:
            if len(self._recent) == self.window:
                old = self._recent.popleft()
                del self._sorted[bisect_left(self._sorted, old)]
            self._recent.append(value)
        insort(self._sorted, value)

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile must be in (0, 1), got {q}")
        n = len(self._sorted)
        if n == 0:
            raise ValueError("quantile of an empty sketch")
        rank = max(1, math.ceil(q * n))
        return self._sorted[rank - 1]


class EAdaUcbPolicy(_IndexPolicy):
    """AdaUCB with truncation thresholds tracked online as empirical load
    quantiles (recomputed each step from all loads seen so far, including the
    current one, or from a trailing window when configured)."""

    kind = "eadaucb"

    def __init__(
        self,
        n_arms: int,
        alpha: float,
        lower_quantile: float = 0.05,
        upper_quantile: float = 0.95,
        window: int | None = None,
    ):
        super().__init__(n_arms)
        if alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        if not 0.0 < lower_quantile < 1.0 or not 0.0 < upper_quantile < 1.0:
            raise ValueError("quantile probabilities must be in (0, 1)")
        if lower_quantile > upper_quantile:
            raise ValueError("lower_quantile must not exceed upper_quantile")
        self.alpha = alpha
        self.lower_quantile = lower_quantile
        self.upper_quantile = upper_quantile
        self.window = window
        self.load_sketch = LoadQuantileSketch(window)

    def reset(self) -> None:
        super().reset()
        self.load_sketch = LoadQuantileSketch(self.window)

    def observe_load(self, load: float) -> Thresholds:
        """Feed one raw load into the sketch and return the thresholds now in
        effect.  ``select`` calls this automatically."""
        self.load_sketch.insert(load)
        return self.thresholds

    @property
    def thresholds(self) -> Thresholds:
        sketch = self.load_sketch
        return Thresholds(
            sketch.quantile(self.lower_quantile), sketch.quantile(self.upper_quantile)
        )

    def _observe_load(self, load: float) -> None:
        self.observe_load(load)

    def _choose(self, t: int, load: float, rng=None) -> int:
        ltil = normalize_load(load, self.thresholds)
        return self._argmax_index(t, self.alpha * (1.0 - ltil) * math.log(t))


class ThompsonPolicy(Policy):
    """Beta-Bernoulli Thompson sampling.

    Rewards in [0, 1] are reduced to Bernoulli outcomes by an auxiliary coin
    flip with success probability equal to the reward, so the Beta posterior
    bookkeeping stays exact.
    """

    kind = "ts"

    def __init__(self, n_arms: int):
        super().__init__(n_arms)
        self.a = np.ones(n_arms)
        self.b = np.ones(n_arms)

    def reset(self) -> None:
        self.a = np.ones(self.n_arms)
        self.b = np.ones(self.n_arms)

    def _choose(self, t: int, load: float, rng: RngStream) -> int:
        draws = rng.beta(self.a, self.b, size=self.n_arms)
        return int(np.argmax(draws))

    def _update(self, arm: int, reward: float, rng: RngStream) -> None:
        if rng.random() < reward:
            self.a[arm] += 1.0
        else:
            self.b[arm] += 1.0

    @property
    def pulls(self) -> np.ndarray:
        return (self.a + self.b - 2.0).astype(int)


def _inv2(a: np.ndarray) -> np.ndarray:
    # closed-form 2x2 inverse; the ridge floor keeps det well away from 0
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


class LinUcbDisjointPolicy(Policy):
    """Contextual baseline: disjoint linear model per arm over the feature
    x = (1, raw_load), ridge-initialized with the identity.

    The regression target is the actual (load-weighted) reward
    raw_load * nominal_reward, which is what a context-reward view of this
    problem predicts.
    """

    kind = "linucb"

    def __init__(self, n_arms: int, alpha: float):
        super().__init__(n_arms)
        if alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.alpha = alpha
        self.reset()

    def reset(self) -> None:
        self.A = [np.eye(2) for _ in range(self.n_arms)]
        self.b = [np.zeros(2) for _ in range(self.n_arms)]
        self._A_inv = [np.eye(2) for _ in range(self.n_arms)]
        self._x = np.array([1.0, 0.0])
        self._last_load = 0.0

    def _observe_load(self, load: float) -> None:
        self._last_load = load
        self._x = np.array([1.0, load])

    def _choose(self, t: int, load: float, rng=None) -> int:
        x = self._x
        best = -math.inf
        arm = 0
        for k in range(self.n_arms):
            a_inv = self._A_inv[k]
            theta = a_inv @ self.b[k]
            score = float(x @ theta) + self.alpha * math.sqrt(float(x @ a_inv @ x))
            if score > best:
                best = score
                arm = k
        return arm

    def _update(self, arm: int, reward: float, rng=None) -> None:
        x = self._x
        self.A[arm] += np.outer(x, x)
        self.b[arm] += (self._last_load * reward) * x
        self._A_inv[arm] = _inv2(self.A[arm])

    def scores(self, load: float) -> np.ndarray:
        """Per-arm UCB scores for a given raw load (diagnostic helper)."""
        x = np.array([1.0, load])
        out = np.empty(self.n_arms)
        for k in range(self.n_arms):
            a_inv = self._A_inv[k]
            out[k] = float(x @ (a_inv @ self.b[k])) + self.alpha * math.sqrt(
                float(x @ a_inv @ x)
            )
        return out


class OraclePolicy(Policy):
    """Always pulls the known best arm; the zero-regret reference.

    Exempt from the forced initialization round by design: its whole point
    is never to pull a suboptimal arm.
    """

    kind = "oracle"

    def __init__(self, n_arms: int, best_arm: int):
        super().__init__(n_arms)
        if not 0 <= best_arm < n_arms:
            raise ValueError(f"best_arm {best_arm} out of range")
        self.best_arm = best_arm

    def reset(self) -> None:
        pass

    def select(self, t: int, load: float, rng=None) -> int:
        if t < 1:
            raise ValueError(f"time step must be >= 1, got {t}")
        return self.best_arm

    def _update(self, arm: int, reward: float, rng=None) -> None:
        pass


class RoundRobinGreedyPolicy(_IndexPolicy):
    """Naive opportunistic heuristic: round-robin exploration whenever the
    normalized load is exactly 0, greedy on the empirical means otherwise."""

    kind = "rr-greedy"

    def __init__(self, n_arms: int, thresholds: Thresholds):
        super().__init__(n_arms)
        self.thresholds = thresholds
        self._next = 0

    def reset(self) -> None:
        super().reset()
        self._next = 0

    def _choose(self, t: int, load: float, rng=None) -> int:
        if normalize_load(load, self.thresholds) == 0.0:
            arm = self._next
            self._next = (arm + 1) % self.n_arms
            return arm
        best = -math.inf
        arm = 0
        for k, state in enumerate(self.arm_states):
            if state.mean_reward > best:
                best = state.mean_reward
                arm = k
        return arm


def select_arm(policy: Policy, t: int, load, rng: RngStream | None = None) -> int:
    """One selection step; ``load`` may be a raw float or a LoadSample (the
    policy normalizes raw loads itself, so only the raw value is consumed)."""
    raw = load.raw if isinstance(load, LoadSample) else load
    return policy.select(t, raw, rng)


POLICY_KINDS = {
    cls.kind: cls
    for cls in (
        AdaUcbPolicy,
        EAdaUcbPolicy,
        UcbPolicy,
        ThompsonPolicy,
        LinUcbDisjointPolicy,
        OraclePolicy,
        RoundRobinGreedyPolicy,
    )
}
