"""The experiment run loop: reveal load, let the policy pick an arm, draw the
nominal reward, update the policy, accumulate load-weighted regret.

Regret is expected pseudo-regret by default: each step adds
``load * (best_mean - mean[chosen])`` using the true arm means, which is the
unbiased low-variance estimator of the load-weighted regret.  A realized
variant (``load * (best_mean - drawn_reward)``) is available behind a flag.

Each (policy, replication) pair owns three private random streams (load,
reward, policy) derived from the base seed by label hashing, so replications
can run in any order, replication prefixes are stable under changes to the
replication count, and reseeding rewards never perturbs the load sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BanditInstance, RngStream, derive_stream_id
from .environments import BernoulliReward, DiracReward, LoadModel, RewardModel
from .policies import Policy

__all__ = [
    "ReplicationTrace",
    "RegretTrace",
    "default_checkpoints",
    "replication_streams",
    "run_once",
    "run_experiment",
]


@dataclass
class ReplicationTrace:
    """Checkpointed regret and pull counts of a single replication."""

    checkpoints: np.ndarray  # (C,) int
    regret: np.ndarray  # (C,) cumulative regret at each checkpoint
    pulls: np.ndarray  # (C, K) cumulative pull counts
    full_regret: np.ndarray | None = None  # (T,) when per-step recording is on
    full_pulls: np.ndarray | None = None  # (T, K)


@dataclass
class RegretTrace:
    """Per-replication regret curves for one policy, with aggregates."""

    policy: str
    checkpoints: np.ndarray  # (C,)
    regret: np.ndarray  # (R, C)
    pulls: np.ndarray  # (R, C, K)

    @property
    def n_replications(self) -> int:
        return self.regret.shape[0]

    @property
    def mean_regret(self) -> np.ndarray:
        return self.regret.mean(axis=0)

    @property
    def std_regret(self) -> np.ndarray:
        # sample (n-1) normalization; a single replication has zero spread
        if self.n_replications < 2:
            return np.zeros(self.regret.shape[1])
        return self.regret.std(axis=0, ddof=1)

    @property
    def mean_pulls(self) -> np.ndarray:
        return self.pulls.mean(axis=0)

    def regret_at(self, t: int) -> np.ndarray:
        """Mean regret at one checkpoint (errors if t was not recorded)."""
        idx = np.flatnonzero(self.checkpoints == t)
        if len(idx) == 0:
            raise KeyError(f"no checkpoint at t={t}")
        return self.mean_regret[idx[0]]


def default_checkpoints(horizon: int, count: int = 50) -> np.ndarray:
    """``count`` log-spaced recording points plus the horizon itself."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    pts = np.unique(np.round(np.geomspace(1, horizon, count)).astype(int))
    return np.unique(np.append(pts, horizon))


def _validate_checkpoints(checkpoints, horizon: int) -> np.ndarray:
    pts = np.asarray(checkpoints, dtype=int)
    if pts.ndim != 1 or len(pts) == 0:
        raise ValueError("checkpoints must be a non-empty 1-D sequence")
    if np.any(np.diff(pts) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if pts[0] < 1 or pts[-1] > horizon:
        raise ValueError(f"checkpoints must lie within [1, {horizon}]")
    return pts


def replication_streams(base_seed: int, policy_label: str, replication: int) -> dict:
    """The three private streams of one (policy, replication) cell."""
    return {
        role: RngStream(base_seed, derive_stream_id(policy_label, replication, role))
        for role in ("load", "reward", "policy")
    }


def run_once(
    bandit: BanditInstance,
    load_model: LoadModel,
    reward_model: RewardModel,
    policy: Policy,
    horizon: int,
    checkpoints,
    load_rng: RngStream | None,
    reward_rng: RngStream | None,
    policy_rng: RngStream | None,
    realized: bool = False,
    record_steps: bool = False,
) -> ReplicationTrace:
    """Run a single replication and return its checkpointed trace.

    The policy must be freshly constructed or reset; the caller owns the
    streams.
    """
    n_arms = bandit.n_arms
    if horizon < n_arms:
        raise ValueError(f"horizon {horizon} is shorter than the init round of {n_arms} arms")
    pts = _validate_checkpoints(checkpoints, horizon)
    if load_model.uses_rng and load_rng is None:
        raise ValueError("stochastic load model needs a load stream")
    if reward_model.uses_rng and reward_rng is None:
        raise ValueError("stochastic reward model needs a reward stream")

    loads = load_model.sample_loads(horizon, load_rng)
    load_list = loads.tolist()
    best_mean = bandit.best_mean
    gaps = list(bandit.gaps)

    # reward lookup, specialized for the hot per-step loop
    if isinstance(reward_model, BernoulliReward):
        u_rew = reward_rng.random(horizon).tolist()
        mus = list(reward_model.means)

        def reward_of(i: int, arm: int) -> float:
            return 1.0 if u_rew[i] < mus[arm] else 0.0

    elif isinstance(reward_model, DiracReward):
        mus = list(reward_model.means)

        def reward_of(i: int, arm: int) -> float:
            return mus[arm]

    else:

        def reward_of(i: int, arm: int) -> float:
            u = reward_rng.random() if reward_model.uses_rng else None
            return reward_model.reward_at(arm, i + 1, u)

    pulls = [0] * n_arms
    regret = 0.0
    ck_regret = np.empty(len(pts))
    ck_pulls = np.empty((len(pts), n_arms), dtype=np.int64)
    full_regret = np.empty(horizon) if record_steps else None
    full_pulls = np.empty((horizon, n_arms), dtype=np.int64) if record_steps else None

    select = policy.select
    update = policy.update
    next_pt = 0
    pt_list = pts.tolist()
    next_pt_t = pt_list[0]

    for t in range(1, horizon + 1):
        i = t - 1
        lt = load_list[i]
        arm = select(t, lt, policy_rng)
        x = reward_of(i, arm)
        update(arm, x, policy_rng)
        pulls[arm] += 1
        if realized:
            regret += lt * (best_mean - x)
        else:
            regret += lt * gaps[arm]
        if record_steps:
            full_regret[i] = regret
            full_pulls[i] = pulls
        if t == next_pt_t:
            ck_regret[next_pt] = regret
            ck_pulls[next_pt] = pulls
            next_pt += 1
            next_pt_t = pt_list[next_pt] if next_pt < len(pt_list) else 0

    return ReplicationTrace(
        checkpoints=pts,
        regret=ck_regret,
        pulls=ck_pulls,
        full_regret=full_regret,
        full_pulls=full_pulls,
    )


def run_experiment(
    bandit: BanditInstance,
    load_model: LoadModel,
    reward_model: RewardModel,
    policies: dict[str, Policy],
    horizon: int,
    replications: int,
    base_seed: int,
    checkpoints=None,
    realized: bool = False,
) -> dict[str, RegretTrace]:
    """Run every policy for ``replications`` independent replications and
    aggregate the checkpointed traces.

    Stream ids depend only on (base seed, policy label, replication index),
    so results are independent of execution order and of the total number of
    replications requested.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    pts = _validate_checkpoints(checkpoints, horizon)

    results: dict[str, RegretTrace] = {}
    for label, policy in policies.items():
        reg = np.empty((replications, len(pts)))
        pls = np.empty((replications, len(pts), bandit.n_arms), dtype=np.int64)
        for rep in range(replications):
            policy.reset()
            streams = replication_streams(base_seed, label, rep)
            trace = run_once(
                bandit,
                load_model,
                reward_model,
                policy,
                horizon,
                pts,
                streams["load"],
                streams["reward"],
                streams["policy"],
                realized=realized,
            )
            reg[rep] = trace.regret
            pls[rep] = trace.pulls
        results[label] = RegretTrace(policy=label, checkpoints=pts, regret=reg, pulls=pls)
    return results
