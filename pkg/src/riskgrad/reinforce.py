"""Monte Carlo policy-gradient estimation, risk-neutral and exponential-utility.

Rewards-to-go keep the absolute discount exponent: ``R[t] = sum_{k>=t} gamma**k * r[k]``,
so ``R[0]`` is the discounted return of the whole trajectory. No baseline is
subtracted from either estimator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .policy_net import PolicyParams, forward_batch, sample_actions, weighted_score_sum

EXP_CLAMP = 700.0


class SaturationError(FloatingPointError):
    """Exponential utility overflowed in risk-seeking mode."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray = None

    def __post_init__(self):
        if len(self.actions) == 0:
            raise ValueError("trajectory must contain at least one step")
        if not (len(self.states) == len(self.actions) == len(self.rewards)):
            raise ValueError("states, actions and rewards must align")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("trajectory rewards must be finite")
        if self.dones is None:
            dones = np.zeros(len(self.actions), dtype=bool)
            object.__setattr__(self, "dones", dones)

    def __len__(self):
        return len(self.actions)

    @property
    def undiscounted_return(self) -> float:
        return float(np.sum(self.rewards))

    def discounted_return(self, gamma) -> float:
        return float(rewards_to_go(self.rewards, gamma)[0])


@dataclass(frozen=True)
class RiskObjective:
    mode: str = "neutral"
    beta: float = 0.0

    def __post_init__(self):
        if self.mode not in ("neutral", "sensitive"):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        if self.mode == "sensitive" and (self.beta == 0 or not math.isfinite(self.beta)):
            raise ValueError("risk-sensitive objective needs a finite nonzero beta")

    @classmethod
    def neutral(cls):
        return cls("neutral", 0.0)

    @classmethod
    def sensitive(cls, beta):
        return cls("sensitive", float(beta))

    @classmethod
    def from_beta(cls, beta):
        """``beta`` of 0 or None means risk-neutral."""
        if beta is None or beta == 0:
            return cls.neutral()
        return cls.sensitive(beta)

    @property
    def is_neutral(self):
        return self.mode == "neutral"

    def label(self):
        return "neutral" if self.is_neutral else f"beta{self.beta:g}"


def sample_trajectories(params: PolicyParams, env, n, horizon, rng) -> list:
    """Roll out ``n`` episodes of the policy in lock-step, each cut at ``horizon``."""
    if params.obs_dim != env.spec.obs_dim or params.action_count != env.spec.action_count:
        raise ValueError(
            f"policy {params.layer_sizes} does not fit environment {env.spec.name} "
            f"(obs_dim={env.spec.obs_dim}, actions={env.spec.action_count})")
    if n < 1 or horizon < 1:
        raise ValueError("need n >= 1 and horizon >= 1")

    states = env.reset_batch(rng, n)
    alive = np.ones(n, dtype=bool)
    rec_id, rec_s, rec_a, rec_r, rec_d = [], [], [], [], []
    for t in range(horizon):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        s = states[idx]
        a = sample_actions(forward_batch(params, s), rng)
        nxt, r, done = env.step_batch(s, a, t, rng)
        rec_id.append(idx)
        rec_s.append(s)
        rec_a.append(a)
        rec_r.append(r)
        rec_d.append(done)
        states[idx] = nxt
        alive[idx[done]] = False

    ids = np.concatenate(rec_id)
    order = np.argsort(ids, kind="stable")
    S = np.concatenate(rec_s)[order]
    A = np.concatenate(rec_a)[order]
    R = np.concatenate(rec_r)[order]
    D = np.concatenate(rec_d)[order]
    bounds = np.cumsum(np.bincount(ids, minlength=n))
    out = []
    start = 0
    for stop in bounds:
        out.append(Trajectory(S[start:stop], A[start:stop], R[start:stop], D[start:stop]))
        start = stop
    return out


def sample_trajectory(params: PolicyParams, env, horizon, rng) -> Trajectory:
    return sample_trajectories(params, env, 1, horizon, rng)[0]


def rewards_to_go(rewards, gamma) -> np.ndarray:
    """Reverse pass ``R[t] = gamma**t * r[t] + R[t+1]``."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    r = np.asarray(rewards, dtype=np.float64)
    discounted = gamma ** np.arange(len(r)) * r
    return np.cumsum(discounted[::-1])[::-1]


def utility_weights(R, objective: RiskObjective):
    """Per-step multipliers of the score function and a mask of clamped exponents."""
    R = np.asarray(R, dtype=np.float64)
    if objective.is_neutral:
        return R.copy(), np.zeros(R.shape, dtype=bool)
    z = objective.beta * R
    saturated = z > EXP_CLAMP
    return np.exp(np.minimum(z, EXP_CLAMP)) / objective.beta, saturated


def utility_weight(R_t, objective: RiskObjective) -> float:
    """``R_t`` when risk-neutral, ``exp(beta * R_t) / beta`` otherwise."""
    if not math.isfinite(R_t):
        raise ValueError("rewards-to-go must be finite")
    w, _ = utility_weights(np.array([R_t]), objective)
    return float(w[0])


def estimate_gradient_stats(params: PolicyParams, trajectories, gamma,
                            objective: RiskObjective):
    """Return ``(gradient, saturation_count)`` for a batch of trajectories.

    Raises :class:`SaturationError` if any exponent had to be clamped while
    ``beta > 0``; with ``beta < 0`` clamped steps are only counted.
    """
    if len(trajectories) == 0:
        raise ValueError("need at least one trajectory")
    weights = []
    n_sat = 0
    for tr in trajectories:
        w, sat = utility_weights(rewards_to_go(tr.rewards, gamma), objective)
        weights.append(w)
        n_sat += int(np.count_nonzero(sat))
    if n_sat and objective.beta > 0:
        raise SaturationError(
            f"exp(beta*R) overflowed on {n_sat} steps with beta={objective.beta}; "
            "returns are too large for risk-seeking mode")
    S = np.concatenate([tr.states for tr in trajectories])
    A = np.concatenate([tr.actions for tr in trajectories])
    W = np.concatenate(weights)
    grad = weighted_score_sum(params, S, A, W) / len(trajectories)
    return grad, n_sat


def estimate_gradient(params: PolicyParams, trajectories, gamma,
                      objective: RiskObjective) -> np.ndarray:
    return estimate_gradient_stats(params, trajectories, gamma, objective)[0]


@dataclass(frozen=True, eq=False)
class AdamState:
    step_count: int
    first_moment: np.ndarray
    second_moment: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, param_count, **hyper):
        return cls(0, np.zeros(param_count), np.zeros(param_count), **hyper)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.first_moment.shape != self.second_moment.shape:
            raise ValueError("moment vectors must have equal shape")


def adam_update(params: PolicyParams, grad, state: AdamState):
    """One bias-corrected Adam step in the ascent direction."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.weights.shape or g.shape != state.first_moment.shape:
        raise ValueError(
            f"gradient shape {g.shape} does not match {params.param_count} parameters")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite entries")
    k = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** k)
    v_hat = v / (1.0 - state.beta2 ** k)
    theta = params.weights + state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params.replace(theta), replace(state, step_count=k, first_moment=m,
                                          second_moment=v)


def grad_norm(grad) -> float:
    return float(np.linalg.norm(np.asarray(grad, dtype=np.float64)))
