"""Seeded task simulators: CartPole, holonomic navigation, grid navigation.

Every environment is a value-semantic state machine. ``reset(rng)`` returns a
state vector and ``step(state, action, t)`` returns a :class:`StepResult`;
``t`` counts the steps already taken in the episode (only the grid task uses
it). The ``*_batch`` variants operate on ``(B, obs_dim)`` arrays and are what
the trainer calls.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    action_count: int
    max_horizon: int
    gamma: float
    r_max: float

    def __post_init__(self):
        if self.obs_dim < 1 or self.action_count < 1:
            raise ValueError("obs_dim and action_count must be positive")
        if self.max_horizon < 1:
            raise ValueError("max_horizon must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")


@dataclass(frozen=True, eq=False)
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool


class Environment:
    spec: EnvSpec

    def reset(self, rng):
        return self.reset_batch(rng, 1)[0]

    def step(self, state, action, t=0, rng=None) -> StepResult:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.spec.obs_dim,):
            raise ValueError(
                f"{self.spec.name}: state must have shape ({self.spec.obs_dim},)")
        if not np.all(np.isfinite(state)):
            raise ValueError(f"{self.spec.name}: state must be finite")
        nxt, r, done = self.step_batch(state[None, :], np.array([action]), t, rng)
        return StepResult(nxt[0], float(r[0]), bool(done[0]))

    def reset_batch(self, rng, n):
        raise NotImplementedError

    def step_batch(self, states, actions, t=0, rng=None):
        """Advance ``B`` states; returns ``(next_states, rewards, dones)``."""
        raise NotImplementedError

    def _check_actions(self, actions):
        actions = np.asarray(actions)
        if actions.dtype.kind not in "iu":
            if not np.all(actions == np.round(actions)):
                raise ValueError(f"{self.spec.name}: actions must be integers")
            actions = actions.astype(np.intp)
        if actions.size and (actions.min() < 0 or actions.max() >= self.spec.action_count):
            raise ValueError(
                f"{self.spec.name}: action must be in 0..{self.spec.action_count - 1}")
        return actions


# --------------------------------------------------------------------------
# CartPole

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
POLE_HALF_LENGTH = 0.5
FORCE_MAG = 10.0
DT = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360


class CartPole(Environment):
    def __init__(self, horizon=200, gamma=0.99):
        self.spec = EnvSpec("cartpole", 4, 2, horizon, gamma, 1.0)

    def reset_batch(self, rng, n):
        return rng.uniform(-0.05, 0.05, size=(n, 4))

    def step_batch(self, states, actions, t=0, rng=None):
        actions = self._check_actions(actions)
        x, x_dot, theta, theta_dot = np.asarray(states, dtype=np.float64).T
        force = np.where(actions == 1, FORCE_MAG, -FORCE_MAG)
        cos, sin = np.cos(theta), np.sin(theta)
        total_mass = CART_MASS + POLE_MASS
        pml = POLE_MASS * POLE_HALF_LENGTH
        temp = (force + pml * theta_dot ** 2 * sin) / total_mass
        theta_acc = (GRAVITY * sin - cos * temp) / (
            POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos ** 2 / total_mass))
        x_acc = temp - pml * theta_acc * cos / total_mass

        nxt = np.empty((len(x), 4))
        nxt[:, 0] = x + DT * x_dot
        nxt[:, 1] = x_dot + DT * x_acc
        nxt[:, 2] = theta + DT * theta_dot
        nxt[:, 3] = theta_dot + DT * theta_acc
        done = (np.abs(nxt[:, 0]) > X_LIMIT) | (np.abs(nxt[:, 2]) > THETA_LIMIT)
        return nxt, np.ones(len(x)), done


# --------------------------------------------------------------------------
# Holonomic point robot with one disc obstacle

VELOCITY_STEPS = (-0.1, 0.0, 0.1)


class HolonomicNav(Environment):
    """State ``[x, y, vx, vy, o1, o2, r_o]``; the goal lives only in the reward."""

    def __init__(self, horizon=500, gamma=0.99, start=(5.0, 5.0), goal=(45.0, 45.0),
                 obstacle=(25.0, 25.0), obstacle_radius=5.0, size=50.0,
                 max_speed=1.0, goal_tolerance=1.0, min_distance=0.1):
        self.start = np.array(start, dtype=np.float64)
        self.goal = np.array(goal, dtype=np.float64)
        self.obstacle = np.array(obstacle, dtype=np.float64)
        self.obstacle_radius = float(obstacle_radius)
        self.size = float(size)
        self.max_speed = float(max_speed)
        self.goal_tolerance = float(goal_tolerance)
        self.min_distance = float(min_distance)
        # 50/d is the dominant term once d is floored, so this bounds |r|
        self.spec = EnvSpec("holonomic", 7, 9, horizon, gamma,
                            50.0 / min_distance * 1e-4)

    def reward_at(self, d):
        d = np.maximum(d, self.min_distance)
        return (50.0 / d - d) * 1e-4

    def reset_batch(self, rng, n):
        s = np.concatenate([self.start, [0.0, 0.0], self.obstacle,
                            [self.obstacle_radius]])
        return np.tile(s, (n, 1))

    def step_batch(self, states, actions, t=0, rng=None):
        actions = self._check_actions(actions)
        s = np.array(states, dtype=np.float64)
        inc = np.asarray(VELOCITY_STEPS)
        vel = s[:, 2:4] + np.stack([inc[actions // 3], inc[actions % 3]], axis=1)
        vel = np.clip(vel, -self.max_speed, self.max_speed)
        pos = np.clip(s[:, 0:2] + vel, 0.0, self.size)
        s[:, 0:2] = pos
        s[:, 2:4] = vel

        d = np.hypot(*(pos - self.goal).T)
        d_obs = np.hypot(*(pos - s[:, 4:6]).T)
        done = (d < self.goal_tolerance) | (d_obs < s[:, 6])
        return s, self.reward_at(d), done


# --------------------------------------------------------------------------
# Grid navigation: 6x6 room with border walls, sparse goal reward

# heading index -> (dx, dy); 0=E, 1=S, 2=W, 3=N with y growing downward
HEADINGS = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])
LEFT, RIGHT, FORWARD = 0, 1, 2


class GridNav(Environment):
    """Observation ``[x, y, onehot(heading) x4, dx_goal, dy_goal]``, all scaled."""

    def __init__(self, horizon=200, gamma=0.99, size=6):
        self.size = size
        self.lo, self.hi = 1, size - 2
        self.goal = np.array([self.hi, self.hi])
        self.span = float(self.hi - self.lo)
        cells = [(x, y) for y in range(self.lo, self.hi + 1)
                 for x in range(self.lo, self.hi + 1)]
        self.start_cells = np.array([c for c in cells if c != tuple(self.goal)])
        self.spec = EnvSpec("gridnav", 8, 3, horizon, gamma, 1.0)

    def encode(self, pos, heading):
        pos = np.atleast_2d(pos)
        heading = np.atleast_1d(heading)
        obs = np.zeros((len(pos), 8))
        obs[:, 0:2] = (pos - self.lo) / self.span
        obs[np.arange(len(pos)), 2 + heading] = 1.0
        obs[:, 6:8] = (self.goal - pos) / self.span
        return obs

    def decode(self, states):
        states = np.atleast_2d(states)
        pos = np.rint(states[:, 0:2] * self.span + self.lo).astype(np.intp)
        heading = np.argmax(states[:, 2:6], axis=1)
        return pos, heading

    def reset_batch(self, rng, n):
        idx = rng.integers(len(self.start_cells), size=n)
        heading = rng.integers(4, size=n)
        return self.encode(self.start_cells[idx], heading)

    def step_batch(self, states, actions, t=0, rng=None):
        actions = self._check_actions(actions)
        pos, heading = self.decode(states)
        heading = np.where(actions == LEFT, (heading - 1) % 4, heading)
        heading = np.where(actions == RIGHT, (heading + 1) % 4, heading)
        target = pos + HEADINGS[heading]
        inside = np.all((target >= self.lo) & (target <= self.hi), axis=1)
        move = (actions == FORWARD) & inside
        pos = np.where(move[:, None], target, pos)

        elapsed = t + 1
        at_goal = np.all(pos == self.goal, axis=1)
        reward = np.where(at_goal, 1.0 - 0.9 * elapsed / self.spec.max_horizon, 0.0)
        done = at_goal | (elapsed >= self.spec.max_horizon)
        return self.encode(pos, heading), reward, done


# --------------------------------------------------------------------------
# Small tabular MDP with one-hot observations (enumerable, used for checks)

class TabularMDP(Environment):
    """Finite MDP: ``transitions[s, a, s']``, ``rewards[s, a]``, ``initial[s]``."""

    def __init__(self, transitions, rewards, initial, horizon, gamma, name="tabular"):
        self.transitions = np.asarray(transitions, dtype=np.float64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.initial = np.asarray(initial, dtype=np.float64)
        n_s, n_a, _ = self.transitions.shape
        if not np.allclose(self.transitions.sum(axis=2), 1.0):
            raise ValueError("transition rows must sum to 1")
        if not np.isclose(self.initial.sum(), 1.0):
            raise ValueError("initial distribution must sum to 1")
        self.spec = EnvSpec(name, n_s, n_a, horizon, gamma,
                            float(np.max(np.abs(self.rewards))) or 1.0)

    @property
    def n_states(self):
        return self.spec.obs_dim

    def _draw(self, probs, u):
        cdf = np.cumsum(probs, axis=-1)
        return np.minimum(np.sum(cdf <= u[:, None], axis=-1), probs.shape[-1] - 1)

    def reset_batch(self, rng, n):
        s = self._draw(np.tile(self.initial, (n, 1)), rng.random(n))
        return np.eye(self.n_states)[s]

    def step_batch(self, states, actions, t=0, rng=None):
        if rng is None:
            raise ValueError("TabularMDP.step_batch needs an rng for transitions")
        actions = self._check_actions(actions)
        s = np.argmax(states, axis=1)
        nxt = self._draw(self.transitions[s, actions], rng.random(len(s)))
        return np.eye(self.n_states)[nxt], self.rewards[s, actions], np.zeros(len(s), bool)


# --------------------------------------------------------------------------

REGISTRY = {"cartpole": CartPole, "holonomic": HolonomicNav, "gridnav": GridNav}


def make_env(name, horizon=None, gamma=None) -> Environment:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; choose from {sorted(REGISTRY)}") from None
    kwargs = {}
    if horizon is not None:
        kwargs["horizon"] = horizon
    if gamma is not None:
        kwargs["gamma"] = gamma
    return cls(**kwargs)


_DEFAULTS = {name: cls() for name, cls in REGISTRY.items()}


def cartpole_reset(rng):
    return _DEFAULTS["cartpole"].reset(rng)


def cartpole_step(state, action) -> StepResult:
    return _DEFAULTS["cartpole"].step(state, action)


def holonomic_reset(rng=None):
    return _DEFAULTS["holonomic"].reset(rng)


def holonomic_step(state, action) -> StepResult:
    return _DEFAULTS["holonomic"].step(state, action)


def gridnav_reset(rng):
    return _DEFAULTS["gridnav"].reset(rng)


def gridnav_step(state, action, t=0) -> StepResult:
    return _DEFAULTS["gridnav"].step(state, action, t)


def write_trajectory_csv(states, actions, rewards, dones, path):
    """Debug dump: one row per step with columns t, s0..s{d-1}, action, reward, done."""
    states = np.asarray(states)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"s{i}" for i in range(states.shape[1])),
                    "action", "reward", "done"])
        for t, (s, a, r, d) in enumerate(zip(states, actions, rewards, dones)):
            w.writerow([t, *(repr(float(v)) for v in s), int(a), repr(float(r)), int(bool(d))])
