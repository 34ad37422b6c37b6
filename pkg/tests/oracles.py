"""Independent reference computations used by the tests.

Nothing here calls the estimator, the rewards-to-go pass or the batched
backward pass that the library uses for training.
"""
import itertools
import math

import numpy as np

from riskgrad.environments import TabularMDP
from riskgrad.policy_net import forward, grad_log_prob, init_params, log_prob


def tiny_mdp(horizon=2, gamma=0.9):
    transitions = [[[0.8, 0.2], [0.3, 0.7]],
                   [[0.5, 0.5], [0.1, 0.9]]]
    rewards = [[1.0, 0.0], [0.0, 2.0]]
    return TabularMDP(transitions, rewards, [0.6, 0.4], horizon, gamma, name="tiny")


def tiny_policy(seed=3, scale=2.0):
    params = init_params([2, 4, 4, 4, 2], np.random.default_rng(seed))
    return params.replace(params.weights * scale)


def central_difference(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (f(tp) - f(tm)) / (2 * h)
    return g


def fd_grad_log_prob(params, state, action, h=1e-5):
    return central_difference(
        lambda th: log_prob(params.replace(th), state, action), params.weights, h)


def enumerate_trajectories(mdp, params):
    """Yield ``(probability, states, actions, rewards)`` for every length-H path."""
    H = mdp.spec.max_horizon
    n_s, n_a = mdp.n_states, mdp.spec.action_count
    eye = np.eye(n_s)
    pi = {s: forward(params, eye[s]).probs for s in range(n_s)}
    for s0 in range(n_s):
        for acts in itertools.product(range(n_a), repeat=H):
            for nxt in itertools.product(range(n_s), repeat=H - 1):
                states = (s0, *nxt)
                p = mdp.initial[s0]
                for t in range(H):
                    p *= pi[states[t]][acts[t]]
                    if t + 1 < H:
                        p *= mdp.transitions[states[t], acts[t], states[t + 1]]
                rewards = [mdp.rewards[states[t], acts[t]] for t in range(H)]
                yield p, states, acts, rewards


def per_trajectory_estimate(mdp, params, states, acts, rewards, beta=None):
    """``sum_t score_t * w(R(t))`` with a direct double sum for ``R(t)``."""
    gamma = mdp.spec.gamma
    eye = np.eye(mdp.n_states)
    H = len(rewards)
    g = np.zeros(params.param_count)
    for t in range(H):
        R_t = sum(gamma ** k * rewards[k] for k in range(t, H))
        w = R_t if beta is None else math.exp(beta * R_t) / beta
        g += grad_log_prob(params, eye[states[t]], acts[t]) * w
    return g


def exact_gradient(mdp, params, beta=None, with_second_moment=False):
    """Expectation of the one-trajectory estimator over all paths.

    With ``with_second_moment`` also returns ``E||g_tau||^2`` so callers can get
    the exact mean squared error of an n-trajectory average.
    """
    mean = np.zeros(params.param_count)
    second = 0.0
    total_p = 0.0
    for p, states, acts, rewards in enumerate_trajectories(mdp, params):
        g = per_trajectory_estimate(mdp, params, states, acts, rewards, beta)
        mean += p * g
        second += p * float(g @ g)
        total_p += p
    assert abs(total_p - 1.0) < 1e-12
    if with_second_moment:
        return mean, second
    return mean


def mc_relative_rmse(mdp, params, n, beta=None):
    """Exact root-mean-square l2 error of an n-trajectory mean, relative to ||grad||."""
    mean, second = exact_gradient(mdp, params, beta, with_second_moment=True)
    var_trace = second - float(mean @ mean)
    return math.sqrt(var_trace / n) / float(np.linalg.norm(mean))


def cartpole_euler_step(state, action):
    """Scalar re-derivation of one Euler step of the cart-pole equations."""
    x, x_dot, th, th_dot = (float(v) for v in state)
    g, m_c, m_p, l, f_mag, dt = 9.8, 1.0, 0.1, 0.5, 10.0, 0.02
    f = f_mag if action == 1 else -f_mag
    m = m_c + m_p
    tmp = (f + m_p * l * th_dot * th_dot * math.sin(th)) / m
    th_acc = (g * math.sin(th) - math.cos(th) * tmp) / (
        l * (4.0 / 3.0 - m_p * math.cos(th) ** 2 / m))
    x_acc = tmp - m_p * l * th_acc * math.cos(th) / m
    return [x + dt * x_dot, x_dot + dt * x_acc, th + dt * th_dot, th_dot + dt * th_acc]
