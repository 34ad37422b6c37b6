"""Softmax MLP policy with hand-written backpropagation.

Parameters live in one flat float64 vector. Each layer contributes its weight
matrix of shape ``(in_dim, out_dim)`` in row-major order followed by its bias
vector, layers in order from input to output.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_HEADER = "riskgrad-policy v1"
DEFAULT_HIDDEN = (64, 64, 64)


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint header names an unsupported format version."""


def _check_layer_sizes(layer_sizes):
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) != 5:
        raise ValueError(
            f"policy needs input, three hidden and output sizes; got {sizes}")
    if any(n <= 0 for n in sizes):
        raise ValueError(f"layer sizes must be positive; got {sizes}")
    return sizes


def count_params(layer_sizes: Sequence[int]) -> int:
    return sum((n_in + 1) * n_out
               for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass(frozen=True, eq=False)
class PolicyParams:
    layer_sizes: tuple
    weights: np.ndarray

    def __post_init__(self):
        sizes = _check_layer_sizes(self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size != count_params(sizes):
            raise ValueError(
                f"expected {count_params(sizes)} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("policy weights must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_layers", _unflatten(w, sizes))

    @property
    def param_count(self) -> int:
        return self.weights.size

    @property
    def obs_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def action_count(self) -> int:
        return self.layer_sizes[-1]

    def layers(self):
        """Return ``[(W, b), ...]`` as views into the flat vector."""
        return self._layers

    def replace(self, weights) -> "PolicyParams":
        return PolicyParams(self.layer_sizes, weights)

    def __eq__(self, other):
        if not isinstance(other, PolicyParams):
            return NotImplemented
        return (self.layer_sizes == other.layer_sizes
                and np.array_equal(self.weights, other.weights))


def _unflatten(flat, layer_sizes):
    out = []
    pos = 0
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        W = flat[pos:pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        b = flat[pos:pos + n_out]
        pos += n_out
        out.append((W, b))
    return out


def init_params(layer_sizes: Sequence[int], rng: np.random.Generator) -> PolicyParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    sizes = _check_layer_sizes(layer_sizes)
    chunks = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return PolicyParams(sizes, np.concatenate(chunks))


@dataclass(frozen=True, eq=False)
class ActionDistribution:
    probs: np.ndarray
    logits: np.ndarray

    def log_probs(self) -> np.ndarray:
        return log_softmax(self.logits)


def softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def _check_states(params, states):
    x = np.asarray(states, dtype=np.float64)
    if x.shape[-1] != params.obs_dim:
        raise ValueError(
            f"state has dimension {x.shape[-1]}, policy expects {params.obs_dim}")
    if not np.isfinite(x.sum()):
        raise ValueError("state contains non-finite entries")
    return x


def _hidden_activations(params, x):
    layers = params._layers
    acts = [x]
    h = x
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    return acts, h @ W + b


def forward(params: PolicyParams, state) -> ActionDistribution:
    x = _check_states(params, state)
    if x.ndim != 1:
        raise ValueError("forward expects a single state vector; use forward_batch")
    _, logits = _hidden_activations(params, x)
    return ActionDistribution(softmax(logits), logits)


def forward_batch(params: PolicyParams, states) -> np.ndarray:
    """Logits for a ``(B, obs_dim)`` batch of states."""
    x = _check_states(params, np.atleast_2d(states))
    return _hidden_activations(params, x)[1]


def sample_action(dist: ActionDistribution, rng: np.random.Generator):
    """Draw one action by inverse CDF; returns ``(action, log_prob)``."""
    cdf = np.cumsum(dist.probs)
    a = int(np.searchsorted(cdf, rng.random(), side="right"))
    a = min(a, len(cdf) - 1)
    return a, float(dist.log_probs()[a])


def sample_actions(logits, rng: np.random.Generator) -> np.ndarray:
    """Vectorised inverse-CDF sampling, one uniform draw per row."""
    probs = softmax(logits)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))
    a = np.sum(cdf <= u[:, None], axis=1)
    return np.minimum(a, probs.shape[1] - 1)


def weighted_score_sum(params: PolicyParams, states, actions, weights) -> np.ndarray:
    """Sum over rows of ``weights[i] * grad_theta log pi(actions[i] | states[i])``.

    A single backward pass over the whole batch: the upstream gradient at the
    logits is ``weights[i] * (onehot(a_i) - pi(.|s_i))``.
    """
    x = _check_states(params, np.atleast_2d(states))
    actions = np.asarray(actions, dtype=np.intp).reshape(-1)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if not (len(x) == len(actions) == len(weights)):
        raise ValueError("states, actions and weights must have equal length")
    if np.any(actions < 0) or np.any(actions >= params.action_count):
        raise ValueError("action index out of range")

    acts, logits = _hidden_activations(params, x)
    delta = -softmax(logits)
    delta[np.arange(len(actions)), actions] += 1.0
    delta *= weights[:, None]

    layers = params.layers()
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            delta = (delta @ W.T) * (1.0 - acts[k] ** 2)
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def grad_log_prob(params: PolicyParams, state, action) -> np.ndarray:
    """Score function grad_theta log pi(action | state), flat like ``params.weights``."""
    x = np.asarray(state, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("grad_log_prob expects a single state vector")
    return weighted_score_sum(params, x[None, :], [action], [1.0])


def log_prob(params: PolicyParams, state, action) -> float:
    return float(forward(params, state).log_probs()[action])


def save_checkpoint(params: PolicyParams, path) -> Path:
    path = Path(path)
    lines = [CHECKPOINT_HEADER, ",".join(str(n) for n in params.layer_sizes)]
    lines.extend(f"{w:.17g}" for w in params.weights)
    path.write_text("\n".join(lines) + "\n")
    return path


def load_checkpoint(path) -> PolicyParams:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise CheckpointError(f"{path}: empty checkpoint")
    header = lines[0].strip()
    if header != CHECKPOINT_HEADER:
        if header.startswith("riskgrad-policy "):
            raise CheckpointVersionError(
                f"{path}: unsupported checkpoint version {header.split()[-1]!r}")
        raise CheckpointError(f"{path}: not a riskgrad policy checkpoint")
    if len(lines) < 2:
        raise CheckpointError(f"{path}: missing layer sizes")
    try:
        sizes = _check_layer_sizes(lines[1].split(","))
    except ValueError as exc:
        raise CheckpointError(f"{path}: bad layer sizes: {exc}") from exc
    body = [ln for ln in lines[2:] if ln.strip()]
    expected = count_params(sizes)
    if len(body) != expected:
        raise CheckpointError(
            f"{path}: expected {expected} weights, found {len(body)}")
    try:
        weights = np.array([float(ln) for ln in body])
    except ValueError as exc:
        raise CheckpointError(f"{path}: unparseable weight: {exc}") from exc
    try:
        return PolicyParams(sizes, weights)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
