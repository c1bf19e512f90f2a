"""Small fully-connected value networks, trained from scratch with numpy.

Hidden layers use rectifier activations, the output layer is linear and
holds one value per routing action. Training minimises the mean squared
error between the value of the taken action and a temporal-difference
target; gradients come from plain reverse-mode differentiation and are
applied with vanilla SGD.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is missing, truncated, or structurally wrong."""


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # W[l]: (fan_out, fan_in)
    biases: list[np.ndarray]   # b[l]: (fan_out,)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def flat_params(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )


def init_mlp(sizes: tuple[int, ...], rng: np.random.Generator) -> MlpModel:
    """He-normal weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Action values for one state (d,) or a batch (B, d)."""
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != model.sizes[0]:
        raise ValueError(
            f"state dimension {a.shape[1]} does not match model input {model.sizes[0]}"
        )
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w.T + b
        if l != last:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


def hidden_activations(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Activations of the last hidden layer, shape (B, hidden)."""
    a = np.atleast_2d(x)
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
    return a


def _forward_cached(model: MlpModel, x: np.ndarray):
    acts = [np.atleast_2d(x)]
    pre = []
    a = acts[0]
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def backward(
    model: MlpModel,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Gradient of mean((Q(s)[a] - y)^2) over the batch.

    Returns (weight grads, bias grads, loss).
    """
    if len(states) == 0:
        raise ValueError("empty batch")
    acts, pre = _forward_cached(model, states)
    q = acts[-1]
    batch = np.arange(len(states))
    err = q[batch, actions] - targets
    loss = float(np.mean(err**2))
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite training loss {loss}; targets range "
            f"[{np.min(targets)}, {np.max(targets)}]"
        )
    dq = np.zeros_like(q)
    dq[batch, actions] = 2.0 * err / len(states)

    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    delta = dq
    for l in range(len(model.weights) - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (pre[l - 1] > 0)
    return grads_w, grads_b, loss


def sgd_step(
    model: MlpModel, grads_w: list[np.ndarray], grads_b: list[np.ndarray], lr: float
) -> None:
    for w, gw in zip(model.weights, grads_w):
        w -= lr * gw
    for b, gb in zip(model.biases, grads_b):
        b -= lr * gb


def td_targets(
    online: MlpModel,
    target: MlpModel,
    rewards: np.ndarray,
    next_states: np.ndarray,
    next_masks: np.ndarray,
    terminals: np.ndarray,
    gamma: float,
    ddqn: bool = True,
) -> np.ndarray:
    """Bootstrap targets y = r + gamma * Q_next for a batch.

    With the double estimator the online network selects the next action
    over the valid set and the target network evaluates it; without it the
    target network does both. Terminal transitions (and states with no
    valid action) bootstrap to zero.
    """
    q_target = forward(target, next_states)
    masked_invalid = ~next_masks
    if ddqn:
        q_online = forward(online, next_states)
        q_sel = np.where(masked_invalid, -np.inf, q_online)
    else:
        q_sel = np.where(masked_invalid, -np.inf, q_target)
    any_valid = next_masks.any(axis=1)
    best = np.where(any_valid, np.argmax(q_sel, axis=1), 0)
    bootstrap = q_target[np.arange(len(rewards)), best]
    bootstrap = np.where(any_valid & ~terminals, bootstrap, 0.0)
    return rewards + gamma * bootstrap


def save_model(model: MlpModel, path) -> None:
    arrays = {
        "format_version": np.array([MODEL_FORMAT_VERSION]),
        "sizes": np.array(model.sizes),
        "activation": np.array(["relu"]),
        "n_layers": np.array([len(model.weights)]),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_model(path) -> MlpModel:
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        version = int(data["format_version"][0])
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"model file {path}: unsupported format version {version}"
            )
        n_layers = int(data["n_layers"][0])
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
    except KeyError as exc:
        raise ModelFormatError(f"model file {path}: missing field {exc}") from exc
    model = MlpModel(weights=[np.array(w) for w in weights],
                     biases=[np.array(b) for b in biases])
    if list(data["sizes"]) != list(model.sizes):
        raise ModelFormatError(f"model file {path}: inconsistent layer sizes")
    return model


class ReplayBuffer:
    """Fixed-capacity ring of transitions; sampling is uniform without
    replacement within one batch, oldest entries overwritten first."""

    def __init__(self, capacity: int, state_dim: int, n_actions: int):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._write = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, state, action, reward, next_state, next_mask, terminal) -> None:
        i = self._write
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        if next_state is not None:
            self.next_states[i] = next_state
            self.next_masks[i] = next_mask
        else:
            self.next_states[i] = 0.0
            self.next_masks[i] = False
        self.terminals[i] = terminal
        self._write = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.choice(self._size, size=min(batch, self._size), replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.next_masks[idx],
            self.terminals[idx],
        )
