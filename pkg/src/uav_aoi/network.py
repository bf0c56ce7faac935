"""Plain-numpy neural core for the Q-learner.

A fully-connected ReLU network in float64, analytic backprop for the
TD-error loss, Adam, and npz checkpoints. No autodiff anywhere: the
gradient path is short enough to write by hand and is cross-checked against
finite differences in the tests.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class Mlp:
    """Weights and biases of a ReLU network with a linear output layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def create(cls, layer_sizes: list[int], rng: np.random.Generator) -> "Mlp":
        """He-uniform init: W ~ U(-b, b) with b = sqrt(6 / fan_in), zero biases."""
        if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
            raise ConfigError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out, dtype=np.float64))
        return cls(weights=weights, biases=biases)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def forward(self, X) -> np.ndarray:
        """Batch of Q-value rows for a batch of encoded states."""
        a, _ = self.forward_cached(X)
        return a[-1]

    def forward_cached(self, X) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Forward pass keeping per-layer activations for backprop.

        Returns (activations, pre_activations); activations[0] is the input,
        activations[-1] the linear output.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.weights[0].shape[0]:
            raise ConfigError(
                f"input shape {X.shape} does not match input width {self.weights[0].shape[0]}"
            )
        acts, pres = [X], []
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pres.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts, pres


def copy_params(net: Mlp) -> Mlp:
    """Bit-exact deep copy, used for target-network syncs."""
    return Mlp(weights=[w.copy() for w in net.weights],
               biases=[b.copy() for b in net.biases])


@dataclass
class Minibatch:
    """One replay sample: arrays over the batch dimension."""

    states: np.ndarray       # (n, state_dim) float64
    actions: np.ndarray      # (n,) int64
    rewards: np.ndarray      # (n,) float64
    next_states: np.ndarray  # (n, state_dim) float64
    dones: np.ndarray        # (n,) bool


def td_targets(batch: Minibatch, target_net: Mlp, gamma: float) -> np.ndarray:
    """One-step TD targets r + gamma * max_a' Q_target(s', a'), truncated at
    terminal transitions."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must be in [0, 1), got {gamma}")
    q_next = target_net.forward(batch.next_states)
    bootstrap = q_next.max(axis=1)
    return batch.rewards + gamma * np.where(batch.dones, 0.0, bootstrap)


@dataclass
class AdamState:
    """Adam moments for every parameter tensor of one Mlp."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_network(cls, net: Mlp, lr: float = 1e-4, beta1: float = 0.9,
                    beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {lr}")
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
            m_w=[np.zeros_like(w) for w in net.weights],
            v_w=[np.zeros_like(w) for w in net.weights],
            m_b=[np.zeros_like(b) for b in net.biases],
            v_b=[np.zeros_like(b) for b in net.biases],
        )

    def apply(self, net: Mlp, grad_w: list[np.ndarray], grad_b: list[np.ndarray]) -> None:
        """In-place Adam update with bias-corrected moments."""
        self.step += 1
        c1 = 1.0 - self.beta1 ** self.step
        c2 = 1.0 - self.beta2 ** self.step
        for i in range(len(net.weights)):
            for param, grad, m, v in (
                (net.weights[i], grad_w[i], self.m_w[i], self.v_w[i]),
                (net.biases[i], grad_b[i], self.m_b[i], self.v_b[i]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def q_loss_and_grads(net: Mlp, batch: Minibatch, targets: np.ndarray,
                     huber_delta: float | None = None):
    """Loss and parameter gradients of the TD regression.

    The loss touches only the Q-value of the action actually taken in each
    transition: mean squared error by default, Huber when ``huber_delta`` is
    set. Returns (loss, grad_w, grad_b).
    """
    acts, pres = net.forward_cached(batch.states)
    q = acts[-1]
    n = q.shape[0]
    rows = np.arange(n)
    err = q[rows, batch.actions] - targets

    if huber_delta is None:
        loss = float(np.mean(err * err))
        derr = 2.0 * err / n
    else:
        d = float(huber_delta)
        small = np.abs(err) <= d
        loss = float(np.mean(np.where(small, err * err, d * (2.0 * np.abs(err) - d))))
        derr = np.where(small, 2.0 * err, 2.0 * d * np.sign(err)) / n

    delta = np.zeros_like(q)
    delta[rows, batch.actions] = derr

    grad_w = [np.empty(0)] * len(net.weights)
    grad_b = [np.empty(0)] * len(net.biases)
    for i in reversed(range(len(net.weights))):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pres[i - 1] > 0.0)
    return loss, grad_w, grad_b


def clip_gradients(grad_w, grad_b, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.
    Returns the pre-clip norm."""
    total = 0.0
    for g in (*grad_w, *grad_b):
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in (*grad_w, *grad_b):
            g *= scale
    return norm


def train_step(net: Mlp, adam: AdamState, batch: Minibatch, targets: np.ndarray,
               huber_delta: float | None = None,
               grad_clip: float | None = None) -> float:
    """One gradient step on the TD loss; returns the loss.

    Aborts with FloatingPointError on a non-finite loss rather than letting
    a diverged run silently keep training.
    """
    loss, grad_w, grad_b = q_loss_and_grads(net, batch, targets, huber_delta)
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite TD loss at adam step {adam.step + 1}: loss={loss}, "
            f"|q|max={max(float(np.abs(w).max()) for w in net.weights):g}, "
            f"targets in [{targets.min():g}, {targets.max():g}]"
        )
    if grad_clip is not None:
        clip_gradients(grad_w, grad_b, float(grad_clip))
    adam.apply(net, grad_w, grad_b)
    return loss


def tabular_q_update(q: float, alpha: float, reward: float, gamma: float,
                     max_next: float) -> float:
    """Classic one-state Q-learning update; kept for the exactness tests and
    for sanity-checking the TD target arithmetic."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must be in [0, 1), got {gamma}")
    return q + alpha * (reward + gamma * max_next - q)


# ------------------------------------------------------------ checkpoints


def save_checkpoint(path: str, net: Mlp, adam: AdamState | None = None,
                    meta: dict[str, str] | None = None) -> None:
    """Write net (+ optional optimizer state and string metadata) to one npz.

    float64 arrays go in raw, so load_checkpoint round-trips bit-exactly.
    The write lands via a temp file + rename, never a half-written npz.
    """
    arrays: dict[str, np.ndarray] = {
        "format_version": np.int64(1),
        "layer_sizes": np.asarray(net.layer_sizes, dtype=np.int64),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    if adam is not None:
        arrays["adam_hyper"] = np.array([adam.lr, adam.beta1, adam.beta2, adam.eps])
        arrays["adam_step"] = np.int64(adam.step)
        for i in range(len(net.weights)):
            arrays[f"adam_mw{i}"] = adam.m_w[i]
            arrays[f"adam_vw{i}"] = adam.v_w[i]
            arrays[f"adam_mb{i}"] = adam.m_b[i]
            arrays[f"adam_vb{i}"] = adam.v_b[i]
    for key, value in (meta or {}).items():
        arrays[f"meta_{key}"] = np.str_(value)

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> tuple[Mlp, AdamState | None, dict[str, str]]:
    """Inverse of save_checkpoint."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != 1:
            raise ConfigError(f"unknown checkpoint format version {version}")
        sizes = [int(s) for s in data["layer_sizes"]]
        n_layers = len(sizes) - 1
        net = Mlp(
            weights=[data[f"w{i}"] for i in range(n_layers)],
            biases=[data[f"b{i}"] for i in range(n_layers)],
        )
        adam = None
        if "adam_step" in data:
            lr, b1, b2, eps = (float(x) for x in data["adam_hyper"])
            adam = AdamState(
                lr=lr, beta1=b1, beta2=b2, eps=eps, step=int(data["adam_step"]),
                m_w=[data[f"adam_mw{i}"] for i in range(n_layers)],
                v_w=[data[f"adam_vw{i}"] for i in range(n_layers)],
                m_b=[data[f"adam_mb{i}"] for i in range(n_layers)],
                v_b=[data[f"adam_vb{i}"] for i in range(n_layers)],
            )
        meta = {key[5:]: str(data[key]) for key in data.files if key.startswith("meta_")}
    if net.layer_sizes != sizes:
        raise ConfigError("checkpoint arrays disagree with recorded layer sizes")
    return net, adam, meta
