"""Minimal dense network used for the actors and critics.

Topology is input -> hidden -> hidden -> output with rectified-linear
hidden units and an identity output layer. Forward and reverse passes are
plain numpy; the reverse pass returns exact gradients of
sum(upstream * output) with respect to every parameter and the input. The
rectifier subgradient at zero is taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass
class MlpParams:
    """Layer weights (fan_out x fan_in) and biases, input to output order."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def shapes(self):
        return [w.shape for w in self.weights]

    def ravel(self) -> np.ndarray:
        """Flatten all parameters into one vector (for finite-difference tests)."""
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def with_ravel(self, vec: np.ndarray) -> "MlpParams":
        """Inverse of ravel: rebuild parameters from a flat vector."""
        out = self.copy()
        k = 0
        for arr in out.weights + out.biases:
            arr[...] = vec[k:k + arr.size].reshape(arr.shape)
            k += arr.size
        return out


def init_mlp(sizes, rng: np.random.Generator, low: float = -0.1, high: float = 0.1) -> MlpParams:
    """Uniformly initialized network for the given layer sizes."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.uniform(low, high, size=(fan_out, fan_in)))
        biases.append(rng.uniform(low, high, size=fan_out))
    return MlpParams(weights, biases)


def _check_chain(p: MlpParams):
    for j in range(len(p.weights) - 1):
        if p.weights[j + 1].shape[1] != p.weights[j].shape[0]:
            raise ShapeMismatch(f"layer {j} output {p.weights[j].shape[0]} feeds layer "
                                f"{j + 1} input {p.weights[j + 1].shape[1]}")
    for w, b in zip(p.weights, p.biases):
        if b.shape != (w.shape[0],):
            raise ShapeMismatch(f"bias shape {b.shape} does not match weight {w.shape}")


def _forward_cache(p: MlpParams, x: np.ndarray):
    _check_chain(p)
    squeeze = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=float))
    if h.shape[1] != p.weights[0].shape[1]:
        raise ShapeMismatch(f"input width {h.shape[1]} vs layer width {p.weights[0].shape[1]}")
    pre, post = [], [h]
    last = len(p.weights) - 1
    for j, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = post[-1] @ w.T + b
        pre.append(z)
        post.append(z if j == last else np.maximum(z, 0.0))
    return pre, post, squeeze


def mlp_forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a vector or a batch of rows."""
    _, post, squeeze = _forward_cache(p, x)
    y = post[-1]
    return y[0] if squeeze else y


def mlp_gradients(p: MlpParams, x: np.ndarray, upstream: np.ndarray):
    """Exact reverse pass for sum(upstream * output).

    Returns (parameter gradients as MlpParams, gradient w.r.t. x). For a
    batch, gradients are summed over the rows.
    """
    pre, post, squeeze = _forward_cache(p, x)
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    if g.shape != post[-1].shape:
        raise ShapeMismatch(f"upstream shape {g.shape} vs output shape {post[-1].shape}")
    w_grads = [None] * len(p.weights)
    b_grads = [None] * len(p.biases)
    delta = g
    for j in range(len(p.weights) - 1, -1, -1):
        if j != len(p.weights) - 1:
            delta = delta * (pre[j] > 0)
        w_grads[j] = delta.T @ post[j]
        b_grads[j] = delta.sum(axis=0)
        delta = delta @ p.weights[j]
    return MlpParams(w_grads, b_grads), (delta[0] if squeeze else delta)


def sgd_step(p: MlpParams, grads: MlpParams, lr: float) -> None:
    """In-place gradient-descent update."""
    for w, gw in zip(p.weights, grads.weights):
        w -= lr * gw
    for b, gb in zip(p.biases, grads.biases):
        b -= lr * gb


def soft_update(behaviour: MlpParams, target: MlpParams, tau: float) -> MlpParams:
    """Blend target parameters toward behaviour: (1 - tau) * behaviour + tau * target.

    tau = 1 leaves the target untouched, tau = 0 copies the behaviour net.
    """
    if behaviour.shapes() != target.shapes():
        raise ShapeMismatch("behaviour/target shapes differ")
    weights = [(1.0 - tau) * wb + tau * wt for wb, wt in zip(behaviour.weights, target.weights)]
    biases = [(1.0 - tau) * bb + tau * bt for bb, bt in zip(behaviour.biases, target.biases)]
    return MlpParams(weights, biases)
