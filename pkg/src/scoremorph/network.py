"""Fully connected ReLU localization network with manual backprop and Adam.

The network maps an attribute vector to a scalar. Forward passes record a
tape of activations; backward replays it in reverse. The tape is tied to a
parameter version counter so gradients cannot be computed against a net
that has since been updated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_HIDDEN = (100, 100, 100, 100, 100)


@dataclass
class Tape:
    x: np.ndarray            # (m, d) batch input
    pre_acts: list           # per hidden layer, (m, h)
    acts: list               # per hidden layer, (m, h) = relu(pre_acts)
    version: int


class StaleTapeError(RuntimeError):
    """The tape was recorded against an older parameter state."""


class LocalizerNet:
    """ReLU MLP g(x; theta) -> R with explicit weight/bias lists.

    weights[l] has shape (out, in); biases[l] has shape (out,). Hidden
    layers apply ReLU, the output layer is affine.
    """

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up")
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"bias shape {b.shape} mismatches weight {w.shape}")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must produce a scalar")
        self.version = 0

    @classmethod
    def init(cls, d: int, seed: int, hidden=DEFAULT_HIDDEN) -> "LocalizerNet":
        """Uniform fan-in init (bound 1/sqrt(fan_in)), biases zero."""
        if d < 1:
            raise ValueError(f"attribute dimension must be >= 1, got {d}")
        rng = np.random.default_rng(seed)
        dims = [d, *hidden, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def layer_dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def d(self) -> int:
        return self.weights[0].shape[1]

    # ---- forward / backward ----

    def forward_batch(self, xs):
        """Return (g values (m,), tape)."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.d:
            raise ValueError(f"batch shape {xs.shape} mismatches d={self.d}")
        a = xs
        pre_acts, acts = [], []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w.T + b
            a = np.maximum(z, 0.0)
            pre_acts.append(z)
            acts.append(a)
        g = a @ self.weights[-1].T + self.biases[-1]
        return g[:, 0], Tape(xs, pre_acts, acts, self.version)

    def forward(self, x):
        """Return (scalar g, tape) for a single attribute vector."""
        g, tape = self.forward_batch(np.asarray(x, dtype=float)[None, :])
        return float(g[0]), tape

    def backward_batch(self, tape: Tape, upstream):
        """Gradients of sum_i upstream[i] * g(x_i) w.r.t. every parameter."""
        if tape.version != self.version:
            raise StaleTapeError("tape predates the current parameters")
        upstream = np.asarray(upstream, dtype=float)
        if upstream.shape != (tape.x.shape[0],):
            raise ValueError("upstream must hold one value per batch row")
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = upstream[:, None]
        a_prev = tape.acts[-1] if tape.acts else tape.x
        grads_w[-1] = delta.T @ a_prev
        grads_b[-1] = delta.sum(axis=0)
        da = delta @ self.weights[-1]
        for l in range(len(self.weights) - 2, -1, -1):
            dz = da * (tape.pre_acts[l] > 0)  # ReLU subgradient at 0 is 0
            a_prev = tape.acts[l - 1] if l > 0 else tape.x
            grads_w[l] = dz.T @ a_prev
            grads_b[l] = dz.sum(axis=0)
            da = dz @ self.weights[l]
        return list(zip(grads_w, grads_b))

    def backward(self, tape: Tape, upstream: float):
        return self.backward_batch(tape, np.array([upstream], dtype=float))

    def value(self, x) -> float:
        return self.forward(x)[0]

    def values(self, xs) -> np.ndarray:
        return self.forward_batch(xs)[0]

    # ---- parameter management ----

    def snapshot(self):
        return ([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def restore(self, snap):
        weights, biases = snap
        self.weights = [w.copy() for w in weights]
        self.biases = [b.copy() for b in biases]
        self.version += 1

    def to_json_dict(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LocalizerNet":
        return cls(d["weights"], d["biases"])


def zero_grads_like(net: LocalizerNet):
    return [(np.zeros_like(w), np.zeros_like(b))
            for w, b in zip(net.weights, net.biases)]


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: list
    v: list
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, net: LocalizerNet, learning_rate: float = 1e-3,
             beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AdamState":
        zeros = zero_grads_like(net)
        return cls(m=[(w.copy(), b.copy()) for w, b in zeros],
                   v=[(w.copy(), b.copy()) for w, b in zeros],
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                   eps=eps)


def adam_step(net: LocalizerNet, grads, state: AdamState):
    """Bias-corrected Adam update, applied in place. Returns (net, state)."""
    if len(grads) != len(net.weights):
        raise ValueError("gradient layer count mismatches the network")
    for gw, gb in grads:
        if np.isnan(gw).any() or np.isnan(gb).any():
            raise ValueError("NaN gradient; aborting the update")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for l, (gw, gb) in enumerate(grads):
        for which, g in (("w", gw), ("b", gb)):
            m = state.m[l][0 if which == "w" else 1]
            v = state.v[l][0 if which == "w" else 1]
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            target = net.weights[l] if which == "w" else net.biases[l]
            target -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    net.version += 1
    return net, state
