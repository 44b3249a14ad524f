"""Feedforward networks and the Adam optimizer.

Weights are stored as ``(fan_out, fan_in)`` matrices; a layer computes
``x @ W.T + b``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from dcgan import autodiff as ad


@dataclass(frozen=True)
class MlpParams:
    sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = "tanh"
    seed: int | None = None

    def __post_init__(self):
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.sizes[i + 1], self.sizes[i]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i}: W {W.shape}, b {b.shape} do not match sizes {self.sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def arrays(self) -> list[np.ndarray]:
        """Parameters in the fixed order W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        return replace(self, weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays)


_ACTIVATIONS = {"tanh": (np.tanh, ad.tanh), "relu": (lambda x: np.maximum(x, 0.0), ad.relu)}


def mlp_init(sizes, seed: int, activation: str = "tanh", scale: float = 1.0) -> MlpParams:
    """Glorot-uniform weights, zero biases.  ``scale=0`` gives the zero map."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"need at least two positive layer sizes, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)) * scale)
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, tuple(weights), tuple(biases), activation, seed)


def mlp_apply(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Plain numpy forward pass; ``x`` is ``(in,)`` or ``(B, in)``."""
    act = _ACTIVATIONS[params.activation][0]
    h = np.asarray(x, dtype=np.float64)
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W.T + b
        if i < last:
            h = act(h)
    return h


def bind(params: MlpParams, tape: ad.Tape, trainable: bool = True) -> list[ad.Var]:
    """Put the parameters on ``tape`` (same order as ``params.arrays``)."""
    make = tape.variable if trainable else tape.constant
    return [make(a) for a in params.arrays]


def mlp_forward(params: MlpParams, x: ad.Var, tape: ad.Tape, bound: list[ad.Var] | None = None) -> ad.Var:
    """Recorded forward pass.  Affine + activation per hidden layer, affine output."""
    if x.shape[-1] != params.sizes[0]:
        raise ad.TapeError(f"input width {x.shape[-1]} != first layer size {params.sizes[0]}")
    if bound is None:
        bound = bind(params, tape, trainable=False)
    act = _ACTIVATIONS[params.activation][1]
    h = x
    n_layers = len(params.weights)
    for i in range(n_layers):
        W, b = bound[2 * i], bound[2 * i + 1]
        h = ad.matvec(W, h) if len(h.shape) == 1 else ad.matmul(h, W, trans_b=True)
        h = h + b
        if i < n_layers - 1:
            h = act(h)
    return h


# --------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_factor: float = 0.1
    decay_period: int = 500
    clip_norm: float | None = None

    def effective_lr(self, step: int | None = None) -> float:
        s = self.step if step is None else step
        return self.lr * self.decay_factor ** (s // self.decay_period)


def adam_init(arrays, **hyper) -> AdamState:
    zeros = tuple(np.zeros_like(a) for a in arrays)
    return AdamState(m=zeros, v=zeros, **hyper)


def adam_step(arrays, grads, state: AdamState):
    """One bias-corrected Adam update.

    The learning rate is ``lr * decay_factor ** (step // decay_period)``
    with ``step`` counted before this update.  Returns ``(new_arrays,
    new_state)``; raises :class:`~dcgan.autodiff.NumericError` on a
    non-finite gradient, leaving the inputs untouched.
    """
    if len(grads) != len(arrays):
        raise ValueError("one gradient per parameter array")
    for a, g in zip(arrays, grads):
        if g.shape != a.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {a.shape}")
        if not np.all(np.isfinite(g)):
            raise ad.NumericError(f"non-finite gradient at step {state.step}")
    if state.clip_norm is not None:
        total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if total > state.clip_norm:
            grads = [g * (state.clip_norm / total) for g in grads]
    lr = state.effective_lr()
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_arrays, new_m, new_v = [], [], []
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_arrays.append(a - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_arrays, replace(state, m=tuple(new_m), v=tuple(new_v), step=t)


# --------------------------------------------------------------------------
# serialization


def save_mlp(params: MlpParams, stem) -> None:
    """Write ``<stem>.csv`` (layer,kind,row,col,value) and ``<stem>.header``."""
    stem = Path(stem)
    with open(stem.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "kind", "row", "col", "value"])
        for layer, (W, b) in enumerate(zip(params.weights, params.biases)):
            for r in range(W.shape[0]):
                for c in range(W.shape[1]):
                    w.writerow([layer, "W", r, c, repr(float(W[r, c]))])
            for r in range(b.shape[0]):
                w.writerow([layer, "b", r, 0, repr(float(b[r]))])
    with open(stem.with_suffix(".header"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"sizes = {','.join(str(s) for s in params.sizes)}\n")
        fh.write(f"activation = {params.activation}\n")
        fh.write(f"seed = {'' if params.seed is None else params.seed}\n")


def load_mlp(stem) -> MlpParams:
    stem = Path(stem)
    header = {}
    for line in stem.with_suffix(".header").read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            header[k.strip()] = v.strip()
    sizes = tuple(int(s) for s in header["sizes"].split(","))
    weights = [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(o) for o in sizes[1:]]
    with open(stem.with_suffix(".csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            layer, r, c = int(row["layer"]), int(row["row"]), int(row["col"])
            if row["kind"] == "W":
                weights[layer][r, c] = float(row["value"])
            else:
                biases[layer][r] = float(row["value"])
    seed = int(header["seed"]) if header.get("seed") else None
    return MlpParams(sizes, tuple(weights), tuple(biases), header.get("activation", "tanh"), seed)
