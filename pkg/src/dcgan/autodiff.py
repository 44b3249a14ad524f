"""Reverse-mode automatic differentiation on an append-only tape.

Every node stores its forward value as a numpy array, so a single node can
carry a whole mini-batch.  Primitives broadcast like numpy; adjoints are
reduced back to each input's shape.

Example
-------
>>> tape = Tape()
>>> x = tape.variable(np.array([1.0, 2.0]))
>>> loss = (x * x).sum()
>>> backward(tape, loss)[x.id]
array([2., 4.])
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class TapeError(ValueError):
    """Shape mismatch or misuse of the tape."""


class NumericError(ArithmeticError):
    """A forward value is not finite."""


class _Node:
    __slots__ = ("op", "inputs", "value", "aux", "needs_grad")

    def __init__(self, op, inputs, value, aux, needs_grad):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.aux = aux
        self.needs_grad = needs_grad


class Tape:
    """Record of primitive applications; node ids are list positions."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __len__(self):
        return len(self.nodes)

    def _push(self, op, inputs, value, aux=None, needs_grad=False) -> "Var":
        self.nodes.append(_Node(op, inputs, value, aux, needs_grad))
        return Var(self, len(self.nodes) - 1)

    def variable(self, value) -> "Var":
        """Leaf that receives a gradient."""
        return self._push("leaf", (), np.array(value, dtype=np.float64), needs_grad=True)

    def constant(self, value) -> "Var":
        """Leaf excluded from differentiation."""
        return self._push("const", (), np.asarray(value, dtype=np.float64))

    def record(self, op: str, inputs: Sequence["Var"], **aux) -> "Var":
        """Apply primitive ``op`` to ``inputs`` and record the result."""
        try:
            fwd = _FORWARD[op]
        except KeyError:
            raise TapeError(f"unknown primitive {op!r}") from None
        ids = []
        for v in inputs:
            if v.tape is not self:
                raise TapeError("input belongs to a different tape")
            ids.append(v.id)
        vals = [self.nodes[i].value for i in ids]
        value = fwd(vals, aux)
        needs = any(self.nodes[i].needs_grad for i in ids)
        return self._push(op, tuple(ids), value, aux, needs)


class Var:
    """Handle to a tape node."""

    __slots__ = ("tape", "id")
    __array_priority__ = 100

    def __init__(self, tape: Tape, node_id: int):
        self.tape = tape
        self.id = node_id

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.id].value

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self):
        return f"Var(id={self.id}, shape={self.shape})"

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, self._lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not np.isscalar(other):
            raise TapeError("division only by a scalar constant")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))

    def __getitem__(self, index):
        return slice_(self, index)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)


# --------------------------------------------------------------------------
# primitive table


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise TapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _fwd_add(v, aux):
    _broadcast_shape(v[0], v[1], "add")
    return v[0] + v[1]


def _fwd_sub(v, aux):
    _broadcast_shape(v[0], v[1], "sub")
    return v[0] - v[1]


def _fwd_mul(v, aux):
    _broadcast_shape(v[0], v[1], "mul")
    return v[0] * v[1]


def _fwd_matvec(v, aux):
    A, x = v
    if A.ndim != 2 or x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise TapeError(f"matvec: shapes {A.shape} and {x.shape}")
    return A @ x


def _fwd_matmul(v, aux):
    a, b = v
    if aux.get("trans_b"):
        b = b.T
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise TapeError(f"matmul: shapes {v[0].shape} and {v[1].shape} (trans_b={aux.get('trans_b', False)})")
    return a @ b


def _fwd_concat(v, aux):
    axis = aux["axis"]
    try:
        return np.concatenate(v, axis=axis)
    except ValueError as exc:
        raise TapeError(f"concat: {exc}") from None


def _fwd_outer(v, aux):
    a, b = v
    if a.shape[:-1] != b.shape[:-1]:
        raise TapeError(f"outer: leading shapes {a.shape} and {b.shape} differ")
    return (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (a.shape[-1] * b.shape[-1],))


_FORWARD: dict[str, Callable] = {
    "add": _fwd_add,
    "sub": _fwd_sub,
    "mul": _fwd_mul,
    "scale": lambda v, aux: v[0] * aux["c"],
    "matvec": _fwd_matvec,
    "matmul": _fwd_matmul,
    "tanh": lambda v, aux: np.tanh(v[0]),
    "relu": lambda v, aux: np.maximum(v[0], 0.0),
    "concat": _fwd_concat,
    "slice": lambda v, aux: np.array(v[0][aux["index"]]),
    "sum": lambda v, aux: np.asarray(v[0].sum(axis=aux["axis"])),
    "mean": lambda v, aux: np.asarray(v[0].mean(axis=aux["axis"])),
    "square": lambda v, aux: v[0] * v[0],
    "sqrt": lambda v, aux: np.sqrt(v[0]),
    "outer": _fwd_outer,
}


def _expand_reduced(g, shape, axis):
    if axis is None:
        return np.broadcast_to(g, shape)
    axes = (axis,) if np.isscalar(axis) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    return np.broadcast_to(np.expand_dims(g, axes), shape)


def _vjp_matmul(g, vals, out, aux):
    a, b = vals
    if aux.get("trans_b"):
        return [g @ b, g.T @ a]
    return [g @ b.T, a.T @ g]


def _vjp_concat(g, vals, out, aux):
    axis = aux["axis"]
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return np.split(g, bounds, axis=axis)


def _vjp_slice(g, vals, out, aux):
    full = np.zeros_like(vals[0])
    full[aux["index"]] = g
    return [full]


def _vjp_outer(g, vals, out, aux):
    a, b = vals
    g3 = g.reshape(a.shape + (b.shape[-1],))
    ga = (g3 * b[..., None, :]).sum(axis=-1)
    gb = (g3 * a[..., :, None]).sum(axis=-2)
    return [ga, gb]


_VJP: dict[str, Callable] = {
    "add": lambda g, v, o, aux: [_unbroadcast(g, v[0].shape), _unbroadcast(g, v[1].shape)],
    "sub": lambda g, v, o, aux: [_unbroadcast(g, v[0].shape), _unbroadcast(-g, v[1].shape)],
    "mul": lambda g, v, o, aux: [_unbroadcast(g * v[1], v[0].shape), _unbroadcast(g * v[0], v[1].shape)],
    "scale": lambda g, v, o, aux: [g * aux["c"]],
    "matvec": lambda g, v, o, aux: [np.outer(g, v[1]), v[0].T @ g],
    "matmul": _vjp_matmul,
    "tanh": lambda g, v, o, aux: [g * (1.0 - o * o)],
    # subgradient 0 at the kink
    "relu": lambda g, v, o, aux: [g * (v[0] > 0.0)],
    "concat": _vjp_concat,
    "slice": _vjp_slice,
    "sum": lambda g, v, o, aux: [_expand_reduced(g, v[0].shape, aux["axis"])],
    "mean": lambda g, v, o, aux: [_expand_reduced(g, v[0].shape, aux["axis"]) * (o.size / v[0].size)],
    "square": lambda g, v, o, aux: [2.0 * g * v[0]],
    "sqrt": lambda g, v, o, aux: [g * 0.5 / o],
    "outer": _vjp_outer,
}

PRIMITIVES = tuple(_FORWARD)


# --------------------------------------------------------------------------
# public recording helpers


def add(a: Var, b: Var) -> Var:
    return a.tape.record("add", (a, b))


def sub(a: Var, b: Var) -> Var:
    return a.tape.record("sub", (a, b))


def mul(a: Var, b: Var) -> Var:
    return a.tape.record("mul", (a, b))


def scale(a: Var, c: float) -> Var:
    return a.tape.record("scale", (a,), c=float(c))


def matvec(A: Var, x: Var) -> Var:
    return A.tape.record("matvec", (A, x))


def matmul(a: Var, b: Var, trans_b: bool = False) -> Var:
    return a.tape.record("matmul", (a, b), trans_b=trans_b)


def tanh(a: Var) -> Var:
    return a.tape.record("tanh", (a,))


def relu(a: Var) -> Var:
    return a.tape.record("relu", (a,))


def concat(parts: Sequence[Var], axis: int = -1) -> Var:
    return parts[0].tape.record("concat", tuple(parts), axis=axis)


def slice_(a: Var, index) -> Var:
    return a.tape.record("slice", (a,), index=index)


def sum_(a: Var, axis=None) -> Var:
    return a.tape.record("sum", (a,), axis=axis)


def mean(a: Var, axis=None) -> Var:
    return a.tape.record("mean", (a,), axis=axis)


def square(a: Var) -> Var:
    return a.tape.record("square", (a,))


def sqrt(a: Var) -> Var:
    return a.tape.record("sqrt", (a,))


def outer(a: Var, b: Var) -> Var:
    """Batched tensor product over the last axis, flattened in C order."""
    return a.tape.record("outer", (a, b))


# --------------------------------------------------------------------------


def backward(tape: Tape, loss: Var) -> dict[int, np.ndarray]:
    """Adjoints of ``loss`` with respect to every node that needs a gradient."""
    if loss.tape is not tape:
        raise TapeError("loss belongs to a different tape")
    if loss.value.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.shape}")
    nodes = tape.nodes
    adj: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.value)}
    for nid in range(loss.id, -1, -1):
        g = adj.get(nid)
        node = nodes[nid]
        if g is None or not node.inputs:
            continue
        vals = [nodes[i].value for i in node.inputs]
        grads = _VJP[node.op](g, vals, node.value, node.aux)
        for i, gi in zip(node.inputs, grads):
            if not nodes[i].needs_grad:
                continue
            if i in adj:
                adj[i] = adj[i] + gi
            else:
                adj[i] = np.array(gi, dtype=np.float64)
    return {k: v for k, v in adj.items() if nodes[k].needs_grad}


def gradient_check(f: Callable[[Tape, Var], Var], point, step: float = 1e-5) -> float:
    """Max relative error between tape gradient and central differences.

    ``f(tape, x)`` records a scalar function of the leaf ``x``.  The error
    per coordinate is ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x0 = np.array(point, dtype=np.float64)

    def evaluate(x):
        tape = Tape()
        xv = tape.variable(x)
        out = f(tape, xv)
        val = float(np.asarray(out.value).reshape(()))
        if not np.isfinite(val):
            raise NumericError(f"non-finite forward value {val}")
        return tape, xv, out

    tape, xv, out = evaluate(x0)
    grad = backward(tape, out).get(xv.id, np.zeros_like(x0))
    flat = x0.reshape(-1)
    num = np.empty(flat.size)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += step
        xm[i] -= step
        fp = float(evaluate(xp.reshape(x0.shape))[2].value)
        fm = float(evaluate(xm.reshape(x0.shape))[2].value)
        num[i] = (fp - fm) / (2.0 * step)
    ana = grad.reshape(-1)
    return float(np.max(np.abs(ana - num) / np.maximum(1.0, np.abs(ana)))) if flat.size else 0.0
