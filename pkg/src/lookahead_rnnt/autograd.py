"""Minimal reverse-mode autodiff over dense float64 numpy buffers.

Design: a ``Tensor`` wraps a contiguous float64 ndarray plus a gradient slot.
Ops are module-level functions; when an op runs while a ``Tape`` is active and
any input requires grad, the tape records (inputs, output, backward-rule).
``Tape.backward(loss)`` walks the records once in reverse execution order —
which is a valid topological order because records are appended as ops
execute — accumulating gradients by summation into a per-node map and into
``Tensor.grad`` for leaves. Callers zero grads explicitly between steps.

Every op checks its output for NaN/Inf and raises ``NonFiniteError``
immediately, so numerical blowups surface at the op that produced them rather
than as a mysterious bad update later.

The tape also exposes :func:`apply_op` so composite ops (e.g. a lattice DP)
can register a custom backward rule without taping their internals.
"""

from __future__ import annotations

import math

import numpy as np


class DimensionError(ValueError):
    """Shapes handed to an op do not conform."""


class NonFiniteError(ArithmeticError):
    """An op produced NaN or Inf."""


class GraphError(RuntimeError):
    """Backward requested on a detached or already-consumed graph."""


def _as_array(data) -> np.ndarray:
    # np.asarray with order="C" keeps 0-d scalars 0-d (ascontiguousarray
    # would promote them to shape (1,))
    return np.asarray(data, dtype=np.float64, order="C")


class Tensor:
    """Dense float64 buffer with an optional gradient slot.

    ``grad`` is None until backward deposits into it; accumulation is
    summation. Only leaf tensors created with ``requires_grad=True`` receive
    ``grad``; intermediates flow gradients through the tape map only.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Operator sugar for the common arithmetic paths.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))


class _Record:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


_ACTIVE: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _ACTIVE[-1] if _ACTIVE else None


class Tape:
    """Ordered op record for one forward pass; consumed by ``backward``."""

    def __init__(self):
        self._records: list[_Record] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _ACTIVE.pop()
        assert popped is self

    def record(self, inputs, output, backward) -> None:
        self._records.append(_Record(tuple(inputs), output, backward))

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Run reverse-mode accumulation from scalar ``loss``.

        Returns a map from ``id(tensor)`` to its gradient for every tensor
        that received one; leaf tensors with ``requires_grad`` also get their
        ``.grad`` slot filled. The tape is consumed: a second call raises.
        """
        if self._consumed:
            raise GraphError("tape already consumed by a previous backward()")
        if loss.shape != ():
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
        produced = {id(rec.output) for rec in self._records}
        if id(loss) not in produced:
            raise GraphError("loss is not attached to this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for rec in reversed(self._records):
            g_out = grads.get(id(rec.output))
            if g_out is None:
                continue  # this record does not influence the loss
            in_grads = rec.backward(g_out)
            for inp, g in zip(rec.inputs, in_grads):
                if g is None:
                    continue
                if not (inp.requires_grad or id(inp) in produced):
                    continue  # constant input: no path to parameters
                key = id(inp)
                if key in grads:
                    grads[key] += g
                else:
                    grads[key] = np.array(g, dtype=np.float64, copy=True)
        deposited: set[int] = set()
        for rec in self._records:
            for inp in rec.inputs:
                key = id(inp)
                if (inp.requires_grad and key not in produced
                        and key in grads and key not in deposited):
                    inp.accumulate_grad(grads[key])
                    deposited.add(key)
        self._consumed = True
        self._records.clear()
        return grads


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def apply_op(inputs, out_data: np.ndarray, backward) -> Tensor:
    """Finish an op: finite-check, wrap output, and tape the backward rule.

    ``backward`` maps the output gradient to a tuple of per-input gradients
    (None for inputs that take none). Recording happens only when a tape is
    active and some input participates in differentiation.
    """
    out_data = np.asarray(out_data, dtype=np.float64)
    # summing is a single C pass and any NaN/Inf poisons it; the only false
    # alarm is genuine float64 overflow of the sum, which is just as fatal
    if not math.isfinite(float(out_data.sum())):
        if np.all(np.isfinite(out_data)):
            raise NonFiniteError("op output overflowed during the finite check")
        raise NonFiniteError("op produced a non-finite value")
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape.record(inputs, out, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from e

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return apply_op((a, b), out, bwd)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from e

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return apply_op((a, b), out, bwd)


def matmul(a, b) -> Tensor:
    """``a @ b`` for (m,k)x(k,n) matrices or a (k,)x(k,n) matvec.

    The 1-D form is not sugar: single-vector products take a different BLAS
    path than 1-row matmuls would on some builds, and per-frame loops in this
    codebase rely on the matvec path being shape-independent.
    """
    a, b = _coerce(a), _coerce(b)
    if b.ndim != 2 or a.ndim not in (1, 2):
        raise DimensionError(f"matmul supports (m,k)@(k,n) or (k,)@(k,n); got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    if a.ndim == 1:
        def bwd(g):
            return g @ b.data.T, np.outer(a.data, g)
    else:
        def bwd(g):
            return g @ b.data.T, a.data.T @ g

    return apply_op((a, b), out, bwd)


def tanh(x) -> Tensor:
    x = _coerce(x)
    out = np.tanh(x.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return apply_op((x,), out, bwd)


def sigmoid(x) -> Tensor:
    x = _coerce(x)
    # logistic via tanh: stable for all x, one C call, no overflow branches
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return apply_op((x,), out, bwd)


def log_softmax(x, axis: int = -1) -> Tensor:
    """Log-softmax along ``axis`` with max-subtraction for stability."""
    x = _coerce(x)
    if x.shape == () or x.shape[axis] == 0:
        raise DimensionError("log_softmax needs a non-empty axis")
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse

    def bwd(g):
        soft = np.exp(out)
        return (g - soft * np.sum(g, axis=axis, keepdims=True),)

    return apply_op((x,), out, bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    """Concatenate along the last dim (the only axis this codebase needs)."""
    ts = [_coerce(t) for t in tensors]
    if axis not in (-1, ts[0].ndim - 1):
        raise DimensionError("concat supports the last axis only")
    widths = [t.shape[-1] for t in ts]
    out = np.concatenate([t.data for t in ts], axis=-1)

    def bwd(g):
        outs = []
        start = 0
        for w in widths:
            outs.append(g[..., start:start + w])
            start += w
        return tuple(outs)

    return apply_op(tuple(ts), out, bwd)


def embedding(table, ids) -> Tensor:
    """Row lookup: ``table[ids]`` with scatter-add backward into the table."""
    table = _coerce(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise DimensionError(f"embedding table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError("embedding id out of range")
    out = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return apply_op((table,), out, bwd)


def slice_(x, key) -> Tensor:
    """Basic (non-fancy) slicing; backward scatters into a zero buffer."""
    x = _coerce(x)
    out = x.data[key]

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[key] = g
        return (gx,)

    return apply_op((x,), out, bwd)


def reshape(x, shape) -> Tensor:
    x = _coerce(x)
    out = x.data.reshape(shape)

    def bwd(g):
        return (g.reshape(x.shape),)

    return apply_op((x,), out, bwd)


def stack(tensors, axis: int = 0) -> Tensor:
    """Stack equal-shaped tensors along a new leading axis."""
    ts = [_coerce(t) for t in tensors]
    if axis != 0:
        raise DimensionError("stack supports axis=0 only")
    out = np.stack([t.data for t in ts], axis=0)

    def bwd(g):
        return tuple(g[i] for i in range(len(ts)))

    return apply_op(tuple(ts), out, bwd)


def sum_(x) -> Tensor:
    x = _coerce(x)
    out = np.sum(x.data)

    def bwd(g):
        return (np.broadcast_to(g, x.shape).copy(),)

    return apply_op((x,), out, bwd)


def mean_(x) -> Tensor:
    x = _coerce(x)
    n = x.data.size
    if n == 0:
        raise DimensionError("mean of an empty tensor")
    out = np.sum(x.data) / n

    def bwd(g):
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return apply_op((x,), out, bwd)
