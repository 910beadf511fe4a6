"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps a value, its accumulated gradient, and the tape links needed to
replay the graph backwards.  Gradients accumulate across backward calls; the
caller zeroes them between optimization steps.  There is no implicit
broadcasting beyond scalar-with-tensor: row and column broadcasts are explicit
ops with defined adjoints (add_rowvec, mul_colvec).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

Array = np.ndarray


def _as_f64(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    return np.ascontiguousarray(arr)


class Tensor:
    """Value + gradient node in the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.data: Array = _as_f64(values)
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def all_finite(self) -> bool:
        """Validity check: NaN or Inf anywhere marks the tensor as an error state."""
        return bool(np.isfinite(self.data).all())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: float = 1.0) -> None:
        backward(self, seed)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Operator sugar; scalars are the only implicit broadcast.
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: Array, parents: Sequence[Tensor], backward: Callable[[], None]) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


# Hooks for modules that fuse their own forward/backward (the span kernels):
# make_node wires a raw result into the tape, accumulate adds into a parent's
# gradient respecting requires_grad.
def make_node(data: Array, parents: Sequence[Tensor], backward_fn: Callable[[], None]) -> Tensor:
    return _node(data, parents, backward_fn)


def accumulate(t: Tensor, g: Array) -> None:
    _accum(t, g)


def backward(root: Tensor, seed: float = 1.0) -> None:
    """Run reverse-mode accumulation from a single-element root."""
    if root.data.size != 1:
        raise ShapeError(f"backward() root must be a scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    if root.grad is None:
        root.grad = np.zeros_like(root.data)
    root.grad += np.full_like(root.data, seed)
    for node in reversed(order):
        if node._backward is not None:
            node._backward()


# ---------------------------------------------------------------------------
# primitive ops


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    if a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not compatible")


def _reduce_to(shape: tuple[int, ...], g: Array) -> Array:
    if g.shape == shape:
        return g
    return np.full(shape, g.sum())  # scalar operand: collapse the broadcast


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    out_data = a.data + b.data

    def bw():
        _accum(a, _reduce_to(a.shape, out.grad))
        _accum(b, _reduce_to(b.shape, out.grad))

    out = _node(out_data, (a, b), bw)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    out_data = a.data * b.data

    def bw():
        _accum(a, _reduce_to(a.shape, out.grad * b.data))
        _accum(b, _reduce_to(b.shape, out.grad * a.data))

    out = _node(out_data, (a, b), bw)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bw():
        _accum(a, out.grad * s)

    out = _node(a.data * s, (a,), bw)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not chain")
    out_data = a.data @ b.data

    def bw():
        _accum(a, out.grad @ b.data.T)
        _accum(b, a.data.T @ out.grad)

    out = _node(out_data, (a, b), bw)
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")

    def bw():
        _accum(a, out.grad.T)

    out = _node(np.ascontiguousarray(a.data.T), (a,), bw)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw():
        _accum(a, out.grad * (1.0 - y * y))

    out = _node(y, (a,), bw)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = stable_sigmoid(a.data)

    def bw():
        _accum(a, out.grad * y * (1.0 - y))

    out = _node(y, (a,), bw)
    return out


def stable_sigmoid(x: Array) -> Array:
    """Overflow-safe logistic on raw arrays (shared with the span kernels)."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)

    def bw():
        _accum(a, out.grad * (a.data > 0.0))

    out = _node(y, (a,), bw)
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def bw():
        _accum(a, out.grad * y)

    out = _node(y, (a,), bw)
    return out


def log(a: Tensor) -> Tensor:
    def bw():
        _accum(a, out.grad / a.data)

    out = _node(np.log(a.data), (a,), bw)
    return out


_ELEMENTWISE = {"add": add, "mul": mul, "tanh": tanh, "sigmoid": sigmoid, "relu": relu}


def elementwise(op_kind: str, *operands: Tensor) -> Tensor:
    """Dispatch by name; add/mul take two operands, the rest take one."""
    if op_kind not in _ELEMENTWISE:
        raise ShapeError(f"unknown elementwise op {op_kind!r}")
    return _ELEMENTWISE[op_kind](*operands)


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """x (N, d) plus v (d,) broadcast over rows; adjoint of v sums over rows."""
    if x.data.ndim != 2 or v.data.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {x.shape} and {v.shape} do not align")

    def bw():
        _accum(x, out.grad)
        _accum(v, out.grad.sum(axis=0))

    out = _node(x.data + v.data, (x, v), bw)
    return out


def mul_colvec(x: Tensor, w: Tensor) -> Tensor:
    """x (N, d) times w (N, 1) broadcast over columns."""
    if x.data.ndim != 2 or w.shape != (x.shape[0], 1):
        raise ShapeError(f"mul_colvec: shapes {x.shape} and {w.shape} do not align")

    def bw():
        _accum(x, out.grad * w.data)
        _accum(w, (out.grad * x.data).sum(axis=1, keepdims=True))

    out = _node(x.data * w.data, (x, w), bw)
    return out


def slice_rows(a: Tensor, i0: int, i1: int) -> Tensor:
    if a.data.ndim != 2 or not (0 <= i0 < i1 <= a.shape[0]):
        raise ShapeError(f"slice_rows [{i0}:{i1}] out of range for shape {a.shape}")

    def bw():
        g = np.zeros_like(a.data)
        g[i0:i1] = out.grad
        _accum(a, g)

    out = _node(a.data[i0:i1].copy(), (a,), bw)
    return out


def slice_cols(a: Tensor, j0: int, j1: int) -> Tensor:
    if a.data.ndim != 2 or not (0 <= j0 < j1 <= a.shape[1]):
        raise ShapeError(f"slice_cols [{j0}:{j1}] out of range for shape {a.shape}")

    def bw():
        g = np.zeros_like(a.data)
        g[:, j0:j1] = out.grad
        _accum(a, g)

    out = _node(np.ascontiguousarray(a.data[:, j0:j1]), (a,), bw)
    return out


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    parts = list(parts)
    rows = {p.shape[0] for p in parts}
    if not parts or any(p.data.ndim != 2 for p in parts) or len(rows) != 1:
        raise ShapeError(f"concat_cols: incompatible shapes {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    offs = np.concatenate([[0], np.cumsum(widths)])

    def bw():
        for p, j0, j1 in zip(parts, offs[:-1], offs[1:]):
            _accum(p, out.grad[:, j0:j1])

    out = _node(np.concatenate([p.data for p in parts], axis=1), parts, bw)
    return out


def concat_rows(parts: Iterable[Tensor]) -> Tensor:
    parts = list(parts)
    cols = {p.shape[1] for p in parts}
    if not parts or any(p.data.ndim != 2 for p in parts) or len(cols) != 1:
        raise ShapeError(f"concat_rows: incompatible shapes {[p.shape for p in parts]}")
    heights = [p.shape[0] for p in parts]
    offs = np.concatenate([[0], np.cumsum(heights)])

    def bw():
        for p, i0, i1 in zip(parts, offs[:-1], offs[1:]):
            _accum(p, out.grad[i0:i1])

    out = _node(np.concatenate([p.data for p in parts], axis=0), parts, bw)
    return out


def sum_all(a: Tensor) -> Tensor:
    def bw():
        _accum(a, np.full_like(a.data, out.grad.reshape(-1)[0]))

    out = _node(np.asarray(a.data.sum()), (a,), bw)
    return out


def rowdot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product of two (N, d) matrices -> (N, 1)."""
    if a.shape != b.shape or a.data.ndim != 2:
        raise ShapeError(f"rowdot: shapes {a.shape} and {b.shape} must match")

    def bw():
        _accum(a, out.grad * b.data)
        _accum(b, out.grad * a.data)

    out = _node((a.data * b.data).sum(axis=1, keepdims=True), (a, b), bw)
    return out


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup table[ids]; the adjoint scatter-adds back into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2 or ids.ndim != 1:
        raise ShapeError(f"gather_rows: table {table.shape}, ids {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows: id out of range for table with {table.shape[0]} rows")

    def bw():
        g = np.zeros_like(table.data)
        np.add.at(g, ids, out.grad)
        _accum(table, g)

    out = _node(table.data[ids], (table,), bw)
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def bw():
        _accum(a, out.grad * keep)

    out = _node(a.data * keep, (a,), bw)
    return out


def softmax_rows(x: Tensor, col_mask: Array | None = None) -> Tensor:
    """Row-wise softmax; masked columns get exactly zero weight.

    col_mask is a boolean vector over columns (True = keep).  Each row must
    keep at least one column.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {x.shape}")
    z = x.data
    if col_mask is not None:
        col_mask = np.asarray(col_mask, dtype=bool)
        if col_mask.shape != (z.shape[1],):
            raise ShapeError(f"softmax_rows: mask {col_mask.shape} vs {z.shape[1]} columns")
        if not col_mask.any():
            raise ShapeError("softmax_rows: mask removes every column")
        z = np.where(col_mask, z, -np.inf)
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    p = e / e.sum(axis=1, keepdims=True)

    def bw():
        g = out.grad
        inner = (g * p).sum(axis=1, keepdims=True)
        _accum(x, p * (g - inner))

    out = _node(p, (x,), bw)
    return out


def layer_norm_rows(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer normalization with learned gain and bias vectors."""
    if x.data.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm_rows: x {x.shape}, gain {gain.shape}, bias {bias.shape}"
        )
    n = x.shape[1]
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def bw():
        g = out.grad
        dxhat = g * gain.data
        dvar = (dxhat * xc).sum(axis=1, keepdims=True) * (-0.5) * inv**3
        dmu = -(dxhat.sum(axis=1, keepdims=True)) * inv
        dx = dxhat * inv + dvar * 2.0 * xc / n + dmu / n
        _accum(x, dx)
        _accum(gain, (g * xhat).sum(axis=0))
        _accum(bias, g.sum(axis=0))

    out = _node(xhat * gain.data + bias.data, (x, gain, bias), bw)
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Vector layer norm: population variance, then gain and bias."""
    if x.data.ndim != 1:
        raise ShapeError(f"layer_norm expects a vector, got shape {x.shape}")
    wide = layer_norm_rows(_reshape_row(x), gain, bias, eps)
    return _reshape_vec(wide)


def _reshape_row(v: Tensor) -> Tensor:
    def bw():
        _accum(v, out.grad[0])

    out = _node(v.data.reshape(1, -1), (v,), bw)
    return out


def _reshape_vec(m: Tensor) -> Tensor:
    def bw():
        _accum(m, out.grad.reshape(1, -1))

    out = _node(m.data.reshape(-1), (m,), bw)
    return out


def nll_loss(
    log_or_probs: Tensor,
    targets,
    mask: Array | None = None,
    probs_are_log: bool = False,
) -> Tensor:
    """Mean negative log-likelihood over unmasked positions.

    Rows are per-position distributions (probabilities by default, log
    probabilities with probs_are_log=True); each unmasked probability row must
    sum to 1 within 1e-9.
    """
    targets = np.asarray(targets, dtype=np.int64)
    p = log_or_probs.data
    if p.ndim != 2 or targets.shape != (p.shape[0],):
        raise ShapeError(f"nll_loss: probs {log_or_probs.shape}, targets {targets.shape}")
    if mask is None:
        keep = np.ones(p.shape[0], dtype=bool)
    else:
        keep = np.asarray(mask, dtype=bool)
        if keep.shape != (p.shape[0],):
            raise ShapeError(f"nll_loss: mask {keep.shape} vs {p.shape[0]} rows")
    count = int(keep.sum())
    if count == 0:
        raise ShapeError("nll_loss: mask removes every position")
    if targets[keep].min() < 0 or targets[keep].max() >= p.shape[1]:
        raise ShapeError(f"nll_loss: target outside {p.shape[1]} classes")
    rows = p[keep] if not probs_are_log else np.exp(p[keep])
    sums = rows.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise ShapeError("nll_loss: unmasked rows must sum to 1 within 1e-9")

    rows_kept = np.flatnonzero(keep)
    picked = p[rows_kept, targets[rows_kept]]
    logs = picked if probs_are_log else np.log(picked)
    loss = -(logs.sum()) / count

    def bw():
        g = out.grad.reshape(-1)[0]
        dp = np.zeros_like(p)
        if probs_are_log:
            dp[rows_kept, targets[rows_kept]] = -g / count
        else:
            dp[rows_kept, targets[rows_kept]] = -g / (count * picked)
        _accum(log_or_probs, dp)

    out = _node(np.asarray(loss), (log_or_probs,), bw)
    return out
