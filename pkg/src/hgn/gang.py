"""Multi-window local feature extractors over the global encoder output.

For each configured window size w = 2k+1, every token's surrounding span
(truncated at sentence boundaries, never padded) is re-encoded by a
bidirectional cell; the token's local feature is [backward final state,
forward final state].  The per-window recurrences run through the fused
kernels in gang_kernels.py (numpy or numba backend) and join the autodiff
tape as a single node with a hand-derived adjoint.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import backend
from .autodiff import Tensor, accumulate, make_node, stable_sigmoid
from .errors import ConfigError, ShapeError

CELL_KINDS = ("rnn", "gru", "lstm", "cnn", "mlp")

# Per-cell parameter suffixes, in the positional order the kernels expect.
_PARAM_SUFFIXES = {
    "rnn": ("fwd.w", "fwd.u", "fwd.b", "bwd.w", "bwd.u", "bwd.b"),
    "gru": ("fwd.w", "fwd.u", "fwd.b", "bwd.w", "bwd.u", "bwd.b"),
    "lstm": ("fwd.w", "fwd.u", "fwd.b", "bwd.w", "bwd.u", "bwd.b"),
    "cnn": ("fwd.k", "fwd.b", "bwd.k", "bwd.b"),
    "mlp": ("fwd.w", "fwd.b"),
}
_GATES = {"rnn": 1, "gru": 3, "lstm": 4}


@dataclass(frozen=True)
class GangConfig:
    windows: tuple[int, ...] = (3, 5, 7)
    cell: str = "lstm"

    def validate(self, d_model: int) -> None:
        if self.cell not in CELL_KINDS:
            raise ConfigError(f"unknown cell kind {self.cell!r}")
        if not self.windows:
            raise ConfigError("gang needs at least one window size")
        if any(w < 1 or w % 2 == 0 for w in self.windows):
            raise ConfigError(f"window sizes must be odd and >= 1, got {self.windows}")
        if list(self.windows) != sorted(set(self.windows)):
            raise ConfigError(f"window sizes must be strictly increasing, got {self.windows}")
        if d_model % 2 != 0:
            raise ConfigError(f"d_model must be even to split directions, got {d_model}")


def param_shapes(cell: str, d: int) -> list[tuple[str, tuple[int, ...]]]:
    """(suffix, shape) pairs for one window's parameters."""
    hh = d // 2
    if cell in _GATES:
        g = _GATES[cell] * hh
        per_dir = [("w", (d, g)), ("u", (hh, g)), ("b", (g,))]
        return [(f"{dire}.{s}", shape) for dire in ("fwd", "bwd") for s, shape in per_dir]
    if cell == "cnn":
        per_dir = [("k", (3, d, hh)), ("b", (hh,))]
        return [(f"{dire}.{s}", shape) for dire in ("fwd", "bwd") for s, shape in per_dir]
    if cell == "mlp":
        return [("fwd.w", (d, d)), ("fwd.b", (d,))]
    raise ConfigError(f"unknown cell kind {cell!r}")


def init_gang_params(rng: np.random.Generator, d: int, cfg: GangConfig) -> OrderedDict[str, Tensor]:
    """Fresh parameters named gang.w<j>.<dir>.<name>, j = 1-based window index."""
    cfg.validate(d)
    params: OrderedDict[str, Tensor] = OrderedDict()
    for j, _w in enumerate(cfg.windows, start=1):
        for suffix, shape in param_shapes(cfg.cell, d):
            name = f"gang.w{j}.{suffix}"
            if suffix.endswith(".b"):
                values = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[:-1]))
                bound = np.sqrt(6.0 / (fan_in + shape[-1]))
                values = rng.uniform(-bound, bound, size=shape)
            params[name] = Tensor(values, requires_grad=True, name=name)
    return params


def window_params(params: Mapping[str, Tensor], j: int, cell: str) -> list[Tensor]:
    """The window-j parameter tensors in kernel positional order."""
    out = []
    for suffix in _PARAM_SUFFIXES[cell]:
        name = f"gang.w{j}.{suffix}"
        if name not in params:
            raise ShapeError(f"missing gang parameter {name}")
        out.append(params[name])
    return out


def window_feature(z: Tensor, window: int, cell: str, ptensors: Sequence[Tensor]) -> Tensor:
    """One window's local features (N, d) as a fused tape node."""
    if z.data.ndim != 2:
        raise ShapeError(f"gang expects (N, d) encoder rows, got {z.shape}")
    k = (window - 1) // 2
    fwd = backend.get(f"{cell}_window_fwd")
    bwd = backend.get(f"{cell}_window_bwd")
    arrays = tuple(t.data for t in ptensors)
    result = fwd(z.data, k, *arrays)
    feats, cache = result[0], result[1:]

    def bw():
        grads = bwd(out.grad, z.data, k, *arrays, *cache)
        accumulate(z, grads[0])
        for t, g in zip(ptensors, grads[1:]):
            accumulate(t, g)

    out = make_node(feats, (z, *ptensors), bw)
    return out


def gang_forward(z: Tensor, cfg: GangConfig, params: Mapping[str, Tensor]) -> list[Tensor]:
    """Local feature matrices h^1..h^M, one per window size, each (N, d)."""
    cfg.validate(z.shape[1])
    feats = []
    for j, w in enumerate(cfg.windows, start=1):
        feats.append(window_feature(z, w, cfg.cell, window_params(params, j, cfg.cell)))
    return feats


def extract_subsequence(token_index: int, k: int, z: np.ndarray) -> np.ndarray:
    """Rows max(1, i-k)..min(N, i+k) around the 1-based token index, copied."""
    z = np.asarray(z)
    if z.ndim != 2:
        raise ShapeError(f"extract_subsequence expects (N, d), got {z.shape}")
    n = z.shape[0]
    if not 1 <= token_index <= n:
        raise ShapeError(f"token index {token_index} outside 1..{n}")
    if k < 0:
        raise ShapeError(f"half-width k must be >= 0, got {k}")
    lo = max(1, token_index - k)
    hi = min(n, token_index + k)
    return z[lo - 1:hi].copy()


def encode_span_bidirectional(span: np.ndarray, cell: str, wparams: Mapping[str, np.ndarray]) -> np.ndarray:
    """Encode one explicit span (L, d) to its d-dim feature.

    Runs the active backend's kernel with a window wide enough that token 0
    sees the whole span, so the result is bit-identical to what gang_forward
    produces for a token whose truncated window equals this span.
    """
    span = np.ascontiguousarray(np.asarray(span, dtype=np.float64))
    if span.ndim != 2 or span.shape[0] < 1:
        raise ShapeError(f"span must be (L, d) with L >= 1, got {span.shape}")
    if cell not in CELL_KINDS:
        raise ConfigError(f"unknown cell kind {cell!r}")
    arrays = []
    for suffix in _PARAM_SUFFIXES[cell]:
        value = wparams[suffix]
        arrays.append(value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64))
    fwd = backend.get(f"{cell}_window_fwd")
    feats = fwd(span, span.shape[0] - 1, *arrays)[0]
    return feats[0]


def recurrent_cell_step(cell_kind: str, x: np.ndarray, state, params: Mapping[str, np.ndarray]):
    """One cell update on raw arrays; state is h, or (h, c) for lstm.

    Uses the same gate equations (and operation order) as the fused kernels;
    see gang_kernels for the documented forms.
    """
    x = np.asarray(x, dtype=np.float64)
    w, u, b = (np.asarray(params[n], dtype=np.float64) for n in ("w", "u", "b"))
    if cell_kind == "rnn":
        h = np.asarray(state, dtype=np.float64)
        return np.tanh(np.dot(x, w) + np.dot(h, u) + b)
    if cell_kind == "gru":
        h = np.asarray(state, dtype=np.float64)
        hh = h.shape[0]
        xw = np.dot(x, w)
        hu = np.dot(h, u)
        r = stable_sigmoid(xw[:hh] + hu[:hh] + b[:hh])
        up = stable_sigmoid(xw[hh:2 * hh] + hu[hh:2 * hh] + b[hh:2 * hh])
        n = np.tanh(xw[2 * hh:] + r * hu[2 * hh:] + b[2 * hh:])
        return (1.0 - up) * n + up * h
    if cell_kind == "lstm":
        h, c = (np.asarray(s, dtype=np.float64) for s in state)
        hh = h.shape[0]
        pre = np.dot(x, w) + np.dot(h, u) + b
        ig = stable_sigmoid(pre[:hh])
        fg = stable_sigmoid(pre[hh:2 * hh])
        gg = np.tanh(pre[2 * hh:3 * hh])
        og = stable_sigmoid(pre[3 * hh:])
        c_new = fg * c + ig * gg
        return og * np.tanh(c_new), c_new
    raise ConfigError(f"recurrent_cell_step supports rnn/gru/lstm, got {cell_kind!r}")
