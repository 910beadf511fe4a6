"""Fusing global encoder rows with multi-window local features.

Four modes over per-token vectors z_i and local features h_i^1..h_i^M:
  concat  s_i = [h_i^1, ..., h_i^M, z_i]
  add     s_i = z_i + sum_j h_i^j
  dot     attention scores z_i . h_i^j, softmax over windows,
          s_i = z_i + sum_j weight_j h_i^j
  mlp     m_i = A [z_i, h_i^1..h_i^M]; candidates {z_i, h_i^1..h_i^M} are
          softmax-weighted by m_i . candidate and summed.
Scores are unscaled by default; scale_scores divides them by sqrt(d).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError

FUSION_MODES = ("concat", "add", "dot", "mlp")


@dataclass(frozen=True)
class FusionConfig:
    mode: str = "dot"
    scale_scores: bool = False
    mlp_tanh: bool = False

    def validate(self) -> None:
        if self.mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion mode {self.mode!r}")


def fused_width(cfg: FusionConfig, d: int, n_windows: int) -> int:
    """Width of the fused representation handed to the classifier."""
    return (n_windows + 1) * d if cfg.mode == "concat" else d


def init_fusion_params(
    rng: np.random.Generator, d: int, n_windows: int, cfg: FusionConfig
) -> OrderedDict[str, Tensor]:
    """Only the mlp mode carries parameters: one affine map to d."""
    cfg.validate()
    params: OrderedDict[str, Tensor] = OrderedDict()
    if cfg.mode == "mlp":
        n_in = (n_windows + 1) * d
        bound = np.sqrt(6.0 / (n_in + d))
        w = rng.uniform(-bound, bound, size=(n_in, d))
        params["fusion.mlp.w"] = Tensor(w, requires_grad=True, name="fusion.mlp.w")
        params["fusion.mlp.b"] = Tensor(np.zeros(d), requires_grad=True, name="fusion.mlp.b")
    return params


def _check_inputs(z: Tensor, locals_: Sequence[Tensor]) -> None:
    if z.data.ndim != 2:
        raise ShapeError(f"fusion expects (N, d) rows, got {z.shape}")
    for h in locals_:
        if h.shape != z.shape:
            raise ShapeError(f"local features {h.shape} do not match encoder rows {z.shape}")


def mlp_attention(
    z: Tensor, locals_: Sequence[Tensor], params: Mapping[str, Tensor],
    scale_scores: bool = False, mlp_tanh: bool = False,
) -> Tensor:
    """Candidate attention: learned query m_i scores {z_i, h_i^1..h_i^M}."""
    _check_inputs(z, locals_)
    d = z.shape[1]
    candidates = [z, *locals_]
    m = ad.add_rowvec(ad.matmul(ad.concat_cols(candidates), params["fusion.mlp.w"]),
                      params["fusion.mlp.b"])
    if mlp_tanh:
        m = ad.tanh(m)
    scores = ad.concat_cols([ad.rowdot(m, c) for c in candidates])
    if scale_scores:
        scores = ad.scale(scores, 1.0 / np.sqrt(d))
    weights = ad.softmax_rows(scores)
    out = None
    for j, c in enumerate(candidates):
        term = ad.mul_colvec(c, ad.slice_cols(weights, j, j + 1))
        out = term if out is None else out + term
    return out


def dot_attention(
    z: Tensor, locals_: Sequence[Tensor], scale_scores: bool = False
) -> Tensor:
    """Window attention u_i = softmax_j(z_i . h_i^j) h_i^j, then s_i = z_i + u_i."""
    _check_inputs(z, locals_)
    if not locals_:
        raise ShapeError("dot fusion needs at least one local feature set")
    d = z.shape[1]
    scores = ad.concat_cols([ad.rowdot(z, h) for h in locals_])
    if scale_scores:
        scores = ad.scale(scores, 1.0 / np.sqrt(d))
    weights = ad.softmax_rows(scores)
    u = None
    for j, h in enumerate(locals_):
        term = ad.mul_colvec(h, ad.slice_cols(weights, j, j + 1))
        u = term if u is None else u + term
    return z + u


def concat_fusion(z: Tensor, locals_: Sequence[Tensor]) -> Tensor:
    _check_inputs(z, locals_)
    return ad.concat_cols([*locals_, z])


def sum_fusion(z: Tensor, locals_: Sequence[Tensor]) -> Tensor:
    _check_inputs(z, locals_)
    out = z
    for h in locals_:
        out = out + h
    return out


def fuse(
    z: Tensor, locals_: Sequence[Tensor], cfg: FusionConfig,
    params: Mapping[str, Tensor] | None = None,
) -> Tensor:
    cfg.validate()
    if cfg.mode == "concat":
        return concat_fusion(z, locals_)
    if cfg.mode == "add":
        return sum_fusion(z, locals_)
    if cfg.mode == "dot":
        return dot_attention(z, locals_, cfg.scale_scores)
    if params is None or "fusion.mlp.w" not in params:
        raise ShapeError("mlp fusion needs its attention parameters")
    return mlp_attention(z, locals_, params, cfg.scale_scores, cfg.mlp_tanh)
