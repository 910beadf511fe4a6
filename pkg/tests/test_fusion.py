"""Fusion modes: candidate attention, window attention, concat, and sum."""

import numpy as np
import pytest

from hgn.autodiff import Tensor
from hgn.errors import ConfigError, ShapeError
from hgn.fusion import (
    FusionConfig,
    concat_fusion,
    dot_attention,
    fuse,
    fused_width,
    init_fusion_params,
    mlp_attention,
    sum_fusion,
)

SIGMOID_1 = 0.7310585786300049  # softmax([1, 0]) splits scores this way


def _t(values):
    return Tensor(np.asarray(values, dtype=np.float64))


def _mlp_params(d, n_windows, w=None, b=None):
    n_in = (n_windows + 1) * d
    return {
        "fusion.mlp.w": _t(np.zeros((n_in, d)) if w is None else w),
        "fusion.mlp.b": _t(np.zeros(d) if b is None else b),
    }


def _rows_summing_to(rng, n, d, total):
    x = rng.normal(size=(n, d))
    x[:, -1] = total - x[:, :-1].sum(axis=1)
    return x


# -- candidate (mlp) attention ------------------------------------------------

def test_mlp_identical_candidates_returns_candidate(rng):
    x = rng.normal(size=(4, 6))
    params = init_fusion_params(rng, 6, 2, FusionConfig(mode="mlp"))
    out = mlp_attention(_t(x), [_t(x), _t(x)], params)
    assert np.max(np.abs(out.data - x)) <= 1e-12


def test_mlp_zero_params_averages_candidates(rng):
    z = rng.normal(size=(3, 4))
    h1 = rng.normal(size=(3, 4))
    h2 = rng.normal(size=(3, 4))
    out = mlp_attention(_t(z), [_t(h1), _t(h2)], _mlp_params(4, 2))
    assert np.max(np.abs(out.data - (z + h1 + h2) / 3.0)) <= 1e-12


def test_mlp_worked_example():
    # W = 0 and b = [1, 0] make the query m = [1, 0]; the global row scores 1
    # and the local row 0, so the weights are softmax([1, 0]).
    out = mlp_attention(_t([[1.0, 0.0]]), [_t([[0.0, 1.0]])],
                        _mlp_params(2, 1, b=[1.0, 0.0]))
    assert out.data[0, 0] == pytest.approx(SIGMOID_1, rel=1e-12)
    assert out.data[0, 1] == pytest.approx(1.0 - SIGMOID_1, rel=1e-12)


def test_mlp_tanh_flag_squashes_query():
    out = mlp_attention(_t([[1.0, 0.0]]), [_t([[0.0, 1.0]])],
                        _mlp_params(2, 1, b=[1.0, 0.0]), mlp_tanh=True)
    scores = np.array([np.tanh(1.0), 0.0])
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()
    expected = weights[0] * np.array([1.0, 0.0]) + weights[1] * np.array([0.0, 1.0])
    assert np.max(np.abs(out.data[0] - expected)) <= 1e-12


def test_mlp_scale_scores_flag():
    out = mlp_attention(_t([[1.0, 0.0]]), [_t([[0.0, 1.0]])],
                        _mlp_params(2, 1, b=[1.0, 0.0]), scale_scores=True)
    scores = np.array([1.0, 0.0]) / np.sqrt(2.0)
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()
    expected = weights[0] * np.array([1.0, 0.0]) + weights[1] * np.array([0.0, 1.0])
    assert np.max(np.abs(out.data[0] - expected)) <= 1e-12


def test_mlp_output_is_convex_combination(rng):
    # Every candidate row sums to 3, so any softmax mixture must as well.
    z = _rows_summing_to(rng, 5, 4, 3.0)
    locals_ = [_rows_summing_to(rng, 5, 4, 3.0) for _ in range(3)]
    params = init_fusion_params(rng, 4, 3, FusionConfig(mode="mlp"))
    out = mlp_attention(_t(z), [_t(h) for h in locals_], params)
    assert np.max(np.abs(out.data.sum(axis=1) - 3.0)) <= 1e-12


# -- window (dot) attention ---------------------------------------------------

def test_dot_single_window_is_plain_sum(rng):
    z = rng.normal(size=(3, 4))
    h = rng.normal(size=(3, 4))
    out = dot_attention(_t(z), [_t(h)])
    assert np.array_equal(out.data, z + h)


def test_dot_equal_scores_average_windows():
    out = dot_attention(_t([[1.0, 1.0]]), [_t([[2.0, 0.0]]), _t([[0.0, 2.0]])])
    assert np.array_equal(out.data, [[2.0, 2.0]])


def test_dot_worked_example():
    out = dot_attention(_t([[1.0, 0.0]]), [_t([[0.0, 1.0]]), _t([[1.0, 1.0]])])
    assert out.data[0, 0] == pytest.approx(1.0 + SIGMOID_1, rel=1e-12)
    assert out.data[0, 1] == pytest.approx(1.0, rel=1e-12)


def test_dot_attended_sum_is_convex(rng):
    z = _rows_summing_to(rng, 5, 4, 3.0)
    locals_ = [_rows_summing_to(rng, 5, 4, 3.0) for _ in range(2)]
    out = dot_attention(_t(z), [_t(h) for h in locals_])
    assert np.max(np.abs(out.data.sum(axis=1) - 6.0)) <= 1e-12


def test_dot_shift_by_orthogonal_offset(rng):
    z = rng.normal(size=(4, 6))
    locals_ = [rng.normal(size=(4, 6)) for _ in range(2)]
    raw = rng.normal(size=(4, 6))
    offset = raw - (np.sum(raw * z, axis=1) / np.sum(z * z, axis=1))[:, None] * z
    plain = dot_attention(_t(z), [_t(h) for h in locals_]).data
    shifted = dot_attention(_t(z), [_t(h + offset) for h in locals_]).data
    assert np.max(np.abs(shifted - (plain + offset))) <= 1e-12


def test_dot_scale_scores_flag(rng):
    z = np.array([[1.0, 0.0]])
    locals_ = [np.array([[0.0, 1.0]]), np.array([[1.0, 1.0]])]
    out = dot_attention(_t(z), [_t(h) for h in locals_], scale_scores=True)
    scores = np.array([0.0, 1.0]) / np.sqrt(2.0)
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()
    expected = z[0] + weights[0] * locals_[0][0] + weights[1] * locals_[1][0]
    assert np.max(np.abs(out.data[0] - expected)) <= 1e-12


def test_dot_requires_a_local():
    with pytest.raises(ShapeError):
        dot_attention(_t([[1.0, 2.0]]), [])


# -- concat and sum -----------------------------------------------------------

def test_concat_places_locals_before_global():
    out = concat_fusion(_t([[3.0, 4.0]]), [_t([[1.0, 2.0]])])
    assert np.array_equal(out.data, [[1.0, 2.0, 3.0, 4.0]])


def test_concat_preserves_window_order():
    out = concat_fusion(_t([[5.0]]), [_t([[1.0]]), _t([[2.0]]), _t([[3.0]])])
    assert np.array_equal(out.data, [[1.0, 2.0, 3.0, 5.0]])


def test_fused_width_per_mode():
    assert fused_width(FusionConfig(mode="concat"), 64, 3) == 256
    assert fused_width(FusionConfig(mode="add"), 64, 3) == 64
    assert fused_width(FusionConfig(mode="dot"), 64, 3) == 64
    assert fused_width(FusionConfig(mode="mlp"), 64, 3) == 64


def test_sum_fusion_values():
    out = sum_fusion(_t([[1.0, 2.0]]), [_t([[3.0, 4.0]])])
    assert np.array_equal(out.data, [[4.0, 6.0]])
    out = sum_fusion(_t([[1.0, 1.0]]), [_t([[1.0, 1.0]])])
    assert np.array_equal(out.data, [[2.0, 2.0]])


def test_sum_fusion_without_locals_is_identity(rng):
    z = rng.normal(size=(3, 4))
    assert np.array_equal(sum_fusion(_t(z), []).data, z)


# -- dispatcher and plumbing --------------------------------------------------

def test_fuse_dispatches_each_mode(rng):
    z = rng.normal(size=(3, 4))
    locals_ = [rng.normal(size=(3, 4)) for _ in range(2)]
    zt = _t(z)
    hts = [_t(h) for h in locals_]
    params = init_fusion_params(rng, 4, 2, FusionConfig(mode="mlp"))
    assert np.array_equal(fuse(zt, hts, FusionConfig(mode="add")).data,
                          sum_fusion(zt, hts).data)
    assert np.array_equal(fuse(zt, hts, FusionConfig(mode="concat")).data,
                          concat_fusion(zt, hts).data)
    assert np.array_equal(fuse(zt, hts, FusionConfig(mode="dot")).data,
                          dot_attention(zt, hts).data)
    assert np.array_equal(fuse(zt, hts, FusionConfig(mode="mlp"), params).data,
                          mlp_attention(zt, hts, params).data)


def test_fuse_mlp_without_params_is_an_error(rng):
    with pytest.raises(ShapeError):
        fuse(_t(np.zeros((2, 4))), [_t(np.zeros((2, 4)))], FusionConfig(mode="mlp"))


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError):
        FusionConfig(mode="max").validate()
    with pytest.raises(ConfigError):
        fuse(_t(np.zeros((2, 4))), [], FusionConfig(mode="max"))


def test_shape_mismatch_errors():
    with pytest.raises(ShapeError):
        dot_attention(_t([[1.0, 2.0]]), [_t([[1.0, 2.0, 3.0]])])
    with pytest.raises(ShapeError):
        sum_fusion(_t([1.0, 2.0]), [])
    with pytest.raises(ShapeError):
        mlp_attention(_t([[1.0]]), [_t([[1.0], [2.0]])], _mlp_params(1, 1))


def test_init_fusion_params_shapes(rng):
    params = init_fusion_params(rng, 6, 3, FusionConfig(mode="mlp"))
    assert list(params) == ["fusion.mlp.w", "fusion.mlp.b"]
    assert params["fusion.mlp.w"].shape == (24, 6)
    assert np.array_equal(params["fusion.mlp.b"].data, np.zeros(6))
    assert init_fusion_params(rng, 6, 3, FusionConfig(mode="dot")) == {}
