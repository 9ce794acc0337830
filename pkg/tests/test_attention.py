"""Augmented attention over concatenated source + target token sets."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewwarp import (
    AttentionResult,
    IndexOutOfRange,
    ShapeMismatch,
    attention_heatmaps,
    augmented_attention,
)
from viewwarp.synthoracle import attention_bruteforce


def softmax_rows(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class TestAgainstOracle:
    @pytest.mark.parametrize("m,n", [(0, 1), (0, 8), (1, 1), (2, 2), (3, 5),
                                     (8, 8), (16, 16), (32, 32), (40, 24),
                                     (63, 1), (1, 63), (20, 44)])
    def test_matches_bruteforce(self, rng, m, n):
        f_i = rng.normal(size=(m, 7))
        f_j = rng.normal(size=(n, 7))
        result = augmented_attention(f_i, f_j)
        out, a_cross, a_self = attention_bruteforce(f_i, f_j)
        assert np.abs(result.output - out).max() <= 1e-10
        assert np.abs(result.a_self - a_self).max() <= 1e-10
        if m:
            assert np.abs(result.a_cross - a_cross).max() <= 1e-10

    def test_explicit_dim_head_matches_bruteforce(self, rng):
        f_i = rng.normal(size=(5, 6))
        f_j = rng.normal(size=(4, 6))
        result = augmented_attention(f_i, f_j, dim_head=17)
        out, a_cross, a_self = attention_bruteforce(f_i, f_j, dim_head=17)
        assert np.abs(result.output - out).max() <= 1e-10
        assert np.abs(result.a_cross - a_cross).max() <= 1e-10


class TestExactProperties:
    def test_single_identical_token_splits_mass_exactly(self, rng):
        token = rng.normal(size=(1, 7))
        result = augmented_attention(token, token.copy())
        assert float(result.a_cross[0, 0]) == 0.5
        assert float(result.a_self[0, 0]) == 0.5

    def test_empty_source_reduces_to_self_attention(self, rng):
        f_j = rng.normal(size=(6, 5))
        result = augmented_attention(np.zeros((0, 5)), f_j)
        assert result.a_cross.shape == (6, 0)
        logits = (f_j @ f_j.T) / np.sqrt(5)
        np.testing.assert_allclose(result.a_self, softmax_rows(logits), atol=1e-12)
        np.testing.assert_allclose(result.output, softmax_rows(logits) @ f_j, atol=1e-12)

    def test_logit_shift_invariance(self, rng):
        # each token carries a constant bias channel; adding a random last
        # column to w_q shifts every query's logit row by a constant, which
        # must leave the attention maps untouched
        m, n, c = 6, 5, 8
        f_i = np.concatenate([rng.normal(size=(m, c)), np.ones((m, 1))], axis=1)
        f_j = np.concatenate([rng.normal(size=(n, c)), np.ones((n, 1))], axis=1)
        base = augmented_attention(f_i, f_j)
        w_q = np.eye(c + 1)
        w_q[:, c] += rng.normal(scale=3.0, size=c + 1)
        shifted = augmented_attention(f_i, f_j, w_q=w_q)
        assert np.abs(base.a_cross - shifted.a_cross).max() <= 1e-9
        assert np.abs(base.a_self - shifted.a_self).max() <= 1e-9
        assert np.abs(base.output - shifted.output).max() <= 1e-9

    def test_source_permutation_permutes_cross_columns(self, rng):
        f_i = rng.normal(size=(7, 4))
        f_j = rng.normal(size=(5, 4))
        perm = np.random.default_rng(3).permutation(7)
        base = augmented_attention(f_i, f_j)
        permuted = augmented_attention(f_i[perm], f_j)
        np.testing.assert_allclose(permuted.a_cross, base.a_cross[:, perm], atol=1e-12)
        np.testing.assert_allclose(permuted.a_self, base.a_self, atol=1e-12)
        np.testing.assert_allclose(permuted.output, base.output, atol=1e-12)

    def test_target_permutation_permutes_rows_and_self_columns(self, rng):
        f_i = rng.normal(size=(4, 4))
        f_j = rng.normal(size=(6, 4))
        perm = np.random.default_rng(4).permutation(6)
        base = augmented_attention(f_i, f_j)
        permuted = augmented_attention(f_i, f_j[perm])
        np.testing.assert_allclose(permuted.output, base.output[perm], atol=1e-12)
        np.testing.assert_allclose(permuted.a_cross, base.a_cross[perm], atol=1e-12)
        np.testing.assert_allclose(
            permuted.a_self, base.a_self[perm][:, perm], atol=1e-12
        )

    def test_large_logits_do_not_overflow(self):
        f_i = np.full((2, 3), 200.0)
        f_j = np.full((3, 3), 200.0)
        result = augmented_attention(f_i, f_j)
        assert np.isfinite(result.output).all()
        rows = result.a_cross.sum(axis=1) + result.a_self.sum(axis=1)
        np.testing.assert_allclose(rows, 1.0, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 9), st.integers(1, 9), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_rows_always_sum_to_one(self, m, n, c, seed):
        r = np.random.default_rng(seed)
        result = augmented_attention(r.normal(size=(m, c)), r.normal(size=(n, c)))
        rows = result.a_cross.sum(axis=1) + result.a_self.sum(axis=1)
        assert np.abs(rows - 1.0).max() <= 1e-6
        assert result.a_self.min() >= 0.0
        if m:
            assert result.a_cross.min() >= 0.0


class TestProjectionsAndHeads:
    def test_projections_match_manual_computation(self, rng):
        m, n, c, d = 4, 3, 5, 6
        f_i = rng.normal(size=(m, c))
        f_j = rng.normal(size=(n, c))
        w_q = rng.normal(size=(c, d))
        w_k = rng.normal(size=(c, d))
        w_v = rng.normal(size=(c, d))
        result = augmented_attention(f_i, f_j, w_q=w_q, w_k=w_k, w_v=w_v)

        kv = np.concatenate([f_i, f_j], axis=0)
        attn = softmax_rows((f_j @ w_q) @ (kv @ w_k).T / np.sqrt(d))
        np.testing.assert_allclose(result.a_cross, attn[:, :m], atol=1e-12)
        np.testing.assert_allclose(result.a_self, attn[:, m:], atol=1e-12)
        np.testing.assert_allclose(result.output, attn @ (kv @ w_v), atol=1e-12)

    def test_multi_head_averages_match_per_head_runs(self, rng):
        m, n, c = 3, 4, 8
        f_i = rng.normal(size=(m, c))
        f_j = rng.normal(size=(n, c))
        two_heads = augmented_attention(f_i, f_j, heads=2)
        first = augmented_attention(f_i[:, :4], f_j[:, :4])
        second = augmented_attention(f_i[:, 4:], f_j[:, 4:])
        # per-head maps are stacked on a leading axis
        assert two_heads.a_cross.shape == (2, n, m)
        np.testing.assert_allclose(two_heads.a_cross[0], first.a_cross, atol=1e-12)
        np.testing.assert_allclose(two_heads.a_cross[1], second.a_cross, atol=1e-12)
        np.testing.assert_allclose(two_heads.a_self[0], first.a_self, atol=1e-12)

    def test_heads_must_divide_channels(self, rng):
        with pytest.raises(ShapeMismatch):
            augmented_attention(rng.normal(size=(2, 7)), rng.normal(size=(2, 7)), heads=2)

    def test_channel_mismatch_raises(self, rng):
        with pytest.raises(ShapeMismatch):
            augmented_attention(rng.normal(size=(2, 5)), rng.normal(size=(2, 6)))


class TestHeatmaps:
    def test_heatmaps_reshape_attention_rows(self, rng):
        h, w = 3, 4
        f_i = rng.normal(size=(h * w, 5))
        f_j = rng.normal(size=(h * w, 5))
        result = augmented_attention(f_i, f_j)
        cross, self_ = attention_heatmaps(result, 5, (h, w))
        assert cross.shape == (h, w) and self_.shape == (h, w)
        np.testing.assert_allclose(cross.data[..., 0].ravel(), result.a_cross[5])
        np.testing.assert_allclose(self_.data[..., 0].ravel(), result.a_self[5])

    def test_query_index_out_of_range(self, rng):
        f = rng.normal(size=(6, 4))
        result = augmented_attention(f, f)
        with pytest.raises(IndexOutOfRange):
            attention_heatmaps(result, 6, (2, 3))

    def test_grid_dims_must_match_token_count(self, rng):
        f = rng.normal(size=(6, 4))
        result = augmented_attention(f, f)
        with pytest.raises(ShapeMismatch):
            attention_heatmaps(result, 0, (2, 4))


class TestResultValidation:
    def test_rejects_negative_attention(self):
        with pytest.raises(Exception):
            AttentionResult(
                output=np.zeros((1, 2)),
                a_cross=np.array([[-0.1, 0.6]]),
                a_self=np.array([[0.5]]),
            )
