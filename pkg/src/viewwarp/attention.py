"""Augmented self-attention across two views.

Queries come from the target-view feature tokens; keys and values are the
concatenation of source-view and target-view tokens, so each target token
can either borrow source content (cross component) or rely on its own view
(self component). The returned attention maps are split accordingly, which
makes the borrow-vs-inpaint behavior directly inspectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, ShapeMismatch
from .warpcore import FeatureGrid

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class AttentionResult:
    """Attention output plus the cross/self split of the attention map.

    ``a_cross`` holds the columns attending to source tokens (shape
    (..., N, M)), ``a_self`` the columns attending to target tokens
    (shape (..., N, N)); together each row sums to 1. With multiple heads
    the leading axis indexes heads.
    """

    output: np.ndarray = field(repr=False)
    a_cross: np.ndarray = field(repr=False)
    a_self: np.ndarray = field(repr=False)

    def __post_init__(self):
        output = np.asarray(self.output, dtype=np.float64)
        a_cross = np.asarray(self.a_cross, dtype=np.float64)
        a_self = np.asarray(self.a_self, dtype=np.float64)
        if a_cross.shape[:-1] != a_self.shape[:-1]:
            raise ShapeMismatch(f"map shapes disagree: {a_cross.shape} vs {a_self.shape}")
        if np.min(a_cross, initial=0.0) < 0 or np.min(a_self, initial=0.0) < 0:
            raise ValueError("attention weights must be non-negative")
        rows = a_cross.sum(axis=-1) + a_self.sum(axis=-1)
        if not np.allclose(rows, 1.0, atol=ROW_SUM_TOL):
            raise ValueError("attention rows must sum to 1")
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "a_cross", a_cross)
        object.__setattr__(self, "a_self", a_self)

    def cross_mass(self) -> np.ndarray:
        """Total attention each query spends on source tokens, (..., N)."""
        return self.a_cross.sum(axis=-1)

    def self_mass(self) -> np.ndarray:
        """Total attention each query spends on target tokens, (..., N)."""
        return self.a_self.sum(axis=-1)


def _check_projection(name: str, w: np.ndarray | None, channels: int) -> np.ndarray | None:
    if w is None:
        return None
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != channels:
        raise ShapeMismatch(f"{name} must be ({channels}, d), got {w.shape}")
    return w


def augmented_attention(
    f_i: np.ndarray,
    f_j: np.ndarray,
    dim_head: int | None = None,
    *,
    heads: int = 1,
    w_q: np.ndarray | None = None,
    w_k: np.ndarray | None = None,
    w_v: np.ndarray | None = None,
) -> AttentionResult:
    """Scaled dot-product attention of target tokens over both views.

    Parameters
    ----------
    f_i : (M, C) source-view tokens; M may be 0 (pure self-attention).
    f_j : (N, C) target-view tokens; queries.
    dim_head : dimension used in the 1/sqrt(dim_head) logit scale.
        Defaults to the per-head channel count after projection.
    heads : number of attention heads; must divide the projected width.
    w_q, w_k, w_v : optional (C, d) projection matrices, identity when
        omitted. Keys and values share the concatenated [f_i, f_j] input,
        source tokens first.

    Softmax runs per query row over all M+N logits with the row maximum
    subtracted, so identical logits split mass exactly evenly regardless
    of their magnitude.
    """
    f_i = np.atleast_2d(np.asarray(f_i, dtype=np.float64))
    f_j = np.atleast_2d(np.asarray(f_j, dtype=np.float64))
    if f_i.size == 0:
        f_i = f_i.reshape(0, f_j.shape[1])
    if f_j.shape[0] < 1:
        raise ShapeMismatch("need at least one target token")
    if f_i.shape[1] != f_j.shape[1]:
        raise ShapeMismatch(f"channel mismatch: {f_i.shape[1]} vs {f_j.shape[1]}")
    channels = f_j.shape[1]

    w_q = _check_projection("w_q", w_q, channels)
    w_k = _check_projection("w_k", w_k, channels)
    w_v = _check_projection("w_v", w_v, channels)

    kv_in = np.concatenate([f_i, f_j], axis=0)
    q = f_j @ w_q if w_q is not None else f_j
    k = kv_in @ w_k if w_k is not None else kv_in
    v = kv_in @ w_v if w_v is not None else kv_in
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"query width {q.shape[1]} != key width {k.shape[1]}")

    width = q.shape[1]
    if heads < 1 or width % heads:
        raise ShapeMismatch(f"width {width} not divisible into {heads} heads")
    per_head = width // heads
    v_width = v.shape[1]
    if v_width % heads:
        raise ShapeMismatch(f"value width {v_width} not divisible into {heads} heads")
    if dim_head is None:
        dim_head = per_head
    if dim_head < 1:
        raise ValueError(f"dim_head must be >= 1, got {dim_head}")

    m, n = f_i.shape[0], f_j.shape[0]
    qh = q.reshape(n, heads, per_head).transpose(1, 0, 2)
    kh = k.reshape(m + n, heads, per_head).transpose(1, 0, 2)
    vh = v.reshape(m + n, heads, v_width // heads).transpose(1, 0, 2)

    logits = np.einsum("hnd,hmd->hnm", qh, kh) / np.sqrt(float(dim_head))
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=-1, keepdims=True)

    out = np.einsum("hnm,hmd->hnd", weights, vh).transpose(1, 0, 2).reshape(n, v_width)
    a_cross = weights[:, :, :m]
    a_self = weights[:, :, m:]
    if heads == 1:
        a_cross = a_cross[0]
        a_self = a_self[0]
    return AttentionResult(out, a_cross, a_self)


def attention_heatmaps(
    result: AttentionResult,
    query_index: int,
    grid_dims: tuple[int, int],
) -> tuple[FeatureGrid, FeatureGrid]:
    """Reshape one query's attention row into (cross, self) spatial maps.

    ``grid_dims`` is (height, width) of the token grid; both the source
    and target token counts must equal height * width. Multi-head results
    are averaged over heads.
    """
    h, w = grid_dims
    a_cross, a_self = result.a_cross, result.a_self
    if a_cross.ndim == 3:
        a_cross = a_cross.mean(axis=0)
        a_self = a_self.mean(axis=0)
    n, m = a_cross.shape
    if not 0 <= query_index < n:
        raise IndexOutOfRange(f"query {query_index} outside [0, {n})")
    if m != h * w or a_self.shape[1] != h * w:
        raise ShapeMismatch(
            f"token counts ({m}, {a_self.shape[1]}) do not fill a {h}x{w} grid"
        )
    cross = a_cross[query_index].reshape(h, w, 1)
    self_ = a_self[query_index].reshape(h, w, 1)
    return FeatureGrid(cross), FeatureGrid(self_)
