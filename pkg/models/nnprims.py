"""
Transformer building blocks as plain functions over tensors.

Every function accepts arbitrary leading batch dimensions; the trailing two
dimensions are (sequence, features). The nn.Module wrappers in ``layers`` own
the parameters and call into these.
"""
import math
from dataclasses import dataclass
from typing import Tuple, Union

import torch
import torch.nn.functional as F
from torch import Tensor

from core.exceptions import BadDim, ShapeMismatch

LN_EPS = 1e-5


@dataclass(frozen=True)
class MhaConfig:
    model_dim: int
    num_heads: int

    def __post_init__(self):
        if self.num_heads <= 0 or self.model_dim % self.num_heads:
            raise ShapeMismatch(f"model_dim={self.model_dim} not divisible by num_heads={self.num_heads}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass
class MhaParams:
    """
    Projection matrices, each D×D.
    Columns ``h*d_k:(h+1)*d_k`` of w_q / w_k / w_v are head h's projection.
    """
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor


# ==================== ATTENTION ====================

def attention_weights(q: Tensor, k: Tensor) -> Tensor:
    """softmax(QKᵀ/√d_k), rows over keys."""
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"Query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    return torch.softmax(scores, dim=-1)


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"{k.shape[-2]} keys but {v.shape[-2]} values")
    return attention_weights(q, k) @ v


def _split_heads(x: Tensor, w: Tensor, cfg: MhaConfig) -> Tensor:
    # (..., L, D) -> (..., M, L, d_k)
    projected = x @ w
    return projected.unflatten(-1, (cfg.num_heads, cfg.head_dim)).transpose(-3, -2)


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    params: MhaParams,
    cfg: MhaConfig,
    need_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """
    Concat(head_1..head_M) W^O with head_i = Attention(Q W^Q_i, K W^K_i, V W^V_i).

    With ``need_weights`` also returns the head-averaged attention weights
    (..., L_q, L_k).
    """
    D = cfg.model_dim
    for name, x in (("query", q), ("key", k), ("value", v)):
        if x.shape[-1] != D:
            raise ShapeMismatch(f"{name} has dim {x.shape[-1]}, expected {D}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"{k.shape[-2]} keys but {v.shape[-2]} values")

    qh = _split_heads(q, params.w_q, cfg)
    kh = _split_heads(k, params.w_k, cfg)
    vh = _split_heads(v, params.w_v, cfg)
    weights = attention_weights(qh, kh)
    heads = (weights @ vh).transpose(-3, -2).flatten(-2)
    out = heads @ params.w_o
    if need_weights:
        return out, weights.mean(dim=-3)
    return out


# ==================== FFN / NORM ====================

def feed_forward(x: Tensor, w_1: Tensor, b_1: Tensor, w_2: Tensor, b_2: Tensor) -> Tensor:
    """max(0, x W_1 + b_1) W_2 + b_2"""
    if x.shape[-1] != w_1.shape[0] or w_1.shape[1] != w_2.shape[0] or b_1.shape[-1] != w_1.shape[1]:
        raise ShapeMismatch(
            f"x {tuple(x.shape)}, W_1 {tuple(w_1.shape)}, b_1 {tuple(b_1.shape)}, W_2 {tuple(w_2.shape)}"
        )
    if b_2.shape[-1] != w_2.shape[1]:
        raise ShapeMismatch(f"b_2 {tuple(b_2.shape)} vs W_2 {tuple(w_2.shape)}")
    return torch.relu(x @ w_1 + b_1) @ w_2 + b_2


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    """Per-row standardisation (biased variance, ε inside the root), then affine."""
    return F.layer_norm(x, (x.shape[-1],), gain, bias, eps)


# ==================== POSITIONAL ENCODING ====================

def _sinusoid_table(length: int, channels: int) -> Tensor:
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div_term = torch.exp(torch.arange(0, channels, 2, dtype=torch.float64) * (-math.log(10000.0) / channels))
    table = torch.zeros(length, channels, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term)
    return table


def positional_encoding_2d(H: int, W: int, D: int, dtype: torch.dtype = torch.float32) -> Tensor:
    """
    (H·W)×D table, row-major over (row, col).
    Channels [0, D/2) encode the row index, [D/2, D) the column index; each half
    interleaves sin/cos over geometrically spaced frequencies.
    """
    if D % 4 or D <= 0:
        raise BadDim(f"D={D} must be a positive multiple of 4")
    half = D // 2
    rows = _sinusoid_table(H, half)[:, None, :].expand(H, W, half)
    cols = _sinusoid_table(W, half)[None, :, :].expand(H, W, half)
    return torch.cat([rows, cols], dim=-1).reshape(H * W, D).to(dtype)
