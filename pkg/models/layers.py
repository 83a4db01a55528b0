"""
Parameter-owning transformer layers built on ``nnprims``.

Sublayer order is post-norm: sublayer -> dropout -> residual add -> LayerNorm.
Positional encodings are added to attention queries/keys only, never to values.
"""
from typing import List, Optional, Tuple, Union

import torch
from torch import Tensor, nn

from core.base_module import BaseModule
from models.nnprims import (
    MhaConfig,
    MhaParams,
    feed_forward,
    layer_norm,
    multi_head_attention,
)


def _with_pos(x: Tensor, pos: Optional[Tensor]) -> Tensor:
    return x if pos is None else x + pos


class MultiHeadAttention(BaseModule):
    def __init__(self, cfg: MhaConfig):
        super().__init__()
        self.cfg = cfg
        D = cfg.model_dim
        self.w_q = nn.Parameter(torch.empty(D, D))
        self.w_k = nn.Parameter(torch.empty(D, D))
        self.w_v = nn.Parameter(torch.empty(D, D))
        self.w_o = nn.Parameter(torch.empty(D, D))
        self.reset_xavier()

    @property
    def params(self) -> MhaParams:
        return MhaParams(self.w_q, self.w_k, self.w_v, self.w_o)

    def forward(self, q: Tensor, k: Tensor, v: Tensor, need_weights: bool = False):
        return multi_head_attention(q, k, v, self.params, self.cfg, need_weights=need_weights)


class FeedForward(BaseModule):
    def __init__(self, d_model: int, ffn_dim: int):
        super().__init__()
        self.w_1 = nn.Parameter(torch.empty(d_model, ffn_dim))
        self.b_1 = nn.Parameter(torch.zeros(ffn_dim))
        self.w_2 = nn.Parameter(torch.empty(ffn_dim, d_model))
        self.b_2 = nn.Parameter(torch.zeros(d_model))
        self.reset_xavier()

    def forward(self, x: Tensor) -> Tensor:
        return feed_forward(x, self.w_1, self.b_1, self.w_2, self.b_2)


class LayerNorm(BaseModule):
    def __init__(self, d_model: int):
        super().__init__()
        self.gain = nn.Parameter(torch.ones(d_model))
        self.bias = nn.Parameter(torch.zeros(d_model))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


# ==================== ENCODER ====================

class EncoderLayer(BaseModule):
    def __init__(self, d_model: int, num_heads: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadAttention(MhaConfig(d_model, num_heads))
        self.ffn = FeedForward(d_model, ffn_dim)
        self.norm1 = LayerNorm(d_model)
        self.norm2 = LayerNorm(d_model)
        self.dropout1 = nn.Dropout(dropout)
        self.dropout2 = nn.Dropout(dropout)

    def forward(self, x: Tensor, pos: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        qk = _with_pos(x, pos)
        attended, weights = self.self_attn(qk, qk, x, need_weights=True)
        x = self.norm1(x + self.dropout1(attended))
        x = self.norm2(x + self.dropout2(self.ffn(x)))
        return x, weights


class TransformerEncoder(BaseModule):
    def __init__(self, num_layers: int, d_model: int, num_heads: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.layers = nn.ModuleList(
            EncoderLayer(d_model, num_heads, ffn_dim, dropout) for _ in range(num_layers)
        )

    def forward(
        self, x: Tensor, pos: Optional[Tensor] = None, need_weights: bool = False
    ) -> Union[Tensor, Tuple[Tensor, List[Tensor]]]:
        """``pos=None`` drops the positional encoding (the encoder is then permutation-equivariant)."""
        all_weights = []
        for layer in self.layers:
            x, weights = layer(x, pos)
            all_weights.append(weights)
        if need_weights:
            return x, all_weights
        return x


# ==================== DECODER ====================

class DecoderLayer(BaseModule):
    """Self-attention over the queries, cross-attention to memory, FFN."""

    def __init__(self, d_model: int, num_heads: int, ffn_dim: int, dropout: float):
        super().__init__()
        cfg = MhaConfig(d_model, num_heads)
        self.self_attn = MultiHeadAttention(cfg)
        self.cross_attn = MultiHeadAttention(cfg)
        self.ffn = FeedForward(d_model, ffn_dim)
        self.norm1 = LayerNorm(d_model)
        self.norm2 = LayerNorm(d_model)
        self.norm3 = LayerNorm(d_model)
        self.dropout1 = nn.Dropout(dropout)
        self.dropout2 = nn.Dropout(dropout)
        self.dropout3 = nn.Dropout(dropout)

    def forward(self, tgt: Tensor, memory: Tensor, memory_pos: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        attended = self.self_attn(tgt, tgt, tgt)
        tgt = self.norm1(tgt + self.dropout1(attended))
        attended, cross_weights = self.cross_attn(tgt, _with_pos(memory, memory_pos), memory, need_weights=True)
        tgt = self.norm2(tgt + self.dropout2(attended))
        tgt = self.norm3(tgt + self.dropout3(self.ffn(tgt)))
        return tgt, cross_weights


class TransformerDecoder(BaseModule):
    def __init__(self, num_layers: int, d_model: int, num_heads: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.layers = nn.ModuleList(
            DecoderLayer(d_model, num_heads, ffn_dim, dropout) for _ in range(num_layers)
        )

    def forward(self, tgt: Tensor, memory: Tensor, memory_pos: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        """Returns the decoded queries and the last layer's head-averaged cross-attention."""
        cross_weights = None
        for layer in self.layers:
            tgt, cross_weights = layer(tgt, memory, memory_pos)
        return tgt, cross_weights
