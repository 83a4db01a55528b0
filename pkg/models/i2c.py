"""
Image-to-character mapping.

backbone -> 1×1 projection -> encoder (+2D PE at attention inputs) ->
query decoder over learned character queries E_C -> E_PC -> char / position heads.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import Tensor, nn

from config.settings import ModelConfig
from core.base_module import BaseModule
from core.charset import DEFAULT_CHARSET, CharSet
from models.backbone import Backbone, BackboneConfig
from models.layers import TransformerDecoder, TransformerEncoder
from models.nnprims import positional_encoding_2d


@dataclass
class I2COutput:
    e_pc: Tensor                # B×N×D (slot-major; ``e_pc_matrix`` gives D×N)
    char_logits: Tensor         # B×N×37
    pos_logits: Tensor          # B×N×(N+1)
    cross_attention: Tensor     # B×N×HW, last decoder layer, head-averaged

    @property
    def e_pc_matrix(self) -> Tensor:
        return self.e_pc.transpose(-2, -1)


@dataclass(frozen=True)
class CharCandidate:
    """One detection slot."""
    char_class: int
    pos_class: int
    char_probs: np.ndarray
    pos_probs: np.ndarray
    query_index: int = 0

    def __post_init__(self):
        if int(np.argmax(self.char_probs)) != self.char_class or int(np.argmax(self.pos_probs)) != self.pos_class:
            raise ValueError("Class fields must be the argmax of their probability vectors")

    @property
    def char_prob(self) -> float:
        return float(self.char_probs[self.char_class])

    @property
    def pos_prob(self) -> float:
        return float(self.pos_probs[self.pos_class])


def backbone_config(cfg: ModelConfig) -> BackboneConfig:
    return BackboneConfig(stages=tuple(zip(cfg.backbone_channels, cfg.backbone_strides)))


class ImageEncoder(BaseModule):
    """Backbone + projection + transformer encoder; shared by I2C and the I2W baseline."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(backbone_config(cfg))
        self.input_proj = nn.Conv2d(self.backbone.cfg.out_channels, cfg.d_model, kernel_size=1)
        nn.init.xavier_uniform_(self.input_proj.weight)
        self.encoder = TransformerEncoder(cfg.encoder_layers, cfg.d_model, cfg.num_heads, cfg.ffn_dim, cfg.dropout)
        H, W = cfg.feature_size
        self.register_buffer("pos_encoding", positional_encoding_2d(H, W, cfg.d_model), persistent=False)

    def backbone_forward(self, images: Tensor) -> Tensor:
        return self.backbone(images)

    def tokens(self, features: Tensor) -> Tensor:
        """B×C×H×W features -> B×HW×D projected tokens (row-major)."""
        return self.input_proj(features).flatten(2).transpose(1, 2)

    def encode(self, features: Tensor, positional: bool = True) -> Tensor:
        """z_e: B×HW×D."""
        pos = self.pos_encoding.to(features.dtype) if positional else None
        return self.encoder(self.tokens(features), pos)

    def forward(self, images: Tensor) -> Tensor:
        return self.encode(self.backbone_forward(images))


class I2C(BaseModule):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        N, D = cfg.n_queries, cfg.d_model
        self.char_queries = nn.Parameter(torch.empty(D, N))  # E_C
        self.decoder = TransformerDecoder(cfg.i2c_decoder_layers, D, cfg.num_heads, cfg.ffn_dim, cfg.dropout)
        self.char_head = nn.Linear(D, DEFAULT_CHARSET.size)
        self.pos_head = nn.Linear(D, N + 1)
        self.reset_xavier()

    def forward(
        self, z_e: Tensor, memory_pos: Optional[Tensor] = None, queries: Optional[Tensor] = None
    ) -> I2COutput:
        """
        Args:
            z_e: B×HW×D encoded image
            memory_pos: HW×D positional encoding added to the cross-attention keys
            queries: D×N override of E_C (test hook)
        """
        E_C = self.char_queries if queries is None else queries
        tgt = E_C.transpose(0, 1).unsqueeze(0).expand(z_e.shape[0], -1, -1)
        e_pc, cross = self.decoder(tgt, z_e, memory_pos)
        return I2COutput(
            e_pc=e_pc,
            char_logits=self.char_head(e_pc),
            pos_logits=self.pos_head(e_pc),
            cross_attention=cross,
        )


# ==================== DECODING ====================

def candidates_from_logits(char_logits: Tensor, pos_logits: Tensor) -> List[CharCandidate]:
    """N×37 and N×(N+1) logits of one image -> N candidates."""
    char_probs = torch.softmax(char_logits.detach().double(), dim=-1).cpu().numpy()
    pos_probs = torch.softmax(pos_logits.detach().double(), dim=-1).cpu().numpy()
    return [
        CharCandidate(
            char_class=int(np.argmax(cp)),
            pos_class=int(np.argmax(pp)),
            char_probs=cp,
            pos_probs=pp,
            query_index=q,
        )
        for q, (cp, pp) in enumerate(zip(char_probs, pos_probs))
    ]


def i2c_standalone_decode(candidates: Sequence[CharCandidate], cs: CharSet = DEFAULT_CHARSET) -> str:
    """
    Read a word from I2C candidates alone.

    Drops "not a character" / "not belongs to word" slots, keeps the most
    probable character per position (ties: lowest query index), orders by position.
    """
    best: Dict[int, Tuple[float, int, int]] = {}
    for cand in candidates:
        # last position class is "not belongs to word"
        if cand.char_class == cs.null_char_index or cand.pos_class == len(cand.pos_probs) - 1:
            continue
        key = (-cand.char_prob, cand.query_index)
        current = best.get(cand.pos_class)
        if current is None or key < current[:2]:
            best[cand.pos_class] = (key[0], key[1], cand.char_class)
    return "".join(cs.symbol(best[pos][2]) for pos in sorted(best))
