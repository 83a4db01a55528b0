"""
Character-to-word mapping: learned word queries E_W cross-attend to E_PC,
a 37-way head scores every slot, greedy CTC reads the word.
"""
from dataclasses import dataclass
from typing import List, Optional

import torch
from torch import Tensor, nn

from config.settings import ModelConfig
from core.base_module import BaseModule
from core.charset import DEFAULT_CHARSET, CharSet, ctc_collapse, indices_to_word
from core.exceptions import ShapeMismatch
from models.layers import TransformerDecoder


@dataclass
class C2WOutput:
    slot_logits: Tensor     # N×37
    decoded_word: str

    @classmethod
    def from_logits(cls, slot_logits: Tensor, cs: CharSet = DEFAULT_CHARSET) -> "C2WOutput":
        return cls(slot_logits=slot_logits, decoded_word=ctc_greedy_decode(slot_logits, cs))


class C2W(BaseModule):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        N, D = cfg.n_queries, cfg.d_model
        self.word_queries = nn.Parameter(torch.empty(D, N))  # E_W
        self.decoder = TransformerDecoder(cfg.c2w_decoder_layers, D, cfg.num_heads, cfg.ffn_dim, cfg.dropout)
        self.char_head = nn.Linear(D, DEFAULT_CHARSET.size)
        self.reset_xavier()

    def forward(self, memory: Tensor, memory_pos: Optional[Tensor] = None) -> Tensor:
        """
        Args:
            memory: B×N×D positional character embeddings (no positional encoding
                is added); the I2W baseline passes B×HW×D image tokens instead.

        Returns:
            slot_logits: B×N×37
        """
        if memory.dim() != 3 or memory.shape[-1] != self.cfg.d_model:
            raise ShapeMismatch(f"Expected B×L×{self.cfg.d_model} memory, got {tuple(memory.shape)}")
        tgt = self.word_queries.transpose(0, 1).unsqueeze(0).expand(memory.shape[0], -1, -1)
        decoded, _ = self.decoder(tgt, memory, memory_pos)
        return self.char_head(decoded)


def ctc_greedy_decode(slot_logits: Tensor, cs: CharSet = DEFAULT_CHARSET) -> str:
    """Per-slot argmax, collapse with blank = "not a character", map to symbols."""
    if slot_logits.dim() != 2 or slot_logits.shape[-1] != cs.size:
        raise ShapeMismatch(f"Expected N×{cs.size} logits, got {tuple(slot_logits.shape)}")
    path = slot_logits.argmax(dim=-1).tolist()
    return indices_to_word(ctc_collapse(path, cs.blank), cs)


def ctc_greedy_decode_batch(slot_logits: Tensor, cs: CharSet = DEFAULT_CHARSET) -> List[str]:
    return [ctc_greedy_decode(logits, cs) for logits in slot_logits]
