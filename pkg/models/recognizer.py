"""Full recognizer: ImageEncoder -> I2C -> C2W (or the one-stage I2W baseline)."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from config.settings import Architecture, ModelConfig
from core.base_module import BaseModule
from core.charset import DEFAULT_CHARSET
from core.exceptions import UsageError
from models.c2w import C2W, C2WOutput
from models.i2c import I2C, CharCandidate, ImageEncoder, candidates_from_logits, i2c_standalone_decode


class DecodeMode(str, Enum):
    I2C2W = "i2c2w"
    I2C_ONLY = "i2c_only"


@dataclass
class RecognizerOutput:
    slot_logits: Tensor                       # B×N×37
    char_logits: Optional[Tensor] = None      # B×N×37      (None for I2W)
    pos_logits: Optional[Tensor] = None       # B×N×(N+1)   (None for I2W)
    e_pc: Optional[Tensor] = None             # B×N×D
    cross_attention: Optional[Tensor] = None  # B×N×HW


@dataclass
class Recognition:
    word: str
    i2c_word: Optional[str] = None
    candidates: List[CharCandidate] = field(default_factory=list)


class Recognizer(BaseModule):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.image_encoder = ImageEncoder(cfg)
        self.i2c = I2C(cfg) if cfg.arch == Architecture.I2C2W else None
        self.c2w = C2W(cfg)

    @property
    def has_i2c(self) -> bool:
        return self.i2c is not None

    def forward(self, images: Tensor) -> RecognizerOutput:
        z_e = self.image_encoder(images)
        pos = self.image_encoder.pos_encoding.to(z_e.dtype)
        if self.i2c is None:
            return RecognizerOutput(slot_logits=self.c2w(z_e, pos))
        i2c_out = self.i2c(z_e, pos)
        return RecognizerOutput(
            slot_logits=self.c2w(i2c_out.e_pc),
            char_logits=i2c_out.char_logits,
            pos_logits=i2c_out.pos_logits,
            e_pc=i2c_out.e_pc,
            cross_attention=i2c_out.cross_attention,
        )

    # ==================== PARAMETER GROUPS ====================

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        """Backbone conv stack vs everything transformer-side (projection included)."""
        backbone_ids = {id(p) for p in self.image_encoder.backbone.parameters()}
        return {
            "backbone": [p for p in self.parameters() if id(p) in backbone_ids],
            "transformer": [p for p in self.parameters() if id(p) not in backbone_ids],
        }

    # ==================== INFERENCE ====================

    def recognize(self, images: Tensor, mode: DecodeMode = DecodeMode.I2C2W) -> List[Recognition]:
        mode = DecodeMode(mode)
        if mode == DecodeMode.I2C_ONLY and not self.has_i2c:
            raise UsageError("i2c_only decoding needs the i2c2w architecture")
        with self.inference():
            out = self(images)
        results = []
        for b in range(images.shape[0]):
            word = C2WOutput.from_logits(out.slot_logits[b], DEFAULT_CHARSET).decoded_word
            if not self.has_i2c:
                results.append(Recognition(word=word))
                continue
            candidates = candidates_from_logits(out.char_logits[b], out.pos_logits[b])
            i2c_word = i2c_standalone_decode(candidates, DEFAULT_CHARSET)
            results.append(Recognition(
                word=i2c_word if mode == DecodeMode.I2C_ONLY else word,
                i2c_word=i2c_word,
                candidates=candidates,
            ))
        return results

    def attention_maps(self, images: Tensor, upsample: bool = False) -> Tensor:
        """
        Per-query cross-attention of the last I2C decoder layer, head-averaged.

        Returns B×N×H×W maps (each sums to 1), or B×N×H0×W0 when ``upsample``
        (bilinear, renormalised).
        """
        if not self.has_i2c:
            raise UsageError("attention maps come from the I2C decoder")
        with self.inference():
            weights = self(images).cross_attention
        H, W = self.cfg.feature_size
        maps = weights.reshape(weights.shape[0], weights.shape[1], H, W)
        if upsample:
            maps = F.interpolate(maps, size=(self.cfg.canvas_height, self.cfg.canvas_width), mode="bilinear",
                                 align_corners=False)
            maps = maps / maps.sum(dim=(-2, -1), keepdim=True)
        return maps


def build_model(cfg: ModelConfig, seed: Optional[int] = None) -> Recognizer:
    if seed is not None:
        torch.manual_seed(seed)
    return Recognizer(cfg)
