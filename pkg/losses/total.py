"""L = L_det(char) + L_det(pos) + L_recog, averaged over the batch."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import torch
from torch import Tensor

from config.settings import MatchCost
from core.charset import DEFAULT_CHARSET, LabelSet, char_index
from core.exceptions import EmptyBatch, NonFinite, ShapeMismatch
from losses.ctc import batch_ctc_loss
from losses.detection import detection_loss
from losses.matching import MatchAssignment, hungarian_assign, match_cost_matrix


@dataclass
class LossBreakdown:
    det_char: Tensor
    det_pos: Tensor
    recog: Tensor
    total: Tensor

    def as_row(self) -> Dict[str, float]:
        return {
            "det_char": float(self.det_char),
            "det_pos": float(self.det_pos),
            "recog": float(self.recog),
            "total": float(self.total),
        }

    def __str__(self) -> str:
        row = self.as_row()
        return " ".join(f"{k}={v:.4f}" for k, v in row.items())


def match_sample(
    char_logits: Tensor,
    pos_logits: Tensor,
    labels: LabelSet,
    beta: float = 1.0,
    mode: MatchCost = MatchCost.PROBABILITY,
) -> MatchAssignment:
    """Assignment on detached probabilities (no gradient through the matching)."""
    with torch.no_grad():
        char_probs = torch.softmax(char_logits.detach().double(), dim=-1).cpu().numpy()
        pos_probs = torch.softmax(pos_logits.detach().double(), dim=-1).cpu().numpy()
    return hungarian_assign(match_cost_matrix(char_probs, pos_probs, labels, beta, mode))


def total_loss(
    slot_logits: Tensor,
    labels: Sequence[LabelSet],
    char_logits: Optional[Tensor] = None,
    pos_logits: Optional[Tensor] = None,
    beta: float = 1.0,
    null_weight: float = 0.1,
    mode: MatchCost = MatchCost.PROBABILITY,
) -> LossBreakdown:
    """
    Batch-mean of det_char + det_pos + recog.

    Args:
        slot_logits: B×N×37 C2W logits
        labels: B label sets (CTC target = ``label.word``)
        char_logits / pos_logits: B×N×37 / B×N×(N+1) I2C logits; omit both
            for the I2W baseline (detection terms are then 0)

    Raises:
        EmptyBatch: B == 0.
        NonFinite: any component is NaN/Inf.
    """
    B = slot_logits.shape[0] if slot_logits.dim() == 3 else 0
    if B == 0 or not labels:
        raise EmptyBatch("Loss needs at least one sample")
    if len(labels) != B:
        raise ShapeMismatch(f"{len(labels)} label sets for {B} samples")

    zero = slot_logits.new_zeros(())
    det_chars: List[Tensor] = []
    det_poss: List[Tensor] = []
    if char_logits is not None and pos_logits is not None:
        for b, sample_labels in enumerate(labels):
            match = match_sample(char_logits[b], pos_logits[b], sample_labels, beta, mode)
            det_char, det_pos = detection_loss(char_logits[b], pos_logits[b], sample_labels, match.perm, null_weight)
            det_chars.append(det_char)
            det_poss.append(det_pos)
        det_char_mean = torch.stack(det_chars).mean()
        det_pos_mean = torch.stack(det_poss).mean()
    else:
        det_char_mean = det_pos_mean = zero

    targets = [[char_index(c) for c in sample_labels.word] for sample_labels in labels]
    recog = batch_ctc_loss(slot_logits, targets, DEFAULT_CHARSET.blank).mean()

    breakdown = LossBreakdown(
        det_char=det_char_mean,
        det_pos=det_pos_mean,
        recog=recog,
        total=det_char_mean + det_pos_mean + recog,
    )
    if not torch.isfinite(breakdown.total):
        raise NonFinite(f"Non-finite loss: {breakdown}")
    return breakdown
