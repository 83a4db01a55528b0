from typing import Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor

from core.charset import DEFAULT_CHARSET, LabelSet
from core.exceptions import ShapeMismatch


def class_weights(num_classes: int, null_index: int, null_weight: float, like: Tensor) -> Tensor:
    weights = torch.ones(num_classes, dtype=like.dtype, device=like.device)
    weights[null_index] = null_weight
    return weights


def detection_loss(
    char_logits: Tensor,
    pos_logits: Tensor,
    labels: LabelSet,
    perm: Sequence[int],
    null_weight: float = 0.1,
) -> Tuple[Tensor, Tensor]:
    """
    Weighted-mean cross-entropy over matched (ground truth i, prediction perm[i]) pairs.

    Pairs whose target is "not a character" (resp. "not belongs to word")
    weigh ``null_weight``; all others weigh 1.

    Returns:
        (det_char, det_pos)
    """
    n = len(labels)
    if char_logits.shape[0] != n or pos_logits.shape[0] != n or len(perm) != n:
        raise ShapeMismatch(f"{char_logits.shape[0]} predictions, {len(perm)} matches, {n} label slots")
    index = torch.as_tensor(list(perm), dtype=torch.long, device=char_logits.device)
    char_targets = torch.as_tensor(labels.char_classes, dtype=torch.long, device=char_logits.device)
    pos_targets = torch.as_tensor(labels.pos_classes, dtype=torch.long, device=char_logits.device)

    num_pos = pos_logits.shape[-1]
    det_char = F.cross_entropy(
        char_logits[index],
        char_targets,
        weight=class_weights(char_logits.shape[-1], DEFAULT_CHARSET.null_char_index, null_weight, char_logits),
    )
    det_pos = F.cross_entropy(
        pos_logits[index],
        pos_targets,
        weight=class_weights(num_pos, num_pos - 1, null_weight, pos_logits),
    )
    return det_char, det_pos
