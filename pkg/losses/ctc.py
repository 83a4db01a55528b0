"""
CTC negative log-likelihood over the C2W slots.

-log Σ_{π ∈ B⁻¹(l)} Π_t y^t_{π_t}, evaluated by torch's log-space forward
recursion over the blank-extended target.
"""
from typing import List, Sequence, Union

import torch
import torch.nn.functional as F
from torch import Tensor

from core.charset import DEFAULT_CHARSET, CharSet, char_index, min_ctc_slots, normalize_word
from core.exceptions import InfeasibleTarget, ShapeMismatch


def encode_target(target: Union[str, Sequence[int]], cs: CharSet = DEFAULT_CHARSET) -> List[int]:
    if isinstance(target, str):
        return [char_index(c, cs) for c in normalize_word(target)]
    return [int(t) for t in target]


def _check_feasible(target: Sequence[int], T: int, blank: int) -> None:
    if blank in target:
        raise InfeasibleTarget("Target contains the blank symbol")
    needed = min_ctc_slots(target)
    if needed > T:
        raise InfeasibleTarget(f"Target needs {needed} slots, only {T} available")


def ctc_nll(logits: Tensor, target: Sequence[int], blank: int) -> Tensor:
    """
    Args:
        logits: T×C unnormalised scores (softmax is applied per slot)
        target: label indices, blank excluded

    Raises:
        InfeasibleTarget: no length-T path collapses to ``target``.
    """
    if logits.dim() != 2:
        raise ShapeMismatch(f"Expected T×C logits, got {tuple(logits.shape)}")
    T = logits.shape[0]
    _check_feasible(target, T, blank)
    log_probs = F.log_softmax(logits, dim=-1).unsqueeze(1)
    targets = torch.as_tensor([list(target)], dtype=torch.long)
    return F.ctc_loss(
        log_probs,
        targets,
        input_lengths=torch.tensor([T], dtype=torch.long),
        target_lengths=torch.tensor([len(target)], dtype=torch.long),
        blank=blank,
        reduction="sum",
        zero_infinity=False,
    )


def ctc_loss(slot_logits: Tensor, target: Union[str, Sequence[int]], cs: CharSet = DEFAULT_CHARSET) -> Tensor:
    """N×37 slot logits against a transcription; blank = "not a character"."""
    return ctc_nll(slot_logits, encode_target(target, cs), cs.blank)


def batch_ctc_loss(slot_logits: Tensor, targets: Sequence[Sequence[int]], blank: int) -> Tensor:
    """B×T×C logits, B targets -> per-sample NLL (B,)."""
    B, T, _ = slot_logits.shape
    if len(targets) != B:
        raise ShapeMismatch(f"{len(targets)} targets for {B} samples")
    for target in targets:
        _check_feasible(target, T, blank)
    log_probs = F.log_softmax(slot_logits, dim=-1).transpose(0, 1)
    flat = torch.as_tensor([t for target in targets for t in target], dtype=torch.long)
    return F.ctc_loss(
        log_probs,
        flat,
        input_lengths=torch.full((B,), T, dtype=torch.long),
        target_lengths=torch.as_tensor([len(t) for t in targets], dtype=torch.long),
        blank=blank,
        reduction="none",
        zero_infinity=False,
    )
