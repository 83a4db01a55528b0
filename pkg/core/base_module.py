from contextlib import contextmanager
from typing import Iterator

import torch
from torch import Tensor, nn

from core.exceptions import NonFinite
from core.logger import get_logger

logger = get_logger()


class BaseModule(nn.Module):
    """Shared behaviour of every network component."""

    # ==================== INITIALIZATION ====================

    def reset_xavier(self) -> None:
        """Xavier-uniform for every matrix-shaped parameter in this subtree."""
        for p in self.parameters():
            if p.dim() > 1:
                nn.init.xavier_uniform_(p)

    # ==================== INFERENCE ====================

    @contextmanager
    def inference(self) -> Iterator["BaseModule"]:
        """
        Eval mode + no_grad for the duration of the block; restores the mode after.
        Usage: with model.inference(): out = model(images)
        """
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                yield self
        finally:
            self.train(was_training)

    # ==================== STATE CHECKS ====================

    @staticmethod
    def check_finite(tensor: Tensor, description: str = "tensor") -> Tensor:
        if not torch.isfinite(tensor).all():
            logger.error(f"❌ Non-finite values in '{description}'")
            raise NonFinite(f"{description} contains NaN/Inf")
        return tensor

    @property
    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
