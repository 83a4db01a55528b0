"""Analytic vs central finite-difference gradient comparison (double precision)."""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import torch
from torch import Tensor

from core.exceptions import NonFinite
from core.logger import get_logger

logger = get_logger()


@dataclass
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(
    op: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    wrt: Optional[Sequence[int]] = None,
    floor: float = 1e-3,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare autograd gradients of ``op(*inputs)`` with central differences.

    The output is reduced to a scalar through a fixed random projection so every
    output element contributes. Relative error is |a - n| / max(|a|, |n|, floor).

    Args:
        op: differentiable function of ``inputs``
        inputs: evaluation point; cast to float64 copies
        wrt: indices of inputs to differentiate (default: all)

    Raises:
        NonFinite: the forward pass produced NaN/Inf.
    """
    point = [x.detach().to(torch.float64).clone() for x in inputs]
    targets = list(range(len(point))) if wrt is None else list(wrt)

    out = op(*point)
    if not torch.isfinite(out).all():
        raise NonFinite("Forward pass produced NaN/Inf")
    generator = torch.Generator().manual_seed(seed)
    projection = torch.randn(out.shape, generator=generator, dtype=torch.float64)

    def scalar(*args: Tensor) -> Tensor:
        return (op(*args) * projection).sum()

    for i in targets:
        point[i].requires_grad_(True)
    analytic = torch.autograd.grad(scalar(*point), [point[i] for i in targets], allow_unused=True)
    for i in targets:
        point[i].requires_grad_(False)

    max_rel, max_abs, checked = 0.0, 0.0, 0
    with torch.no_grad():
        for i, grad in zip(targets, analytic):
            grad = torch.zeros_like(point[i]) if grad is None else grad
            flat = point[i].view(-1)
            for j in range(flat.numel()):
                original = flat[j].item()
                flat[j] = original + step
                f_plus = scalar(*point).item()
                flat[j] = original - step
                f_minus = scalar(*point).item()
                flat[j] = original
                numeric = (f_plus - f_minus) / (2 * step)
                a = grad.view(-1)[j].item()
                abs_err = abs(a - numeric)
                rel_err = abs_err / max(abs(a), abs(numeric), floor)
                max_abs = max(max_abs, abs_err)
                max_rel = max(max_rel, rel_err)
                checked += 1

    logger.debug(f"🧮 grad_check: {checked} coords, max rel {max_rel:.2e}, max abs {max_abs:.2e}")
    return GradCheckReport(max_rel_error=max_rel, max_abs_error=max_abs, checked=checked, tolerance=tolerance)
