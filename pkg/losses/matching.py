"""
Bipartite matching between ground-truth slots and predictions.

cost[i][j] = -C_j(c_i) - β·L_j(l_i): ground-truth slot i against prediction j,
with C / L either probabilities or log-probabilities (``MatchCost``).
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from config.settings import MatchCost
from core.charset import LabelSet
from core.exceptions import NonFinite, ShapeMismatch

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class MatchAssignment:
    perm: Tuple[int, ...]   # perm[i] = prediction matched to ground-truth slot i
    total_cost: float


def match_cost_matrix(
    char_probs: np.ndarray,
    pos_probs: np.ndarray,
    labels: LabelSet,
    beta: float = 1.0,
    mode: MatchCost = MatchCost.PROBABILITY,
) -> np.ndarray:
    """
    Args:
        char_probs: N×37 prediction probabilities
        pos_probs: N×(N+1) prediction probabilities

    Returns:
        N×N cost, rows = ground-truth slots, columns = predictions
    """
    char_probs = np.asarray(char_probs, dtype=np.float64)
    pos_probs = np.asarray(pos_probs, dtype=np.float64)
    n = len(labels)
    if char_probs.shape[0] != n or pos_probs.shape[0] != n:
        raise ShapeMismatch(f"{char_probs.shape[0]}/{pos_probs.shape[0]} predictions for {n} label slots")
    chars = np.asarray(labels.char_classes)
    positions = np.asarray(labels.pos_classes)
    if chars.max() >= char_probs.shape[1] or positions.max() >= pos_probs.shape[1]:
        raise ShapeMismatch("Label class outside the probability vectors")

    c_term = char_probs[:, chars].T
    l_term = pos_probs[:, positions].T
    if MatchCost(mode) == MatchCost.LOG_PROBABILITY:
        return -np.log(np.maximum(c_term, _LOG_FLOOR)) - beta * np.log(np.maximum(l_term, _LOG_FLOOR))
    return -c_term - beta * l_term


def _solve(cost: np.ndarray) -> Tuple[np.ndarray, float]:
    if cost.size == 0:
        return np.zeros(0, dtype=int), 0.0
    rows, cols = linear_sum_assignment(cost)
    return cols[np.argsort(rows)], float(cost[rows, cols].sum())


def hungarian_assign(cost: np.ndarray) -> MatchAssignment:
    """
    Minimum-cost perfect matching; among optimal matchings the
    lexicographically smallest ``perm`` is returned.

    Raises:
        NonFinite: NaN/Inf in ``cost``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeMismatch(f"Expected a square cost matrix, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise NonFinite("Cost matrix contains NaN/Inf")
    n = cost.shape[0]
    if n == 0:
        return MatchAssignment(perm=(), total_cost=0.0)

    current, best = _solve(cost)
    tol = 1e-9 * max(1.0, abs(best))

    # Fix rows one by one to the smallest column that still admits an optimum
    perm: List[int] = []
    free = list(range(n))
    fixed_cost = 0.0
    for i in range(n):
        rest = list(range(i + 1, n))
        chosen = int(current[0])
        for j in free:
            if j >= chosen:
                break
            remaining = [c for c in free if c != j]
            sub = cost[np.ix_(rest, remaining)]
            # row-minimum lower bound prunes most candidates without a solve
            bound = fixed_cost + cost[i, j] + (sub.min(axis=1).sum() if sub.size else 0.0)
            if bound > best + tol:
                continue
            sub_cols, sub_cost = _solve(sub)
            if fixed_cost + cost[i, j] + sub_cost <= best + tol:
                chosen = j
                current = np.concatenate([[j], np.asarray(remaining)[sub_cols]])
                break
        perm.append(chosen)
        fixed_cost += cost[i, chosen]
        free.remove(chosen)
        current = current[1:]

    total = float(sum(cost[i, perm[i]] for i in range(n)))
    return MatchAssignment(perm=tuple(perm), total_cost=total)
