"""Hard and soft multivariate ranks against a Halton reference grid."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .halton import HaltonGrid
from .transport import (DEFAULT_MAX_ITER, DEFAULT_TOL, TransportPlan, _as_points,
                        cost_matrix, sinkhorn, solve_assignment)


@dataclass
class RankSet:
    """Rank vectors of a (possibly pooled) sample.

    Rows ``[:split]`` are the first sample's ranks and rows ``[split:]`` the
    second's. For a single-sample rank map `split` equals the row count.
    """

    ranks: np.ndarray
    mode: str
    epsilon: float
    split: int
    plan: Optional[TransportPlan] = None
    sigma: Optional[np.ndarray] = None

    @property
    def x_ranks(self) -> np.ndarray:
        return self.ranks[: self.split]

    @property
    def y_ranks(self) -> np.ndarray:
        return self.ranks[self.split:]


def _checked(points, grid):
    x = _as_points(points, "points")
    h = grid.points if isinstance(grid, HaltonGrid) else _as_points(grid, "grid")
    if x.shape != h.shape:
        raise InvalidArgumentError(
            f"points {x.shape} and grid {h.shape} must have equal shapes")
    return x, h


def hard_rank_map(points, grid) -> RankSet:
    """Rank of point ``i`` is the grid row it is matched to by exact OT."""
    x, h = _checked(points, grid)
    sigma = solve_assignment(cost_matrix(x, h))
    return RankSet(ranks=h[sigma].copy(), mode="hard", epsilon=0.0,
                   split=x.shape[0], sigma=sigma)


def soft_rank_map(points, grid, epsilon, tol=DEFAULT_TOL,
                  max_iter=DEFAULT_MAX_ITER) -> RankSet:
    """Barycentric projection of the entropic plan onto the grid.

    Each rank is ``sum_j P[i, j] h_j / sum_j P[i, j]``, normalized by the
    realized row sums of the numerical plan.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be > 0, got {epsilon!r}")
    x, h = _checked(points, grid)
    plan = sinkhorn(cost_matrix(x, h), epsilon, tol=tol, max_iter=max_iter)
    ranks = soft_ranks_from_plan(plan.weights, h)
    return RankSet(ranks=ranks, mode="soft", epsilon=float(epsilon),
                   split=x.shape[0], plan=plan)


def soft_ranks_from_plan(weights, grid_points) -> np.ndarray:
    """Row-normalized plan times grid points."""
    return (weights @ grid_points) / weights.sum(axis=1, keepdims=True)


def joint_rank_map(X, Y, grid, epsilon=0.0, **solver_opts) -> RankSet:
    """Ranks of the pooled sample ``[X; Y]`` against a grid of ``m + n`` points.

    ``epsilon == 0`` uses the exact assignment; ``epsilon > 0`` soft ranks.
    """
    x = _as_points(X, "X")
    y = _as_points(Y, "Y")
    if x.shape[1] != y.shape[1]:
        raise InvalidArgumentError(
            f"X and Y must have the same dimension, got {x.shape[1]} and {y.shape[1]}")
    if epsilon < 0:
        raise InvalidArgumentError(f"epsilon must be >= 0, got {epsilon!r}")
    pooled = np.vstack([x, y])
    if epsilon == 0:
        rs = hard_rank_map(pooled, grid)
    else:
        rs = soft_rank_map(pooled, grid, epsilon, **solver_opts)
    rs.split = x.shape[0]
    return rs
