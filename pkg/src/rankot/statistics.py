"""Rank energy statistics and their kernelized variants.

All statistics are reported in two forms: the raw two-sample energy value
and the value multiplied by ``m * n / (m + n)``, which is the quantity the
test compares against its threshold.
"""

from dataclasses import asdict, dataclass
import math
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import InvalidArgumentError
from .halton import halton_grid
from .ranks import RankSet, joint_rank_map
from .transport import _as_points

KERNELS = ("distance", "gaussian")


@dataclass
class Statistic:
    value: float
    scaled_value: float
    kind: str
    epsilon: float
    kernel: str
    bandwidth: Optional[float]
    m: int
    n: int

    def to_dict(self):
        return asdict(self)


def scale_factor(m, n):
    return m * n / (m + n)


def _kind(mode, kernel):
    base = "RE" if mode == "hard" else "sRE"
    return base if kernel == "distance" else "k" + base


def median_bandwidth(ranks) -> float:
    """Median pairwise Euclidean distance between rank vectors.

    Falls back to 1.0 when every pair coincides.
    """
    r = np.asarray(ranks, dtype=float)
    if r.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(r)))
    return med if med > 0 else 1.0


def check_kernel(kernel, bandwidth):
    if kernel not in KERNELS:
        raise InvalidArgumentError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    if kernel == "gaussian" and bandwidth is not None and not bandwidth > 0:
        raise InvalidArgumentError(f"bandwidth must be > 0, got {bandwidth!r}")


def dissimilarity_matrix(ranks, kernel="distance", bandwidth=None):
    """Pairwise dissimilarities whose energy combination gives the statistic.

    The distance kernel uses ``||r_i - r_j||``. The Gaussian kernel uses
    ``-k(r_i, r_j)`` so the same ``2 * cross - within - within`` combination
    yields ``C + D - 2B``, which is nonnegative and grows with the
    difference between the samples.

    Returns
    -------
    (matrix, bandwidth)
        `bandwidth` is the one actually used (None for the distance kernel).
    """
    check_kernel(kernel, bandwidth)
    r = np.asarray(ranks, dtype=float)
    dist = cdist(r, r)
    if kernel == "distance":
        return dist, None
    h = median_bandwidth(r) if bandwidth is None else float(bandwidth)
    return -np.exp(-(dist ** 2) / (2.0 * h * h)), h


def _block_energy(mat, m, n):
    # fsum is exactly rounded, so the value does not depend on summation
    # order and is bitwise symmetric under swapping the two samples
    sxy = math.fsum(mat[:m, m:].ravel())
    sxx = math.fsum(mat[:m, :m].ravel())
    syy = math.fsum(mat[m:, m:].ravel())
    return 2.0 * sxy / (m * n) - (sxx / (m * m) + syy / (n * n))


def _check_split(ranks: RankSet):
    total = ranks.ranks.shape[0]
    if not 1 <= ranks.split < total:
        raise InvalidArgumentError(
            f"split must satisfy 1 <= split < {total}, got {ranks.split}")
    return ranks.split, total - ranks.split


def energy_statistic(ranks: RankSet) -> Statistic:
    """Energy distance between the two rank samples of a pooled RankSet."""
    return kernel_energy_statistic(ranks, "distance")


def kernel_energy_statistic(ranks: RankSet, kernel="distance", bandwidth=None) -> Statistic:
    """Kernelized energy statistic of a pooled RankSet.

    With ``kernel="gaussian"`` the bandwidth defaults to the median pairwise
    distance among the pooled ranks.
    """
    m, n = _check_split(ranks)
    mat, h = dissimilarity_matrix(ranks.ranks, kernel, bandwidth)
    value = _block_energy(mat, m, n)
    return Statistic(value=value, scaled_value=value * scale_factor(m, n),
                     kind=_kind(ranks.mode, kernel), epsilon=ranks.epsilon,
                     kernel=kernel, bandwidth=h, m=m, n=n)


def split_energies(mat, x_masks) -> np.ndarray:
    """Energy statistics for many relabelings of one pooled sample.

    Parameters
    ----------
    mat : ndarray, shape (N, N)
        Output of :func:`dissimilarity_matrix`.
    x_masks : ndarray of bool, shape (B, N)
        Each row marks the members of the first sample; all rows must have
        the same count ``m``.

    Returns
    -------
    ndarray, shape (B,)
        Raw (unscaled) statistic for each labeling.
    """
    s = np.asarray(x_masks, dtype=float)
    m = s[0].sum()
    n = s.shape[1] - m
    sm = s @ mat
    sxx = (sm * s).sum(axis=1)
    sx_all = sm.sum(axis=1)
    sxy = sx_all - sxx
    syy = mat.sum() - sxx - 2.0 * sxy
    return 2.0 * sxy / (m * n) - (sxx / (m * m) + syy / (n * n))


def rank_energy(X, Y, epsilon=0.0, kernel="distance", bandwidth=None, **solver_opts) -> Statistic:
    """(Soft) rank energy between two samples.

    Pools the samples, ranks them against the first ``m + n`` Halton points
    (exact OT for ``epsilon == 0``, entropic OT otherwise) and evaluates the
    energy statistic on the ranks.
    """
    check_kernel(kernel, bandwidth)
    x = _as_points(X, "X")
    y = _as_points(Y, "Y")
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise InvalidArgumentError("both samples need at least one row")
    grid = halton_grid(x.shape[0] + y.shape[0], x.shape[1])
    ranks = joint_rank_map(x, y, grid, epsilon, **solver_opts)
    return kernel_energy_statistic(ranks, kernel, bandwidth)
