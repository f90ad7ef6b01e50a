"""Threshold calibration and two-sample tests for rank energy statistics."""

from dataclasses import asdict, dataclass, field
import math
import warnings

import numpy as np

from ._parallel import parallel_map
from .errors import InvalidArgumentError
from .halton import halton_grid
from .ranks import RankSet, joint_rank_map
from .statistics import (Statistic, check_kernel, dissimilarity_matrix, kernel_energy_statistic,
                         rank_energy, scale_factor, split_energies)
from .synthgen import SETTINGS, derive_seed, sample_law
from .transport import _as_points

NULL_METHODS = ("permutation", "reference")


@dataclass
class TestResult:
    statistic: Statistic
    threshold: float
    p_value: float
    reject: bool
    alpha: float
    permutations: int
    seed: int
    null_method: str
    approximate_null: bool
    null_values: np.ndarray = field(default=None, repr=False)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        out = asdict(self)
        out.pop("null_values")
        out["statistic"] = self.statistic.to_dict()
        return out


def threshold_from_null(null_values, alpha) -> float:
    """Smallest null value with at least ``1 - alpha`` of the draws at or below it."""
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must be in (0, 1), got {alpha!r}")
    vals = np.sort(np.asarray(null_values, dtype=float))
    if vals.size == 0:
        raise InvalidArgumentError("null sample is empty")
    k = math.ceil((1.0 - alpha) * vals.size - 1e-9)
    return float(vals[min(max(k, 1), vals.size) - 1])


def p_value_from_null(observed, null_values) -> float:
    null_values = np.asarray(null_values, dtype=float)
    return float((1 + np.count_nonzero(null_values >= observed)) / (null_values.size + 1))


def _reference_sample(reference, size, d, seed):
    if reference == "gaussian":
        return np.random.default_rng(seed).standard_normal((size, d))
    if reference in SETTINGS:
        return sample_law(reference, size, d, seed=seed)
    raise InvalidArgumentError(
        f"reference must be 'gaussian' or a setting id v1..v12, got {reference!r}")


def _check_counts(m, n, d, B):
    for name, value in (("m", m), ("n", n), ("d", d), ("B", B)):
        if int(value) != value or value < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")


def null_samples(m, n, d, epsilon=0.0, kernel="distance", B=500, seed=0,
                 reference="gaussian", bandwidth=None, regenerate=True) -> np.ndarray:
    """Scaled statistics simulated under the null hypothesis.

    Each replicate draws a pooled sample of ``m + n`` rows from `reference`
    (standard Gaussian, or the X law of a benchmark setting), assigns the
    sample labels by a uniformly random permutation and evaluates the
    scaled statistic. For ``epsilon == 0`` with the distance kernel the
    statistic is distribution free, so the result is exact for any data
    law; for ``epsilon > 0`` it approximates the null of other laws.

    With ``regenerate=False`` a single pooled sample is ranked once and only
    the labels are redrawn per replicate, which is much cheaper and exact
    whenever the ranks are the grid itself (``epsilon == 0``).

    Replicate ``b`` uses seed ``derive_seed(seed, b)``.
    """
    _check_counts(m, n, d, B)
    check_kernel(kernel, bandwidth)
    if epsilon < 0:
        raise InvalidArgumentError(f"epsilon must be >= 0, got {epsilon!r}")
    total = m + n
    if not regenerate:
        pooled = _reference_sample(reference, total, d, derive_seed(seed, 0, 1))
        ranks = joint_rank_map(pooled[:m], pooled[m:], halton_grid(total, d), epsilon)
        return permutation_null(ranks, B, np.random.default_rng(derive_seed(seed, 0)),
                                kernel=kernel, bandwidth=bandwidth)

    def replicate(b):
        rng = np.random.default_rng(derive_seed(seed, b))
        pooled = _reference_sample(reference, total, d, derive_seed(seed, b, 1))
        perm = rng.permutation(total)
        stat = rank_energy(pooled[perm[:m]], pooled[perm[m:]], epsilon, kernel, bandwidth)
        return stat.scaled_value

    return np.asarray(parallel_map(replicate, range(int(B))), dtype=float)


def permutation_null(ranks: RankSet, B, rng, kernel="distance", bandwidth=None) -> np.ndarray:
    """Scaled statistics of `B` random relabelings of a pooled RankSet.

    The pooled ranks do not depend on the labels, so they are computed once
    and only the split into the two samples is redrawn.
    """
    total = ranks.ranks.shape[0]
    m = ranks.split
    n = total - m
    mat, _ = dissimilarity_matrix(ranks.ranks, kernel, bandwidth)
    masks = np.zeros((int(B), total), dtype=bool)
    for b in range(int(B)):
        masks[b, rng.permutation(total)[:m]] = True
    out = []
    for start in range(0, int(B), 256):
        out.append(split_energies(mat, masks[start:start + 256]))
    return np.concatenate(out) * scale_factor(m, n)


def two_sample_test(X, Y, alpha=0.05, epsilon=0.0, kernel="distance", B=500, seed=0,
                    bandwidth=None, null="permutation") -> TestResult:
    """Rank energy two-sample test.

    Parameters
    ----------
    X, Y : array-like, shapes (m, d) and (n, d)
    alpha : float
        Level in (0, 1).
    epsilon : float
        0 for the exact rank energy, > 0 for the soft version.
    kernel : {"distance", "gaussian"}
    B : int
        Number of null draws.
    seed : int
    bandwidth : float, optional
        Gaussian kernel bandwidth; median heuristic on the pooled ranks by
        default.
    null : {"permutation", "reference"}
        "permutation" relabels the observed pooled ranks (exact level for
        every epsilon). "reference" simulates fresh Gaussian pooled samples
        via :func:`null_samples` (exact only for epsilon = 0).

    Returns
    -------
    TestResult
        ``reject`` is ``scaled_value > threshold``; the p-value is
        ``(1 + #{null >= observed}) / (B + 1)``.
    """
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must be in (0, 1), got {alpha!r}")
    if null not in NULL_METHODS:
        raise InvalidArgumentError(f"null must be one of {NULL_METHODS}, got {null!r}")
    if int(B) != B or B < 1:
        raise InvalidArgumentError(f"B must be a positive integer, got {B!r}")
    check_kernel(kernel, bandwidth)
    if B < 1.0 / alpha - 1:
        warnings.warn(f"B={B} null draws cannot resolve p-values at alpha={alpha}",
                      RuntimeWarning, stacklevel=2)
    x = _as_points(X, "X")
    y = _as_points(Y, "Y")
    m, n, d = x.shape[0], y.shape[0], x.shape[1]
    grid = halton_grid(m + n, d)
    ranks = joint_rank_map(x, y, grid, epsilon)
    stat = kernel_energy_statistic(ranks, kernel, bandwidth)
    if null == "permutation":
        rng = np.random.default_rng(derive_seed(seed, 0))
        null_vals = permutation_null(ranks, B, rng, kernel, stat.bandwidth)
        approximate = False
    else:
        null_vals = null_samples(m, n, d, epsilon, kernel, B, seed, "gaussian", bandwidth)
        approximate = epsilon > 0
    threshold = threshold_from_null(null_vals, alpha)
    return TestResult(statistic=stat, threshold=threshold,
                      p_value=p_value_from_null(stat.scaled_value, null_vals),
                      reject=bool(stat.scaled_value > threshold), alpha=float(alpha),
                      permutations=int(B), seed=int(seed), null_method=null,
                      approximate_null=bool(approximate), null_values=null_vals)
