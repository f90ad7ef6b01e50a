"""Sliding-window change-point detection with (soft) rank energy.

At time ``t`` the ``window`` samples before ``t`` are compared with the
``window`` samples after it. The resulting trace is smoothed by a moving
average and change points are read off as separated local maxima above a
threshold.

Time indices follow the series rows counted from 1: ``trace[t - 1]`` is the
statistic at time ``t`` and defined for ``window + 1 <= t <= T - window``.
"""

from dataclasses import asdict, dataclass, field
from functools import lru_cache
import logging

import numpy as np

from ._parallel import parallel_map
from .errors import InvalidArgumentError
from .inference import null_samples, threshold_from_null
from .statistics import rank_energy

logger = logging.getLogger(__name__)

THRESHOLD_MODES = ("null-quantile", "relative")


@dataclass
class CpdConfig:
    window: int = 250
    epsilon: float = 0.01
    stride: int = 5
    filter_half_width: int = None
    threshold_mode: str = "null-quantile"
    alpha: float = 0.01
    relative_level: float = 0.5
    min_separation: int = None
    standardize: bool = True
    null_permutations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.filter_half_width is None:
            self.filter_half_width = int(round(self.window / 5))
        if self.min_separation is None:
            self.min_separation = int(self.window)

    def validate(self):
        _check_window(self.window, self.stride, self.epsilon)
        if int(self.filter_half_width) != self.filter_half_width or self.filter_half_width < 0:
            raise InvalidArgumentError(
                f"filter_half_width must be a nonnegative integer, got {self.filter_half_width!r}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise InvalidArgumentError(
                f"threshold_mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError(f"alpha must be in (0, 1), got {self.alpha!r}")
        if not 0 < self.relative_level < 1:
            raise InvalidArgumentError(
                f"relative_level must be in (0, 1), got {self.relative_level!r}")
        if int(self.min_separation) != self.min_separation or self.min_separation < 1:
            raise InvalidArgumentError(
                f"min_separation must be a positive integer, got {self.min_separation!r}")
        if int(self.null_permutations) != self.null_permutations or self.null_permutations < 1:
            raise InvalidArgumentError("null_permutations must be a positive integer")


@dataclass
class CpdResult:
    raw_trace: np.ndarray
    filtered_trace: np.ndarray
    change_points: list
    threshold: float
    config: CpdConfig
    evaluated: np.ndarray = field(repr=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.raw_trace.size + 1)

    def to_dict(self):
        return {"change_points": [int(t) for t in self.change_points],
                "threshold": float(self.threshold), "config": asdict(self.config)}


def _check_window(window, stride, epsilon):
    if int(window) != window or window < 2:
        raise InvalidArgumentError(f"window must be an integer >= 2, got {window!r}")
    if int(stride) != stride or stride < 1:
        raise InvalidArgumentError(f"stride must be a positive integer, got {stride!r}")
    if not epsilon >= 0:
        raise InvalidArgumentError(f"epsilon must be >= 0, got {epsilon!r}")


def _as_series(series):
    z = np.asarray(series, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise InvalidArgumentError(f"series must be a T x d array, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("series contains non-finite values")
    return z


def standardize(series) -> np.ndarray:
    """Center each column at its median and divide by its MAD (1 if the MAD is 0)."""
    z = _as_series(series)
    med = np.median(z, axis=0)
    mad = np.median(np.abs(z - med), axis=0)
    mad[mad == 0] = 1.0
    return (z - med) / mad


def evaluation_times(T, window, stride) -> np.ndarray:
    """Times (1-based) at which the statistic is computed.

    Every `stride`-th time from ``window + 1`` on, plus the last supported
    time so the interpolated trace covers the full support.
    """
    first, last = window + 1, T - window
    ts = np.arange(first, last + 1, stride)
    if ts[-1] != last:
        ts = np.append(ts, last)
    return ts


def sliding_statistic(series, window, epsilon=0.01, stride=1, kernel="distance"):
    """Scaled rank energy between the windows before and after each time.

    At time ``t`` (1-based) the samples are ``X = Z[t-window .. t-1]`` and
    ``Y = Z[t+1 .. t+window]``. With ``stride > 1`` the statistic is
    computed at :func:`evaluation_times` and linearly interpolated between
    them; each evaluation depends only on its own windows, so evaluated
    values do not depend on the stride.

    Returns
    -------
    ndarray, shape (T,)
        ``NaN`` outside ``window + 1 <= t <= T - window``.
    """
    _check_window(window, stride, epsilon)
    z = _as_series(series)
    T = z.shape[0]
    if T < 2 * window + 1:
        raise InvalidArgumentError(
            f"series of length {T} is too short for window {window} (needs {2 * window + 1})")
    ts = evaluation_times(T, window, stride)

    def at(t):
        i = t - 1
        return rank_energy(z[i - window:i], z[i + 1:i + 1 + window], epsilon, kernel).scaled_value

    values = np.asarray(parallel_map(at, ts), dtype=float)
    trace = np.full(T, np.nan)
    support = np.arange(window + 1, T - window + 1)
    trace[support - 1] = np.interp(support, ts, values)
    return trace


def lowpass(trace, half_width) -> np.ndarray:
    """Moving average over ``2 * half_width + 1`` positions.

    Near the ends the average is taken over the positions that exist. NaN
    entries (outside the trace support) are left untouched and excluded.
    """
    if int(half_width) != half_width or half_width < 0:
        raise InvalidArgumentError(f"half_width must be a nonnegative integer, got {half_width!r}")
    x = np.asarray(trace, dtype=float)
    out = np.full(x.shape, np.nan)
    ok = np.flatnonzero(np.isfinite(x))
    if ok.size == 0:
        return out
    lo, hi = ok[0], ok[-1] + 1
    seg = x[lo:hi]
    if half_width == 0:
        out[lo:hi] = seg
        return out
    csum = np.concatenate([[0.0], np.cumsum(seg)])
    idx = np.arange(seg.size)
    left = np.maximum(idx - half_width, 0)
    right = np.minimum(idx + half_width + 1, seg.size)
    out[lo:hi] = (csum[right] - csum[left]) / (right - left)
    return out


def find_peaks(trace, threshold, min_separation) -> list:
    """Local maxima above `threshold`, at least `min_separation` apart.

    Conflicts are resolved in favour of the larger peak. Returns 1-based
    times in increasing order.
    """
    x = np.asarray(trace, dtype=float)
    padded = np.concatenate([[-np.inf], np.where(np.isfinite(x), x, -np.inf), [-np.inf]])
    mid = padded[1:-1]
    is_peak = (mid >= padded[:-2]) & (mid > padded[2:]) & (mid > threshold)
    cand = np.flatnonzero(is_peak)
    chosen = []
    for i in cand[np.argsort(-mid[cand], kind="stable")]:
        if all(abs(i - j) >= min_separation for j in chosen):
            chosen.append(i)
    return sorted(int(i) + 1 for i in chosen)


@lru_cache(maxsize=32)
def null_threshold(window, d, epsilon, alpha, B=200, seed=0) -> float:
    """(1 - alpha) null quantile of the window statistic (Gaussian reference, cached)."""
    null = null_samples(window, window, d, epsilon, "distance", B, seed, regenerate=False)
    return threshold_from_null(null, alpha)


def detect_change_points(series, config: CpdConfig = None, **overrides) -> CpdResult:
    """Sliding statistic, moving-average smoothing and thresholded peak picking.

    Parameters
    ----------
    series : array-like, shape (T, d)
    config : CpdConfig, optional
        Defaults are used for any field not given; keyword overrides are
        applied on top.

    Notes
    -----
    In "null-quantile" mode the threshold is the ``1 - alpha`` quantile of
    the statistic for two windows drawn from one Gaussian law, simulated
    by relabeling one pooled sample. In "relative" mode it is
    ``relative_level`` times the maximum of the filtered trace.
    """
    if config is None:
        config = CpdConfig(**overrides)
    elif overrides:
        config = CpdConfig(**{**asdict(config), **overrides})
    config.validate()
    z = _as_series(series)
    if config.standardize:
        z = standardize(z)
    raw = sliding_statistic(z, config.window, config.epsilon, config.stride)
    filtered = lowpass(raw, config.filter_half_width)
    if config.threshold_mode == "null-quantile":
        thr = null_threshold(int(config.window), z.shape[1], float(config.epsilon),
                             float(config.alpha), int(config.null_permutations), int(config.seed))
    else:
        thr = config.relative_level * float(np.nanmax(filtered))
    cps = find_peaks(filtered, thr, config.min_separation)
    logger.debug("detect_change_points: threshold %.4g, %d detections", thr, len(cps))
    return CpdResult(raw_trace=raw, filtered_trace=filtered, change_points=cps, threshold=thr,
                     config=config,
                     evaluated=evaluation_times(z.shape[0], config.window, config.stride))
