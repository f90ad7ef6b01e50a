"""Deterministic Halton point sets used as the rank reference grid."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def first_primes(count: int) -> list[int]:
    """Return the first `count` primes in increasing order."""
    primes: list[int] = []
    candidate = 2
    while len(primes) < count:
        if _is_prime(candidate):
            primes.append(candidate)
        candidate += 1
    return primes


def radical_inverse(index: int, base: int) -> float:
    """Van der Corput radical inverse of `index` in `base`.

    The base-`base` digits of `index` are mirrored about the radix point,
    so ``radical_inverse(3, 2) == 0.75`` (``11`` in binary becomes ``0.11``).
    """
    if int(index) != index or index < 1:
        raise InvalidArgumentError(f"index must be a positive integer, got {index!r}")
    if int(base) != base or not _is_prime(int(base)):
        raise InvalidArgumentError(f"base must be prime, got {base!r}")
    index, base = int(index), int(base)
    value = 0.0
    scale = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        value += digit * scale
        scale /= base
    return value


def _radical_inverse_vec(indices: np.ndarray, base: int) -> np.ndarray:
    # same digit loop as radical_inverse, vectorized over indices
    idx = indices.astype(np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    scale = 1.0 / base
    while np.any(idx > 0):
        idx, digit = np.divmod(idx, base)
        out += digit * scale
        scale /= base
    return out


@dataclass(frozen=True)
class HaltonGrid:
    points: np.ndarray
    bases: tuple
    start_index: int = 1

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def halton_grid(n: int, d: int, start_index: int = 1) -> HaltonGrid:
    """First `n` points of the `d`-dimensional Halton sequence.

    Column ``j`` uses the ``j``-th prime as base and row ``i`` holds the
    radical inverse of ``start_index + i``. Index 0 (the origin) is skipped
    by default so every coordinate is strictly inside (0, 1).
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n!r}")
    if int(d) != d or d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d!r}")
    if int(start_index) != start_index or start_index < 1:
        raise InvalidArgumentError(f"start_index must be >= 1, got {start_index!r}")
    return _cached_grid(int(n), int(d), int(start_index))


@lru_cache(maxsize=64)
def _cached_grid(n, d, start_index):
    bases = first_primes(d)
    indices = np.arange(start_index, start_index + n, dtype=np.int64)
    points = np.column_stack([_radical_inverse_vec(indices, b) for b in bases])
    points.setflags(write=False)
    return HaltonGrid(points=points, bases=tuple(bases), start_index=start_index)
