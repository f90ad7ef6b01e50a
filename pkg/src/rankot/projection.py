"""Projected soft rank energy: maximize the soft statistic over k-frames.

The samples are projected onto ``k`` orthonormal directions ``U`` (a point
on the Stiefel manifold), ranked against a ``k``-dimensional Halton grid,
and the scaled soft rank energy of the projections is maximized by
Riemannian gradient ascent with a QR retraction.
"""

from dataclasses import dataclass, field
import logging
from typing import Optional
import warnings

import numpy as np
from scipy.spatial.distance import cdist

from ._parallel import parallel_map
from .errors import InvalidArgumentError, NumericalError
from .halton import halton_grid
from .ranks import soft_ranks_from_plan
from .statistics import _block_energy, rank_energy, scale_factor
from .synthgen import derive_seed
from .transport import (DEFAULT_MAX_ITER, DEFAULT_TOL, TransportPlan, _as_points,
                        cost_matrix, sinkhorn, transport_cost_vjp)

logger = logging.getLogger(__name__)

ORTHONORMALITY_TOL = 1e-8
GRADIENT_METHODS = ("fd", "implicit")


@dataclass
class ProjectionResult:
    """Best frame found by :func:`maximize_psre`.

    ``trace`` holds ``(iteration, objective)`` pairs of the restart that
    produced ``U``; ``traces`` holds one such list per restart.
    """

    U: np.ndarray
    value: float
    hard_value: float
    k: int
    epsilon: float
    iterations: int
    restarts_used: int
    best_restart: int
    trace: list = field(default_factory=list)
    traces: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"value": self.value, "hard_value_at_Ustar": self.hard_value, "k": self.k,
                "epsilon": self.epsilon, "iterations": self.iterations,
                "restarts_used": self.restarts_used, "best_restart": self.best_restart}


def orthonormality_error(U) -> float:
    """Max-norm of ``U^T U - I``."""
    U = np.asarray(U, dtype=float)
    return float(np.abs(U.T @ U - np.eye(U.shape[1])).max())


def qr_retraction(U, xi=None) -> np.ndarray:
    """Orthonormal factor of ``U + xi`` with the diagonal of R made positive."""
    a = np.asarray(U, dtype=float)
    if xi is not None:
        a = a + xi
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def tangent_projection(U, G) -> np.ndarray:
    """Project an ambient matrix onto the tangent space at ``U``: ``G - U sym(U^T G)``."""
    a = U.T @ G
    return G - U @ ((a + a.T) / 2.0)


def _pooled(X, Y):
    x = _as_points(X, "X")
    y = _as_points(Y, "Y")
    if x.shape[1] != y.shape[1]:
        raise InvalidArgumentError(
            f"X and Y must have the same dimension, got {x.shape[1]} and {y.shape[1]}")
    return np.vstack([x, y]), x.shape[0]


def _check_frame(U, d):
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != d or not 1 <= U.shape[1] <= d:
        raise InvalidArgumentError(f"U must be {d} x k with 1 <= k <= {d}, got {U.shape}")
    err = orthonormality_error(U)
    if not err <= ORTHONORMALITY_TOL:
        raise InvalidArgumentError(f"U is not orthonormal (max |U^T U - I| = {err:.2e})")
    return U


@dataclass
class _Evaluation:
    value: float
    plan: TransportPlan
    ranks: np.ndarray
    proj: np.ndarray


class _Objective:
    """Scaled soft rank energy of ``Z U`` for a fixed pooled sample ``Z``."""

    def __init__(self, Z, m, k, epsilon, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        if not epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be > 0, got {epsilon!r}")
        self.Z = Z
        self.m = m
        self.n = Z.shape[0] - m
        if self.m < 1 or self.n < 1:
            raise InvalidArgumentError("both samples need at least one row")
        self.grid = halton_grid(Z.shape[0], k).points
        self.epsilon = float(epsilon)
        self.tol = tol
        self.max_iter = max_iter

    def evaluate(self, U, init=None) -> _Evaluation:
        proj = self.Z @ U
        plan = sinkhorn(cost_matrix(proj, self.grid), self.epsilon, tol=self.tol,
                        max_iter=self.max_iter, init=init)
        ranks = soft_ranks_from_plan(plan.weights, self.grid)
        mat = cdist(ranks, ranks)
        value = _block_energy(mat, self.m, self.n) * scale_factor(self.m, self.n)
        if not np.isfinite(value):
            raise NumericalError("non-finite projected statistic")
        return _Evaluation(value, plan, ranks, proj)

    def value(self, U) -> float:
        return self.evaluate(U).value

    def energy_rank_gradient(self, ranks) -> np.ndarray:
        # value = sum_{a,b} w_ab ||r_a - r_b|| over ordered pairs
        m, n = self.m, self.n
        total = m + n
        w = np.full((total, total), 1.0 / (m * n))
        w[:m, :m] = -1.0 / m**2
        w[m:, m:] = -1.0 / n**2
        dist = cdist(ranks, ranks)
        with np.errstate(divide="ignore"):
            inv = np.where(dist > 0, 1.0 / dist, 0.0)
        a = w * inv
        grad = 2.0 * (a.sum(axis=1)[:, None] * ranks - a @ ranks)
        return grad * scale_factor(m, n)

    def implicit_gradient(self, U, state: _Evaluation) -> np.ndarray:
        """Euclidean gradient in ``U`` through the optimality conditions of the plan."""
        p = state.plan.weights
        row = p.sum(axis=1)
        g_r = self.energy_rank_gradient(state.ranks)
        # ranks r_i = sum_j p_ij h_j / sum_j p_ij
        g_p = (g_r @ self.grid.T - (g_r * state.ranks).sum(axis=1)[:, None]) / row[:, None]
        g_c = transport_cost_vjp(state.plan, g_p)
        # cost c_ij = ||y_i - h_j||^2 with y = Z U
        g_y = 2.0 * (g_c.sum(axis=1)[:, None] * state.proj - g_c @ self.grid)
        return self.Z.T @ g_y

    def fd_gradient(self, U, h) -> np.ndarray:
        """Central differences over the entries of ``U`` (ambient, off-manifold probes)."""
        d, k = U.shape

        def probe(idx):
            i, j = divmod(idx, k)
            up = U.copy()
            up[i, j] += h
            down = U.copy()
            down[i, j] -= h
            return (self.value(up) - self.value(down)) / (2.0 * h)

        grads = parallel_map(probe, range(d * k))
        out = np.asarray(grads, dtype=float).reshape(d, k)
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite objective while probing the gradient")
        return out


def psre_objective(X, Y, U, epsilon, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> float:
    """Scaled soft rank energy of the projected samples ``X U`` and ``Y U``.

    Parameters
    ----------
    X, Y : array-like, shapes (m, d) and (n, d)
    U : array-like, shape (d, k)
        Orthonormal columns (``|U^T U - I| <= 1e-8``).
    epsilon : float
        Entropic regularization, > 0.

    Returns
    -------
    float
        The statistic of the ``k``-dimensional projections ranked against
        the first ``m + n`` points of the ``k``-dimensional Halton grid.
    """
    Z, m = _pooled(X, Y)
    U = _check_frame(U, Z.shape[1])
    return _Objective(Z, m, U.shape[1], epsilon, tol, max_iter).value(U)


def riemannian_gradient(X, Y, U, epsilon, h=1e-4, method="fd", tol=DEFAULT_TOL,
                        max_iter=DEFAULT_MAX_ITER) -> np.ndarray:
    """Gradient of :func:`psre_objective` on the tangent space at ``U``.

    Parameters
    ----------
    h : float
        Finite-difference step for ``method="fd"``.
    method : {"fd", "implicit"}
        ``"fd"`` probes each of the ``d * k`` entries by central
        differences. ``"implicit"`` differentiates the converged entropic
        plan through its optimality conditions, which costs about one
        extra linear solve instead of ``2 d k`` transport solves.

    Returns
    -------
    ndarray, shape (d, k)
        ``G - U sym(U^T G)`` where ``G`` is the Euclidean gradient.
    """
    if method not in GRADIENT_METHODS:
        raise InvalidArgumentError(f"method must be one of {GRADIENT_METHODS}, got {method!r}")
    if not h > 0:
        raise InvalidArgumentError(f"h must be > 0, got {h!r}")
    Z, m = _pooled(X, Y)
    U = _check_frame(U, Z.shape[1])
    obj = _Objective(Z, m, U.shape[1], epsilon, tol, max_iter)
    if method == "fd":
        G = obj.fd_gradient(U, h)
    else:
        G = obj.implicit_gradient(U, obj.evaluate(U))
    return tangent_projection(U, G)


def initial_frames(Z, k, restarts, seed) -> list:
    """Starting frames: top-k right singular vectors, then seeded random frames."""
    d = Z.shape[1]
    centered = Z - Z.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    frames = [qr_retraction(vt[:k].T)]
    for r in range(1, restarts):
        rng = np.random.default_rng(derive_seed(seed, r))
        frames.append(qr_retraction(rng.standard_normal((d, k))))
    return frames


def _ascend(obj: _Objective, U, gradient, h, max_iter, step0, tol, warm_start):
    state = obj.evaluate(U)
    trace = [(0, state.value)]
    step = step0
    its = 0
    stalled_first = False
    for it in range(1, max_iter + 1):
        if gradient == "implicit":
            G = obj.implicit_gradient(U, state)
        else:
            G = obj.fd_gradient(U, h)
        grad = tangent_projection(U, G)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            stalled_first = it == 1
            break
        direction = grad / gnorm
        init = state.plan.col_potential if warm_start else None
        t = min(step0, 2.0 * step)
        accepted = None
        for _ in range(21):
            cand = qr_retraction(U, t * direction)
            new = obj.evaluate(cand, init=init)
            # Armijo condition along the retracted step
            if new.value >= state.value + 1e-4 * t * gnorm:
                accepted = (cand, new)
                break
            t *= 0.5
        if accepted is None:
            stalled_first = it == 1
            break
        U, prev = accepted[0], state.value
        state = accepted[1]
        step = t
        its = it
        trace.append((it, state.value))
        if state.value - prev < tol * max(abs(prev), 1e-12):
            break
    return U, state.value, trace, its, stalled_first


def maximize_psre(X, Y, k, epsilon, restarts=5, max_iter=100, step0=1.0, tol=1e-6, seed=0,
                  gradient="implicit", h=1e-4, include_identity=True, warm_start=False,
                  solver_tol=DEFAULT_TOL, initial: Optional[list] = None) -> ProjectionResult:
    """Maximize the projected soft rank energy over ``d x k`` orthonormal frames.

    Parameters
    ----------
    X, Y : array-like, shapes (m, d) and (n, d)
    k : int
        Target dimension, ``1 <= k <= d``.
    epsilon : float
        Entropic regularization, > 0.
    restarts : int
        Number of starting frames. Restart 0 uses the top-k right singular
        vectors of the centered pooled data; restart ``r >= 1`` is a random
        frame drawn from ``derive_seed(seed, r)``.
    max_iter : int
        Gradient steps per restart.
    step0 : float
        Largest step length (Frobenius norm of the tangent step). Each line
        search starts at twice the last accepted step, capped at `step0`,
        and halves at most 20 times.
    tol : float
        Stop a restart when the relative improvement drops below `tol`.
    gradient : {"implicit", "fd"}
        Gradient of the objective; see :func:`riemannian_gradient`.
    include_identity : bool
        For ``k == d`` also start from the identity so the result never
        falls below the unprojected statistic.
    warm_start : bool
        Start each line-search transport solve from the current column
        potentials.
    initial : list of ndarray, optional
        Explicit starting frames replacing the default ones.

    Returns
    -------
    ProjectionResult
        The best restart, plus the hard rank energy of the projections at
        the returned frame.
    """
    if gradient not in GRADIENT_METHODS:
        raise InvalidArgumentError(f"gradient must be one of {GRADIENT_METHODS}, got {gradient!r}")
    Z, m = _pooled(X, Y)
    d = Z.shape[1]
    if int(k) != k or not 1 <= k <= d:
        raise InvalidArgumentError(f"k must be an integer in [1, {d}], got {k!r}")
    k = int(k)
    if int(restarts) != restarts or restarts < 1:
        raise InvalidArgumentError(f"restarts must be a positive integer, got {restarts!r}")
    if int(max_iter) != max_iter or max_iter < 0:
        raise InvalidArgumentError(f"max_iter must be a nonnegative integer, got {max_iter!r}")
    if not step0 > 0:
        raise InvalidArgumentError(f"step0 must be > 0, got {step0!r}")
    obj = _Objective(Z, m, k, epsilon, tol=solver_tol)
    if initial is not None:
        frames = [_check_frame(f, d) for f in initial]
    else:
        frames = initial_frames(Z, k, int(restarts), seed)
        if include_identity and k == d:
            frames.append(np.eye(d))

    def run(frame):
        return _ascend(obj, frame, gradient, h, int(max_iter), float(step0), tol, warm_start)

    results = parallel_map(run, frames)
    if all(r[4] for r in results):
        warnings.warn("no ascent step found at the first iteration of any restart "
                      "(line search failed or zero gradient); returning the best "
                      "initialization", RuntimeWarning, stacklevel=2)
    best = max(range(len(results)), key=lambda i: results[i][1])
    U_star, value, trace, its, _ = results[best]
    hard = rank_energy(Z[:m] @ U_star, Z[m:] @ U_star, 0.0).scaled_value
    logger.debug("maximize_psre: best restart %d value %.6g after %d its", best, value, its)
    return ProjectionResult(U=U_star, value=float(value), hard_value=float(hard), k=k,
                            epsilon=float(epsilon), iterations=int(its),
                            restarts_used=len(frames), best_restart=int(best),
                            trace=trace, traces=[r[2] for r in results])
