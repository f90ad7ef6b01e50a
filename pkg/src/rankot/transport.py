"""Discrete optimal transport between a point cloud and a reference grid.

Two solvers are provided:

* :func:`solve_assignment` -- the exact problem (zero regularization), whose
  solution is a permutation. Ties between optimal permutations are broken
  lexicographically so results are reproducible on data with repeats.
* :func:`sinkhorn` -- the entropically regularized problem with uniform
  marginals, solved in the log domain.

Costs are raw squared Euclidean distances and the regularization strength is
read on that absolute scale.
"""

from collections import deque
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import ConvergenceError, InvalidArgumentError, NumericalError
from .halton import HaltonGrid

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000


def _as_points(a, name):
    if isinstance(a, HaltonGrid):
        a = a.points
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D array, got shape {arr.shape}")
    return arr


def cost_matrix(points, grid) -> np.ndarray:
    """Squared Euclidean distances between rows of `points` and `grid`.

    Parameters
    ----------
    points : array-like, shape (n, d)
    grid : HaltonGrid or array-like, shape (n, d)

    Returns
    -------
    ndarray, shape (n, n)
        ``C[i, j] = ||points[i] - grid[j]||**2``, unnormalized.
    """
    x = _as_points(points, "points")
    h = _as_points(grid, "grid")
    if x.shape != h.shape:
        raise InvalidArgumentError(
            f"points {x.shape} and grid {h.shape} must have equal shapes")
    return cdist(x, h, metric="sqeuclidean")


def _check_square(cost):
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise InvalidArgumentError(f"cost must be a non-empty square matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidArgumentError("cost contains non-finite entries")
    return c


def assignment_potentials(cost, sigma):
    """Dual potentials certifying that `sigma` is an optimal assignment.

    Returns ``(u, v)`` with ``u[i] + v[j] <= cost[i, j]`` everywhere and
    equality on ``(i, sigma[i])``. ``v`` is obtained as shortest-path
    distances in the residual graph (Bellman-Ford, vectorized by rows); the
    graph has no negative cycle exactly when `sigma` is optimal.
    """
    c = _check_square(cost)
    sigma = np.asarray(sigma, dtype=np.intp)
    n = c.shape[0]
    matched = c[np.arange(n), sigma]
    # edge sigma[i] -> j with weight c[i, j] - c[i, sigma[i]]
    w = c - matched[:, None]
    v = np.zeros(n)
    # improvements at rounding level are ignored so exact ties cannot cycle
    tol = 1e-12 * (1.0 + np.abs(c).max())
    for _ in range(n + 1):
        cand = (v[sigma][:, None] + w).min(axis=0)
        improve = cand < v - tol
        if not improve.any():
            break
        v = np.where(improve, cand, v)
    else:
        raise NumericalError("assignment is not optimal: negative cycle in residual graph")
    u = matched - v[sigma]
    return u, v


def _tight_edges(c, u, v):
    # per-entry tolerance: rounding in c - u - v scales with the operands
    reduced = c - u[:, None] - v[None, :]
    scale = np.abs(c) + np.abs(u)[:, None] + np.abs(v)[None, :]
    return reduced <= 1e-12 * (1.0 + scale)


def _lexicographic_refine(c, sigma, u, v):
    """Smallest permutation (lexicographic) among the optimal ones.

    Optimal permutations are exactly the perfect matchings in the graph of
    zero reduced-cost edges. Rows are fixed greedily in order; row ``i`` is
    moved to a smaller column ``j`` whenever an alternating cycle through
    the unfixed rows allows it.
    """
    n = c.shape[0]
    tight = _tight_edges(c, u, v)
    if int(tight.sum()) == n:
        return sigma
    sigma = sigma.copy()
    owner = np.empty(n, dtype=np.intp)
    owner[sigma] = np.arange(n)
    fixed_col = np.zeros(n, dtype=bool)
    for i in range(n):
        target = sigma[i]
        for j in np.flatnonzero(tight[i, :target]):
            if fixed_col[j]:
                continue
            # path from owner[j] back to column `target`, avoiding row i
            start = owner[j]
            prev_col = {start: None}
            queue = deque([start])
            found = None
            visited_cols = {j}
            while queue and found is None:
                r = queue.popleft()
                for col in np.flatnonzero(tight[r]):
                    if fixed_col[col] or col in visited_cols:
                        continue
                    visited_cols.add(col)
                    if col == target:
                        found = (r, col)
                        break
                    nxt = owner[col]
                    if nxt == i or nxt in prev_col:
                        continue
                    prev_col[nxt] = (r, col)
                    queue.append(nxt)
            if found is None:
                continue
            # rotate: each row on the path takes the column that led past it
            r, col = found
            while r is not None:
                step = prev_col[r]
                sigma[r] = col
                owner[col] = r
                if step is None:
                    break
                r, col = step
            sigma[i] = j
            owner[j] = i
            break
        fixed_col[sigma[i]] = True
    return sigma


def solve_assignment(cost) -> np.ndarray:
    """Exact minimum-cost assignment.

    Parameters
    ----------
    cost : array-like, shape (n, n)
        Finite costs.

    Returns
    -------
    sigma : ndarray of int, shape (n,)
        Zero-based permutation with row ``i`` matched to column ``sigma[i]``.
        Among optimal permutations the lexicographically smallest is returned.
    """
    c = _check_square(cost)
    _, sigma = linear_sum_assignment(c)
    sigma = np.asarray(sigma, dtype=np.intp)
    if c.shape[0] == 1:
        return sigma
    u, v = assignment_potentials(c, sigma)
    return _lexicographic_refine(c, sigma, u, v)


@dataclass
class TransportPlan:
    """Entropic coupling with uniform marginals.

    ``row_potential`` and ``col_potential`` are the dual variables, so that
    ``weights = exp((f[:, None] + g[None, :] - cost) / epsilon)``.
    """

    weights: np.ndarray
    epsilon: float
    tol: float
    iterations_used: int
    violation: float
    row_potential: np.ndarray = field(repr=False)
    col_potential: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.weights.shape[0]


def marginal_violation(weights) -> float:
    """L1 deviation of both marginals from the uniform vector (the larger one)."""
    n = weights.shape[0]
    rows = np.abs(weights.sum(axis=1) - 1.0 / n).sum()
    cols = np.abs(weights.sum(axis=0) - 1.0 / n).sum()
    return float(max(rows, cols))


_EXP_FLOOR = -700.0  # exp() below this is < 1e-304; clamping avoids subnormals


def _lse_rows(z):
    top = z.max(axis=1)
    w = z - top[:, None]
    np.maximum(w, _EXP_FLOOR, out=w)
    np.exp(w, out=w)
    return top + np.log(w.sum(axis=1))


def _plan(f, g, c, eps):
    z = (f[:, None] + g[None, :] - c) / eps
    np.maximum(z, _EXP_FLOOR, out=z)
    return np.exp(z, out=z)


def _row_update(g, c, eps, log_a):
    return eps * (log_a - _lse_rows((g[None, :] - c) / eps))


def _col_update(f, c, eps, log_b):
    return eps * (log_b - logsumexp((f[:, None] - c) / eps, axis=0))


def _scaling(c, eps, tol, max_iter, g):
    n = c.shape[0]
    log_a = np.full(n, -np.log(n))
    f = _row_update(g, c, eps, log_a)
    for it in range(1, max_iter + 1):
        g = _col_update(f, c, eps, log_a)
        f = _row_update(g, c, eps, log_a)
        p = _plan(f, g, c, eps)
        err = marginal_violation(p)
        if err <= tol:
            return p, f, g, it, err
    return p, f, g, max_iter, err


def _newton(c, eps, tol, max_iter, g):
    """Damped Newton ascent on the semi-dual (column potentials only).

    Row potentials are eliminated in closed form, so the row marginal holds
    after every step; the column residual is driven to zero by Newton steps
    on a Levenberg-Marquardt regularized Hessian with Armijo backtracking.
    """
    n = c.shape[0]
    a = 1.0 / n
    log_a = np.full(n, -np.log(n))
    gauge = np.full((n, n), 1.0 / n**2)

    def evaluate(gv):
        fv = _row_update(gv, c, eps, log_a)
        return a * (fv.sum() + gv.sum()), fv

    obj, f = evaluate(g)
    lam = 1e-12
    err = np.inf
    for it in range(max_iter + 1):
        p = _plan(f, g, c, eps)
        err = marginal_violation(p)
        if err <= tol:
            return p, f, g, it, err
        if it == max_iter:
            break
        col = p.sum(axis=0)
        grad = a - col
        # negligible entries only matter through subnormal arithmetic, which is slow
        p_h = np.where(p >= 1e-100, p, 0.0)
        hess = -(p_h.T / p.sum(axis=1)) @ p_h
        hess[np.diag_indices(n)] += col
        hess += gauge
        ridge = col.mean()
        if not np.all(np.isfinite(hess)):
            raise NumericalError("non-finite Hessian in Newton step")
        diag = np.diag_indices(n)
        while True:
            trial = hess.copy()
            trial[diag] += lam * ridge
            try:
                factor = sla.cho_factor(trial, overwrite_a=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                lam = max(lam * 100.0, 1e-14)
        step = eps * sla.cho_solve(factor, grad, check_finite=False)
        step -= step.mean()
        slope = float(grad @ step)
        t = 1.0
        noise = 1e-13 * (1.0 + abs(obj))
        while True:
            obj_new, f_new = evaluate(g + t * step)
            if obj_new >= obj + 1e-4 * t * slope or t < 1e-12:
                break
            # near the optimum the objective is flat to rounding; judge by the residual
            if (obj_new >= obj - noise
                    and marginal_violation(_plan(f_new, g + t * step, c, eps)) < err):
                break
            t *= 0.5
        if t == 1.0:
            lam = max(lam / 10.0, 1e-14)
        elif t < 0.1:
            lam *= 10.0
        if not np.isfinite(obj_new):
            raise NumericalError("non-finite semi-dual objective in Newton step")
        g = g + t * step
        obj, f = obj_new, f_new
    return p, f, g, max_iter, err


def sinkhorn(cost, epsilon, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
             method="newton", init=None) -> TransportPlan:
    """Entropic OT plan between two uniform measures.

    Solves ``min_P <C, P> - epsilon * H(P)`` over couplings with both
    marginals equal to ``1/n``.

    Parameters
    ----------
    cost : array-like, shape (n, n)
    epsilon : float
        Regularization strength, > 0. Use :func:`solve_assignment` for 0.
    tol : float
        Stop once the L1 violation of each marginal is at most `tol`.
    max_iter : int
        Iteration cap (Newton steps or scaling sweeps).
    method : {"newton", "scaling"}
        ``"scaling"`` alternates the two log-domain scaling updates.
        ``"newton"`` (default) takes damped Newton steps on the column
        potentials, each preceded by the exact row update; it reaches tight
        tolerances at small `epsilon` where plain scaling stalls.
    init : ndarray, shape (n,), optional
        Starting column potentials on the raw cost (e.g. from a previous
        nearby solve). By default "newton" starts from the potentials of
        the exact assignment and "scaling" from zero.

    Raises
    ------
    ConvergenceError
        If `tol` is not reached within `max_iter`.
    """
    c = _check_square(cost)
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be > 0, got {epsilon!r}")
    if tol <= 0:
        raise InvalidArgumentError(f"tol must be > 0, got {tol!r}")
    if int(max_iter) != max_iter or max_iter < 1:
        raise InvalidArgumentError(f"max_iter must be a positive integer, got {max_iter!r}")
    n = c.shape[0]
    eps = float(epsilon)
    if n == 1:
        return TransportPlan(np.ones((1, 1)), eps, tol, 0, 0.0,
                             np.array([c[0, 0]]), np.zeros(1))
    # the plan is unchanged by adding row/column constants to the cost; work
    # on a shifted cost whose relevant entries are near zero
    if init is not None:
        g0 = np.asarray(init, dtype=float).copy()
        if g0.shape != (n,):
            raise InvalidArgumentError(f"init must have shape ({n},), got {g0.shape}")
        row_shift = np.zeros(n)
        col_shift = np.zeros(n)
    elif method == "newton":
        row_shift, col_shift = assignment_potentials(c, solve_assignment(c))
        g0 = np.zeros(n)
    else:
        row_shift = c.min(axis=1)
        col_shift = np.zeros(n)
        g0 = np.zeros(n)
    work = c - row_shift[:, None] - col_shift[None, :]
    if method == "newton":
        p, f, g, it, err = _newton(work, eps, tol, int(max_iter), g0)
    elif method == "scaling":
        p, f, g, it, err = _scaling(work, eps, tol, int(max_iter), g0)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    f = f + row_shift
    g = g + col_shift
    if not np.all(np.isfinite(p)):
        raise NumericalError("transport plan has non-finite entries")
    if err > tol:
        raise ConvergenceError(
            f"sinkhorn did not reach tol={tol:g} in {max_iter} iterations "
            f"(violation {err:.3e}, epsilon={eps:g})", violation=err, iterations=it)
    logger.debug("sinkhorn(%s) n=%d eps=%g converged in %d its (viol %.2e)",
                 method, n, eps, it, err)
    return TransportPlan(p, eps, tol, it, err, f, g)


def transport_cost_vjp(plan: TransportPlan, grad_weights) -> np.ndarray:
    """Pull a gradient w.r.t. the plan back to a gradient w.r.t. the cost.

    Uses implicit differentiation of the optimality conditions of the
    entropic problem at the returned plan (both marginals held fixed), so
    the result is exact up to the solver tolerance.

    Parameters
    ----------
    plan : TransportPlan
    grad_weights : ndarray, shape (n, n)
        ``dE/dP`` for some scalar ``E(P)``.

    Returns
    -------
    ndarray, shape (n, n)
        ``dE/dC`` where ``P = P(C)``.
    """
    p = plan.weights
    eps = plan.epsilon
    n = p.shape[0]
    q = np.asarray(grad_weights, dtype=float) * p
    r = p.sum(axis=1)
    col = p.sum(axis=0)
    q1 = q.sum(axis=1)
    rhs = q.sum(axis=0) - p.T @ (q1 / r)
    schur = -(p.T / r) @ p
    schur[np.diag_indices(n)] += col
    schur += np.full((n, n), col.mean() / n)
    schur[np.diag_indices(n)] += 1e-12 * col.mean()
    beta = sla.solve(schur, rhs, assume_a="pos", check_finite=False)
    alpha = (q1 - p @ beta) / r
    return (p * (alpha[:, None] + beta[None, :]) - q) / eps
