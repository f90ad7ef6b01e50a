"""Independent reference implementations used by the tests."""

import itertools
import warnings

import numpy as np


def brute_force_assignment(cost):
    """Minimum cost and the lexicographically smallest optimal permutation."""
    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = sum(c[i, perm[i]] for i in range(n))
        if total < best - 1e-12:
            best, best_perm = total, perm
    return best, np.array(best_perm)


def entropic_plan_oracle(cost, epsilon):
    """argmin <C, P> + eps * sum P log P over couplings with uniform marginals.

    Solved as a generic convex program (cvxpy with the Clarabel conic
    solver). The solution is then polished by a root solve of the full dual
    conditions ``P = exp((f_i + g_j - C_ij) / eps)`` with both marginals
    equal to ``1/n``, started from potentials fitted to the conic solution.
    """
    import cvxpy as cp
    from scipy.optimize import root
    from scipy.special import logsumexp

    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    P = cp.Variable((n, n))
    prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(c, P)) - epsilon * cp.sum(cp.entr(P))),
                      [cp.sum(P, axis=1) == 1.0 / n, cp.sum(P, axis=0) == 1.0 / n])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)

    # least-squares fit of f_i + g_j = eps log P_ij + C_ij on entries the solver resolved
    target = epsilon * np.log(np.clip(P.value, 1e-300, None)) + c
    mask = (P.value > 1e-8).ravel()
    design = np.hstack([np.kron(np.eye(n), np.ones((n, 1))), np.kron(np.ones((n, 1)), np.eye(n))])
    fg = np.linalg.lstsq(design[mask], target.ravel()[mask], rcond=None)[0]
    fg = np.concatenate([fg[:n] + fg[-1], fg[n:-1] - fg[-1]])  # gauge g[-1] = 0

    def log_plan(z):
        g = np.append(z[n:], 0.0)
        return (z[:n, None] + g[None, :] - c) / epsilon

    def residual(z):
        lp = log_plan(z)
        # log-marginal residuals; g[-1] is fixed by the gauge
        return np.concatenate([logsumexp(lp, axis=1) + np.log(n),
                               (logsumexp(lp, axis=0) + np.log(n))[:-1]])

    sol = root(residual, fg, method="lm", options={"xtol": 1e-15, "ftol": 1e-15})
    return np.exp(log_plan(sol.x))


def energy_double_loop(x_ranks, y_ranks):
    x = [np.asarray(r, dtype=float) for r in x_ranks]
    y = [np.asarray(r, dtype=float) for r in y_ranks]
    m, n = len(x), len(y)
    cross = sum(np.linalg.norm(a - b) for a in x for b in y)
    within_x = sum(np.linalg.norm(a - b) for a in x for b in x)
    within_y = sum(np.linalg.norm(a - b) for a in y for b in y)
    return 2.0 * cross / (m * n) - within_x / m**2 - within_y / n**2


def gaussian_mmd_double_loop(x_ranks, y_ranks, h):
    def k(a, b):
        return np.exp(-np.sum((np.asarray(a) - np.asarray(b)) ** 2) / (2.0 * h * h))

    m, n = len(x_ranks), len(y_ranks)
    B = sum(k(a, b) for a in x_ranks for b in y_ranks) / (m * n)
    C = sum(k(a, b) for a in x_ranks for b in x_ranks) / m**2
    D = sum(k(a, b) for a in y_ranks for b in y_ranks) / n**2
    return C + D - 2.0 * B


def moving_average_loop(x, w):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        lo, hi = max(0, i - w), min(x.size, i + w + 1)
        out[i] = sum(x[lo:hi]) / (hi - lo)
    return out


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov distance by direct ECDF comparison."""
    a, b = np.sort(a), np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def assignment_gap(cost):
    """Cost difference between the best and second-best permutations."""
    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    totals = sorted(sum(c[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
    return totals[1] - totals[0] if len(totals) > 1 else np.inf
