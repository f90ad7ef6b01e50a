"""Replicated experiments over the benchmark settings.

Replicate ``r`` of setting ``vK`` draws its data with seed
``derive_seed(seed, K, r)``; null and alternate draws of the same replicate
share that seed, so their X samples coincide.
"""

import numpy as np

from ._parallel import parallel_map
from .errors import InvalidArgumentError
from .projection import maximize_psre
from .statistics import rank_energy
from .synthgen import SETTINGS, SettingSpec, derive_seed, generate

EPSILON_GRID = (0.0, 0.0001, 0.001, 0.01, 0.1, 1.0, 5.0, 10.0)
DIMENSION_GRID = (3, 8, 20, 50, 100, 200)


def _check_settings(settings):
    settings = list(settings)
    bad = [s for s in settings if s not in SETTINGS]
    if bad or not settings:
        raise InvalidArgumentError(f"settings must be drawn from v1..v12, got {settings}")
    return settings


def _check_positive(**values):
    for name, value in values.items():
        if int(value) != value or value < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")


def replicate_seed(seed, setting, r) -> int:
    return derive_seed(seed, SETTINGS.index(setting) + 1, r)


def _draw(setting, m, n, d, hypothesis, seed, r):
    return generate(SettingSpec(setting, m, n, d, hypothesis, replicate_seed(seed, setting, r)))


def null_statistics(setting, m, n, d, epsilon, replicates, seed=0) -> np.ndarray:
    """Scaled statistics of `replicates` null draws (both samples from the X law)."""
    _check_settings([setting])
    _check_positive(m=m, n=n, d=d, replicates=replicates)

    def one(r):
        x, y = _draw(setting, m, n, d, "null", seed, r)
        return rank_energy(x, y, epsilon).scaled_value

    return np.asarray(parallel_map(one, range(int(replicates))), dtype=float)


def null_density(settings, m, n, d, epsilon, replicates, seed=0) -> list:
    """Long-format rows ``{setting, epsilon, replicate, scaled_value}`` under the null."""
    rows = []
    for s in _check_settings(settings):
        vals = null_statistics(s, m, n, d, epsilon, replicates, seed)
        rows.extend({"setting": s, "epsilon": float(epsilon), "replicate": r,
                     "scaled_value": float(v)} for r, v in enumerate(vals))
    return rows


def _summary(values):
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "median": float(np.median(v)), "replicates": int(v.size)}


def sweep_epsilon(settings, eps_grid=EPSILON_GRID, m=200, n=200, d=3, replicates=100, seed=0,
                  hypothesis="alternate", keep_values=False) -> list:
    """Mean scaled statistic per (setting, epsilon).

    Every epsilon of a replicate is evaluated on the same draw. With
    `keep_values` each row also carries the per-replicate ``values``.
    """
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or any(not e >= 0 for e in eps_grid):
        raise InvalidArgumentError(f"epsilon grid must be nonempty and >= 0, got {eps_grid}")
    _check_positive(m=m, n=n, d=d, replicates=replicates)
    rows = []
    for s in _check_settings(settings):
        def one(r, s=s):
            x, y = _draw(s, m, n, d, hypothesis, seed, r)
            return [rank_energy(x, y, e).scaled_value for e in eps_grid]

        vals = np.asarray(parallel_map(one, range(int(replicates))), dtype=float)
        for j, e in enumerate(eps_grid):
            row = {"setting": s, "epsilon": e, **_summary(vals[:, j])}
            if keep_values:
                row["values"] = vals[:, j].tolist()
            rows.append(row)
    return rows


def sweep_dim(settings, dims=DIMENSION_GRID, m=200, n=200, epsilon=0.01, replicates=100, seed=0,
              hypothesis="alternate") -> list:
    """Mean scaled statistic per (setting, dimension)."""
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise InvalidArgumentError(f"dimension grid must be nonempty and positive, got {dims}")
    _check_positive(m=m, n=n, replicates=replicates)
    rows = []
    for s in _check_settings(settings):
        for d in dims:
            def one(r, s=s, d=d):
                x, y = _draw(s, m, n, d, hypothesis, seed, r)
                return rank_energy(x, y, epsilon).scaled_value

            vals = parallel_map(one, range(int(replicates)))
            rows.append({"setting": s, "d": d, "epsilon": float(epsilon), **_summary(vals)})
    return rows


def proj_compare(settings=("v11", "v12"), d=100, k=8, epsilon=0.001, m=200, n=200,
                 replicates=30, seed=0, restarts=1, max_iter=30, **opt) -> list:
    """Unprojected sRE and optimized PsRE for null and alternate draws.

    Returns long-format rows ``{setting, hypothesis, replicate, sre, psre,
    hard_psre, iterations}``.
    """
    _check_positive(m=m, n=n, d=d, k=k, replicates=replicates)
    rows = []
    for s in _check_settings(settings):
        for hyp in ("null", "alternate"):
            def one(r, s=s, hyp=hyp):
                x, y = _draw(s, m, n, d, hyp, seed, r)
                sre = rank_energy(x, y, epsilon).scaled_value
                res = maximize_psre(x, y, k, epsilon, restarts=restarts, max_iter=max_iter,
                                    seed=replicate_seed(seed, s, r), **opt)
                return {"setting": s, "hypothesis": hyp, "replicate": r, "sre": sre,
                        "psre": res.value, "hard_psre": res.hard_value,
                        "iterations": res.iterations}

            rows.extend(parallel_map(one, range(int(replicates))))
    return rows


def median_gaps(rows, column) -> dict:
    """Per setting, median over alternate rows minus median over null rows."""
    out = {}
    for s in dict.fromkeys(r["setting"] for r in rows):
        alt = [r[column] for r in rows if r["setting"] == s and r["hypothesis"] == "alternate"]
        null = [r[column] for r in rows if r["setting"] == s and r["hypothesis"] == "null"]
        out[s] = float(np.median(alt) - np.median(null))
    return out
