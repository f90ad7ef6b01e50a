"""Seeded two-sample benchmark generators (settings v1 to v12).

Every setting defines a law for X and a law for Y. Under the null
hypothesis both samples are drawn from the X law; under the alternate Y
follows its own law. X and Y always come from two independent child
streams of the spec seed, so X is identical across hypotheses for a fixed
seed.

Replicate ``r`` of a run with seed ``s`` uses ``derive_seed(s, r)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

SETTINGS = tuple(f"v{i}" for i in range(1, 13))
HYPOTHESES = ("null", "alternate")


def derive_seed(seed, *keys) -> int:
    """Deterministic child seed for a (seed, key, ...) counter tuple."""
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass(frozen=True)
class SettingSpec:
    """Parameters of one draw.

    `options` may hold ``v8_literal`` (bool; Y = V*W without the Bernoulli
    mixture), ``contamination`` ("sample" or "coordinate", for v9/v10) and
    ``gamma_rate`` (bool; read Gamma(2, 0.1) as shape/rate instead of
    shape/scale).
    """

    id: str
    m: int
    n: int
    d: int
    hypothesis: str = "alternate"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in SETTINGS:
            raise InvalidArgumentError(f"unknown setting {self.id!r}; expected one of v1..v12")
        if self.hypothesis not in HYPOTHESES:
            raise InvalidArgumentError(f"hypothesis must be 'null' or 'alternate', got {self.hypothesis!r}")
        for name in ("m", "n", "d"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        if self.id == "v2" and self.d < 2:
            raise InvalidArgumentError("setting v2 needs d >= 2")
        bad = set(self.options) - {"v8_literal", "contamination", "gamma_rate"}
        if bad:
            raise InvalidArgumentError(f"unknown options {sorted(bad)}")
        if self.options.get("contamination", "sample") not in ("sample", "coordinate"):
            raise InvalidArgumentError("contamination must be 'sample' or 'coordinate'")


def _toeplitz_cov(d, rho):
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _equicorr_cov(d, rho):
    cov = np.full((d, d), rho)
    np.fill_diagonal(cov, 1.0)
    return cov


def _mvn(rng, size, cov):
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((size, cov.shape[0])) @ chol.T


def _cauchy(rng, size, d, loc):
    return loc + np.tan(np.pi * (rng.random((size, d)) - 0.5))


def _autoregressive(rng, size, d, coef):
    out = np.empty((size, d))
    out[:, 0] = rng.random(size)
    innov = rng.random((size, d - 1))
    for k in range(1, d):
        out[:, k] = 0.25 + coef * out[:, k - 1] + innov[:, k - 1]
    return out


def _gamma(rng, size, d, rate):
    scale = 10.0 if rate else 0.1
    return rng.gamma(2.0, scale, (size, d))


def _mixture_mask(rng, size, d, per_coordinate):
    shape = (size, d) if per_coordinate else (size, 1)
    return rng.random(shape) < 0.8


def _x_law(spec, rng, size):
    d, o = spec.d, spec.options
    s = spec.id
    if s == "v1":
        return _cauchy(rng, size, d, 0.0)
    if s == "v2":
        return _autoregressive(rng, size, d, 0.35)
    if s == "v3":
        return _mvn(rng, size, _toeplitz_cov(d, 0.35))
    if s == "v4":
        return _mvn(rng, size, _equicorr_cov(d, 0.2))
    if s == "v5":
        return np.exp(_mvn(rng, size, _toeplitz_cov(d, 0.35)))
    if s == "v6":
        return np.exp(_mvn(rng, size, _equicorr_cov(d, 0.75)))
    if s == "v7":
        return np.sqrt(3.0) * rng.standard_normal((size, d))
    if s == "v8":
        return _gamma(rng, size, d, o.get("gamma_rate", False))
    if s in ("v9", "v10"):
        return rng.standard_normal((size, d))
    if s == "v11":
        return rng.laplace(0.0, 1.0, (size, d))
    # v12: unit variance except the last coordinate, which has variance 4
    out = rng.standard_normal((size, d))
    out[:, -1] *= 2.0
    return out


def _y_law(spec, rng, size):
    d, o = spec.d, spec.options
    s = spec.id
    if s == "v1":
        return _cauchy(rng, size, d, 0.2)
    if s == "v2":
        return _autoregressive(rng, size, d, 0.5)
    if s == "v3":
        return _mvn(rng, size, _toeplitz_cov(d, 0.65))
    if s == "v4":
        return _mvn(rng, size, _equicorr_cov(d, 0.5))
    if s == "v5":
        return np.exp(_mvn(rng, size, _toeplitz_cov(d, 0.65)))
    if s == "v6":
        return np.exp(_mvn(rng, size, _equicorr_cov(d, 0.5)))
    if s == "v7":
        return 0.25 + np.sqrt(3.0) * rng.standard_normal((size, d))
    if s == "v8":
        v = _gamma(rng, size, d, o.get("gamma_rate", False))
        w = np.exp(rng.standard_normal((size, d)))
        if o.get("v8_literal", False):
            return v * w
        keep = _mixture_mask(rng, size, d, per_coordinate=False)
        return np.where(keep, v, v * w)
    if s in ("v9", "v10"):
        z = rng.standard_normal((size, d))
        if s == "v9":
            noise = rng.uniform(0.0, 10.0, (size, d))
        else:
            noise = rng.normal(10.0, np.sqrt(0.1), (size, d))
        per_coord = o.get("contamination", "sample") == "coordinate"
        keep = _mixture_mask(rng, size, d, per_coord)
        return np.where(keep, z, noise)
    if s == "v11":
        mu = np.zeros(d)
        mu[0] = 1.0
        return mu + rng.laplace(0.0, 1.0, (size, d))
    return rng.standard_normal((size, d))


def generate(spec: SettingSpec):
    """Draw ``(X, Y)`` with shapes ``(m, d)`` and ``(n, d)``."""
    ss_x, ss_y = np.random.SeedSequence(int(spec.seed)).spawn(2)
    rng_x = np.random.default_rng(ss_x)
    rng_y = np.random.default_rng(ss_y)
    x = _x_law(spec, rng_x, spec.m)
    if spec.hypothesis == "null":
        y = _x_law(spec, rng_y, spec.n)
    else:
        y = _y_law(spec, rng_y, spec.n)
    return x, y


def generate_setting(setting, m, n, d, hypothesis="alternate", seed=0, **options):
    """Shorthand for ``generate(SettingSpec(...))``."""
    return generate(SettingSpec(setting, m, n, d, hypothesis, seed, dict(options)))


def sample_law(setting, size, d, seed=0, **options):
    """`size` rows from the X law of a setting (the null reference law)."""
    spec = SettingSpec(setting, size, 1, d, "null", seed, dict(options))
    return _x_law(spec, np.random.default_rng(int(seed)), size)


def shift_series(segment_length=1000, d=3, seed=0, mean_shift=2.0, scale=2.0, rho=0.5):
    """Piecewise-stationary Gaussian series with three change points.

    Four segments of `segment_length` rows: ``N(0, I)``, then a mean shift
    to ``mean_shift * 1``, then a covariance change to
    ``scale**2 * ((1 - rho) I + rho 1 1^T)``, then the mean shifts back
    to 0 with the new covariance kept.

    Returns
    -------
    (series, change_points)
        `change_points` are the 1-based times of the last row of each of
        the first three segments.
    """
    if int(segment_length) != segment_length or segment_length < 1:
        raise InvalidArgumentError("segment_length must be a positive integer")
    if int(d) != d or d < 1:
        raise InvalidArgumentError("d must be a positive integer")
    rng = np.random.default_rng(int(seed))
    L = int(segment_length)
    mu = np.full(d, float(mean_shift))
    cov = scale**2 * _equicorr_cov(d, rho)
    segs = [rng.standard_normal((L, d)),
            mu + rng.standard_normal((L, d)),
            mu + _mvn(rng, L, cov),
            _mvn(rng, L, cov)]
    return np.vstack(segs), [L, 2 * L, 3 * L]
