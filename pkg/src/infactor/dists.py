"""Distribution specs, log-densities, draws, and shared linear algebra.

This module is the single home for numerical policy: log-space categorical
selection uses a max-shift before exponentiation, posterior covariances are
symmetrized after inversion, and Cholesky failures raise
:class:`NumericError` carrying a minimum-eigenvalue estimate instead of
propagating bare LAPACK errors.

Scale conventions, chosen once and used everywhere: ``Gamma`` takes a rate,
``InverseGamma`` takes a scale (if ``X ~ Gamma(a, rate=b)`` then
``1/X ~ InverseGamma(a, scale=b)``), ``Normal`` takes a variance, and
``StudentT`` takes a squared scale so that a ``StudentT(2a, 0, b/a)`` is
exactly the scale mixture of ``Normal(0, v)`` over ``v ~ InverseGamma(a, b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

__all__ = [
    "ParameterError",
    "NumericError",
    "Gamma",
    "InverseGamma",
    "Beta",
    "Normal",
    "MvNormal",
    "StudentT",
    "Categorical",
    "Bernoulli",
    "Poisson",
    "Uniform",
    "log_density",
    "draw",
    "log_normalize",
    "symmetrize",
    "spd_cholesky",
    "cholesky_solve_posterior",
]

_LOG_2PI = math.log(2.0 * math.pi)


class ParameterError(ValueError):
    """A distribution parameter is outside its legal domain."""


class NumericError(RuntimeError):
    """A numerical operation failed; carries diagnostic detail."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        if min_eigenvalue is not None:
            message = f"{message} (min eigenvalue estimate {min_eigenvalue:.3e})"
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


def _finite_positive(x: float, name: str) -> None:
    _require(np.isfinite(x) and x > 0.0, f"{name} must be finite and > 0, got {x!r}")


# ---------------------------------------------------------------------------
# log-space helpers
# ---------------------------------------------------------------------------

def log_normalize(log_weights: np.ndarray) -> np.ndarray:
    """Return log-probabilities from unnormalized log-weights (max-shift)."""
    lw = np.asarray(log_weights, dtype=float)
    m = np.max(lw)
    if not np.isfinite(m):
        raise NumericError("log-weights have no finite entry")
    shifted = lw - m
    return shifted - math.log(np.sum(np.exp(shifted)))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """(M + M^T)/2, guarding solve output against drift."""
    return 0.5 * (m + m.T)


def spd_cholesky(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; NumericError with min-eig estimate on failure."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        sym = 0.5 * (m + np.swapaxes(m, -1, -2))
        min_eig = float(np.min(np.linalg.eigvalsh(sym)))
        raise NumericError("matrix not positive definite", min_eigenvalue=min_eig)


def cholesky_solve_posterior(
    precision: np.ndarray, linear: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Turn natural parameters into a (mean, covariance) pair.

    Given a posterior precision matrix ``P`` and linear term ``b`` (so the
    density is proportional to ``exp(-x'Px/2 + b'x)``), returns
    ``(P^{-1} b, P^{-1})`` via one Cholesky factorization.  The returned
    covariance is symmetrized.
    """
    precision = np.asarray(precision, dtype=float)
    linear = np.asarray(linear, dtype=float)
    if precision.ndim != 2 or precision.shape[0] != precision.shape[1]:
        raise ParameterError("precision must be a square matrix")
    if linear.shape != (precision.shape[0],):
        raise ParameterError("linear term length must match precision dimension")
    L = spd_cholesky(precision)
    eye = np.eye(precision.shape[0])
    Linv = np.linalg.solve(L, eye)
    cov = symmetrize(Linv.T @ Linv)
    mean = cov @ linear
    return mean, cov


# ---------------------------------------------------------------------------
# distribution specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gamma:
    """Gamma with shape/rate; density x^(a-1) e^(-rate x) rate^a / G(a)."""

    shape: float
    rate: float

    def __post_init__(self):
        _finite_positive(self.shape, "shape")
        _finite_positive(self.rate, "rate")

    def log_density(self, x: float) -> float:
        if x <= 0.0 or not np.isfinite(x):
            return -np.inf
        a, r = self.shape, self.rate
        return a * math.log(r) - math.lgamma(a) + (a - 1.0) * math.log(x) - r * x

    def draw(self, rng: RngStream) -> float:
        return float(rng.generator.gamma(self.shape, scale=1.0 / self.rate))


@dataclass(frozen=True)
class InverseGamma:
    """Inverse gamma with shape/scale; mean scale/(shape-1) for shape > 1."""

    shape: float
    scale: float

    def __post_init__(self):
        _finite_positive(self.shape, "shape")
        _finite_positive(self.scale, "scale")

    def log_density(self, x: float) -> float:
        if x <= 0.0 or not np.isfinite(x):
            return -np.inf
        a, b = self.shape, self.scale
        return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(x) - b / x

    def draw(self, rng: RngStream) -> float:
        return 1.0 / float(rng.generator.gamma(self.shape, scale=1.0 / self.scale))


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        _finite_positive(self.a, "a")
        _finite_positive(self.b, "b")

    def log_density(self, x: float) -> float:
        if x <= 0.0 or x >= 1.0:
            return -np.inf
        lbeta = math.lgamma(self.a) + math.lgamma(self.b) - math.lgamma(self.a + self.b)
        return (self.a - 1.0) * math.log(x) + (self.b - 1.0) * math.log1p(-x) - lbeta

    def draw(self, rng: RngStream) -> float:
        return float(rng.generator.beta(self.a, self.b))


@dataclass(frozen=True)
class Normal:
    """Univariate normal parameterized by mean and variance."""

    mean: float
    variance: float

    def __post_init__(self):
        _require(np.isfinite(self.mean), "mean must be finite")
        _finite_positive(self.variance, "variance")

    def log_density(self, x: float) -> float:
        if not np.isfinite(x):
            return -np.inf
        return -0.5 * (_LOG_2PI + math.log(self.variance)) - 0.5 * (x - self.mean) ** 2 / self.variance

    def draw(self, rng: RngStream) -> float:
        return self.mean + math.sqrt(self.variance) * float(rng.generator.standard_normal())


@dataclass(frozen=True)
class MvNormal:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        _require(mean.ndim == 1, "mean must be a vector")
        _require(cov.shape == (mean.size, mean.size), "cov must be square, matching mean")
        _require(np.all(np.isfinite(mean)) and np.all(np.isfinite(cov)), "parameters must be finite")
        scale = max(float(np.max(np.abs(cov))), 1e-300)
        _require(
            float(np.max(np.abs(cov - cov.T))) <= 1e-10 * scale,
            "cov must be symmetric within 1e-10 relative",
        )

    def log_density(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        k = self.mean.size
        L = spd_cholesky(self.cov)
        dev = np.linalg.solve(L, x - self.mean)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        return -0.5 * (k * _LOG_2PI + logdet + float(dev @ dev))

    def draw(self, rng: RngStream) -> np.ndarray:
        L = spd_cholesky(self.cov)
        z = rng.generator.standard_normal(self.mean.size)
        return self.mean + L @ z


@dataclass(frozen=True)
class StudentT:
    """Student t with squared-scale parameterization (see module docstring)."""

    dof: float
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        _finite_positive(self.dof, "dof")
        _require(np.isfinite(self.loc), "loc must be finite")
        _finite_positive(self.scale, "scale")

    def log_density(self, x: float) -> float:
        if not np.isfinite(x):
            return -np.inf
        v, s = self.dof, self.scale
        z2 = (x - self.loc) ** 2 / s
        return (
            math.lgamma(0.5 * (v + 1.0))
            - math.lgamma(0.5 * v)
            - 0.5 * math.log(v * math.pi * s)
            - 0.5 * (v + 1.0) * math.log1p(z2 / v)
        )

    def draw(self, rng: RngStream) -> float:
        return self.loc + math.sqrt(self.scale) * float(rng.generator.standard_t(self.dof))


@dataclass(frozen=True)
class Categorical:
    """Categorical over indices 0..n-1 given unnormalized log-weights."""

    log_weights: np.ndarray
    _log_probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        _require(lw.ndim == 1 and lw.size >= 1, "log_weights must be a non-empty vector")
        _require(not np.any(np.isnan(lw)) and not np.any(lw == np.inf), "log_weights must be < +inf and not NaN")
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "_log_probs", log_normalize(lw))

    @property
    def log_probs(self) -> np.ndarray:
        return self._log_probs

    def log_density(self, x: int) -> float:
        idx = int(x)
        if idx != x or idx < 0 or idx >= self._log_probs.size:
            return -np.inf
        return float(self._log_probs[idx])

    def draw(self, rng: RngStream) -> int:
        probs = np.exp(self._log_probs)
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        u = float(rng.generator.random())
        return int(np.searchsorted(cdf, u, side="right"))


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        _require(np.isfinite(self.p) and 0.0 <= self.p <= 1.0, "p must lie in [0, 1]")

    def log_density(self, x: int) -> float:
        if x == 1:
            return math.log(self.p) if self.p > 0.0 else -np.inf
        if x == 0:
            return math.log1p(-self.p) if self.p < 1.0 else -np.inf
        return -np.inf

    def draw(self, rng: RngStream) -> int:
        return int(rng.generator.random() < self.p)


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        _finite_positive(self.rate, "rate")

    def log_density(self, x: int) -> float:
        k = int(x)
        if k != x or k < 0:
            return -np.inf
        return k * math.log(self.rate) - self.rate - math.lgamma(k + 1.0)

    def draw(self, rng: RngStream) -> int:
        return int(rng.generator.poisson(self.rate))


@dataclass(frozen=True)
class Uniform:
    """Standard uniform on (0, 1)."""

    def log_density(self, x: float) -> float:
        return 0.0 if 0.0 < x < 1.0 else -np.inf

    def draw(self, rng: RngStream) -> float:
        return float(rng.generator.random())


DistSpec = (
    Gamma
    | InverseGamma
    | Beta
    | Normal
    | MvNormal
    | StudentT
    | Categorical
    | Bernoulli
    | Poisson
    | Uniform
)


def log_density(spec: DistSpec, x) -> float:
    """Log density (or log mass) of `spec` at `x`; -inf outside support."""
    return spec.log_density(x)


def draw(spec: DistSpec, rng: RngStream):
    """One draw from `spec` using the given stream."""
    return spec.draw(rng)
