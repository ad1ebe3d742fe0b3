"""Gaussian latent factor model core.

Model: y_t ~ N_p(0, Omega) with Omega = Lambda Lambda' + Sigma, where
Lambda is a p x k loading matrix, Sigma = diag(sigma_1^2..sigma_p^2) is
idiosyncratic noise, and factors f_t ~ N_k(0, I).  The three conditional
updates here (loading rows, idiosyncratic precisions, factors) are shared
verbatim by every shrinkage prior in the package; priors differ only in
the per-element precision matrix they pass to :func:`core_sweep`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dists import Gamma, ParameterError, cholesky_solve_posterior, spd_cholesky, symmetrize
from .rng import RngStream

__all__ = [
    "Dataset",
    "CorePriors",
    "CoreState",
    "AdaptationSchedule",
    "loadings_row_conditional",
    "idio_conditional",
    "factor_conditional",
    "implied_covariance",
    "core_sweep",
    "simulate_observations",
]

_DATASET_MAGIC = b"IFDS"
_DATASET_VERSION = 1


@dataclass
class Dataset:
    """T x p observation matrix with no missing values."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim != 2:
            raise ParameterError("dataset must be a 2-d array")
        if vals.shape[0] < 2 or vals.shape[1] < 2:
            raise ParameterError("dataset needs at least 2 rows and 2 columns")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("dataset contains non-finite values")
        self.values = vals

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    # -- CSV ----------------------------------------------------------------

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        """Load a T x p CSV; a single leading header row is tolerated."""
        path = Path(path)
        with path.open() as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise ParameterError(f"{path}: empty dataset file")
        start = 0
        try:
            [float(tok) for tok in lines[0].split(",")]
        except ValueError:
            start = 1
        rows: list[list[float]] = []
        for i, ln in enumerate(lines[start:], start=1):
            try:
                row = [float(tok) for tok in ln.split(",")]
            except ValueError as exc:
                raise ParameterError(f"{path}: data row {i}: {exc}") from exc
            if rows and len(row) != len(rows[0]):
                raise ParameterError(
                    f"{path}: data row {i}: expected {len(rows[0])} columns, "
                    f"got {len(row)}"
                )
            rows.append(row)
        return cls(np.array(rows, dtype=float))

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    # -- binary -------------------------------------------------------------

    @classmethod
    def from_binary(cls, path: str | Path) -> "Dataset":
        raw = Path(path).read_bytes()
        if raw[:4] != _DATASET_MAGIC:
            raise ParameterError("not a dataset checkpoint (bad magic)")
        version, T, p = struct.unpack("<IQQ", raw[4:24])
        if version != _DATASET_VERSION:
            raise ParameterError(f"unsupported dataset checkpoint version {version}")
        vals = np.frombuffer(raw[24:], dtype="<f8", count=T * p).reshape(T, p)
        return cls(vals.copy())

    def to_binary(self, path: str | Path) -> None:
        header = _DATASET_MAGIC + struct.pack("<IQQ", _DATASET_VERSION, self.T, self.p)
        Path(path).write_bytes(header + self.values.astype("<f8").tobytes(order="C"))


@dataclass(frozen=True)
class CorePriors:
    """Gamma(idio_shape, idio_scale) prior on each idiosyncratic precision."""

    idio_shape: float = 1.0
    idio_scale: float = 0.25

    def __post_init__(self):
        if not (np.isfinite(self.idio_shape) and self.idio_shape > 0):
            raise ParameterError("idio_shape must be finite and > 0")
        if not (np.isfinite(self.idio_scale) and self.idio_scale > 0):
            raise ParameterError("idio_scale must be finite and > 0")


@dataclass
class CoreState:
    """Loadings (p x k), idio variances (p,), factors (k x T)."""

    loadings: np.ndarray
    idio_variances: np.ndarray
    factors: np.ndarray

    def __post_init__(self):
        self.loadings = np.asarray(self.loadings, dtype=float)
        self.idio_variances = np.asarray(self.idio_variances, dtype=float)
        self.factors = np.asarray(self.factors, dtype=float)
        p, k = self.loadings.shape
        if k < 1:
            raise ParameterError("loading matrix needs at least one column")
        if self.idio_variances.shape != (p,):
            raise ParameterError("idio_variances length must match loading rows")
        if self.factors.shape[0] != k:
            raise ParameterError("factor rows must match loading columns")
        if not (
            np.all(np.isfinite(self.loadings))
            and np.all(np.isfinite(self.factors))
            and np.all(np.isfinite(self.idio_variances))
        ):
            raise ParameterError("state contains non-finite values")
        if np.any(self.idio_variances <= 0):
            raise ParameterError("idio variances must be strictly positive")

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    @property
    def n_times(self) -> int:
        return self.factors.shape[1]


@dataclass(frozen=True)
class AdaptationSchedule:
    """Exponentially decaying adaptation probability p(g) = exp(a0 + a1 g).

    No adaptation happens before `burn_in_gate`; after it, an adaptation
    move fires at iteration g with probability min(1, exp(alpha0 + alpha1*g)),
    which is non-increasing in g (alpha1 <= 0 enforced).
    """

    alpha0: float
    alpha1: float
    burn_in_gate: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.alpha0) and np.isfinite(self.alpha1)):
            raise ParameterError("alpha0/alpha1 must be finite")
        if self.alpha1 > 0:
            raise ParameterError("alpha1 must be <= 0 so p(g) is non-increasing")
        if self.burn_in_gate < 0:
            raise ParameterError("burn_in_gate must be >= 0")

    def probability(self, g: int) -> float:
        if g < self.burn_in_gate:
            return 0.0
        return min(1.0, float(np.exp(self.alpha0 + self.alpha1 * g)))


# ---------------------------------------------------------------------------
# conditionals
# ---------------------------------------------------------------------------

def loadings_row_conditional(
    factors: np.ndarray,
    y_i: np.ndarray,
    idio_variance: float,
    prior_precisions: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior of one loading row given factors and its noise variance.

    Precision is diag(prior_precisions) + F F' / sigma_i^2 and the linear
    term is F y_i / sigma_i^2; returns (mean, covariance).
    """
    F = np.asarray(factors, dtype=float)
    y_i = np.asarray(y_i, dtype=float)
    prior_precisions = np.asarray(prior_precisions, dtype=float)
    if np.any(prior_precisions <= 0):
        raise ParameterError("prior precisions must be strictly positive")
    if idio_variance <= 0:
        raise ParameterError("idio variance must be strictly positive")
    prec = np.diag(prior_precisions) + (F @ F.T) / idio_variance
    lin = F @ y_i / idio_variance
    return cholesky_solve_posterior(prec, lin)


def idio_conditional(residuals_i: np.ndarray, priors: CorePriors) -> Gamma:
    """Gamma posterior for one idiosyncratic precision sigma_i^{-2}."""
    r = np.asarray(residuals_i, dtype=float)
    return Gamma(priors.idio_shape + 0.5 * r.size, priors.idio_scale + 0.5 * float(r @ r))


def factor_conditional(
    loadings: np.ndarray, idio_variances: np.ndarray, y_t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior of one factor vector: N((I + L'S^-1 L)^-1 L'S^-1 y, (I + L'S^-1 L)^-1)."""
    lam = np.asarray(loadings, dtype=float)
    sig2 = np.asarray(idio_variances, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    if np.any(sig2 <= 0):
        raise ParameterError("idio variances must be strictly positive")
    lam_s = lam.T / sig2
    prec = np.eye(lam.shape[1]) + lam_s @ lam
    lin = lam_s @ y_t
    return cholesky_solve_posterior(prec, lin)


def implied_covariance(loadings: np.ndarray, idio_variances: np.ndarray) -> np.ndarray:
    """Omega = Lambda Lambda' + diag(sigma^2)."""
    lam = np.asarray(loadings, dtype=float)
    return lam @ lam.T + np.diag(np.asarray(idio_variances, dtype=float))


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _draw_rows_from_precisions(
    prec_stack: np.ndarray, lin_stack: np.ndarray, gen: np.random.Generator
) -> np.ndarray:
    # One batched Cholesky serves both the mean solve and the N(0, P^-1) draw.
    L = spd_cholesky(prec_stack)
    Lt = np.swapaxes(L, -1, -2)
    half = np.linalg.solve(L, lin_stack[..., None])
    mean = np.linalg.solve(Lt, half)[..., 0]
    z = gen.standard_normal(lin_stack.shape)
    return mean + np.linalg.solve(Lt, z[..., None])[..., 0]


def core_sweep(
    state: CoreState,
    data: Dataset,
    priors: CorePriors,
    prior_precisions: np.ndarray,
    rng: RngStream,
) -> CoreState:
    """One systematic Gibbs scan: loading rows, then noise, then factors.

    `prior_precisions` is the p x k matrix of per-element normal prior
    precisions on the loadings, supplied by the shrinkage prior in force.
    Residuals for the noise update are recomputed after the loading update
    (sequential-scan semantics).  Draw order is fixed: one (p, k) normal
    block, one length-p gamma block, one (k, T) normal block.
    """
    Y = data.values
    F = state.factors
    sig2 = state.idio_variances
    p, k = state.loadings.shape
    n_t = data.T
    prior_precisions = np.asarray(prior_precisions, dtype=float)
    if prior_precisions.shape != (p, k):
        raise ParameterError("prior_precisions must be p x k")
    if np.any(prior_precisions <= 0):
        raise ParameterError("prior precisions must be strictly positive")
    gen = rng.generator

    # loading rows: precision_i = diag(prior_prec_i) + F F' / sig2_i
    FFt = F @ F.T
    prec = FFt[None, :, :] / sig2[:, None, None]
    idx = np.arange(k)
    prec[:, idx, idx] += prior_precisions
    lin = (F @ Y).T / sig2[:, None]
    lam = _draw_rows_from_precisions(prec, lin, gen)

    # idiosyncratic precisions from post-update residuals
    resid = Y - (lam @ F).T
    shape = priors.idio_shape + 0.5 * n_t
    rate = priors.idio_scale + 0.5 * np.sum(resid * resid, axis=0)
    sig2_new = 1.0 / gen.gamma(shape, scale=1.0 / rate, size=p)

    # factors share one posterior covariance across t
    lam_s = lam.T / sig2_new
    prec_f = np.eye(k) + lam_s @ lam
    Lf = spd_cholesky(prec_f)
    half = np.linalg.solve(Lf, lam_s @ Y.T)
    mean_f = np.linalg.solve(Lf.T, half)
    F_new = mean_f + np.linalg.solve(Lf.T, gen.standard_normal((k, n_t)))

    return CoreState(loadings=lam, idio_variances=sig2_new, factors=F_new)


def simulate_observations(state: CoreState, rng: RngStream) -> np.ndarray:
    """Draw a T x p data matrix from the likelihood at the given state."""
    gen = rng.generator
    mean = (state.loadings @ state.factors).T
    noise = np.sqrt(state.idio_variances)[None, :] * gen.standard_normal(mean.shape)
    return mean + noise
