"""Indian buffet process prior: binary inclusion with slab-precision columns.

Each loading element carries an indicator z_ih; active elements are normal
with column precision beta_h, inactive ones are exactly zero.  Shared
columns update by collapsed log-odds (loading integrated out), columns
owned by a single row die there and are re-proposed by a Metropolis birth
move whose acceptance ratio is computed from explicit log marginal
likelihoods with the new factors integrated out.  The intensity parameter
alpha has a conjugate gamma update involving the harmonic number H_p.

Two prior-odds conventions are available for the shared-column update:
"rows" uses ln(m) - ln(p - 1 - m) and is the default; "printed" uses
ln(m) - ln(T - 1 - m).  A third, "finite", is the collapsed beta-Bernoulli
conditional ln(alpha/K + m) - ln(p - m) of a fixed pool of K columns; the
fixed-pool mode exists so the transition kernel is, exactly, a set of full
conditionals of a forward-simulable joint model (used by the correctness
harness).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CorePriors, CoreState, Dataset
from .dists import Gamma, Normal, ParameterError, spd_cholesky
from .rng import RngStream

__all__ = [
    "IbpHyper",
    "IbpState",
    "IbpChainState",
    "harmonic_number",
    "loading_element_conditional",
    "beta_conditional",
    "z_posterior_logodds",
    "birth_log_acceptance",
    "alpha_conditional",
    "sample_ibp_prior",
    "initial_pool",
    "IbpSampler",
]

# clamp so sigmoid(logodds) never exceeds 1 - 1e-12 when a denominator hits zero
_LOGODDS_CLAMP = math.log((1.0 - 1e-12) / 1e-12)


@dataclass(frozen=True)
class IbpHyper:
    beta_shape: float = 1.0
    beta_rate: float = 1.0
    alpha_shape: float = 1.0
    alpha_rate: float = 1.0
    birth_tuning: float = 1.0
    prior_odds: str = "rows"

    def __post_init__(self):
        for name in ("beta_shape", "beta_rate", "alpha_shape", "alpha_rate", "birth_tuning"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be finite and > 0")
        if self.prior_odds not in ("rows", "printed", "finite"):
            raise ParameterError("prior_odds must be 'rows', 'printed', or 'finite'")


@dataclass
class IbpState:
    """Inclusion matrix (p x k), column precisions, intensity parameter."""

    indicators: np.ndarray
    beta: np.ndarray
    alpha: float

    def __post_init__(self):
        self.indicators = np.asarray(self.indicators, dtype=np.int8)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.indicators.ndim != 2:
            raise ParameterError("indicators must be a p x k matrix")
        if not np.all((self.indicators == 0) | (self.indicators == 1)):
            raise ParameterError("indicators must be 0/1")
        if self.beta.shape != (self.indicators.shape[1],):
            raise ParameterError("beta length must match indicator columns")
        if np.any(self.beta <= 0) or not np.all(np.isfinite(self.beta)):
            raise ParameterError("beta must be finite and strictly positive")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError("alpha must be finite and > 0")

    @property
    def k(self) -> int:
        return self.indicators.shape[1]

    def active_columns(self) -> int:
        return int(np.sum(self.indicators.sum(axis=0) >= 1))


@dataclass
class IbpChainState:
    core: CoreState
    prior: IbpState

    def __post_init__(self):
        off = self.prior.indicators == 0
        if np.any(self.core.loadings[off] != 0.0):
            raise ParameterError("loadings must be exactly zero where indicators are zero")


def harmonic_number(p: int) -> float:
    return float(np.sum(1.0 / np.arange(1, p + 1)))


def loading_element_conditional(
    f_h: np.ndarray, y_resid: np.ndarray, idio_variance: float, beta_h: float
) -> Normal:
    """Posterior of one active loading element.

    `y_resid` is the row's residual with every other active column's
    contribution removed.  Variance (beta_h + f f'/sig2)^-1, mean
    variance * f y_resid / sig2.
    """
    f_h = np.asarray(f_h, dtype=float)
    y_resid = np.asarray(y_resid, dtype=float)
    if idio_variance <= 0:
        raise ParameterError("idio variance must be strictly positive")
    var = 1.0 / (beta_h + float(f_h @ f_h) / idio_variance)
    mean = var * float(f_h @ y_resid) / idio_variance
    return Normal(mean, var)


def beta_conditional(z_col: np.ndarray, loadings_col: np.ndarray, hyper: IbpHyper) -> Gamma:
    """Gamma posterior of one column precision from its active loadings."""
    z = np.asarray(z_col)
    lam = np.asarray(loadings_col, dtype=float)
    n_active = float(np.sum(z))
    ss = float(np.sum((lam * z) ** 2))
    return Gamma(hyper.beta_shape + 0.5 * n_active, hyper.beta_rate + 0.5 * ss)


def _likelihood_logratio(
    f_h: np.ndarray, y_resid: np.ndarray, idio_variance: float, beta_h: float
) -> float:
    # collapsed ratio p(y | z=1)/p(y | z=0) with the loading integrated out
    f_h = np.asarray(f_h, dtype=float)
    y_resid = np.asarray(y_resid, dtype=float)
    v = 1.0 / (beta_h + float(f_h @ f_h) / idio_variance)
    lin = float(f_h @ y_resid) / idio_variance
    return 0.5 * math.log(beta_h * v) + 0.5 * v * lin * lin


def z_posterior_logodds(
    m_minus: int,
    f_h: np.ndarray,
    y_resid: np.ndarray,
    idio_variance: float,
    beta_h: float,
    n_rows: int,
    hyper: IbpHyper,
    n_times: int | None = None,
    pool_size: int | None = None,
    alpha: float | None = None,
) -> float:
    """Posterior log-odds of z_ih = 1 for a shared column.

    Requires m_minus >= 1 under the infinite conventions (singleton columns
    are the birth move's business).  When a prior-odds denominator reaches
    zero the result is clamped so the implied probability is 1 - 1e-12.
    """
    if hyper.prior_odds == "rows":
        if m_minus < 1:
            raise ParameterError("shared-column update needs m_minus >= 1")
        denom = n_rows - 1 - m_minus
        prior = _LOGODDS_CLAMP if denom <= 0 else math.log(m_minus) - math.log(denom)
    elif hyper.prior_odds == "printed":
        if m_minus < 1:
            raise ParameterError("shared-column update needs m_minus >= 1")
        if n_times is None:
            raise ParameterError("printed variant needs n_times")
        denom = n_times - 1 - m_minus
        prior = _LOGODDS_CLAMP if denom <= 0 else math.log(m_minus) - math.log(denom)
    else:
        if pool_size is None or alpha is None:
            raise ParameterError("finite variant needs pool_size and alpha")
        prior = math.log(alpha / pool_size + m_minus) - math.log(n_rows - m_minus)
    total = prior + _likelihood_logratio(f_h, y_resid, idio_variance, beta_h)
    return min(total, _LOGODDS_CLAMP)


def birth_log_acceptance(
    new_loadings: np.ndarray,
    resid_i: np.ndarray,
    idio_variance: float,
    birth_tuning: float,
) -> float:
    """Log Metropolis ratio for appending the proposed singleton columns.

    With the new factors integrated out, the row's residuals are iid
    N(0, sig2 + |lam*|^2) under the proposal versus N(0, sig2) without it,
    so the ratio is an explicit difference of log marginal likelihoods; the
    Poisson prior/proposal terms reduce to -kappa*ln(tuning) (exactly 1 at
    the default tuning of one).
    """
    lam = np.asarray(new_loadings, dtype=float)
    r = np.asarray(resid_i, dtype=float)
    s2 = idio_variance
    tot = s2 + float(lam @ lam)
    n = r.size
    rss = float(r @ r)
    llr = -0.5 * n * (math.log(tot) - math.log(s2)) - 0.5 * rss * (1.0 / tot - 1.0 / s2)
    return llr - lam.size * math.log(birth_tuning)


def alpha_conditional(k_plus: int, p: int, hyper: IbpHyper) -> Gamma:
    """Gamma posterior of the intensity given the number of active columns."""
    return Gamma(hyper.alpha_shape + k_plus, hyper.alpha_rate + harmonic_number(p))


def sample_ibp_prior(p: int, alpha: float, rng: RngStream) -> np.ndarray:
    """One draw of the inclusion matrix from the buffet process itself."""
    gen = rng.generator
    cols: list[np.ndarray] = []
    counts: list[int] = []
    for i in range(p):
        for h in range(len(cols)):
            if gen.random() < counts[h] / (i + 1.0):
                cols[h][i] = 1
                counts[h] += 1
        for _ in range(int(gen.poisson(alpha / (i + 1.0)))):
            col = np.zeros(p, dtype=np.int8)
            col[i] = 1
            cols.append(col)
            counts.append(1)
    if not cols:
        return np.zeros((p, 0), dtype=np.int8)
    return np.column_stack(cols)


def initial_pool(p: int) -> int:
    return min(p, int(math.ceil(5.0 * math.log(p))))


class IbpSampler:
    """Gibbs sampler with collapsed indicator updates and Metropolis births.

    `fixed_pool=True` freezes the column pool: no births, no pruning, and
    the indicator update uses the finite beta-Bernoulli prior odds with
    K = pool size.  That mode is an exact Gibbs sampler for the finite
    model and is what the correctness harness exercises.
    """

    name = "ibp"

    def __init__(
        self,
        hyper: IbpHyper | None = None,
        core_priors: CorePriors | None = None,
        initial_k: int | None = None,
        fixed_pool: bool = False,
        fixed_alpha: float | None = None,
    ):
        self.hyper = hyper or IbpHyper()
        self.core_priors = core_priors or CorePriors()
        self.initial_k = initial_k
        self.fixed_pool = fixed_pool
        self.fixed_alpha = fixed_alpha
        if fixed_pool and self.hyper.prior_odds != "finite":
            self.hyper = IbpHyper(
                beta_shape=self.hyper.beta_shape,
                beta_rate=self.hyper.beta_rate,
                alpha_shape=self.hyper.alpha_shape,
                alpha_rate=self.hyper.alpha_rate,
                birth_tuning=self.hyper.birth_tuning,
                prior_odds="finite",
            )

    def init_state(self, data: Dataset, rng: RngStream) -> IbpChainState:
        p, n_t = data.p, data.T
        k0 = self.initial_k or initial_pool(p)
        hy = self.hyper
        gen = rng.generator
        alpha = self.fixed_alpha or float(
            gen.gamma(hy.alpha_shape, scale=1.0 / hy.alpha_rate)
        )
        Z = (gen.random((p, k0)) < 0.5).astype(np.int8)
        beta = gen.gamma(hy.beta_shape, scale=1.0 / hy.beta_rate, size=k0)
        lam = Z * (gen.standard_normal((p, k0)) / np.sqrt(beta)[None, :])
        sig2 = 1.0 / gen.gamma(
            self.core_priors.idio_shape, scale=1.0 / self.core_priors.idio_scale, size=p
        )
        F = gen.standard_normal((k0, n_t))
        core = CoreState(loadings=lam, idio_variances=sig2, factors=F)
        return IbpChainState(core, IbpState(indicators=Z, beta=beta, alpha=alpha))

    def sweep(
        self,
        chain: IbpChainState,
        data: Dataset,
        g: int,
        rng: RngStream,
        adapt_enabled: bool = True,
    ) -> tuple[IbpChainState, dict]:
        # adapt_enabled is accepted for interface uniformity but ignored: the
        # birth/prune moves are part of the kernel itself (disabling them while
        # singleton clearing stays on would drain the pool); fixed_pool is the
        # switch that freezes dimension.
        del adapt_enabled
        hy = self.hyper
        gen = rng.generator
        Y = data.values
        p, n_t = data.p, data.T
        lam = chain.core.loadings.copy()
        F = chain.core.factors.copy()
        sig2 = chain.core.idio_variances.copy()
        Z = chain.prior.indicators.copy()
        beta = chain.prior.beta.copy()
        alpha = chain.prior.alpha
        k = lam.shape[1]

        E = Y.T - lam @ F  # p x T residuals, kept current throughout
        fnorm2 = np.sum(F * F, axis=1)

        # active loading elements, element-wise scan
        for i in range(p):
            s2 = sig2[i]
            for h in range(k):
                if Z[i, h] != 1:
                    continue
                resid_plus = E[i] + lam[i, h] * F[h]
                var = 1.0 / (beta[h] + fnorm2[h] / s2)
                mean = var * float(F[h] @ resid_plus) / s2
                new = mean + math.sqrt(var) * float(gen.standard_normal())
                lam[i, h] = new
                E[i] = resid_plus - new * F[h]

        # idiosyncratic precisions
        rate = self.core_priors.idio_scale + 0.5 * np.sum(E * E, axis=1)
        sig2 = 1.0 / gen.gamma(
            self.core_priors.idio_shape + 0.5 * n_t, scale=1.0 / rate, size=p
        )

        # factors (shared posterior covariance across t)
        lam_s = lam.T / sig2
        prec_f = np.eye(k) + lam_s @ lam
        Lf = spd_cholesky(prec_f)
        half = np.linalg.solve(Lf, lam_s @ Y.T)
        mean_f = np.linalg.solve(Lf.T, half)
        F = mean_f + np.linalg.solve(Lf.T, gen.standard_normal((k, n_t)))
        E = Y.T - lam @ F
        fnorm2 = np.sum(F * F, axis=1)

        # column precisions
        n_active = Z.sum(axis=0).astype(float)
        ss = np.sum(lam * lam, axis=0)
        beta = gen.gamma(
            hy.beta_shape + 0.5 * n_active,
            scale=1.0 / (hy.beta_rate + 0.5 * ss),
            size=k,
        )

        # indicators, then (infinite mode) singleton births, row by row
        colsum = Z.sum(axis=0).astype(int)
        for i in range(p):
            s2 = sig2[i]
            for h in range(lam.shape[1]):
                m_minus = int(colsum[h]) - int(Z[i, h])
                resid_plus = E[i] + lam[i, h] * F[h]
                if not self.fixed_pool and m_minus == 0:
                    if Z[i, h] == 1:
                        # column owned by this row alone: cleared, birth's business
                        Z[i, h] = 0
                        lam[i, h] = 0.0
                        colsum[h] = 0
                        E[i] = resid_plus
                    continue
                logodds = z_posterior_logodds(
                    m_minus,
                    F[h],
                    resid_plus,
                    s2,
                    beta[h],
                    p,
                    hy,
                    n_times=n_t,
                    pool_size=lam.shape[1],
                    alpha=alpha,
                )
                prob = 1.0 / (1.0 + math.exp(-logodds))
                znew = int(gen.random() < prob)
                if znew:
                    var = 1.0 / (beta[h] + fnorm2[h] / s2)
                    mean = var * float(F[h] @ resid_plus) / s2
                    lam[i, h] = mean + math.sqrt(var) * float(gen.standard_normal())
                else:
                    lam[i, h] = 0.0
                colsum[h] += znew - int(Z[i, h])
                Z[i, h] = znew
                E[i] = resid_plus - lam[i, h] * F[h]

            if self.fixed_pool:
                continue
            kappa = int(gen.poisson(alpha * hy.birth_tuning / (p - 1)))
            if kappa == 0:
                continue
            beta_new = gen.gamma(hy.beta_shape, scale=1.0 / hy.beta_rate, size=kappa)
            lam_new = gen.standard_normal(kappa) / np.sqrt(beta_new)
            log_acc = birth_log_acceptance(lam_new, E[i], s2, hy.birth_tuning)
            if math.log(float(gen.random())) >= log_acc:
                continue
            # accepted: append kappa singleton columns and factors from their
            # conditional given this row's residual
            M = np.eye(kappa) + np.outer(lam_new, lam_new) / s2
            Lm = spd_cholesky(M)
            lin = np.outer(lam_new, E[i]) / s2
            mean_new = np.linalg.solve(Lm.T, np.linalg.solve(Lm, lin))
            F_new = mean_new + np.linalg.solve(Lm.T, gen.standard_normal((kappa, n_t)))
            lam_cols = np.zeros((p, kappa))
            lam_cols[i] = lam_new
            z_cols = np.zeros((p, kappa), dtype=np.int8)
            z_cols[i] = 1
            lam = np.column_stack([lam, lam_cols])
            Z = np.column_stack([Z, z_cols])
            beta = np.concatenate([beta, beta_new])
            F = np.vstack([F, F_new])
            fnorm2 = np.concatenate([fnorm2, np.sum(F_new * F_new, axis=1)])
            colsum = np.concatenate([colsum, np.ones(kappa, dtype=int)])
            E[i] = E[i] - lam_new @ F_new

        # intensity
        k_plus = int(np.sum(colsum >= 1))
        if self.fixed_alpha is None:
            alpha = float(
                gen.gamma(
                    hy.alpha_shape + k_plus,
                    scale=1.0 / (hy.alpha_rate + harmonic_number(p)),
                )
            )

        # drop dead columns (keep one so the factor step stays well-defined)
        if not self.fixed_pool:
            keep = np.nonzero(colsum >= 1)[0]
            if keep.size == 0:
                keep = np.array([0])
            lam = lam[:, keep]
            Z = Z[:, keep]
            beta = beta[keep]
            F = F[keep, :]

        core = CoreState(loadings=lam, idio_variances=sig2, factors=F)
        prior = IbpState(indicators=Z, beta=beta, alpha=alpha)
        return IbpChainState(core, prior), {"k_plus": k_plus}

    def active_count(self, chain: IbpChainState) -> int:
        return chain.prior.active_columns()

    trace_fields = ("iteration", "pool", "k_plus", "alpha")

    def trace_row(self, chain: IbpChainState, g: int, info: dict) -> tuple:
        return (g, chain.prior.k, chain.prior.active_columns(), chain.prior.alpha)

    def extra_summaries(self, chain: IbpChainState) -> dict[str, float]:
        return {"alpha": chain.prior.alpha}

    # -- checkpoint support --------------------------------------------------

    def pack_state(self, chain: IbpChainState) -> dict[str, np.ndarray]:
        return {
            "loadings": chain.core.loadings,
            "idio_variances": chain.core.idio_variances,
            "factors": chain.core.factors,
            "indicators": chain.prior.indicators,
            "beta": chain.prior.beta,
            "alpha": np.array(chain.prior.alpha),
        }

    def unpack_state(self, arrays: dict[str, np.ndarray]) -> IbpChainState:
        core = CoreState(
            loadings=arrays["loadings"],
            idio_variances=arrays["idio_variances"],
            factors=arrays["factors"],
        )
        prior = IbpState(
            indicators=arrays["indicators"],
            beta=arrays["beta"],
            alpha=float(arrays["alpha"]),
        )
        return IbpChainState(core, prior)
