"""Cumulative shrinkage prior: stick-breaking spike-and-slab over columns.

Column h of the loading matrix has variance theta_h drawn from a two-group
mixture: a point-mass spike at a small constant variance, reached with
probability pi_h = sum_{l<=h} w_l, or an inverse-gamma slab.  The weights
w follow a truncated stick-breaking construction, so pi_h is nondecreasing
in h and later columns are progressively more likely to be shrunk to the
spike.  A latent assignment z_h makes all conditionals conjugate: column h
sits in the spike exactly when z_h <= h (zero-based).  The truncation level
H adapts: when fewer than H-1 columns are active the chain keeps the active
ones plus one spike column, otherwise it grows by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AdaptationSchedule, CorePriors, CoreState, Dataset, core_sweep
from .dists import Beta, ParameterError, log_normalize
from .rng import RngStream

__all__ = [
    "CuspHyper",
    "CuspState",
    "CuspChainState",
    "stick_breaking_weights",
    "slab_log_density",
    "z_conditional_logprobs",
    "v_conditional",
    "theta_posterior",
    "theta_update",
    "marginal_loading_density",
    "adapt_cusp",
    "CuspSampler",
]


@dataclass(frozen=True)
class CuspHyper:
    """Hyperparameters of the cumulative shrinkage prior.

    `slab_form` selects the column slab density used in the z update:
    "joint" is the exact multivariate-t marginal of a column sharing one
    slab variance; "product" multiplies the univariate-t marginals instead.
    """

    stick_alpha: float = 5.0
    theta_shape: float = 2.0
    theta_scale: float = 2.0
    spike_variance: float = 0.05
    slab_form: str = "joint"

    def __post_init__(self):
        for name in ("stick_alpha", "theta_shape", "theta_scale", "spike_variance"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be finite and > 0")
        if self.slab_form not in ("joint", "product"):
            raise ParameterError("slab_form must be 'joint' or 'product'")


@dataclass
class CuspState:
    """Column variances, spike/slab assignments, and stick-breaking state."""

    theta: np.ndarray
    z: np.ndarray
    v: np.ndarray
    w: np.ndarray
    h_star: int

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.z = np.asarray(self.z, dtype=int)
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        H = self.theta.size
        if not (self.z.shape == self.v.shape == self.w.shape == (H,)):
            raise ParameterError("theta/z/v/w must share one length")
        if np.any(self.theta <= 0):
            raise ParameterError("theta must be strictly positive")
        if np.any((self.z < 0) | (self.z >= H)):
            raise ParameterError("z entries must index stick segments")
        if np.any(self.v <= 0) or np.any(self.v > 1) or self.v[-1] != 1.0:
            raise ParameterError("v must lie in (0, 1] with final element 1")
        ref = stick_breaking_weights(self.v)
        if np.max(np.abs(self.w - ref)) > 1e-12:
            raise ParameterError("w does not match the stick-breaking product of v")
        if abs(float(np.sum(self.w)) - 1.0) > 1e-12:
            raise ParameterError("w must sum to one")
        if self.h_star != int(np.sum(self.z > np.arange(H))):
            raise ParameterError("stored h_star disagrees with z")

    @property
    def H(self) -> int:
        return self.theta.size


@dataclass
class CuspChainState:
    core: CoreState
    prior: CuspState


def stick_breaking_weights(v: np.ndarray) -> np.ndarray:
    """w_l = v_l * prod_{m<l} (1 - v_m); v must end in 1 so w sums to one."""
    v = np.asarray(v, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v[:-1])])
    return v * remaining


def slab_log_density(loadings_col: np.ndarray, hyper: CuspHyper) -> float:
    """Log marginal slab density of a whole column.

    The exact marginal of lambda ~ N_p(0, theta I) with one shared
    theta ~ InvGamma(a, b) is a p-variate Student t with dof 2a and squared
    scale b/a ("joint").  The "product" form multiplies the univariate-t
    marginals, ignoring the shared-variance coupling.
    """
    lam = np.asarray(loadings_col, dtype=float)
    p = lam.size
    nu = 2.0 * hyper.theta_shape
    s = hyper.theta_scale / hyper.theta_shape
    if hyper.slab_form == "joint":
        ss = float(lam @ lam)
        return (
            math.lgamma(0.5 * (nu + p))
            - math.lgamma(0.5 * nu)
            - 0.5 * p * math.log(nu * math.pi * s)
            - 0.5 * (nu + p) * math.log1p(ss / (nu * s))
        )
    const = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi * s)
    return float(p * const - 0.5 * (nu + 1.0) * np.sum(np.log1p(lam * lam / (nu * s))))


def _spike_log_density(loadings_col: np.ndarray, hyper: CuspHyper) -> float:
    lam = np.asarray(loadings_col, dtype=float)
    th = hyper.spike_variance
    return -0.5 * lam.size * math.log(2.0 * math.pi * th) - 0.5 * float(lam @ lam) / th


def z_conditional_logprobs(
    h: int, loadings_col: np.ndarray, w: np.ndarray, hyper: CuspHyper
) -> np.ndarray:
    """Normalized log-probabilities of the assignment z_h (h zero-based).

    Segments l <= h pair the weight with the spike density of the column;
    segments l > h pair it with the slab marginal.
    """
    w = np.asarray(w, dtype=float)
    H = w.size
    if not 0 <= h < H:
        raise ParameterError("column index out of range")
    lp_spike = _spike_log_density(loadings_col, hyper)
    lp_slab = slab_log_density(loadings_col, hyper)
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    lp = logw + np.where(np.arange(H) <= h, lp_spike, lp_slab)
    return log_normalize(lp)


def v_conditional(l: int, z: np.ndarray, stick_alpha: float) -> Beta:
    """Beta posterior of stick fraction v_l (l zero-based, l < H-1)."""
    z = np.asarray(z, dtype=int)
    if not 0 <= l < z.size - 1:
        raise ParameterError("stick index out of range (last fraction is fixed at 1)")
    return Beta(1.0 + int(np.sum(z == l)), stick_alpha + int(np.sum(z > l)))


def theta_posterior(loadings_col: np.ndarray, hyper: CuspHyper):
    """Inverse-gamma posterior of a slab column variance."""
    from .dists import InverseGamma

    lam = np.asarray(loadings_col, dtype=float)
    return InverseGamma(
        hyper.theta_shape + 0.5 * lam.size, hyper.theta_scale + 0.5 * float(lam @ lam)
    )


def theta_update(
    h: int, z_h: int, loadings_col: np.ndarray, hyper: CuspHyper, rng: RngStream
) -> float:
    """Spike columns get the spike variance exactly; slab columns draw IG."""
    if z_h <= h:
        return hyper.spike_variance
    return theta_posterior(loadings_col, hyper).draw(rng)


def marginal_loading_density(x: float, pi_h: float, hyper: CuspHyper) -> float:
    """Density of one loading element marginally of its column variance:
    (1 - pi_h) * t_{2a}(x; 0, b/a) + pi_h * N(x; 0, spike_variance)."""
    if not 0.0 <= pi_h <= 1.0:
        raise ParameterError("pi_h must lie in [0, 1]")
    nu = 2.0 * hyper.theta_shape
    s = hyper.theta_scale / hyper.theta_shape
    log_t = (
        math.lgamma(0.5 * (nu + 1.0))
        - math.lgamma(0.5 * nu)
        - 0.5 * math.log(nu * math.pi * s)
        - 0.5 * (nu + 1.0) * math.log1p(x * x / (nu * s))
    )
    th = hyper.spike_variance
    log_n = -0.5 * math.log(2.0 * math.pi * th) - 0.5 * x * x / th
    return (1.0 - pi_h) * math.exp(log_t) + pi_h * math.exp(log_n)


def adapt_cusp(
    chain: CuspChainState,
    hyper: CuspHyper,
    sched: AdaptationSchedule,
    g: int,
    rng: RngStream,
) -> tuple[CuspChainState, bool]:
    """Truncation adaptation.

    With probability `sched.probability(g)`: if fewer than H-1 columns are
    active, keep exactly the active columns (original order) plus one fresh
    spike column; otherwise grow by one spike column.  Fresh columns carry
    loadings from N(0, spike_variance I), a N(0, I) factor row, and the
    spike variance; stick state keeps surviving fractions and the final
    fraction stays pinned at one.  Draw order: gate uniform, then (grow
    branch only) one Beta stick fraction, then loadings, then factor row.
    """
    prob = sched.probability(g)
    if prob <= 0.0:
        return chain, False
    gen = rng.generator
    if float(gen.random()) >= prob:
        return chain, False

    core, prior = chain.core, chain.prior
    H = prior.H
    p, n_t = core.p, core.n_times
    active = prior.z > np.arange(H)
    h_star = int(np.sum(active))

    if h_star < H - 1:
        keep = np.nonzero(active)[0]
        lam_col = math.sqrt(hyper.spike_variance) * gen.standard_normal(p)
        f_row = gen.standard_normal(n_t)
        H_new = h_star + 1
        v = np.concatenate([prior.v[keep], [1.0]])
        z = np.concatenate([np.full(h_star, H_new - 1, dtype=int), [0]])
        new_core = CoreState(
            loadings=np.column_stack([core.loadings[:, keep], lam_col]),
            idio_variances=core.idio_variances,
            factors=np.vstack([core.factors[keep, :], f_row[None, :]]),
        )
        new_prior = CuspState(
            theta=np.concatenate([prior.theta[keep], [hyper.spike_variance]]),
            z=z,
            v=v,
            w=stick_breaking_weights(v),
            h_star=h_star,
        )
        return CuspChainState(new_core, new_prior), True

    v_new = max(float(gen.beta(1.0, hyper.stick_alpha)), 1e-300)
    lam_col = math.sqrt(hyper.spike_variance) * gen.standard_normal(p)
    f_row = gen.standard_normal(n_t)
    v = np.concatenate([prior.v[:-1], [v_new], [1.0]])
    z = np.concatenate([prior.z, [0]])
    new_core = CoreState(
        loadings=np.column_stack([core.loadings, lam_col]),
        idio_variances=core.idio_variances,
        factors=np.vstack([core.factors, f_row[None, :]]),
    )
    new_prior = CuspState(
        theta=np.concatenate([prior.theta, [hyper.spike_variance]]),
        z=z,
        v=v,
        w=stick_breaking_weights(v),
        h_star=h_star,
    )
    return CuspChainState(new_core, new_prior), True


class CuspSampler:
    """Adaptive Gibbs sampler under the cumulative shrinkage prior."""

    name = "cusp"

    def __init__(
        self,
        hyper: CuspHyper | None = None,
        core_priors: CorePriors | None = None,
        schedule: AdaptationSchedule | None = None,
        initial_h: int | None = None,
    ):
        self.hyper = hyper or CuspHyper()
        self.core_priors = core_priors or CorePriors()
        self.schedule = schedule
        self.initial_h = initial_h

    def resolved_schedule(self, data: Dataset, burn_in: int = 0) -> AdaptationSchedule:
        if self.schedule is not None:
            return self.schedule
        return AdaptationSchedule(alpha0=-1.0, alpha1=-5e-4, burn_in_gate=burn_in)

    def init_state(self, data: Dataset, rng: RngStream) -> CuspChainState:
        """All latents drawn from their priors at truncation H = p + 1."""
        hy = self.hyper
        p, n_t = data.p, data.T
        H = self.initial_h or (p + 1)
        gen = rng.generator
        v = np.concatenate(
            [np.maximum(gen.beta(1.0, hy.stick_alpha, size=H - 1), 1e-300), [1.0]]
        )
        w = stick_breaking_weights(v)
        cdf = np.cumsum(w)
        cdf[-1] = 1.0
        z = np.searchsorted(cdf, gen.random(H), side="right").astype(int)
        spike = z <= np.arange(H)
        theta = np.full(H, hy.spike_variance)
        n_slab = int(np.sum(~spike))
        theta[~spike] = hy.theta_scale / gen.gamma(hy.theta_shape, size=n_slab)
        lam = gen.standard_normal((p, H)) * np.sqrt(theta)[None, :]
        sig2 = 1.0 / gen.gamma(
            self.core_priors.idio_shape, scale=1.0 / self.core_priors.idio_scale, size=p
        )
        F = gen.standard_normal((H, n_t))
        core = CoreState(loadings=lam, idio_variances=sig2, factors=F)
        prior = CuspState(
            theta=theta, z=z, v=v, w=w, h_star=int(np.sum(z > np.arange(H)))
        )
        return CuspChainState(core, prior)

    def sweep(
        self,
        chain: CuspChainState,
        data: Dataset,
        g: int,
        rng: RngStream,
        adapt_enabled: bool = True,
        burn_in: int = 0,
    ) -> tuple[CuspChainState, dict]:
        hy = self.hyper
        core, prior = chain.core, chain.prior
        H = prior.H
        p = core.p
        prior_prec = np.broadcast_to(1.0 / prior.theta[None, :], (p, H))
        core = core_sweep(core, data, self.core_priors, prior_prec, rng)
        gen = rng.generator
        lam = core.loadings

        # z: one categorical per column, spike density for l <= h, slab above
        ss = np.sum(lam * lam, axis=0)
        th_sp = hy.spike_variance
        lp_spike = -0.5 * p * math.log(2.0 * math.pi * th_sp) - 0.5 * ss / th_sp
        nu = 2.0 * hy.theta_shape
        s = hy.theta_scale / hy.theta_shape
        if hy.slab_form == "joint":
            lp_slab = (
                math.lgamma(0.5 * (nu + p))
                - math.lgamma(0.5 * nu)
                - 0.5 * p * math.log(nu * math.pi * s)
                - 0.5 * (nu + p) * np.log1p(ss / (nu * s))
            )
        else:
            const = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(
                nu * math.pi * s
            )
            lp_slab = p * const - 0.5 * (nu + 1.0) * np.sum(
                np.log1p(lam * lam / (nu * s)), axis=0
            )
        with np.errstate(divide="ignore"):
            logw = np.log(prior.w)
        tri = np.arange(H)[:, None] >= np.arange(H)[None, :]  # tri[h, l]: l <= h
        logprob = logw[None, :] + np.where(tri, lp_spike[:, None], lp_slab[:, None])
        shift = logprob - logprob.max(axis=1, keepdims=True)
        probs = np.exp(shift)
        cdf = np.cumsum(probs, axis=1)
        u = gen.random(H) * cdf[:, -1]
        z = (u[:, None] > cdf).sum(axis=1).astype(int)

        # stick fractions from assignment counts
        counts = np.bincount(z, minlength=H)
        greater = H - np.cumsum(counts)
        v = np.empty(H)
        if H > 1:
            # beta draws can round to 0.0; v must stay strictly positive
            v[:-1] = np.maximum(
                gen.beta(1.0 + counts[:-1], hy.stick_alpha + greater[:-1]), 1e-300
            )
        v[-1] = 1.0
        w = stick_breaking_weights(v)

        # column variances
        spike = z <= np.arange(H)
        theta = np.full(H, th_sp)
        n_slab = int(np.sum(~spike))
        if n_slab:
            shape = hy.theta_shape + 0.5 * p
            rate = hy.theta_scale + 0.5 * ss[~spike]
            theta[~spike] = rate / gen.gamma(shape, size=n_slab)

        h_star = int(np.sum(z > np.arange(H)))
        new_chain = CuspChainState(
            core, CuspState(theta=theta, z=z, v=v, w=w, h_star=h_star)
        )
        adapted = False
        if adapt_enabled:
            sched = self.resolved_schedule(data, burn_in)
            new_chain, adapted = adapt_cusp(new_chain, hy, sched, g, rng)
        return new_chain, {"adapted": adapted}

    def active_count(self, chain: CuspChainState) -> int:
        return chain.prior.h_star

    trace_fields = ("iteration", "H", "h_star")

    def trace_row(self, chain: CuspChainState, g: int, info: dict) -> tuple:
        return (g, chain.prior.H, chain.prior.h_star)

    def extra_summaries(self, chain: CuspChainState) -> dict[str, float]:
        return {}

    # -- checkpoint support --------------------------------------------------

    def pack_state(self, chain: CuspChainState) -> dict[str, np.ndarray]:
        return {
            "loadings": chain.core.loadings,
            "idio_variances": chain.core.idio_variances,
            "factors": chain.core.factors,
            "theta": chain.prior.theta,
            "z": chain.prior.z,
            "v": chain.prior.v,
            "w": chain.prior.w,
            "h_star": np.array(chain.prior.h_star),
        }

    def unpack_state(self, arrays: dict[str, np.ndarray]) -> CuspChainState:
        core = CoreState(
            loadings=arrays["loadings"],
            idio_variances=arrays["idio_variances"],
            factors=arrays["factors"],
        )
        prior = CuspState(
            theta=arrays["theta"],
            z=arrays["z"],
            v=arrays["v"],
            w=arrays["w"],
            h_star=int(arrays["h_star"]),
        )
        return CuspChainState(core, prior)
