"""Multiplicative gamma shrinkage prior with adaptive column truncation.

Loadings get element precisions phi_ih * tau_h where tau_h is a cumulative
product of gamma increments delta_l, so later columns are shrunk harder on
average.  The two gamma shape parameters driving the increments carry their
own gamma hyperpriors and move by random-walk Metropolis.  The number of
retained columns adapts during the run: columns whose entries are almost all
inside a small neighborhood of zero are deleted, and one fresh column is
appended from the prior when nothing looks redundant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AdaptationSchedule, CorePriors, CoreState, Dataset, core_sweep
from .dists import Gamma, ParameterError, log_density
from .rng import RngStream

__all__ = [
    "MgpHyper",
    "MgpState",
    "MgpChainState",
    "tau_from_delta",
    "phi_conditional",
    "delta_conditional",
    "mh_update_shape",
    "adaptation_probability",
    "redundant_columns",
    "adapt",
    "check_increasing_shrinkage",
    "variance_explained_rank",
    "initial_columns",
    "MgpSampler",
]


@dataclass(frozen=True)
class MgpHyper:
    """Hyperparameters for the multiplicative gamma prior."""

    nu1: float = 3.0
    nu2: float = 3.0
    b1: float = 1.0
    b2: float = 1.0
    a1_prior: tuple[float, float] = (2.0, 1.0)
    a2_prior: tuple[float, float] = (2.0, 1.0)
    proposal_sd_a1: float = 1.0
    proposal_sd_a2: float = 1.0
    redundancy_threshold: float = 0.01
    redundancy_proportion: float = 0.8

    def __post_init__(self):
        for name in ("nu1", "nu2", "b1", "b2", "proposal_sd_a1", "proposal_sd_a2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be finite and > 0")
        for name in ("a1_prior", "a2_prior"):
            sh, rt = getattr(self, name)
            if not (sh > 0 and rt > 0):
                raise ParameterError(f"{name} must have positive shape and rate")
        if not (0 < self.redundancy_threshold):
            raise ParameterError("redundancy_threshold must be > 0")
        if not (0 < self.redundancy_proportion <= 1):
            raise ParameterError("redundancy_proportion must lie in (0, 1]")


@dataclass
class MgpState:
    """Prior-side state: element precisions, increments, and MH shapes."""

    phi: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    a1: float
    a2: float

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        k = self.delta.size
        if self.phi.ndim != 2 or self.phi.shape[1] != k or self.tau.shape != (k,):
            raise ParameterError("phi/delta/tau column counts disagree")
        if np.any(self.phi <= 0) or np.any(self.delta <= 0) or np.any(self.tau <= 0):
            raise ParameterError("phi, delta, tau must be strictly positive")
        if not (self.a1 > 0 and self.a2 > 0):
            raise ParameterError("a1 and a2 must be > 0")
        ref = tau_from_delta(self.delta)
        if np.max(np.abs(self.tau - ref) / np.maximum(ref, 1e-300)) > 1e-10:
            raise ParameterError("tau is not the cumulative product of delta")

    @property
    def k(self) -> int:
        return self.delta.size


@dataclass
class MgpChainState:
    core: CoreState
    prior: MgpState


def tau_from_delta(delta: np.ndarray) -> np.ndarray:
    """tau_h = prod_{l<=h} delta_l."""
    return np.cumprod(np.asarray(delta, dtype=float))


def phi_conditional(loading: float, tau_h: float, hyper: MgpHyper) -> Gamma:
    """Gamma posterior of one element precision phi_ih."""
    return Gamma(0.5 * (hyper.nu1 + 1.0), 0.5 * (hyper.nu2 + tau_h * loading * loading))


def delta_conditional(
    h: int,
    delta: np.ndarray,
    phi: np.ndarray,
    loadings: np.ndarray,
    hyper: MgpHyper,
    a1: float,
    a2: float,
) -> Gamma:
    """Gamma posterior of one increment delta_h (h zero-based).

    Uses leave-one-out products tau_l^(h) = prod_{t<=l, t!=h} delta_t; the
    rate sums phi-weighted squared loadings over columns l >= h.
    """
    delta = np.asarray(delta, dtype=float)
    k = delta.size
    if not 0 <= h < k:
        raise ParameterError("column index out of range")
    p = loadings.shape[0]
    d_mod = delta.copy()
    d_mod[h] = 1.0
    tau_ex = np.cumprod(d_mod)
    colsum = np.sum(np.asarray(phi) * np.asarray(loadings) ** 2, axis=0)
    if h == 0:
        shape = a1 + 0.5 * p * k
        rate = hyper.b1 + 0.5 * float(np.sum(tau_ex * colsum))
    else:
        shape = a2 + 0.5 * p * (k - h)
        rate = hyper.b2 + 0.5 * float(np.sum(tau_ex[h:] * colsum[h:]))
    return Gamma(shape, rate)


def mh_update_shape(
    which: str,
    current: float,
    delta: np.ndarray,
    hyper: MgpHyper,
    rng: RngStream,
) -> tuple[float, bool]:
    """Random-walk Metropolis step for a1 or a2.

    The acceptance ratio is computed from log-posterior differences
    (gamma hyperprior plus the gamma likelihood of the increments the
    shape governs: delta_1 for a1, delta_2..delta_k for a2).  Non-positive
    proposals are rejected outright without consuming a uniform.
    """
    if which == "a1":
        terms = np.asarray(delta[:1], dtype=float)
        b = hyper.b1
        prior = Gamma(*hyper.a1_prior)
        sd = hyper.proposal_sd_a1
    elif which == "a2":
        terms = np.asarray(delta[1:], dtype=float)
        b = hyper.b2
        prior = Gamma(*hyper.a2_prior)
        sd = hyper.proposal_sd_a2
    else:
        raise ParameterError("which must be 'a1' or 'a2'")
    gen = rng.generator
    proposal = current + sd * float(gen.standard_normal())
    if proposal <= 0.0:
        return current, False

    def logpost(a: float) -> float:
        lp = log_density(prior, a)
        if terms.size:
            lp += float(
                terms.size * (a * math.log(b) - math.lgamma(a))
                + (a - 1.0) * np.sum(np.log(terms))
            )
        return lp

    log_ratio = logpost(proposal) - logpost(current)
    if math.log(float(gen.random())) < log_ratio:
        return proposal, True
    return current, False


def adaptation_probability(g: int, sched: AdaptationSchedule) -> float:
    """min(1, exp(alpha0 + alpha1 g)), zero before the burn-in gate."""
    return sched.probability(g)


def redundant_columns(
    loadings: np.ndarray, threshold: float, proportion: float
) -> list[int]:
    """Columns where at least `proportion` of entries satisfy |lambda| < threshold."""
    lam = np.asarray(loadings, dtype=float)
    p = lam.shape[0]
    counts = np.sum(np.abs(lam) < threshold, axis=0)
    return [int(h) for h in np.nonzero(counts >= proportion * p)[0]]


def adapt(
    chain: MgpChainState,
    hyper: MgpHyper,
    sched: AdaptationSchedule,
    g: int,
    rng: RngStream,
) -> tuple[MgpChainState, bool]:
    """Adaptation move: delete redundant columns or append one from the prior.

    Fires with probability `sched.probability(g)`.  Deletion keeps at least
    one column.  Growth appends delta ~ Gamma(a2, b2), a phi column from its
    prior, loadings from N(0, 1/(phi tau)), and a fresh N(0, I) factor row.
    Draw order: gate uniform, then delta, phi, loadings, factor row.
    """
    prob = sched.probability(g)
    if prob <= 0.0:
        return chain, False
    gen = rng.generator
    if float(gen.random()) >= prob:
        return chain, False

    core, prior = chain.core, chain.prior
    k = core.k
    red = redundant_columns(core.loadings, hyper.redundancy_threshold, hyper.redundancy_proportion)
    if red:
        keep = [h for h in range(k) if h not in set(red)]
        if not keep:
            keep = [0]  # truncation never drops below one column
        keep = np.asarray(keep, dtype=int)
        delta = prior.delta[keep]
        new_core = CoreState(
            loadings=core.loadings[:, keep],
            idio_variances=core.idio_variances,
            factors=core.factors[keep, :],
        )
        new_prior = MgpState(
            phi=prior.phi[:, keep],
            delta=delta,
            tau=tau_from_delta(delta),
            a1=prior.a1,
            a2=prior.a2,
        )
        return MgpChainState(new_core, new_prior), True

    p = core.p
    n_t = core.n_times
    delta_new = float(gen.gamma(prior.a2, scale=1.0 / hyper.b2))
    phi_col = gen.gamma(0.5 * hyper.nu1, scale=2.0 / hyper.nu2, size=p)
    tau_new = float(prior.tau[-1]) * delta_new
    lam_col = gen.standard_normal(p) / np.sqrt(phi_col * tau_new)
    f_row = gen.standard_normal(n_t)
    delta = np.append(prior.delta, delta_new)
    new_core = CoreState(
        loadings=np.column_stack([core.loadings, lam_col]),
        idio_variances=core.idio_variances,
        factors=np.vstack([core.factors, f_row[None, :]]),
    )
    new_prior = MgpState(
        phi=np.column_stack([prior.phi, phi_col]),
        delta=delta,
        tau=tau_from_delta(delta),
        a1=prior.a1,
        a2=prior.a2,
    )
    return MgpChainState(new_core, new_prior), True


def check_increasing_shrinkage(a1: float, a2: float, b2: float) -> tuple[bool, bool]:
    """(a2 > b2 + 1, a2 > a1): expected increments above one and growing tail penalty."""
    return (a2 > b2 + 1.0, a2 > a1)


def variance_explained_rank(
    loadings: np.ndarray, idio_variances: np.ndarray, q: float
) -> int:
    """Smallest k* whose leading columns plus noise explain a fraction >= q.

    Ratio is (sum of squared loadings over the first k* columns + tr Sigma)
    over tr Omega; scanning starts at one column.
    """
    if not 0.0 < q < 1.0:
        raise ParameterError("q must lie in (0, 1)")
    lam = np.asarray(loadings, dtype=float)
    col_norms = np.sum(lam * lam, axis=0)
    tr_sig = float(np.sum(idio_variances))
    tr_omega = float(np.sum(col_norms)) + tr_sig
    ratios = (np.cumsum(col_norms) + tr_sig) / tr_omega
    hits = np.nonzero(ratios >= q)[0]
    return int(hits[0]) + 1 if hits.size else lam.shape[1]


def initial_columns(p: int, n_times: int) -> int:
    """Conservative overfitted starting truncation."""
    mult = 10.0 if p > n_times else 5.0
    return min(p, int(math.ceil(mult * math.log(p))))


def principal_start(values: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Principal-component seed for the loadings and idiosyncratic variances.

    Column h of the returned loadings is the h-th sample eigenvector scaled
    by sqrt(eigenvalue - noise), with the median eigenvalue as the noise
    estimate; columns whose eigenvalue is at or below the noise level start
    exactly empty.  Idiosyncratic variances take up the residual diagonal.
    """
    X = np.asarray(values, dtype=float)
    n_t, p = X.shape
    S = X.T @ X / n_t
    w, Q = np.linalg.eigh(S)
    w, Q = w[::-1], Q[:, ::-1]
    noise = float(np.median(w))
    scale = np.sqrt(np.maximum(w[:k] - noise, 0.0))
    lam = Q[:, :k] * scale[None, :]
    floor = 1e-3 * float(np.mean(np.diag(S))) + 1e-12
    sig2 = np.maximum(np.diag(S) - np.sum(lam * lam, axis=1), floor)
    return lam, sig2


class MgpSampler:
    """Adaptive Gibbs sampler under the multiplicative gamma prior."""

    name = "mgp"

    def __init__(
        self,
        hyper: MgpHyper | None = None,
        core_priors: CorePriors | None = None,
        schedule: AdaptationSchedule | None = None,
        initial_k: int | None = None,
        sample_shapes: bool = True,
        init: str = "principal",
    ):
        self.hyper = hyper or MgpHyper()
        self.core_priors = core_priors or CorePriors()
        self.schedule = schedule
        self.initial_k = initial_k
        # sample_shapes=False freezes a1/a2 at their current values (the
        # column-strength shapes become fixed hyperparameters)
        self.sample_shapes = sample_shapes
        if init not in ("principal", "prior"):
            raise ParameterError("init must be 'principal' or 'prior'")
        self.init = init

    def resolved_schedule(self, data: Dataset, burn_in: int = 0) -> AdaptationSchedule:
        """Adaptation rates by regime (p vs T); gate at the declared burn-in.

        Gating until burn-in ends matters: adapting while the loadings are
        still diffuse finds no redundant columns, so every fire appends one
        and the truncation balloons, dragging the column-strength shapes
        toward the weak-shrinkage fixed point.  After burn-in the posterior
        has pinned the surplus columns near zero and adaptation trims them.
        """
        if self.schedule is not None:
            return self.schedule
        if data.p < data.T:
            return AdaptationSchedule(alpha0=-0.5, alpha1=-3e-4, burn_in_gate=burn_in)
        return AdaptationSchedule(alpha0=-1.0, alpha1=-5e-4, burn_in_gate=burn_in)

    def init_state(self, data: Dataset, rng: RngStream) -> MgpChainState:
        """Starting state at the conservative truncation k0.

        "principal" (default) seats the chain at a principal-component
        solution: leading columns carry the sample-eigenvector structure in
        decreasing-strength order, surplus columns start empty.  Starting
        aligned with the prior's stochastic ordering matters beyond
        convenience -- a diffuse start leaves every column moderately loaded,
        and the column-strength shapes then equilibrate against a wall of
        moderate columns (a weak-shrinkage quasi-stable regime the chain
        escapes extremely slowly), whereas empty surplus columns let the
        shrinkage cascade lock in immediately.  "prior" draws every latent
        from its prior (the forward draw used by joint-distribution
        simulator checks).  MH shapes start at their hyperprior means.
        """
        p, n_t = data.p, data.T
        k0 = self.initial_k or initial_columns(p, n_t)
        hy = self.hyper
        gen = rng.generator
        a1 = hy.a1_prior[0] / hy.a1_prior[1]
        a2 = hy.a2_prior[0] / hy.a2_prior[1]
        if self.init == "prior":
            delta = np.concatenate(
                [
                    gen.gamma(a1, scale=1.0 / hy.b1, size=1),
                    gen.gamma(a2, scale=1.0 / hy.b2, size=k0 - 1),
                ]
            )
            tau = tau_from_delta(delta)
            phi = gen.gamma(0.5 * hy.nu1, scale=2.0 / hy.nu2, size=(p, k0))
            lam = gen.standard_normal((p, k0)) / np.sqrt(phi * tau[None, :])
            sig2 = 1.0 / gen.gamma(
                self.core_priors.idio_shape,
                scale=1.0 / self.core_priors.idio_scale,
                size=p,
            )
            F = gen.standard_normal((k0, n_t))
            core = CoreState(loadings=lam, idio_variances=sig2, factors=F)
            return MgpChainState(core, MgpState(phi=phi, delta=delta, tau=tau, a1=a1, a2=a2))
        lam, sig2 = principal_start(data.values, k0)
        delta = np.concatenate([[1.0], np.full(k0 - 1, a2 / hy.b2)])
        tau = tau_from_delta(delta)
        phi = gen.gamma(0.5 * hy.nu1, scale=2.0 / hy.nu2, size=(p, k0))
        # factors from their conditional given the seeded loadings
        prec = np.eye(k0) + (lam.T / sig2) @ lam
        low = np.linalg.cholesky(prec)
        mean = np.linalg.solve(
            low.T, np.linalg.solve(low, (lam.T / sig2) @ data.values.T)
        )
        F = mean + np.linalg.solve(low.T, gen.standard_normal((k0, n_t)))
        core = CoreState(loadings=lam, idio_variances=sig2, factors=F)
        return MgpChainState(core, MgpState(phi=phi, delta=delta, tau=tau, a1=a1, a2=a2))

    def sweep(
        self,
        chain: MgpChainState,
        data: Dataset,
        g: int,
        rng: RngStream,
        adapt_enabled: bool = True,
        burn_in: int = 0,
    ) -> tuple[MgpChainState, dict]:
        hy = self.hyper
        core, prior = chain.core, chain.prior
        core = core_sweep(core, data, self.core_priors, prior.phi * prior.tau[None, :], rng)
        gen = rng.generator
        p, k = core.loadings.shape

        lam2 = core.loadings**2
        phi = gen.gamma(
            0.5 * (hy.nu1 + 1.0), scale=2.0 / (hy.nu2 + prior.tau[None, :] * lam2)
        )

        colsum = np.sum(phi * lam2, axis=0)
        delta = prior.delta.copy()
        for h in range(k):
            d_mod = delta.copy()
            d_mod[h] = 1.0
            tau_ex = np.cumprod(d_mod)
            if h == 0:
                shape = prior.a1 + 0.5 * p * k
                rate = hy.b1 + 0.5 * float(np.sum(tau_ex * colsum))
            else:
                shape = prior.a2 + 0.5 * p * (k - h)
                rate = hy.b2 + 0.5 * float(np.sum(tau_ex[h:] * colsum[h:]))
            delta[h] = gen.gamma(shape, scale=1.0 / rate)
        tau = tau_from_delta(delta)

        if self.sample_shapes:
            a1, acc1 = mh_update_shape("a1", prior.a1, delta, hy, rng)
            a2, acc2 = mh_update_shape("a2", prior.a2, delta, hy, rng)
        else:
            a1, a2, acc1, acc2 = prior.a1, prior.a2, False, False

        new_chain = MgpChainState(core, MgpState(phi=phi, delta=delta, tau=tau, a1=a1, a2=a2))
        adapted = False
        if adapt_enabled:
            sched = self.resolved_schedule(data, burn_in)
            new_chain, adapted = adapt(new_chain, hy, sched, g, rng)
        info = {"accept_a1": acc1, "accept_a2": acc2, "adapted": adapted}
        return new_chain, info

    def active_count(self, chain: MgpChainState) -> int:
        """Number of non-redundant columns in the current loading matrix.

        The truncation width k* only changes when an adaptation fires, but
        the effective factor count is the number of columns currently above
        the redundancy threshold; that is the quantity summarized by the
        benchmark (the width stays pinned near its overfitted start between
        rare adaptations and says little about the posterior)."""
        redundant = redundant_columns(
            chain.core.loadings,
            self.hyper.redundancy_threshold,
            self.hyper.redundancy_proportion,
        )
        return chain.core.k - len(redundant)

    trace_fields = ("iteration", "k_star", "active", "a1", "a2", "accept_a1", "accept_a2")

    def trace_row(self, chain: MgpChainState, g: int, info: dict) -> tuple:
        return (
            g,
            chain.core.k,
            self.active_count(chain),
            chain.prior.a1,
            chain.prior.a2,
            int(info.get("accept_a1", False)),
            int(info.get("accept_a2", False)),
        )

    def extra_summaries(self, chain: MgpChainState) -> dict[str, float]:
        return {"a1": chain.prior.a1, "a2": chain.prior.a2}

    # -- checkpoint support --------------------------------------------------

    def pack_state(self, chain: MgpChainState) -> dict[str, np.ndarray]:
        return {
            "loadings": chain.core.loadings,
            "idio_variances": chain.core.idio_variances,
            "factors": chain.core.factors,
            "phi": chain.prior.phi,
            "delta": chain.prior.delta,
            "tau": chain.prior.tau,
            "a1": np.array(chain.prior.a1),
            "a2": np.array(chain.prior.a2),
        }

    def unpack_state(self, arrays: dict[str, np.ndarray]) -> MgpChainState:
        core = CoreState(
            loadings=arrays["loadings"],
            idio_variances=arrays["idio_variances"],
            factors=arrays["factors"],
        )
        prior = MgpState(
            phi=arrays["phi"],
            delta=arrays["delta"],
            tau=arrays["tau"],
            a1=float(arrays["a1"]),
            a2=float(arrays["a2"]),
        )
        return MgpChainState(core, prior)
