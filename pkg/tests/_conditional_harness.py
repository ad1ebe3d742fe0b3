"""Randomized-instance grid comparisons for every conditional-posterior op.

Each check draws small random instances, evaluates the *joint* log density
of (parameter, data) on a quadrature grid from first principles (textbook
density formulas only -- no reuse of the library's algebra), normalizes by
the grid weights, and compares pointwise against the library's analytic
conditional.  Returns the max relative density error across instances so
callers can assert a single tolerance.  Closed forms from the library (and
scipy ppf) are used only to POSITION grids, never as the comparison target.
"""

from __future__ import annotations

import numpy as np

import tests._oracles as orc
from infactor.core import (
    CorePriors,
    factor_conditional,
    idio_conditional,
    loadings_row_conditional,
)
from infactor.cusp import (
    CuspHyper,
    stick_breaking_weights,
    theta_posterior,
    v_conditional,
    z_conditional_logprobs,
)
from infactor.ibp import (
    IbpHyper,
    alpha_conditional,
    beta_conditional,
    loading_element_conditional,
    z_posterior_logodds,
)
from infactor.mgp import MgpHyper, delta_conditional, phi_conditional, tau_from_delta


def _gamma_check(post, log_joint) -> float:
    axis = orc.gl_log_axis(*orc.gamma_tail_bounds(post.shape, post.rate), n=600)
    return orc.grid_oracle_1d(
        log_joint, lambda x: orc.log_gamma_pdf(x, post.shape, post.rate), axis
    )


def _invgamma_check(post, log_joint) -> float:
    axis = orc.gl_log_axis(*orc.invgamma_tail_bounds(post.shape, post.scale), n=600)
    return orc.grid_oracle_1d(
        log_joint, lambda x: orc.log_invgamma_pdf(x, post.shape, post.scale), axis
    )


# -- shared model core ---------------------------------------------------------


def check_loadings_row(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        n_t = int(gen.integers(6, 20))
        F = gen.standard_normal((2, n_t))
        y = gen.standard_normal(n_t)
        sig2 = float(gen.uniform(0.3, 2.0))
        prior_prec = gen.uniform(0.2, 4.0, size=2)

        def log_joint(pts):
            resid = y[None, :] - pts @ F
            return -0.5 * pts**2 @ prior_prec - 0.5 * np.sum(resid**2, axis=1) / sig2

        mean, cov = loadings_row_conditional(F, y, sig2, prior_prec)
        worst = max(worst, orc.mvn2_grid_oracle(log_joint, mean, cov))
    return worst


def check_factor(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        p = int(gen.integers(3, 9))
        lam = gen.standard_normal((p, 2))
        sig2 = gen.uniform(0.3, 2.0, size=p)
        y = gen.standard_normal(p)

        def log_joint(pts):
            resid = y[None, :] - pts @ lam.T
            return -0.5 * np.sum(pts**2, axis=1) - 0.5 * np.sum(
                resid**2 / sig2[None, :], axis=1
            )

        mean, cov = factor_conditional(lam, sig2, y)
        worst = max(worst, orc.mvn2_grid_oracle(log_joint, mean, cov))
    return worst


def check_idio(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        priors = CorePriors(float(gen.uniform(0.5, 3.0)), float(gen.uniform(0.1, 1.0)))
        r = gen.standard_normal(int(gen.integers(3, 40)))
        post = idio_conditional(r, priors)
        rss = float(r @ r)

        def log_joint(prec):
            return (
                orc.log_gamma_pdf(prec, priors.idio_shape, priors.idio_scale)
                + 0.5 * r.size * np.log(prec)
                - 0.5 * prec * rss
                - 0.5 * r.size * np.log(2.0 * np.pi)
            )

        worst = max(worst, _gamma_check(post, log_joint))
    return worst


# -- multiplicative gamma prior --------------------------------------------------


def check_phi(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        hyper = MgpHyper(nu1=float(gen.uniform(1.0, 8.0)), nu2=float(gen.uniform(1.0, 8.0)))
        lam = float(gen.standard_normal())
        tau_h = float(gen.uniform(0.2, 20.0))
        post = phi_conditional(lam, tau_h, hyper)

        def log_joint(phi):
            return (
                orc.log_gamma_pdf(phi, 0.5 * hyper.nu1, 0.5 * hyper.nu2)
                + orc.log_normal_pdf(lam, 0.0, 1.0 / (phi * tau_h))
            )

        worst = max(worst, _gamma_check(post, log_joint))
    return worst


def check_delta(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        k = int(gen.integers(2, 6))
        p = int(gen.integers(2, 6))
        h = int(gen.integers(0, k))
        delta = gen.uniform(0.5, 3.0, size=k)
        phi = gen.uniform(0.3, 3.0, size=(p, k))
        lam = gen.standard_normal((p, k)) * 0.7
        a1 = float(gen.uniform(1.0, 4.0))
        a2 = float(gen.uniform(1.0, 4.0))
        hyper = MgpHyper()
        post = delta_conditional(h, delta, phi, lam, hyper, a1, a2)
        a, b = (a1, hyper.b1) if h == 0 else (a2, hyper.b2)

        def log_joint(vals):
            # full joint over all columns, tau recomputed per grid point
            D = np.tile(delta, (vals.size, 1))
            D[:, h] = vals
            tau = np.cumprod(D, axis=1)[:, None, :]
            terms = 0.5 * np.log(phi[None] * tau) - 0.5 * phi[None] * tau * lam[None] ** 2
            return orc.log_gamma_pdf(vals, a, b) + terms.sum(axis=(1, 2))

        worst = max(worst, _gamma_check(post, log_joint))
    return worst


# -- cumulative shrinkage prior ---------------------------------------------------


def check_cusp_z(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for j in range(n_instances):
        H = int(gen.integers(3, 7))
        h = int(gen.integers(0, H))
        p = int(gen.integers(2, 6))
        form = "joint" if j % 2 == 0 else "product"
        hyper = CuspHyper(
            stick_alpha=float(gen.uniform(1.0, 8.0)),
            theta_shape=float(gen.uniform(1.0, 4.0)),
            theta_scale=float(gen.uniform(0.5, 4.0)),
            spike_variance=float(gen.uniform(0.01, 0.2)),
            slab_form=form,
        )
        v = np.concatenate([gen.uniform(0.05, 0.95, size=H - 1), [1.0]])
        w = stick_breaking_weights(v)
        scale = float(gen.choice([0.1, 0.7, 2.0]))
        lam = gen.standard_normal(p) * scale

        ours = np.exp(z_conditional_logprobs(h, lam, w, hyper))

        # slab marginal by quadrature over the column variance
        ss = float(lam @ lam)
        a, b = hyper.theta_shape, hyper.theta_scale
        if form == "joint":
            th, wt = orc.gl_log_axis(
                *orc.invgamma_tail_bounds(a + 0.5 * p, b + 0.5 * ss, eps=1e-14), n=800
            )
            integrand = orc.log_invgamma_pdf(th, a, b) + np.sum(
                orc.log_normal_pdf(lam[None, :], 0.0, th[:, None]), axis=1
            )
            m = float(np.max(integrand))
            slab = float(np.log(np.exp(integrand - m) @ wt) + m)
        else:
            slab = 0.0
            for x in lam:
                th, wt = orc.gl_log_axis(
                    *orc.invgamma_tail_bounds(a + 0.5, b + 0.5 * x * x, eps=1e-14), n=800
                )
                integrand = orc.log_invgamma_pdf(th, a, b) + orc.log_normal_pdf(x, 0.0, th)
                m = float(np.max(integrand))
                slab += float(np.log(np.exp(integrand - m) @ wt) + m)
        spike = float(np.sum(orc.log_normal_pdf(lam, 0.0, hyper.spike_variance)))
        logp = np.log(w) + np.where(np.arange(H) <= h, spike, slab)
        logp -= logp.max()
        oracle = np.exp(logp)
        oracle /= oracle.sum()
        mask = oracle >= 1e-3 * oracle.max()
        worst = max(worst, float(np.max(np.abs(ours[mask] - oracle[mask]) / oracle[mask])))
    return worst


def check_cusp_v(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        H = int(gen.integers(3, 9))
        z = gen.integers(0, H, size=H)
        l = int(gen.integers(0, H - 1))
        alpha = float(gen.uniform(1.0, 8.0))
        post = v_conditional(l, z, alpha)
        v_fixed = np.concatenate([gen.uniform(0.05, 0.95, size=H - 1), [1.0]])

        def log_joint(vals):
            # brute force: rebuild the whole stick at each grid point
            V = np.tile(v_fixed, (vals.size, 1))
            V[:, l] = vals
            ones = np.ones((vals.size, 1))
            remaining = np.hstack([ones, np.cumprod(1.0 - V[:, :-1], axis=1)])
            W = V * remaining
            return orc.log_beta_pdf(vals, 1.0, alpha) + np.sum(np.log(W[:, z]), axis=1)

        axis = orc.gl_axis(1e-9, 1.0 - 1e-9, 800)
        err = orc.grid_oracle_1d(
            log_joint, lambda x: orc.log_beta_pdf(x, post.a, post.b), axis
        )
        worst = max(worst, err)
    return worst


def check_cusp_theta(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        p = int(gen.integers(2, 12))
        hyper = CuspHyper(
            theta_shape=float(gen.uniform(1.0, 4.0)),
            theta_scale=float(gen.uniform(0.5, 4.0)),
        )
        lam = gen.standard_normal(p) * float(gen.uniform(0.3, 2.0))
        post = theta_posterior(lam, hyper)

        def log_joint(th):
            return orc.log_invgamma_pdf(th, hyper.theta_shape, hyper.theta_scale) + np.sum(
                orc.log_normal_pdf(lam[None, :], 0.0, th[:, None]), axis=1
            )

        worst = max(worst, _invgamma_check(post, log_joint))
    return worst


# -- buffet-process prior ---------------------------------------------------------


def check_ibp_element(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        n_t = int(gen.integers(5, 25))
        f = gen.standard_normal(n_t)
        y = gen.standard_normal(n_t)
        sig2 = float(gen.uniform(0.3, 2.0))
        beta_h = float(gen.uniform(0.3, 4.0))
        post = loading_element_conditional(f, y, sig2, beta_h)

        def log_joint(lam):
            out = orc.log_normal_pdf(lam, 0.0, 1.0 / beta_h)
            resid = y[None, :] - lam[:, None] * f[None, :]
            return out + np.sum(orc.log_normal_pdf(resid, 0.0, sig2), axis=1)

        sd = np.sqrt(post.variance)
        axis = orc.gl_axis(post.mean - 10 * sd, post.mean + 10 * sd, 400)
        err = orc.grid_oracle_1d(
            log_joint, lambda x: orc.log_normal_pdf(x, post.mean, post.variance), axis
        )
        worst = max(worst, err)
    return worst


def check_ibp_beta(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        p = int(gen.integers(2, 12))
        hyper = IbpHyper(
            beta_shape=float(gen.uniform(0.5, 4.0)), beta_rate=float(gen.uniform(0.5, 4.0))
        )
        z = (gen.random(p) < 0.6).astype(int)
        if z.sum() == 0:
            z[0] = 1
        lam = np.where(z == 1, gen.standard_normal(p), 0.0)
        post = beta_conditional(z, lam, hyper)
        n_act, ss = float(z.sum()), float(np.sum(lam**2))

        def log_joint(b):
            return (
                orc.log_gamma_pdf(b, hyper.beta_shape, hyper.beta_rate)
                + 0.5 * n_act * np.log(b)
                - 0.5 * b * ss
            )

        worst = max(worst, _gamma_check(post, log_joint))
    return worst


def check_ibp_logodds(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    variants = ("rows", "printed", "finite")
    for j in range(n_instances):
        variant = variants[j % 3]
        n_t = int(gen.integers(8, 20))
        p = int(gen.integers(4, 12))
        f = gen.standard_normal(n_t)
        y = gen.standard_normal(n_t)
        sig2 = float(gen.uniform(0.3, 2.0))
        beta_h = float(gen.uniform(0.3, 4.0))
        # keep both prior-odds denominators strictly positive; the clamped
        # saturation branch is exercised separately by the unit tests
        m_minus = int(gen.integers(1, min(p - 2, n_t - 2)))
        pool = int(gen.integers(max(2, m_minus), p + 3))
        alpha = float(gen.uniform(0.5, 5.0))
        hyper = IbpHyper(prior_odds=variant)
        ours = z_posterior_logodds(
            m_minus, f, y, sig2, beta_h, p, hyper,
            n_times=n_t, pool_size=pool, alpha=alpha,
        )

        # likelihood ratio by quadrature over the appended loading
        post_var = 1.0 / (beta_h + float(f @ f) / sig2)
        post_mean = post_var * float(f @ y) / sig2
        sd = np.sqrt(post_var)
        lam_grid, wt = orc.gl_axis(post_mean - 12 * sd, post_mean + 12 * sd, 400)
        resid = y[None, :] - lam_grid[:, None] * f[None, :]
        log_num = orc.log_normal_pdf(lam_grid, 0.0, 1.0 / beta_h) + np.sum(
            orc.log_normal_pdf(resid, 0.0, sig2), axis=1
        )
        m = float(np.max(log_num))
        log_marg1 = float(np.log(np.exp(log_num - m) @ wt) + m)
        log_marg0 = float(np.sum(orc.log_normal_pdf(y, 0.0, sig2)))
        if variant == "rows":
            log_prior = np.log(m_minus) - np.log(p - 1 - m_minus)
        elif variant == "printed":
            log_prior = np.log(m_minus) - np.log(n_t - 1 - m_minus)
        else:
            log_prior = np.log(alpha / pool + m_minus) - np.log(p - m_minus)
        oracle = log_prior + log_marg1 - log_marg0
        p_ours = 1.0 / (1.0 + np.exp(-ours))
        p_orc = 1.0 / (1.0 + np.exp(-oracle))
        err = max(
            abs(p_ours - p_orc) / p_orc, abs((1 - p_ours) - (1 - p_orc)) / (1 - p_orc)
        )
        worst = max(worst, float(err))
    return worst


def check_ibp_alpha(gen: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for _ in range(n_instances):
        p = int(gen.integers(2, 30))
        k_plus = int(gen.integers(0, 7))
        hyper = IbpHyper(
            alpha_shape=float(gen.uniform(0.5, 4.0)), alpha_rate=float(gen.uniform(0.5, 4.0))
        )
        post = alpha_conditional(k_plus, p, hyper)
        h_p = float(np.sum(1.0 / np.arange(1, p + 1)))

        def log_joint(a):
            return (
                orc.log_gamma_pdf(a, hyper.alpha_shape, hyper.alpha_rate)
                + k_plus * np.log(a)
                - a * h_p
            )

        worst = max(worst, _gamma_check(post, log_joint))
    return worst


# name -> check, one entry per conditional-posterior operation
ALL_CHECKS = {
    "loadings_row_conditional": check_loadings_row,
    "factor_conditional": check_factor,
    "idio_conditional": check_idio,
    "phi_conditional": check_phi,
    "delta_conditional": check_delta,
    "z_conditional_logprobs": check_cusp_z,
    "v_conditional": check_cusp_v,
    "theta_posterior": check_cusp_theta,
    "loading_element_conditional": check_ibp_element,
    "beta_conditional": check_ibp_beta,
    "z_posterior_logodds": check_ibp_logodds,
    "alpha_conditional": check_ibp_alpha,
}
