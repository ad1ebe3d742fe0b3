"""Synthetic benchmark: rank recovery across (p, K) designs.

Each replicate simulates a sparse-loading truth, runs one chain of the
chosen prior, and records the retained-draw distribution of the active
factor count, the posterior-mean covariance error, and (for the
multiplicative-gamma prior) the posterior means of the column-strength
shapes.  The truth stream depends only on (seed, design, replicate), so
every prior sees the same simulated datasets; the chain stream adds the
prior, so chains are independent across priors and replicates and the
whole study is reproducible bit-exactly from the master seed.

Truth construction per replicate: each loading column gets a uniform
number of nonzero entries between K+1 and 2K (capped at p) at positions
drawn without replacement, values N(0, 9); idiosyncratic variances are
inverse-gamma(1, 0.25); T = 100 observations from N(0, Lambda Lambda' +
Sigma).
"""

from __future__ import annotations

import math
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from .core import AdaptationSchedule, Dataset, implied_covariance
from .cusp import CuspSampler
from .ibp import IbpSampler
from .mgp import MgpSampler
from .rng import RngStream
from .runner import ChainRunner

__all__ = [
    "SimDesign",
    "TrueModel",
    "GATING_DESIGNS",
    "EXTENDED_DESIGNS",
    "DEFAULT_RUN_LENGTHS",
    "PRIOR_NAMES",
    "parse_designs",
    "generate_true_model",
    "generate_dataset",
    "make_sampler",
    "posterior_mode",
    "interquartile_range",
    "ReplicateSummary",
    "DesignAggregate",
    "run_replicate",
    "aggregate",
    "replicate_csv_rows",
    "aggregate_csv_rows",
]

PRIOR_NAMES = ("mgp", "cusp", "ibp")

# iterations / burn-in per prior
DEFAULT_RUN_LENGTHS: dict[str, tuple[int, int]] = {
    "mgp": (30000, 10000),
    "cusp": (15000, 5000),
    "ibp": (15000, 5000),
}


@dataclass(frozen=True)
class SimDesign:
    p: int
    k_true: int
    n_times: int = 100
    loading_variance: float = 9.0
    idio_shape: float = 1.0
    idio_scale: float = 0.25

    def __post_init__(self):
        if self.p < 2 or not 1 <= self.k_true <= self.p:
            raise ValueError("need p >= 2 and 1 <= k_true <= p")
        if self.n_times < 2:
            raise ValueError("need n_times >= 2")

    @property
    def label(self) -> str:
        return f"{self.p}x{self.k_true}"


GATING_DESIGNS = (SimDesign(6, 2), SimDesign(10, 3), SimDesign(30, 5))
EXTENDED_DESIGNS = (SimDesign(50, 8), SimDesign(100, 15))


def parse_designs(text: str) -> list[SimDesign]:
    """Parse a "6x2,10x3" style design list."""
    designs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"bad design {chunk!r}: expected <p>x<K>")
        try:
            p, k = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"bad design {chunk!r}: expected <p>x<K>") from exc
        designs.append(SimDesign(p, k))
    if not designs:
        raise ValueError("empty design list")
    return designs


@dataclass
class TrueModel:
    loadings: np.ndarray
    idio_variances: np.ndarray

    def covariance(self) -> np.ndarray:
        return implied_covariance(self.loadings, self.idio_variances)


def generate_true_model(design: SimDesign, rng: RngStream) -> TrueModel:
    """Sparse truth; draw order: counts, then per-column positions/values, noise."""
    gen = rng.generator
    p, k = design.p, design.k_true
    lam = np.zeros((p, k))
    counts = gen.integers(k + 1, 2 * k + 1, size=k)
    for h in range(k):
        n_nz = min(int(counts[h]), p)
        pos = gen.choice(p, size=n_nz, replace=False)
        lam[pos, h] = math.sqrt(design.loading_variance) * gen.standard_normal(n_nz)
    sig2 = design.idio_scale / gen.gamma(design.idio_shape, size=p)
    return TrueModel(loadings=lam, idio_variances=sig2)


def generate_dataset(design: SimDesign, truth: TrueModel, rng: RngStream) -> Dataset:
    gen = rng.generator
    F = gen.standard_normal((design.k_true, design.n_times))
    mean = (truth.loadings @ F).T
    noise = np.sqrt(truth.idio_variances)[None, :] * gen.standard_normal(mean.shape)
    return Dataset(values=mean + noise)


def make_sampler(prior: str, data: Dataset, burn_in: int, overrides: dict | None = None):
    """Default sampler for the given prior, adaptation gated at the burn-in.

    Both adaptive truncations hold their width fixed until burn-in ends;
    only then does the redundancy scan (or spike count) start resizing.
    The gamma-process rates depend on the data shape (p vs T).  `overrides`
    (hyper / schedule / initial size) pass through to the constructor.
    """
    overrides = dict(overrides or {})
    if prior == "mgp":
        if "schedule" not in overrides:
            template = MgpSampler().resolved_schedule(data, burn_in)
            overrides["schedule"] = template
        return MgpSampler(**overrides)
    if prior == "cusp":
        overrides.setdefault(
            "schedule", AdaptationSchedule(alpha0=-1.0, alpha1=-5e-4, burn_in_gate=burn_in)
        )
        return CuspSampler(**overrides)
    if prior == "ibp":
        return IbpSampler(**overrides)
    raise ValueError(f"unknown prior {prior!r}; expected one of {PRIOR_NAMES}")


def posterior_mode(values: np.ndarray) -> int:
    """Most frequent value; ties resolved toward the smallest."""
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        raise ValueError("no draws to take a mode over")
    if np.any(values < 0):
        raise ValueError("counts must be non-negative")
    return int(np.argmax(np.bincount(values)))


def interquartile_range(values: np.ndarray) -> float:
    q25, q75 = np.percentile(np.asarray(values, dtype=float), [25.0, 75.0])
    return float(q75 - q25)


@dataclass
class ReplicateSummary:
    prior: str
    design: SimDesign
    replicate: int
    seed: int
    status: str = "ok"
    k_mode: int | None = None
    k_iqr: float | None = None
    count_hist: np.ndarray | None = None
    omega_rel_error: float | None = None
    extras_mean: dict[str, float] = field(default_factory=dict)
    retained: int = 0
    iterations: int = 0
    burn_in: int = 0
    wall_time: float = 0.0
    traceback: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def matched(self) -> bool:
        return self.ok and self.k_mode == self.design.k_true


def run_replicate(
    prior: str,
    design: SimDesign,
    replicate: int,
    seed: int,
    iterations: int | None = None,
    burn_in: int | None = None,
    overrides: dict | None = None,
    gate: int | None = None,
) -> ReplicateSummary:
    """Simulate one dataset and run one chain; failures become a status string.

    `gate` overrides the adaptation gate when it should differ from the
    burn-in (the default ties them together).
    """
    default_iters, default_burn = DEFAULT_RUN_LENGTHS[prior]
    iterations = default_iters if iterations is None else iterations
    burn_in = default_burn if burn_in is None else burn_in
    out = ReplicateSummary(
        prior=prior,
        design=design,
        replicate=replicate,
        seed=seed,
        iterations=iterations,
        burn_in=burn_in,
    )
    t0 = time.perf_counter()
    try:
        base = RngStream(seed, (design.p, design.k_true, replicate))
        truth_rng = base.substream(0)
        truth = generate_true_model(design, truth_rng)
        data = generate_dataset(design, truth, truth_rng)
        chain_rng = base.substream(1, PRIOR_NAMES.index(prior))
        sampler = make_sampler(prior, data, burn_in if gate is None else gate, overrides)
        result = ChainRunner(sampler, data, iterations, burn_in, chain_rng).run()
        counts = result.active_counts
        out.k_mode = posterior_mode(counts)
        out.k_iqr = interquartile_range(counts)
        out.count_hist = np.bincount(counts)
        omega_true = truth.covariance()
        out.omega_rel_error = float(
            np.linalg.norm(result.omega_mean - omega_true) / np.linalg.norm(omega_true)
        )
        out.extras_mean = {k: float(v.mean()) for k, v in result.extras.items()}
        out.retained = counts.size
    except Exception as exc:  # noqa: BLE001 - replicate isolation is the point
        out.status = f"{type(exc).__name__}: {exc}"
        out.traceback = traceback.format_exc()
    out.wall_time = time.perf_counter() - t0
    return out


@dataclass
class DesignAggregate:
    prior: str
    design: SimDesign
    n_replicates: int
    n_ok: int
    n_match: int
    mean_mode: float | None
    mean_iqr: float | None
    pooled_iqr: float | None
    mean_omega_rel_error: float | None
    extras_mean: dict[str, float]


def aggregate(prior: str, design: SimDesign, reps: list[ReplicateSummary]) -> DesignAggregate:
    """Cross-replicate summary: mean of per-replicate modes and IQRs, plus the
    IQR of all retained counts pooled across replicates."""
    ok = [r for r in reps if r.ok]
    if not ok:
        return DesignAggregate(prior, design, len(reps), 0, 0, None, None, None, None, {})
    pooled = np.concatenate(
        [np.repeat(np.arange(r.count_hist.size), r.count_hist) for r in ok]
    )
    keys = sorted({k for r in ok for k in r.extras_mean})
    extras = {k: float(np.mean([r.extras_mean[k] for r in ok if k in r.extras_mean])) for k in keys}
    return DesignAggregate(
        prior=prior,
        design=design,
        n_replicates=len(reps),
        n_ok=len(ok),
        n_match=sum(r.matched for r in ok),
        mean_mode=float(np.mean([r.k_mode for r in ok])),
        mean_iqr=float(np.mean([r.k_iqr for r in ok])),
        pooled_iqr=interquartile_range(pooled),
        mean_omega_rel_error=float(np.mean([r.omega_rel_error for r in ok])),
        extras_mean=extras,
    )


# ---------------------------------------------------------------------------
# CSV row encodings (shared by the command-line tool and the scripts)
# ---------------------------------------------------------------------------

REPLICATE_FIELDS = (
    "prior",
    "design",
    "p",
    "k_true",
    "replicate",
    "seed",
    "status",
    "k_mode",
    "k_iqr",
    "omega_rel_error",
    "a1_mean",
    "a2_mean",
    "alpha_mean",
    "retained",
    "iterations",
    "burn_in",
    "wall_time_s",
)

AGGREGATE_FIELDS = (
    "prior",
    "design",
    "p",
    "k_true",
    "n_replicates",
    "n_ok",
    "n_match",
    "mean_mode",
    "mean_iqr",
    "pooled_iqr",
    "mean_omega_rel_error",
    "mean_a1",
    "mean_a2",
    "mean_alpha",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def replicate_csv_rows(reps: list[ReplicateSummary]) -> list[list[str]]:
    rows = []
    for r in reps:
        rows.append(
            [
                r.prior,
                r.design.label,
                _fmt(r.design.p),
                _fmt(r.design.k_true),
                _fmt(r.replicate),
                _fmt(r.seed),
                r.status,
                _fmt(r.k_mode),
                _fmt(r.k_iqr),
                _fmt(r.omega_rel_error),
                _fmt(r.extras_mean.get("a1")),
                _fmt(r.extras_mean.get("a2")),
                _fmt(r.extras_mean.get("alpha")),
                _fmt(r.retained),
                _fmt(r.iterations),
                _fmt(r.burn_in),
                _fmt(round(r.wall_time, 3)),
            ]
        )
    return rows


def aggregate_csv_rows(aggs: list[DesignAggregate]) -> list[list[str]]:
    rows = []
    for a in aggs:
        rows.append(
            [
                a.prior,
                a.design.label,
                _fmt(a.design.p),
                _fmt(a.design.k_true),
                _fmt(a.n_replicates),
                _fmt(a.n_ok),
                _fmt(a.n_match),
                _fmt(a.mean_mode),
                _fmt(a.mean_iqr),
                _fmt(a.pooled_iqr),
                _fmt(a.mean_omega_rel_error),
                _fmt(a.extras_mean.get("a1")),
                _fmt(a.extras_mean.get("a2")),
                _fmt(a.extras_mean.get("alpha")),
            ]
        )
    return rows
