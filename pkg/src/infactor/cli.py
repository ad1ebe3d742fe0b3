"""Command-line entry point: fit a dataset or run the benchmark grid.

Two subcommands share the configuration machinery:

* ``infactor fit --prior cusp --data y.csv --out run1`` runs one or more
  Gibbs chains on a stored dataset and writes per-chain trace CSVs, a
  posterior summary, the active-factor count distribution, the
  posterior-mean covariance estimate, and a manifest echoing the resolved
  configuration (re-parseable as a config file).  Chains checkpoint every
  1000 sweeps and can resume bit-exactly after an interrupt.

* ``infactor bench --prior mgp --design 6x2,10x3`` runs the synthetic
  rank-recovery study: per-replicate and per-design aggregate CSVs.  The
  aggregate file is byte-identical across reruns with the same seed.

Set INFACTOR_WORKERS=N to run benchmark replicates in N worker processes;
all file writes happen in the parent.
"""

from __future__ import annotations

import argparse
import csv
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bench import (
    ReplicateSummary,
    aggregate,
    aggregate_csv_rows,
    AGGREGATE_FIELDS,
    make_sampler,
    interquartile_range,
    posterior_mode,
    replicate_csv_rows,
    REPLICATE_FIELDS,
    run_replicate,
)
from .config import ConfigError, RunConfig, parse_config
from .core import Dataset
from .dists import ParameterError
from .rng import RngStream
from .runner import ChainRunner

__all__ = ["main"]

VERSION = "0.1.0"

TRACE_SCHEMA = "infactor-trace-v1"
FIT_SUMMARY_SCHEMA = "infactor-fit-summary-v1"
FIT_COUNTS_SCHEMA = "infactor-fit-counts-v1"
OMEGA_SCHEMA = "infactor-omega-mean-v1"
BENCH_REPLICATES_SCHEMA = "infactor-bench-replicates-v1"
BENCH_SUMMARY_SCHEMA = "infactor-bench-summary-v1"


def _cell(v) -> str:
    """Stable text for one CSV cell (floats via repr, integral floats bare)."""
    if v is None:
        return ""
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)
    return str(v)


def write_csv(path: Path, schema: str, header: list[str] | None, rows) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def worker_count() -> int:
    raw = os.environ.get("INFACTOR_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"INFACTOR_WORKERS: expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"INFACTOR_WORKERS: must be >= 1, got {n}")
    return n


def _provenance(extra: tuple[str, ...] = ()) -> tuple[str, ...]:
    return (
        f"infactor {VERSION}; numpy {np.__version__}; python {platform.python_version()}",
        *extra,
    )


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _load_dataset(path: str) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"data: file not found: {p}")
    if p.suffix in (".bin", ".dat"):
        return Dataset.from_binary(p)
    return Dataset.from_csv(p)


def _resume_path(resume: str, out: Path, chain: int, chains: int) -> Path:
    r = Path(resume)
    if r.is_dir():
        return r / f"checkpoint_chain{chain}.npz"
    if chains > 1:
        raise ConfigError(
            "resume: with chains > 1 pass the output directory holding "
            "checkpoint_chain<c>.npz files"
        )
    return r


def run_fit(cfg: RunConfig, resume: str | None, argv: list[str]) -> int:
    t0 = time.perf_counter()
    data = _load_dataset(cfg.data)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sampler = make_sampler(cfg.prior, data, cfg.gate, cfg.sampler_overrides())

    results = []
    for c in range(cfg.chains):
        ckpt = out / f"checkpoint_chain{c}.npz"
        if resume is not None:
            src = _resume_path(resume, out, c, cfg.chains)
            if not src.exists():
                raise ConfigError(f"resume: checkpoint not found: {src}")
            if src != ckpt:
                ckpt.write_bytes(src.read_bytes())
        runner = ChainRunner(
            sampler,
            data,
            cfg.iterations,
            cfg.burn_in,
            RngStream(cfg.seed, (c,)),
            checkpoint_path=ckpt,
            checkpoint_every=1000,
        )
        results.append(runner.run(resume=resume is not None))

    # per-chain traces
    for c, res in enumerate(results):
        write_csv(
            out / f"trace_chain{c}.csv",
            TRACE_SCHEMA,
            list(res.trace_fields),
            res.trace,
        )

    # summary rows: one per chain plus the pooled row
    extras_keys = sorted({k for res in results for k in res.extras})
    header = [
        "chain",
        "iterations",
        "burn_in",
        "retained",
        "k_mode",
        "k_iqr",
        "mean_active",
    ] + [f"mean_{k}" for k in extras_keys]
    rows = []
    for c, res in enumerate(results):
        counts = res.active_counts
        rows.append(
            [c, res.iterations, res.burn_in, counts.size, posterior_mode(counts),
             interquartile_range(counts), float(counts.mean())]
            + [float(res.extras[k].mean()) if k in res.extras else None for k in extras_keys]
        )
    pooled = np.concatenate([res.active_counts for res in results])
    rows.append(
        ["pooled", cfg.iterations, cfg.burn_in, pooled.size, posterior_mode(pooled),
         interquartile_range(pooled), float(pooled.mean())]
        + [
            float(np.mean(np.concatenate([res.extras[k] for res in results if k in res.extras])))
            for k in extras_keys
        ]
    )
    write_csv(out / "summary.csv", FIT_SUMMARY_SCHEMA, header, rows)

    # the retained-draw distribution of the active-factor count
    count_rows = []
    for c, res in enumerate(results):
        hist = np.bincount(res.active_counts)
        count_rows += [[c, k, int(n)] for k, n in enumerate(hist) if n > 0]
    write_csv(
        out / "counts.csv", FIT_COUNTS_SCHEMA, ["chain", "active_factors", "draws"], count_rows
    )

    # posterior-mean covariance pooled over chains (weighted by retained draws)
    weights = np.array([res.active_counts.size for res in results], dtype=float)
    omega = sum(w * res.omega_mean for w, res in zip(weights, results)) / weights.sum()
    write_csv(out / "omega_mean.csv", OMEGA_SCHEMA, None, omega)

    wall = time.perf_counter() - t0
    (out / "manifest.txt").write_text(
        cfg.to_manifest(
            extra_comments=_provenance(
                (f"command: {' '.join(argv)}", f"wall-time-s: {wall:.3f}")
            )
        )
    )

    mode_row = rows[-1]
    print(
        f"fit: prior={cfg.prior} chains={cfg.chains} retained={pooled.size} "
        f"active-factor mode={mode_row[4]} iqr={mode_row[5]}"
    )
    print(f"outputs in {out}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _bench_job(args: tuple) -> ReplicateSummary:
    prior, design, rep, seed, iterations, burn_in, overrides, gate = args
    return run_replicate(
        prior,
        design,
        rep,
        seed,
        iterations=iterations,
        burn_in=burn_in,
        overrides=overrides,
        gate=gate,
    )


def run_bench(cfg: RunConfig, argv: list[str]) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    designs = cfg.design_list()
    overrides = cfg.sampler_overrides()
    jobs = [
        (cfg.prior, d, rep, cfg.seed, cfg.iterations, cfg.burn_in, overrides, cfg.gate)
        for d in designs
        for rep in range(cfg.replicates)
    ]
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_bench_job, jobs))
    else:
        reps = [_bench_job(j) for j in jobs]

    by_design = {d.label: [] for d in designs}
    for r in reps:
        by_design[r.design.label].append(r)
    aggs = [aggregate(cfg.prior, d, by_design[d.label]) for d in designs]

    write_csv(
        out / "replicates.csv",
        BENCH_REPLICATES_SCHEMA,
        list(REPLICATE_FIELDS),
        replicate_csv_rows(reps),
    )
    write_csv(
        out / "summary.csv",
        BENCH_SUMMARY_SCHEMA,
        list(AGGREGATE_FIELDS),
        aggregate_csv_rows(aggs),
    )
    wall = time.perf_counter() - t0
    (out / "manifest.txt").write_text(
        cfg.to_manifest(
            extra_comments=_provenance(
                (f"command: {' '.join(argv)}", f"wall-time-s: {wall:.3f}")
            )
        )
    )

    for a in aggs:
        print(
            f"bench: prior={a.prior} design={a.design.label} ok={a.n_ok}/{a.n_replicates} "
            f"match={a.n_match} mean_mode={_cell(a.mean_mode)} mean_iqr={_cell(a.mean_iqr)}"
        )
    print(f"outputs in {out}")

    failures = [r for r in reps if not r.ok]
    if failures:
        print("replicate failures:", file=sys.stderr)
        for r in failures:
            print(
                f"  prior={r.prior} design={r.design.label} replicate={r.replicate}: "
                f"{r.status}",
                file=sys.stderr,
            )
        return 2
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_shared_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--prior", choices=("mgp", "cusp", "ibp"), help="shrinkage prior")
    sub.add_argument("--config", help="key=value configuration file")
    sub.add_argument("--seed", type=int, help="master seed (64-bit)")
    sub.add_argument("--iterations", type=int, help="total Gibbs sweeps per chain")
    sub.add_argument("--burn-in", dest="burn_in", type=int, help="discarded initial sweeps")
    sub.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infactor",
        description="Bayesian infinite factor models with shrinkage priors",
    )
    parser.add_argument("--version", action="version", version=f"infactor {VERSION}")
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="run Gibbs chains on a stored dataset")
    _add_shared_flags(fit)
    fit.add_argument("--data", help="dataset path (CSV of T rows x p columns)")
    fit.add_argument("--chains", type=int, help="number of independent chains")
    fit.add_argument("--resume", help="checkpoint file (or output dir) to resume from")

    bench = subs.add_parser("bench", help="synthetic rank-recovery benchmark")
    _add_shared_flags(bench)
    bench.add_argument("--design", help="design list like 6x2,10x3")
    bench.add_argument("--replicates", type=int, help="replicates per design")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    overrides: dict[str, object] = {
        "mode": args.command,
        "prior": args.prior,
        "seed": args.seed,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "out": args.out,
    }
    if args.command == "fit":
        overrides["data"] = args.data
        overrides["chains"] = args.chains
    else:
        overrides["designs"] = args.design
        overrides["replicates"] = args.replicates
    try:
        cfg = parse_config(args.config, overrides)
        if args.command == "fit":
            return run_fit(cfg, args.resume, argv)
        return run_bench(cfg, argv)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
