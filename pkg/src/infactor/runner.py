"""Chain driver: sweeps, retained-draw collection, checkpoint/resume.

A run is identified by (sampler, data, iterations, burn_in, rng stream); a
single stream serves initialization and every sweep, so a checkpoint needs
only the packed chain arrays, the stream position, and the collector
contents to resume bit-exactly.  A resumed run reproduces the uninterrupted
run's summaries to the last bit — that property is load-bearing (tested)
because long benchmark runs are expected to survive preemption.

Collected per retained draw: the sampler's active-column count, a running
sum of the implied covariance (for the posterior-mean estimate of the data
covariance), and the sampler's scalar extras (shape estimates and the
like).  Per iteration: one trace row.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, implied_covariance
from .rng import RngStream

__all__ = ["RunResult", "ChainRunner", "load_checkpoint"]

CHECKPOINT_VERSION = 1


def _trace_matrix(rows: list[tuple], n_fields: int) -> np.ndarray:
    if not rows:
        return np.empty((0, n_fields))
    return np.asarray(rows, dtype=float)


@dataclass
class RunResult:
    sampler_name: str
    iterations: int
    burn_in: int
    active_counts: np.ndarray
    omega_mean: np.ndarray
    extras: dict[str, np.ndarray]
    trace_fields: tuple[str, ...]
    trace: np.ndarray
    final_chain: object
    wall_time: float
    resumed: bool = False

    def retained(self) -> int:
        return int(self.active_counts.size)


@dataclass
class _Collector:
    """Retained-draw accumulators; contents are checkpointed verbatim."""

    counts: list[int] = field(default_factory=list)
    omega_sum: np.ndarray | None = None
    omega_n: int = 0
    extras: dict[str, list[float]] = field(default_factory=dict)
    trace_rows: list[tuple] = field(default_factory=list)

    def add_trace(self, row: tuple) -> None:
        self.trace_rows.append(tuple(float(x) for x in row))

    def add_retained(self, chain, count: int, extras: dict[str, float]) -> None:
        self.counts.append(int(count))
        om = implied_covariance(chain.core.loadings, chain.core.idio_variances)
        if self.omega_sum is None:
            self.omega_sum = om
        else:
            self.omega_sum = self.omega_sum + om
        self.omega_n += 1
        for key, val in extras.items():
            self.extras.setdefault(key, []).append(float(val))


class ChainRunner:
    """Runs one chain, optionally checkpointing every `checkpoint_every` sweeps.

    `stop_after` ends the loop early right after the given number of
    completed iterations (a crash stand-in for resume tests); the returned
    result then covers only the completed prefix.
    """

    def __init__(
        self,
        sampler,
        data: Dataset,
        iterations: int,
        burn_in: int,
        rng: RngStream,
        checkpoint_path: str | Path | None = None,
        checkpoint_every: int = 1000,
    ):
        if not 0 <= burn_in < iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        self.sampler = sampler
        self.data = data
        self.iterations = iterations
        self.burn_in = burn_in
        self.rng = rng
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.checkpoint_every = checkpoint_every

    # -- checkpoint encoding --------------------------------------------------

    def _write_checkpoint(self, g_next: int, chain, coll: _Collector, elapsed: float) -> None:
        payload: dict[str, np.ndarray] = {
            "version": np.array(CHECKPOINT_VERSION),
            "g_next": np.array(g_next),
            "iterations": np.array(self.iterations),
            "burn_in": np.array(self.burn_in),
            "elapsed": np.array(elapsed),
            "sampler_name": np.array(self.sampler.name),
            "rng_state": np.array(json.dumps(self.rng.state_dict())),
            "counts": np.asarray(coll.counts, dtype=np.int64),
            "omega_n": np.array(coll.omega_n),
            "trace_rows": _trace_matrix(coll.trace_rows, len(self.sampler.trace_fields)),
        }
        if coll.omega_sum is not None:
            payload["omega_sum"] = coll.omega_sum
        for key, vals in coll.extras.items():
            payload[f"extra_{key}"] = np.asarray(vals, dtype=float)
        for key, arr in self.sampler.pack_state(chain).items():
            payload[f"state_{key}"] = arr
        tmp = self.checkpoint_path.with_suffix(".tmp.npz")
        np.savez(tmp, **payload)
        tmp.replace(self.checkpoint_path)

    def _load_checkpoint(self) -> tuple[int, object, _Collector, float]:
        with np.load(self.checkpoint_path, allow_pickle=False) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise ValueError("unrecognized checkpoint version")
            if str(z["sampler_name"]) != self.sampler.name:
                raise ValueError(
                    f"checkpoint belongs to sampler {z['sampler_name']!r}, "
                    f"not {self.sampler.name!r}"
                )
            if int(z["iterations"]) != self.iterations or int(z["burn_in"]) != self.burn_in:
                raise ValueError("checkpoint run length differs from requested run")
            g_next = int(z["g_next"])
            elapsed = float(z["elapsed"])
            self.rng = RngStream.from_state_dict(json.loads(str(z["rng_state"])))
            coll = _Collector()
            coll.counts = [int(c) for c in z["counts"]]
            coll.omega_n = int(z["omega_n"])
            if "omega_sum" in z:
                coll.omega_sum = z["omega_sum"]
            coll.trace_rows = [tuple(row) for row in z["trace_rows"]]
            state_arrays = {}
            for key in z.files:
                if key.startswith("extra_"):
                    coll.extras[key[len("extra_") :]] = [float(v) for v in z[key]]
                elif key.startswith("state_"):
                    state_arrays[key[len("state_") :]] = z[key]
            chain = self.sampler.unpack_state(state_arrays)
        return g_next, chain, coll, elapsed

    # -- main loop -------------------------------------------------------------

    def run(self, resume: bool = False, stop_after: int | None = None) -> RunResult:
        t0 = time.perf_counter()
        if resume:
            if self.checkpoint_path is None or not self.checkpoint_path.exists():
                raise FileNotFoundError("no checkpoint to resume from")
            g0, chain, coll, prior_elapsed = self._load_checkpoint()
        else:
            g0 = 0
            chain = self.sampler.init_state(self.data, self.rng)
            coll = _Collector()
            prior_elapsed = 0.0

        g = g0
        while g < self.iterations:
            chain, info = self.sampler.sweep(chain, self.data, g, self.rng)
            coll.add_trace(self.sampler.trace_row(chain, g, info))
            if g >= self.burn_in:
                coll.add_retained(
                    chain, self.sampler.active_count(chain), self.sampler.extra_summaries(chain)
                )
            g += 1
            if self.checkpoint_path is not None and g % self.checkpoint_every == 0:
                self._write_checkpoint(g, chain, coll, prior_elapsed + time.perf_counter() - t0)
            if stop_after is not None and g >= stop_after:
                break

        omega = (
            coll.omega_sum / coll.omega_n
            if coll.omega_n
            else np.zeros((self.data.p, self.data.p))
        )
        return RunResult(
            sampler_name=self.sampler.name,
            iterations=self.iterations,
            burn_in=self.burn_in,
            active_counts=np.asarray(coll.counts, dtype=np.int64),
            omega_mean=omega,
            extras={k: np.asarray(v) for k, v in coll.extras.items()},
            trace_fields=tuple(self.sampler.trace_fields),
            trace=_trace_matrix(coll.trace_rows, len(self.sampler.trace_fields)),
            final_chain=chain,
            wall_time=prior_elapsed + time.perf_counter() - t0,
            resumed=resume,
        )


def load_checkpoint(path: str | Path) -> dict:
    """Peek at a checkpoint's run metadata without a sampler."""
    with np.load(Path(path), allow_pickle=False) as z:
        return {
            "version": int(z["version"]),
            "sampler_name": str(z["sampler_name"]),
            "g_next": int(z["g_next"]),
            "iterations": int(z["iterations"]),
            "burn_in": int(z["burn_in"]),
            "retained_so_far": int(z["omega_n"]),
        }
