"""Synthetic comparison harness: designs, summaries, aggregation, CSV rows."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infactor.bench import (
    AGGREGATE_FIELDS,
    DEFAULT_RUN_LENGTHS,
    EXTENDED_DESIGNS,
    GATING_DESIGNS,
    REPLICATE_FIELDS,
    ReplicateSummary,
    SimDesign,
    aggregate,
    aggregate_csv_rows,
    generate_dataset,
    generate_true_model,
    interquartile_range,
    make_sampler,
    parse_designs,
    posterior_mode,
    replicate_csv_rows,
    run_replicate,
)
from infactor.core import Dataset
from infactor.cusp import CuspSampler
from infactor.ibp import IbpSampler
from infactor.mgp import MgpSampler
from infactor.rng import RngStream


# -- designs ---------------------------------------------------------------------


def test_canonical_design_grids():
    assert [d.label for d in GATING_DESIGNS] == ["6x2", "10x3", "30x5"]
    assert [d.label for d in EXTENDED_DESIGNS] == ["50x8", "100x15"]
    assert all(d.n_times == 100 for d in GATING_DESIGNS + EXTENDED_DESIGNS)
    assert DEFAULT_RUN_LENGTHS["cusp"] == (15000, 5000)
    assert DEFAULT_RUN_LENGTHS["mgp"] == (30000, 10000)


def test_parse_designs():
    got = parse_designs(" 6x2, 10X3 ,30x5")
    assert got == [SimDesign(6, 2), SimDesign(10, 3), SimDesign(30, 5)]
    for bad in ("6y2", "6x", "x3", "6x2x1", ""):
        with pytest.raises(ValueError):
            parse_designs(bad)


def test_design_validation():
    with pytest.raises(ValueError):
        SimDesign(1, 1)
    with pytest.raises(ValueError):
        SimDesign(4, 5)
    with pytest.raises(ValueError):
        SimDesign(4, 2, n_times=1)


# -- truth generation ------------------------------------------------------------


def test_generate_true_model_sparsity_pattern():
    design = SimDesign(10, 3)
    truth = generate_true_model(design, RngStream(1, (0,)))
    assert truth.loadings.shape == (10, 3)
    nnz = (truth.loadings != 0).sum(axis=0)
    assert np.all(nnz >= design.k_true + 1) and np.all(nnz <= 2 * design.k_true)
    assert np.all(truth.idio_variances > 0)
    omega = truth.covariance()
    assert omega.shape == (10, 10)
    assert np.all(np.linalg.eigvalsh(omega) > 0)


def test_generate_true_model_nonzero_counts_capped_at_p():
    design = SimDesign(3, 2)  # 2k = 4 > p = 3
    truth = generate_true_model(design, RngStream(2, (0,)))
    assert (truth.loadings != 0).sum(axis=0).max() <= 3


def test_generate_dataset_shape_and_determinism():
    design = SimDesign(6, 2, n_times=50)
    truth = generate_true_model(design, RngStream(3, (0,)))
    d1 = generate_dataset(design, truth, RngStream(4, (0,)))
    d2 = generate_dataset(design, truth, RngStream(4, (0,)))
    assert d1.values.shape == (50, 6)
    np.testing.assert_array_equal(d1.values, d2.values)


# -- samplers from names ----------------------------------------------------------


def test_make_sampler_dispatch_and_gate():
    data = Dataset(np.random.default_rng(0).standard_normal((60, 8)))
    mgp = make_sampler("mgp", data, burn_in=500)
    assert isinstance(mgp, MgpSampler)
    assert mgp.schedule.burn_in_gate == 500
    cusp = make_sampler("cusp", data, burn_in=300)
    assert isinstance(cusp, CuspSampler)
    assert cusp.schedule.burn_in_gate == 300
    assert cusp.schedule.alpha0 == -1.0
    ibp = make_sampler("ibp", data, burn_in=100)
    assert isinstance(ibp, IbpSampler)
    with pytest.raises(ValueError, match="unknown prior"):
        make_sampler("lasso", data, 100)


def test_make_sampler_overrides_pass_through():
    data = Dataset(np.random.default_rng(0).standard_normal((60, 8)))
    samp = make_sampler("cusp", data, 100, overrides={"initial_h": 4})
    assert samp.initial_h == 4


# -- mode and spread -----------------------------------------------------------------


def test_posterior_mode_tie_breaks_small():
    assert posterior_mode(np.array([3, 3, 2, 2, 5])) == 2
    assert posterior_mode(np.array([4])) == 4
    with pytest.raises(ValueError):
        posterior_mode(np.array([], dtype=int))
    with pytest.raises(ValueError):
        posterior_mode(np.array([-1, 2]))


def test_interquartile_range_frozen():
    assert interquartile_range(np.array([6, 6, 5, 7])) == pytest.approx(0.5)
    assert interquartile_range(np.array([2, 2, 2, 2])) == 0.0


@settings(max_examples=50)
@given(st.lists(st.integers(min_value=0, max_value=12), min_size=1, max_size=40))
def test_mode_and_iqr_permutation_invariant(counts):
    x = np.array(counts)
    gen = np.random.default_rng(0)
    perm = gen.permutation(x)
    assert posterior_mode(x) == posterior_mode(perm)
    assert interquartile_range(x) == pytest.approx(interquartile_range(perm))
    assert posterior_mode(x) in x


# -- replicate runs --------------------------------------------------------------------


TINY = SimDesign(4, 1, n_times=30)


def test_run_replicate_smoke_and_determinism():
    r1 = run_replicate("cusp", TINY, replicate=0, seed=99, iterations=80, burn_in=30)
    assert r1.ok, r1.status
    assert r1.retained == 50
    assert r1.count_hist.sum() == 50
    assert isinstance(r1.k_mode, int)
    assert r1.omega_rel_error is not None and r1.omega_rel_error >= 0
    assert r1.wall_time > 0
    r2 = run_replicate("cusp", TINY, replicate=0, seed=99, iterations=80, burn_in=30)
    assert (r2.k_mode, r2.k_iqr, r2.omega_rel_error) == (
        r1.k_mode,
        r1.k_iqr,
        r1.omega_rel_error,
    )


def test_run_replicate_distinct_replicates_differ():
    r0 = run_replicate("cusp", TINY, replicate=0, seed=99, iterations=60, burn_in=20)
    r1 = run_replicate("cusp", TINY, replicate=1, seed=99, iterations=60, burn_in=20)
    assert r0.ok and r1.ok
    assert r0.omega_rel_error != r1.omega_rel_error


def test_run_replicate_failure_is_isolated():
    bad = run_replicate(
        "cusp", TINY, replicate=0, seed=1, iterations=40, burn_in=10,
        overrides={"no_such_argument": 1},
    )
    assert not bad.ok
    assert "TypeError" in bad.status
    assert bad.traceback and "no_such_argument" in bad.traceback
    assert bad.k_mode is None


def test_run_replicate_ibp_extras():
    r = run_replicate("ibp", TINY, replicate=0, seed=7, iterations=60, burn_in=20)
    assert r.ok, r.status
    assert "alpha" in r.extras_mean and r.extras_mean["alpha"] > 0


# -- aggregation -------------------------------------------------------------------


def _summary(k_mode, k_iqr, hist, omega, extras=None, status="ok"):
    return ReplicateSummary(
        prior="cusp",
        design=SimDesign(6, 2),
        replicate=0,
        seed=1,
        status=status,
        k_mode=k_mode if status == "ok" else None,
        k_iqr=k_iqr if status == "ok" else None,
        count_hist=np.array(hist) if status == "ok" else None,
        omega_rel_error=omega if status == "ok" else None,
        extras_mean=extras or {},
        retained=int(np.sum(hist)) if status == "ok" else 0,
    )


def test_aggregate_frozen_hand_case():
    reps = [
        _summary(2, 0.5, [0, 0, 3, 1], 0.2, {"alpha": 1.0}),
        _summary(3, 1.0, [0, 0, 1, 3], 0.4, {"alpha": 3.0}),
        _summary(None, None, None, None, status="RuntimeError: boom"),
    ]
    agg = aggregate("cusp", SimDesign(6, 2), reps)
    assert (agg.n_replicates, agg.n_ok, agg.n_match) == (3, 2, 1)
    assert agg.mean_mode == pytest.approx(2.5)
    assert agg.mean_iqr == pytest.approx(0.75)
    # pooled counts: [2,2,2,3] + [2,3,3,3] -> IQR of {2:4, 3:4} = 1.0
    assert agg.pooled_iqr == pytest.approx(1.0)
    assert agg.mean_omega_rel_error == pytest.approx(0.3)
    assert agg.extras_mean == {"alpha": 2.0}


def test_aggregate_all_failed():
    reps = [_summary(None, None, None, None, status="boom")]
    agg = aggregate("cusp", SimDesign(6, 2), reps)
    assert agg.n_ok == 0 and agg.mean_mode is None and agg.pooled_iqr is None


# -- CSV row encodings ------------------------------------------------------------------


def test_replicate_csv_rows_roundtrippable_floats():
    rep = _summary(2, 0.5, [0, 0, 4], 0.123456789012345, {"alpha": 1.25})
    rep.wall_time = 1.23456
    (row,) = replicate_csv_rows([rep])
    assert len(row) == len(REPLICATE_FIELDS)
    by = dict(zip(REPLICATE_FIELDS, row))
    assert by["design"] == "6x2"
    assert float(by["omega_rel_error"]) == 0.123456789012345
    assert by["a1_mean"] == ""  # absent extras stay empty
    assert by["alpha_mean"] == "1.25"
    assert by["wall_time_s"] == "1.235"
    assert "np" not in by["k_iqr"]  # plain repr, parseable back


def test_aggregate_csv_rows_shape():
    agg = aggregate("cusp", SimDesign(6, 2), [_summary(2, 0.0, [0, 0, 4], 0.2)])
    (row,) = aggregate_csv_rows([agg])
    assert len(row) == len(AGGREGATE_FIELDS)
    assert row[0] == "cusp" and row[1] == "6x2"
    # aggregate rows carry no wall-clock column at all
    assert "wall" not in ",".join(AGGREGATE_FIELDS)
