import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfrechet import evalstats as es
from netfrechet.errors import InsufficientData, UndefinedRSquared, ValidationError
from netfrechet.fixtures import linear_family, toy_dataset
from netfrechet.graphcore import Graph, laplacian
from netfrechet.metrics import MetricSpec, squared_distance_laplacians
from netfrechet.regress import Dataset, RegressorSpec, WeightScheme, predict

from conftest import random_graph

FRO = MetricSpec.frobenius()
WAS = MetricSpec.wasserstein()


def edge(w):
    return Graph(np.array([[0.0, w], [w, 0.0]]))


def random_dataset(seed, n=12, k=4):
    rng = np.random.default_rng(seed)
    return Dataset(rng.uniform(0, 5, n), [random_graph(rng, k) for _ in range(n)])


# ----------------------------------------------------------------- mean / variance

def test_frechet_mean_examples():
    pair = [edge(1.0), edge(4.0)]
    assert es.frechet_mean(pair, FRO).weights[0, 1] == pytest.approx(2.5, abs=1e-12)
    assert es.frechet_mean(pair, WAS).weights[0, 1] == pytest.approx(16 / 9, abs=1e-9)


def test_wasserstein_mean_brute_force():
    # minimize the 1-D objective over the single edge weight directly
    from scipy.optimize import minimize_scalar

    pair = [edge(1.0), edge(4.0)]

    def obj(w):
        return sum(squared_distance_laplacians(WAS, laplacian(g), laplacian(edge(w))) for g in pair)

    res = minimize_scalar(obj, bounds=(1.0, 4.0), method="bounded", options={"xatol": 1e-10})
    assert res.x == pytest.approx(16 / 9, abs=1e-6)


@pytest.mark.parametrize("metric", [FRO, MetricSpec.frobenius(0.5), WAS])
def test_single_graph_mean(metric, rng):
    g = random_graph(rng, 5)
    np.testing.assert_allclose(es.frechet_mean([g], metric).weights, g.weights, atol=1e-9)


def test_frobenius_mean_is_entrywise(rng):
    ds = random_dataset(3)
    np.testing.assert_array_equal(es.mean_laplacian(ds, FRO), ds.laplacians.mean(axis=0))


def test_frechet_variance_examples(rng):
    assert es.frechet_variance([edge(1.0), edge(4.0)], FRO) == pytest.approx(9.0, abs=1e-12)
    g = random_graph(rng, 5)
    for metric in (FRO, WAS):
        assert es.frechet_variance([g, g, g], metric) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("metric", [FRO, WAS])
def test_variance_permutation_invariant(metric, rng):
    graphs = [random_graph(rng, 4) for _ in range(6)]
    a = es.frechet_variance(graphs, metric)
    b = es.frechet_variance([graphs[i] for i in rng.permutation(6)], metric)
    assert a == pytest.approx(b, rel=1e-9)


# ----------------------------------------------------------------- R^2

def test_r_squared_exact_interpolator():
    ds = linear_family()
    cfg = es.EvalConfig(RegressorSpec(FRO), FRO, folds=2, reps=1)
    assert es.r_squared(ds, cfg) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("metric", [FRO, WAS])
def test_r_squared_constant_mean_is_zero(metric):
    ds = random_dataset(5)
    M = es.mean_laplacian(ds, metric)
    assert es.r_squared_from_predictions(ds, [M] * ds.n, metric) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), metric=st.sampled_from([FRO, WAS]))
def test_r_squared_at_most_one(seed, metric):
    ds = random_dataset(seed, n=8)
    cfg = es.EvalConfig(RegressorSpec(metric), metric, folds=2, reps=1)
    assert es.r_squared(ds, cfg) <= 1.0 + 1e-12


def test_r_squared_undefined():
    g = edge(1.0)
    ds = Dataset([1.0, 2.0, 3.0], [g, g, g])
    with pytest.raises(UndefinedRSquared):
        es.r_squared(ds, es.EvalConfig(folds=2, reps=1))


# ----------------------------------------------------------------- cross-validation

def test_eval_config_validation():
    with pytest.raises(ValidationError):
        es.EvalConfig(folds=1)
    with pytest.raises(ValidationError):
        es.EvalConfig(reps=0)
    with pytest.raises(ValidationError):
        es.EvalConfig(seed=-1)


def test_cv_needs_enough_observations():
    with pytest.raises(InsufficientData):
        es.cv_mspe(toy_dataset(), es.EvalConfig(folds=10, reps=1))
    with pytest.raises(InsufficientData):
        es.cv_mspe(toy_dataset().subset([0, 1]), es.EvalConfig(folds=2, reps=1))


def test_cv_constant_family_zero_mspe(rng):
    g = random_graph(rng, 5)
    ds = Dataset(np.arange(10.0), [g] * 10)
    for metric in (FRO, WAS):
        res = es.cv_mspe(ds, es.EvalConfig(RegressorSpec(metric), metric, folds=5, reps=3))
        assert res.mspe_mean < 1e-10
        assert math.isnan(res.r_squared) and "r_squared_undefined" in res.flags


def test_cv_deterministic_and_seed_sensitive():
    ds = random_dataset(11, n=15)
    cfg = es.EvalConfig(RegressorSpec(WAS), FRO, folds=5, reps=4, seed=42)
    a = es.cv_mspe(ds, cfg)
    b = es.cv_mspe(ds, cfg)
    c = es.cv_mspe(ds, cfg, n_jobs=3)
    assert np.array_equal(a.mspe_per_rep, b.mspe_per_rep)
    assert np.array_equal(a.mspe_per_rep, c.mspe_per_rep)
    d = es.cv_mspe(ds, es.EvalConfig(RegressorSpec(WAS), FRO, folds=5, reps=4, seed=43))
    assert not np.array_equal(a.mspe_per_rep, d.mspe_per_rep)
    assert a.mspe_mean == float(np.mean(a.mspe_per_rep))


def test_rep_prefix_stable():
    # rep r's sub-seed does not depend on how many reps run
    ds = random_dataset(2, n=10)
    short = es.cv_mspe(ds, es.EvalConfig(folds=5, reps=2, seed=7))
    long = es.cv_mspe(ds, es.EvalConfig(folds=5, reps=5, seed=7))
    assert np.array_equal(short.mspe_per_rep, long.mspe_per_rep[:2])


def test_fold_assignment_partition():
    blocks = es.fold_assignment(23, 10, es.rep_seed(0, 0))
    allidx = np.concatenate(blocks)
    assert sorted(allidx.tolist()) == list(range(23))
    assert {len(b) for b in blocks} == {2, 3}


def test_mspe_fold_order_invariant():
    ds = random_dataset(9, n=12)
    cfg = es.EvalConfig(RegressorSpec(FRO), FRO, folds=4, reps=1, seed=5)
    expect = es.cv_mspe(ds, cfg).mspe_per_rep[0]
    blocks = es.fold_assignment(ds.n, 4, es.rep_seed(5, 0))
    spec = RegressorSpec(FRO, projection=False)
    errs = np.zeros(ds.n)
    for test in blocks[::-1]:
        train = np.setdiff1d(np.arange(ds.n), test)
        for i in test[::-1]:
            P = predict(ds.subset(train), ds.X[i], spec).raw_laplacian
            errs[i] = squared_distance_laplacians(FRO, ds.laplacians[i], P)
    assert math.fsum(errs) / ds.n == expect


def test_degenerate_fold_flagged():
    # a fold whose training rows share one weekend value makes the covariance singular
    rng = np.random.default_rng(0)
    X = np.column_stack([[1, 0, 0, 0, 0, 0], rng.uniform(0, 5, 6)])
    ds = Dataset(X, [random_graph(rng, 4) for _ in range(6)])
    res = es.cv_mspe(ds, es.EvalConfig(folds=6, reps=1))
    assert "covariate_cov_pinv" in res.flags
    assert np.isfinite(res.mspe_mean)


def test_result_serialization():
    ds = random_dataset(4, n=10)
    res = es.cv_mspe(ds, es.EvalConfig(RegressorSpec(WAS, WeightScheme.local(bandwidth=3.0)), WAS,
                                       folds=5, reps=2))
    d = json.loads(json.dumps(res.to_dict()))
    assert d["config"]["folds"] == 5 and len(d["mspe_per_rep"]) == 2
    rows = res.csv_rows().splitlines()
    assert rows[0] == "rep,mspe" and len(rows) == 3
    assert float(rows[1].split(",")[1]) == res.mspe_per_rep[0]
