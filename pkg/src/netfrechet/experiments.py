"""Experiment drivers: each writes CSV series plus a ``manifest.json``.

Every driver takes plain keyword parameters, echoes all of them (after
defaults are filled in) into the manifest and is deterministic given
those parameters, so ``run(**manifest["parameters"])`` regenerates the
outputs bit for bit.
"""

import csv
import json
import logging
import math
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, specmat
from . import barycenter as bc
from ._backend import BACKEND
from .errors import NetFrechetError, SolverError
from .evalstats import rep_seed
from .fixtures import INTERPOLATION_TOPOLOGIES, toy_dataset, write_taxi_fixture
from .graphcore import (
    erdos_renyi,
    fiedler_value,
    laplacian,
    make_named,
    make_scaled_family,
    parse_topology,
    spectral_covariate,
    triangle,
)
from .ingest import ingest_taxi
from .metrics import (
    MetricSpec,
    bures_wasserstein_sq,
    frobenius_power_distance_laplacians,
    wasserstein_sq_laplacians,
)
from .regress import Dataset, RegressorSpec, SolverConfig, WeightScheme, default_bandwidth, predict

log = logging.getLogger(__name__)

FROB = MetricSpec.frobenius(1.0)
WASS = MetricSpec.wasserstein()
TOY_LOCAL = WeightScheme.local("epanechnikov", 2.0)

SPECTRAL_TOPOLOGIES = (
    "path", "star", "cycle", "wheel", "complete", "dumbbell", "lollipop",
    "pentagonal_prism", "two_star", "4_regular", "6_regular", "8_regular",
)


def _scheme(name, kernel="epanechnikov", bandwidth=2.0):
    if name == "global":
        return WeightScheme()
    return WeightScheme.local(kernel, bandwidth)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _manifest(out, name, params, outputs, assumptions, summary=None):
    m = {
        "experiment": name,
        "parameters": params,
        "outputs": outputs,
        "assumptions": assumptions,
        "summary": summary or {},
        "package_version": __version__,
        "backend": BACKEND,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(m, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return m


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _pmap(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def _safe_predict(ds, x, spec):
    """Prediction plus a status string; solver failures never abort a sweep."""
    try:
        rep = predict(ds, x, spec)
    except SolverError as exc:
        rep_ = exc.report
        return None, "diverged", (rep_.iterations if rep_ is not None else 0)
    except NetFrechetError as exc:
        return None, f"error:{type(exc).__name__}", 0
    it = rep.solver_report.iterations if rep.solver_report is not None else 0
    status = "ok" if "not_converged" not in rep.flags else "not_converged"
    return rep, status, it


def _wspec(variant, scheme, eps=1e-5, tol=1e-8, max_iter=500):
    return RegressorSpec(WASS, scheme, SolverConfig(variant, eps, tol, max_iter))


# --------------------------------------------------------------- fig1_toy

def fig1_toy(out, x=5.0, eps=1e-5, tol=1e-8, bandwidth=2.0):
    """Global and local predictions on the four-triangle toy dataset."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ds = toy_dataset()
    truth = laplacian(triangle(x))
    rows = []
    schemes = {"global": WeightScheme(), "local": WeightScheme.local("epanechnikov", bandwidth)}
    for sname, scheme in schemes.items():
        specs = [
            ("frobenius", None, RegressorSpec(FROB, scheme)),
            ("wasserstein", bc.SHIFTED, _wspec(bc.SHIFTED, scheme, eps, tol)),
            ("wasserstein", bc.ENTROPIC, _wspec(bc.ENTROPIC, scheme, eps, tol)),
        ]
        for metric, variant, spec in specs:
            rep = predict(ds, [x], spec)
            W = rep.graph.weights
            sr = rep.solver_report
            rows.append([
                sname, metric, variant or "", x,
                " ".join(repr(float(v)) for v in rep.effective_weights),
                W[0, 1], W[0, 2], W[1, 2],
                frobenius_power_distance_laplacians(rep.laplacian, truth),
                sr.iterations if sr else 0, sr.converged if sr else True,
            ])
    header = ["weights", "metric", "variant", "x", "effective_weights", "w01", "w02", "w12",
              "frobenius_error", "iterations", "converged"]
    _write_csv(out / "fig1_predictions.csv", header, rows)
    params = {"x": x, "eps": eps, "tol": tol, "bandwidth": bandwidth}
    return _manifest(out, "fig1_toy", params, ["fig1_predictions.csv"], {
        "dataset": "triangles with weights (1/x, 1/x, 2/x) at x = 2, 4, 6, 8",
        "local_kernel": "epanechnikov",
    })


# ---------------------------------------------------------------- scaling

def scaling(out, kinds=("cycle",), nodes=tuple(range(20, 201, 20)), covariates=(2.0, 4.0, 6.0, 8.0),
            x=5.0, schemes=("global", "local"), bandwidth=2.0, eps=1e-5, tol=1e-8, n_jobs=1):
    """Prediction error at ``x`` versus node count for uniformly 1/x-weighted topologies.

    The error is the Frobenius distance between predicted and true
    Laplacians (true graph: every edge weighted 1/x).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    summary = {}
    for kind in kinds:
        for sname in schemes:
            scheme = _scheme(sname, "epanechnikov", bandwidth)

            def one(N, kind=kind, scheme=scheme):
                ds = Dataset.from_pairs(make_scaled_family(kind, N, covariates))
                name, k = parse_topology(kind)
                truth = laplacian(make_named(name, N, 1.0 / x, k))
                errs, its, raws = [], [], []
                for spec in (RegressorSpec(FROB, scheme), _wspec(bc.SHIFTED, scheme, eps, tol),
                             _wspec(bc.ENTROPIC, scheme, eps, tol)):
                    rep, status, it = _safe_predict(ds, [x], spec)
                    errs.append(math.nan if rep is None else
                                frobenius_power_distance_laplacians(rep.laplacian, truth))
                    its.append(it)
                    raws.append(None if rep is None else rep.raw_laplacian)
                rel = math.nan
                if raws[1] is not None and raws[2] is not None:
                    rel = float(np.linalg.norm(raws[2] - raws[1]) / np.linalg.norm(raws[1]))
                return [N, errs[0], errs[1], errs[2], rel, its[1], its[2]]

            rows = _pmap(one, list(nodes), n_jobs)
            fname = f"scaling_{kind}_{sname}.csv"
            _write_csv(out / fname, ["nodes", "frobenius", "wasserstein", "entropic",
                                     "entropic_vs_wasserstein_rel", "iterations_wasserstein",
                                     "iterations_entropic"], rows)
            outputs.append(fname)
            summary[f"{kind}_{sname}"] = {str(r[0]): {"frobenius": r[1], "wasserstein": r[2]} for r in rows}
    params = {"kinds": list(kinds), "nodes": list(nodes), "covariates": list(covariates), "x": x,
              "schemes": list(schemes), "bandwidth": bandwidth, "eps": eps, "tol": tol,
              "n_jobs": n_jobs}
    return _manifest(out, "scaling", params, outputs, {
        "edge_weights": "uniform 1/x on every edge of the named topology",
        "error": "Frobenius norm of predicted minus true Laplacian",
        "local_kernel": "epanechnikov",
        "wasserstein_variant": bc.SHIFTED,
    }, summary)


# ------------------------------------------------------------ interpolate

def interpolate(out, n=10, start=1.0, stop=5.0, step=0.1, bandwidth=2.0, kernel="epanechnikov",
                weights="local", tol=1e-8, snapshots=(1.0, 1.5, 2.0, 2.2, 2.5, 3.0, 3.2, 3.5, 3.7,
                                                      4.0, 4.2, 4.5, 5.0), n_jobs=1):
    """Distance from interpolated predictions to each training topology.

    Columns per target: ``frobenius`` (Frobenius norm of the Laplacian
    difference), ``wasserstein_sq`` (squared 2-Wasserstein distance of the
    Gaussian representations) and ``laplacian_bures_sq`` (the trace
    formula applied to the Laplacians themselves).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ds = Dataset(np.arange(1.0, 6.0), [make_named(t, n) for t in INTERPOLATION_TOPOLOGIES],
                 ids=list(INTERPOLATION_TOPOLOGIES))
    scheme = _scheme(weights, kernel, bandwidth)
    m = int(round((stop - start) / step))
    grid = [round(start + i * step, 10) for i in range(m + 1)]
    targets = list(zip(INTERPOLATION_TOPOLOGIES, ds.laplacians))
    regressors = {"frobenius": RegressorSpec(FROB, scheme), "wasserstein": _wspec(bc.SHIFTED, scheme, tol=tol)}
    outputs, summary, snaps = [], {}, {}
    for rname, spec in regressors.items():

        def one(x, spec=spec):
            rep, status, it = _safe_predict(ds, [x], spec)
            row = [x, status, it]
            for _, Lt in targets:
                if rep is None:
                    row += [math.nan] * 3
                    continue
                L = rep.laplacian
                row += [frobenius_power_distance_laplacians(L, Lt), wasserstein_sq_laplacians(L, Lt),
                        bures_wasserstein_sq(L, Lt)]
            return row, rep

        res = _pmap(one, grid, n_jobs)
        header = ["x", "status", "iterations"]
        for t in INTERPOLATION_TOPOLOGIES:
            header += [f"{t}_frobenius", f"{t}_wasserstein_sq", f"{t}_laplacian_bures_sq"]
        fname = f"interpolate_{rname}.csv"
        _write_csv(out / fname, header, [r for r, _ in res])
        outputs.append(fname)
        summary[rname] = {}
        for ti, t in enumerate(INTERPOLATION_TOPOLOGIES):
            col = np.array([r[3 + 3 * ti] for r, _ in res])
            bcol = np.array([r[5 + 3 * ti] for r, _ in res])
            summary[rname][t] = {
                "argmin_frobenius": grid[int(np.nanargmin(col))],
                "min_frobenius": float(np.nanmin(col)),
                "argmin_laplacian_bures_sq": grid[int(np.nanargmin(bcol))],
                "min_laplacian_bures_sq": float(np.nanmin(bcol)),
            }
        snaps[rname] = {repr(x): [list(e) for e in rep.graph.edges()]
                        for x, (_, rep) in zip(grid, res)
                        if rep is not None and any(abs(x - s) < 1e-9 for s in snapshots)}
    with open(out / "interpolate_graphs.json", "w", encoding="utf-8") as fh:
        json.dump(snaps, fh, indent=1, sort_keys=True)
    outputs.append("interpolate_graphs.json")
    params = {"n": n, "start": start, "stop": stop, "step": step, "bandwidth": bandwidth,
              "kernel": kernel, "weights": weights, "tol": tol, "snapshots": list(snapshots),
              "n_jobs": n_jobs}
    return _manifest(out, "interpolate", params, outputs, {
        "dataset": "path, cycle, star, wheel, complete at x = 1..5",
        "wasserstein_variant": bc.SHIFTED,
        "projection": True,
    }, summary)


# --------------------------------------------------------------- spectral

def spectral(out, n=10, grid_size=20, low=1.0, high=100.0, log_grid=True,
             targets=("cycle", "star", "wheel", "complete"), weights="global",
             bandwidth=None, tol=1e-8, max_iter=500, n_jobs=1):
    """Heatmap series over a 2-D grid of (2nd, 3rd smallest eigenvalue) covariates."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = [_make(t, n) for t in SPECTRAL_TOPOLOGIES]
    X = np.array([spectral_covariate(g, [2, 3]) for g in graphs])
    ds = Dataset(X, graphs, ids=list(SPECTRAL_TOPOLOGIES))
    scheme = WeightScheme() if weights == "global" else WeightScheme.local("gaussian", bandwidth)
    axis = (np.geomspace(low, high, grid_size) if log_grid else np.linspace(low, high, grid_size))
    points = [(i, j, axis[i], axis[j]) for i in range(grid_size) for j in range(grid_size)]
    tl = {t: laplacian(_make(t, n)) for t in targets}
    regressors = {"frobenius": RegressorSpec(FROB, scheme),
                  "wasserstein": _wspec(bc.SHIFTED, scheme, tol=tol, max_iter=max_iter)}
    outputs, summary = [], {}
    for rname, spec in regressors.items():

        def one(pt, spec=spec):
            i, j, a, b = pt
            rep, status, it = _safe_predict(ds, [a, b], spec)
            row = [i, j, a, b, status, it]
            for t in targets:
                if rep is None:
                    row += [math.nan, math.nan]
                else:
                    row += [frobenius_power_distance_laplacians(rep.laplacian, tl[t]),
                            math.sqrt(wasserstein_sq_laplacians(rep.laplacian, tl[t]))]
            return row

        rows = _pmap(one, points, n_jobs)
        header = ["i", "j", "lambda2", "lambda3", "status", "iterations"]
        for t in targets:
            header += [f"{t}_frobenius", f"{t}_wasserstein"]
        fname = f"spectral_{rname}.csv"
        _write_csv(out / fname, header, rows)
        outputs.append(fname)
        statuses = {}
        for r in rows:
            statuses[r[4]] = statuses.get(r[4], 0) + 1
        summary[rname] = {"status_counts": statuses}
        for ti, t in enumerate(targets):
            col = np.array([r[7 + 2 * ti] for r in rows], dtype=float)
            if np.all(np.isnan(col)):
                continue
            best = rows[int(np.nanargmin(col))]
            summary[rname][t] = {"argmin": [best[2], best[3]], "min_wasserstein": float(np.nanmin(col))}
    covs = [[t, float(x[0]), float(x[1])] for t, x in zip(SPECTRAL_TOPOLOGIES, X)]
    _write_csv(out / "spectral_training.csv", ["topology", "lambda2", "lambda3"], covs)
    outputs.append("spectral_training.csv")
    params = {"n": n, "grid_size": grid_size, "low": low, "high": high, "log_grid": log_grid,
              "targets": list(targets), "weights": weights, "bandwidth": bandwidth, "tol": tol,
              "max_iter": max_iter, "n_jobs": n_jobs}
    return _manifest(out, "spectral", params, outputs, {
        "training_graphs": list(SPECTRAL_TOPOLOGIES),
        "covariates": "2nd and 3rd smallest Laplacian eigenvalues",
        "wasserstein_variant": bc.SHIFTED,
    }, summary)


def _make(t, n):
    kind, k = parse_topology(t)
    return make_named(kind, n, 1.0, k)


# ------------------------------------------------------------ erdos_renyi

def erdos_renyi_fiedler(out, n=10, n_train=100, targets=tuple(range(1, 10)), seed=0,
                        kernel="gaussian", bandwidth=None, tol=1e-8, n_jobs=1):
    """Local regression of G(n, p) graphs on their Fiedler value.

    Edge probabilities are drawn uniformly from ``[ln(n)/n, 1]``.  For each
    target Fiedler value the predicted graph's own Fiedler value is compared
    with the target.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = rep_seed(seed, 0)
    graphs = []
    for i in range(n_train):
        p = rng.uniform(math.log(n) / n, 1.0)
        graphs.append(erdos_renyi(n, p, rng))
    X = np.array([fiedler_value(g) for g in graphs])
    ds = Dataset(X, graphs)
    scheme = WeightScheme.local(kernel, bandwidth)
    regressors = {"frobenius": RegressorSpec(FROB, scheme),
                  "wasserstein": _wspec(bc.SHIFTED, scheme, tol=tol)}

    def one(t):
        row = [t]
        for spec in regressors.values():
            rep, status, it = _safe_predict(ds, [float(t)], spec)
            f = math.nan if rep is None else fiedler_value(rep.graph)
            row += [f, abs(f - t), status]
        return row

    rows = _pmap(one, list(targets), n_jobs)
    _write_csv(out / "erdos_renyi.csv",
               ["target", "frobenius_fiedler", "frobenius_abs_error", "frobenius_status",
                "wasserstein_fiedler", "wasserstein_abs_error", "wasserstein_status"], rows)
    _write_csv(out / "erdos_renyi_training.csv", ["fiedler"], [[v] for v in X])
    low = [r for r in rows if 1 <= r[0] <= 5]
    summary = {
        "mae_1_5_frobenius": float(np.mean([r[2] for r in low])) if low else None,
        "mae_1_5_wasserstein": float(np.mean([r[5] for r in low])) if low else None,
        "bandwidth": [float(b) for b in (scheme.bandwidth or default_bandwidth(ds))],
    }
    params = {"n": n, "n_train": n_train, "targets": list(targets), "seed": seed, "kernel": kernel,
              "bandwidth": bandwidth, "tol": tol, "n_jobs": n_jobs}
    return _manifest(out, "erdos_renyi", params, ["erdos_renyi.csv", "erdos_renyi_training.csv"], {
        "edge_probability": "uniform on [ln(n)/n, 1], one draw per graph",
        "rng": "numpy PCG64 seeded from SeedSequence(seed, spawn_key=(0,))",
        "wasserstein_variant": bc.SHIFTED,
        "projection": True,
    }, summary)


# ------------------------------------------------------------ convergence

TAXI_QUERIES = ((0.0, 231.0), (1.0, 122.0), (0.0, 129.0), (1.0, 71.0), (1.0, 43.0), (0.0, 49.0))


def convergence(out, days=30, seed=0, queries=TAXI_QUERIES, variants=(bc.SHIFTED, bc.ENTROPIC),
                eps=1e-5, tol=1e-8, max_iter=500):
    """Iteration counts and weighted objective for barycenter solves.

    Inputs: the toy dataset at x = 5 (global and local weights) and a
    synthetic taxi month at the given (weekend, cases) queries.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        trips, cases = write_taxi_fixture(tmp, days=days, seed=seed)
        taxi, _ = ingest_taxi(trips, cases)
    cases_ = [("toy", toy_dataset(), "global", WeightScheme(), [5.0]),
              ("toy", toy_dataset(), "local", TOY_LOCAL, [5.0])]
    cases_ += [("taxi", taxi, "global", WeightScheme(), list(q)) for q in queries]
    rows, traces = [], {}
    for dname, ds, sname, scheme, x in cases_:
        lam = scheme.weights(ds, x)
        for v in variants:
            prob = bc.BarycenterProblem(ds.covariances, lam, variant=v, eps=eps, tol=tol, max_iter=max_iter)
            try:
                rep = bc.solve(prob)
                status = "ok" if rep.converged else "not_converged"
            except SolverError as exc:
                rep, status = exc.report, "diverged"
            obj = math.nan
            if rep is not None and status != "diverged":
                S = specmat.center(rep.result)
                obj = math.fsum(float(w) * bures_wasserstein_sq(C, S) for w, C in zip(lam, ds.covariances))
            key = f"{dname}|{sname}|{' '.join(repr(float(a)) for a in x)}|{v}"
            rows.append([dname, sname, " ".join(repr(float(a)) for a in x), v,
                         rep.iterations if rep else 0, status, obj])
            traces[key] = [] if rep is None else [float(r) for r in rep.residuals]
    _write_csv(out / "convergence.csv", ["dataset", "weights", "x", "variant", "iterations", "status",
                                         "weighted_objective"], rows)
    with open(out / "convergence_residuals.json", "w", encoding="utf-8") as fh:
        json.dump(traces, fh, indent=1, sort_keys=True)
    params = {"days": days, "seed": seed, "queries": [list(q) for q in queries], "variants": list(variants),
              "eps": eps, "tol": tol, "max_iter": max_iter}
    summary = {"max_iterations": {v: max(r[4] for r in rows if r[3] == v) for v in variants}}
    return _manifest(out, "convergence", params, ["convergence.csv", "convergence_residuals.json"], {
        "taxi_data": "synthetic fixture (write_taxi_fixture)",
        "objective": "sum_i w_i W2^2(Sigma_i, S)",
    }, summary)


EXPERIMENTS = {
    "fig1_toy": fig1_toy,
    "scaling": scaling,
    "interpolate": interpolate,
    "spectral": spectral,
    "erdos_renyi": erdos_renyi_fiedler,
    "convergence": convergence,
}


def run(name, out, **params):
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name](out, **params)
