"""Small deterministic datasets used by the CLI, the experiments and the tests."""

import csv
import datetime as dt
from pathlib import Path

import numpy as np

from .graphcore import Graph, make_named, make_scaled_family
from .ingest import MANHATTAN_REGIONS, save_dataset
from .regress import Dataset

TOY_COVARIATES = (2.0, 4.0, 6.0, 8.0)
TAXI_START = dt.date(2020, 4, 12)
INTERPOLATION_TOPOLOGIES = ("path", "cycle", "star", "wheel", "complete")


def toy_dataset():
    """Four triangles with weights (1/x, 1/x, 2/x) at x = 2, 4, 6, 8."""
    return Dataset.from_pairs(make_scaled_family("triangle", 3, TOY_COVARIATES))


def interpolation_dataset(n=10):
    """Path, cycle, star, wheel and complete graphs on ``n`` nodes at x = 1..5."""
    graphs = [make_named(kind, n) for kind in INTERPOLATION_TOPOLOGIES]
    return Dataset(np.arange(1.0, 6.0), graphs, ids=list(INTERPOLATION_TOPOLOGIES))


def linear_family(n_obs=8, k=5, seed=0):
    """Graphs whose weights are affine in a scalar x, ``W(x) = W0 + x W1``.

    Global Frobenius regression (alpha = 1) reproduces every response
    exactly, so in-sample R^2 is 1.
    """
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(k, 1)
    W0 = np.zeros((k, k))
    W1 = np.zeros((k, k))
    W0[iu] = rng.uniform(0.5, 1.5, iu[0].size)
    W1[iu] = rng.uniform(0.0, 0.5, iu[0].size)
    W0, W1 = W0 + W0.T, W1 + W1.T
    xs = np.linspace(1.0, 3.0, n_obs)
    return Dataset(xs, [Graph(W0 + x * W1) for x in xs])


def synthetic_cases(days, seed=0, start=TAXI_START):
    """Declining daily case counts with multiplicative noise, ``{date: cases}``."""
    rng = np.random.default_rng(seed)
    t = np.arange(days)
    base = 40.0 + 200.0 * np.exp(-t / 25.0)
    cases = np.round(base * rng.lognormal(0.0, 0.1, days))
    return {start + dt.timedelta(days=int(d)): float(c) for d, c in zip(t, cases)}


def synthetic_trips(cases, regions=MANHATTAN_REGIONS, seed=0, trips_per_day=400):
    """Trip records whose volume falls with cases and rises on weekends.

    Yields ``(date, pickup, dropoff, passengers)`` tuples in date order.
    Pickup/dropoff regions follow a fixed gravity-style preference so the
    daily graphs share structure.
    """
    rng = np.random.default_rng(seed)
    pop = rng.uniform(0.5, 2.0, regions)
    pref = np.outer(pop, pop)
    np.fill_diagonal(pref, 0.2 * np.diag(pref))
    pref /= pref.sum()
    flat = pref.ravel()
    out = []
    for d in sorted(cases):
        wk = d.weekday() >= 5
        scale = (1.3 if wk else 1.0) * 150.0 / (50.0 + cases[d])
        m = max(1, rng.poisson(trips_per_day * scale))
        cells = rng.choice(flat.size, size=m, p=flat)
        pax = rng.integers(1, 5, size=m)
        for c, p in zip(cells, pax):
            out.append((d, int(c // regions), int(c % regions), int(p)))
    return out


def write_taxi_fixture(out_dir, days=30, regions=MANHATTAN_REGIONS, seed=0):
    """Write ``trips.csv`` and ``cases.csv`` for a synthetic taxi month."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = synthetic_cases(days, seed)
    trips = synthetic_trips(cases, regions, seed)
    with open(out_dir / "trips.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "pickup_region", "dropoff_region", "passengers"])
        for d, a, b, p in trips:
            w.writerow([d.isoformat(), a, b, p])
    with open(out_dir / "cases.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "cases"])
        for d in sorted(cases):
            w.writerow([d.isoformat(), repr(cases[d])])
    return out_dir / "trips.csv", out_dir / "cases.csv"


FIXTURES = {
    "toy": toy_dataset,
    "interpolation": interpolation_dataset,
    "linear": linear_family,
}


def write_fixture(name, out_dir):
    """Save a named dataset fixture, or the raw taxi CSVs for ``"taxi"``."""
    if name == "taxi":
        return write_taxi_fixture(out_dir)
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES) + ['taxi']}")
    return save_dataset(FIXTURES[name](), out_dir, extra={"fixture": name})
