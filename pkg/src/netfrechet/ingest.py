"""Dataset directories and the taxi-trip ingestion pipeline.

Formats (UTF-8, comma separated, header row required):

``covariates.csv``
    ``id,x1,...,xp``; row order is dataset order.
``graphs/<id>.csv``
    ``i,j,w`` edge list, 0-based ``i < j``, each pair at most once.
``manifest.json``
    ``{"n", "k", "p", "node_labels", ...}`` plus any extra metadata.
``trips.csv``
    ``date,pickup_region,dropoff_region,passengers`` with ISO-8601 dates.
``cases.csv``
    ``date,cases``.
``zone_map.csv``
    ``zone_id,region_id``; when given, trip pickup/dropoff columns hold zone
    ids and are mapped to regions before aggregation.
"""

import csv
import datetime as dt
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateEdge, InsufficientData, JoinError, LoadError, NotAGraph, RecordRejected
from .graphcore import Graph, read_edge_rows, write_edge_csv
from .regress import Dataset

log = logging.getLogger(__name__)

MANHATTAN_REGIONS = 13


def _safe_id(s):
    if not s or any(c in s for c in "/\\\0") or s in (".", ".."):
        raise ValueError(f"id {s!r} is not usable as a file name")
    return s


def save_dataset(ds, path, extra=None):
    """Write ``ds`` as a dataset directory; ids default to ``0..n-1``."""
    path = Path(path)
    (path / "graphs").mkdir(parents=True, exist_ok=True)
    ids = ds.ids or [str(i) for i in range(ds.n)]
    with open(path / "covariates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"x{j + 1}" for j in range(ds.p)])
        for i, x in zip(ids, ds.X):
            w.writerow([i] + [repr(float(v)) for v in x])
    for i, g in zip(ids, ds.graphs):
        with open(path / "graphs" / f"{_safe_id(i)}.csv", "w", encoding="utf-8") as fh:
            write_edge_csv(g, fh)
    manifest = {"n": ds.n, "k": ds.k, "p": ds.p, "node_labels": ds.node_labels}
    manifest.update(extra or {})
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _read_graph(fpath, k):
    W = np.zeros((k, k))
    seen = set()
    try:
        with open(fpath, newline="", encoding="utf-8") as fh:
            for lineno, i, j, w in read_edge_rows(fh):
                if not (0 <= i < k and 0 <= j < k):
                    raise LoadError(fpath, f"node index out of range for k={k}", lineno)
                if i == j:
                    raise LoadError(fpath, "self-loop", lineno)
                if w < 0:
                    raise LoadError(fpath, f"negative weight {w}", lineno)
                pair = (min(i, j), max(i, j))
                if pair in seen:
                    raise DuplicateEdge(fpath, f"edge {pair} listed twice", lineno)
                seen.add(pair)
                W[i, j] = W[j, i] = w
    except FileNotFoundError:
        raise LoadError(fpath, "graph file missing") from None
    except (ValueError, csv.Error) as exc:
        if isinstance(exc, LoadError):
            raise
        raise LoadError(fpath, str(exc)) from None
    try:
        return Graph(W)
    except NotAGraph as exc:
        raise LoadError(fpath, str(exc)) from None


def load_dataset(path):
    """Read and re-validate a dataset directory written by :func:`save_dataset`."""
    path = Path(path)
    mpath = path / "manifest.json"
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LoadError(mpath, "manifest missing") from None
    except json.JSONDecodeError as exc:
        raise LoadError(mpath, exc.msg, exc.lineno) from None
    try:
        k = int(manifest["k"])
    except (KeyError, TypeError, ValueError):
        raise LoadError(mpath, "manifest needs an integer 'k'") from None
    cpath = path / "covariates.csv"
    ids, rows = [], []
    try:
        with open(cpath, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InsufficientData(f"{cpath}: no header and no rows")
            if header[0].strip() != "id" or len(header) < 2:
                raise LoadError(cpath, f"expected header 'id,x1,...', got {header!r}", 1)
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise LoadError(cpath, f"expected {len(header)} fields, got {len(row)}", lineno)
                try:
                    x = [float(v) for v in row[1:]]
                except ValueError as exc:
                    raise LoadError(cpath, str(exc), lineno) from None
                if not all(math.isfinite(v) for v in x):
                    raise LoadError(cpath, "non-finite covariate", lineno)
                ids.append(row[0].strip())
                rows.append(x)
    except FileNotFoundError:
        raise LoadError(cpath, "covariates file missing") from None
    if len(rows) < 2:
        raise InsufficientData(f"{cpath}: {len(rows)} observations, need at least 2")
    if len(set(ids)) != len(ids):
        raise LoadError(cpath, "duplicate ids")
    graphs = [_read_graph(path / "graphs" / f"{_safe_id(i)}.csv", k) for i in ids]
    return Dataset(np.array(rows), graphs, ids=ids, node_labels=manifest.get("node_labels"))


@dataclass(frozen=True)
class TripRecord:
    date: dt.date
    pickup_region: int
    dropoff_region: int
    passengers: int


@dataclass
class Aggregation:
    graphs: dict
    rejected: int = 0
    reasons: dict = field(default_factory=dict)


def _parse_date(s):
    return dt.date.fromisoformat(s.strip())


def read_zone_map(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["zone_id", "region_id"]:
            raise LoadError(path, f"expected header 'zone_id,region_id', got {reader.fieldnames}", 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                out[int(row["zone_id"])] = int(row["region_id"])
            except (TypeError, ValueError):
                raise LoadError(path, "bad zone mapping row", lineno) from None
    return out


def read_trips(path, zone_map=None, rejects=None):
    """Yield :class:`TripRecord` from ``trips.csv``.

    Rows that cannot be parsed or whose zone is unmapped are counted in
    ``rejects`` (a dict reason -> count) and skipped.
    """
    rejects = {} if rejects is None else rejects
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        want = ["date", "pickup_region", "dropoff_region", "passengers"]
        if reader.fieldnames != want:
            raise LoadError(path, f"expected header {','.join(want)}, got {reader.fieldnames}", 1)
        for row in reader:
            try:
                d = _parse_date(row["date"])
                a, b = int(row["pickup_region"]), int(row["dropoff_region"])
                p = int(row["passengers"])
                if zone_map is not None:
                    a, b = zone_map[a], zone_map[b]
            except (TypeError, ValueError, KeyError, AttributeError):
                rejects["malformed"] = rejects.get("malformed", 0) + 1
                continue
            yield TripRecord(d, a, b, p)


def _check_trip(t, regions):
    if not (0 <= t.pickup_region < regions and 0 <= t.dropoff_region < regions):
        raise RecordRejected(f"region out of range: {t.pickup_region}->{t.dropoff_region}")
    if t.passengers < 0:
        raise RecordRejected(f"negative passenger count: {t.passengers}")


def aggregate_trips(trips, regions=MANHATTAN_REGIONS):
    """Daily undirected passenger graphs; intra-region trips are dropped silently.

    Out-of-range regions and negative passenger counts are rejected and
    counted; the per-date sum is exact integer arithmetic, so the result
    does not depend on record order.
    """
    sums = defaultdict(lambda: np.zeros((regions, regions), dtype=np.int64))
    agg = Aggregation(graphs={})
    for t in trips:
        try:
            _check_trip(t, regions)
        except RecordRejected as exc:
            agg.rejected += 1
            key = str(exc).split(":")[0]
            agg.reasons[key] = agg.reasons.get(key, 0) + 1
            continue
        if t.pickup_region == t.dropoff_region:
            continue
        i, j = sorted((t.pickup_region, t.dropoff_region))
        sums[t.date][i, j] += t.passengers
    for d in sorted(sums):
        W = sums[d].astype(np.float64)
        agg.graphs[d] = Graph(W + W.T)
    if agg.rejected:
        log.warning("rejected %d trip records: %s", agg.rejected, agg.reasons)
    return agg


def read_cases(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["date", "cases"]:
            raise LoadError(path, f"expected header 'date,cases', got {reader.fieldnames}", 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                d, c = _parse_date(row["date"]), float(row["cases"])
            except (TypeError, ValueError, AttributeError):
                raise LoadError(path, "bad cases row", lineno) from None
            if not (math.isfinite(c) and c >= 0):
                raise LoadError(path, f"cases must be a non-negative number, got {c}", lineno)
            if d in out:
                raise LoadError(path, f"date {d} listed twice", lineno)
            out[d] = c
    return out


def is_weekend(d):
    return 1 if d.weekday() >= 5 else 0


def join_covariates(graphs, cases, node_labels=None):
    """Dataset with ``x = (weekend, cases)`` per date, ordered by date."""
    dates = sorted(graphs)
    missing = [d for d in dates if d not in cases]
    if missing:
        raise JoinError(missing)
    X = np.array([[is_weekend(d), cases[d]] for d in dates], dtype=np.float64)
    return Dataset(X, [graphs[d] for d in dates], ids=[d.isoformat() for d in dates],
                   node_labels=node_labels)


def ingest_taxi(trips_path, cases_path, out_dir=None, regions=MANHATTAN_REGIONS, zone_map_path=None):
    """trips.csv + cases.csv -> Dataset (optionally saved to ``out_dir``)."""
    zone_map = read_zone_map(zone_map_path) if zone_map_path else None
    rejects = {}
    agg = aggregate_trips(read_trips(trips_path, zone_map, rejects), regions)
    agg.rejected += sum(rejects.values())
    for k, v in rejects.items():
        agg.reasons[k] = agg.reasons.get(k, 0) + v
    ds = join_covariates(agg.graphs, read_cases(cases_path))
    if out_dir is not None:
        save_dataset(ds, out_dir, extra={
            "source": "taxi",
            "regions": regions,
            "rejected_records": agg.rejected,
            "rejected_reasons": agg.reasons,
            "zone_map": None if zone_map is None else {str(k): v for k, v in sorted(zone_map.items())},
            "covariates": ["weekend", "cases"],
        })
    return ds, agg
