"""Weighted graphs on a fixed node set, their Laplacians and generators."""

import csv
import io
import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from . import specmat
from .errors import NotAGraph, UnsupportedTopology

log = logging.getLogger(__name__)

TOPOLOGIES = (
    "path",
    "cycle",
    "star",
    "wheel",
    "complete",
    "dumbbell",
    "lollipop",
    "pentagonal_prism",
    "two_star",
    "k_regular",
)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph given by a symmetric non-negative weight matrix.

    The weights array is copied and made read-only on construction.
    """

    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise NotAGraph(f"weight matrix must be square and non-empty, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise NotAGraph("weight matrix has non-finite entries")
        if np.any(W < 0):
            raise NotAGraph("weight matrix has negative entries")
        if np.any(np.diag(W) != 0):
            raise NotAGraph("weight matrix diagonal must be zero (no self-loops)")
        if not np.array_equal(W, W.T):
            raise NotAGraph("weight matrix must be symmetric")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def n(self):
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j, w)`` triples; each unordered pair at most once."""
        W = np.zeros((n, n))
        for i, j, w in edges:
            if i == j:
                raise NotAGraph(f"self-loop at node {i}")
            if W[i, j] != 0:
                raise NotAGraph(f"edge ({i}, {j}) given twice")
            W[i, j] = W[j, i] = w
        return cls(W)

    def edges(self):
        """``[(i, j, w)]`` for every edge with ``i < j`` and ``w > 0``."""
        iu, ju = np.triu_indices(self.n, 1)
        w = self.weights[iu, ju]
        nz = w > 0
        return [(int(i), int(j), float(x)) for i, j, x in zip(iu[nz], ju[nz], w[nz])]

    def laplacian(self):
        return laplacian(self)

    def is_connected(self, tol=1e-9):
        if self.n == 1:
            return True
        return bool(np.linalg.eigvalsh(self.laplacian())[1] > tol)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.weights, other.weights)

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, edges={len(self.edges())})"


def laplacian(G):
    W = G.weights
    return np.diag(W.sum(axis=1)) - W


def weights_from_laplacian(L, clip_negative=False):
    """Inverse of :func:`laplacian`; the diagonal of ``L`` is ignored.

    With ``clip_negative`` off-diagonal entries above zero (negative edge
    weights) are set to 0; otherwise any weight below ``-1e-9`` raises
    :class:`NotAGraph` and smaller violations are rounded to 0.
    """
    L = specmat.as_sym(L, "Laplacian")
    W = -L
    np.fill_diagonal(W, 0.0)
    if clip_negative:
        W = np.maximum(W, 0.0)
    else:
        lo = W.min()
        if lo < -1e-9:
            raise NotAGraph(f"negative edge weight {lo:.3e}")
        W = np.maximum(W, 0.0)
    return Graph(W)


def gaussian_rep(G, rank_tol=None):
    """Covariance of the graph's Gaussian representation, the Laplacian pseudo-inverse."""
    if G.n > 1 and not G.is_connected():
        log.warning("graph is disconnected; pseudo-inverse keeps more than one null direction")
    return specmat.pinv_psd(laplacian(G), rank_tol)


def spectral_covariate(G, ranks):
    """Laplacian eigenvalues at the given 1-based ranks (ascending order)."""
    w = np.linalg.eigvalsh(laplacian(G))
    ranks = list(ranks)
    if any(r < 1 or r > len(w) for r in ranks):
        raise ValueError(f"eigenvalue ranks must lie in 1..{len(w)}, got {ranks}")
    return np.array([w[r - 1] for r in ranks])


def fiedler_value(G):
    return float(spectral_covariate(G, [2])[0])


def _two_star(n):
    if n < 4 or n % 2:
        raise UnsupportedTopology(f"two_star needs an even n >= 4, got {n}")
    half = n // 2
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from((0, i) for i in range(1, half))
    g.add_edges_from((half, i) for i in range(half + 1, n))
    g.add_edge(0, half)
    return g


def _k_regular(n, k):
    if k is None or not 0 < k < n or (k * n) % 2:
        raise UnsupportedTopology(f"k_regular needs 0 < k < n and k*n even, got k={k}, n={n}")
    offsets = list(range(1, k // 2 + 1))
    if k % 2:
        offsets.append(n // 2)
    return nx.circulant_graph(n, offsets)


def _nx_topology(kind, n, k=None):
    if kind == "path" and n >= 2:
        return nx.path_graph(n)
    if kind == "cycle" and n >= 3:
        return nx.cycle_graph(n)
    if kind == "star" and n >= 2:
        return nx.star_graph(n - 1)
    if kind == "wheel" and n >= 4:
        return nx.wheel_graph(n)
    if kind == "complete" and n >= 2:
        return nx.complete_graph(n)
    if kind == "dumbbell" and n >= 6 and n % 2 == 0:
        # two K_m cliques joined through a 2-node path
        m = (n - 2) // 2
        return nx.barbell_graph(m, n - 2 * m)
    if kind == "lollipop" and n >= 4:
        m = (n + 1) // 2
        return nx.lollipop_graph(m, n - m)
    if kind == "pentagonal_prism" and n == 10:
        return nx.circular_ladder_graph(5)
    if kind == "two_star":
        return _two_star(n)
    if kind == "k_regular":
        return _k_regular(n, k)
    if kind not in TOPOLOGIES:
        raise UnsupportedTopology(f"unknown topology {kind!r}")
    raise UnsupportedTopology(f"topology {kind!r} does not support n={n}")


def make_named(kind, n, weight=1.0, k=None):
    """Connected named topology on ``n`` nodes with every edge weighted ``weight``.

    ``k`` is the degree for ``kind="k_regular"``.  Node-count splits for
    n=10: dumbbell is two K4 joined by a 2-node path, lollipop is K5 plus a
    5-node tail, two_star is two 5-node stars with joined centers.
    """
    if not weight > 0:
        raise ValueError("weight must be positive")
    g = _nx_topology(kind, n, k)
    A = nx.to_numpy_array(g, nodelist=range(n), weight=None)
    return Graph(A * weight)


def parse_topology(name):
    """``"6_regular"`` -> ``("k_regular", 6)``; other names pass through."""
    if name.endswith("_regular") and name != "k_regular":
        return "k_regular", int(name.split("_")[0])
    return name, None


def triangle(x):
    """Three-node graph with weights w12 = w13 = 1/x, w23 = 2/x."""
    W = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]]) / x
    return Graph(W)


def make_scaled_family(kind, n, covariates, weight_fn=None):
    """``[(x, G(x))]`` where edges of the named topology carry ``weight_fn(x)``.

    ``kind="triangle"`` reproduces the toy family (1/x, 1/x, 2/x) and
    ignores ``n``.  For named topologies the default ``weight_fn`` is
    ``1/x`` on every edge.
    """
    out = []
    for x in covariates:
        if not x > 0:
            raise ValueError("covariates must be positive")
        if kind == "triangle":
            out.append((x, triangle(x)))
            continue
        w = 1.0 / x if weight_fn is None else weight_fn(x)
        name, k = parse_topology(kind)
        out.append((x, make_named(name, n, w, k)))
    return out


def erdos_renyi(n, p, seed=None):
    """G(n, p) with unit weights; ``seed`` is anything ``default_rng`` accepts."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    W = np.zeros((n, n))
    W[iu[keep], ju[keep]] = 1.0
    return Graph(W + W.T)


def write_edge_csv(G, fh):
    """Edge-list CSV: header ``i,j,w``, 0-based ``i < j``, one row per edge."""
    fh.write("i,j,w\n")
    for i, j, w in G.edges():
        fh.write(f"{i},{j},{w!r}\n")


def edge_csv_text(G):
    buf = io.StringIO()
    write_edge_csv(G, buf)
    return buf.getvalue()


def read_edge_rows(fh):
    """Yield ``(line_number, i, j, w)`` from an edge-list CSV; raises ValueError on bad rows."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["i", "j", "w"]:
        raise ValueError(f"expected header 'i,j,w', got {header!r}")
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields, got {len(row)}")
        i, j, w = int(row[0]), int(row[1]), float(row[2])
        if not math.isfinite(w):
            raise ValueError(f"line {lineno}: non-finite weight")
        yield lineno, i, j, w
