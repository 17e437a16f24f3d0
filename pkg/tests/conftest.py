import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netfrechet import _backend
from netfrechet.graphcore import Graph

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(params=_backend.available())
def backend(request):
    return request.param


def random_psd(rng, k, rank=None, scale=1.0):
    rank = k if rank is None else rank
    A = rng.standard_normal((k, rank))
    return scale * A @ A.T


def psd_with_spectrum(rng, k, rank, floor=1e-4):
    """PSD matrix with ``k - rank`` exact zero eigenvalues and the rest in ``[floor, 1]``.

    Keeping the support spectrum away from the rank threshold (also after
    squaring) is the domain on which the power semigroup holds exactly.
    """
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    lam = np.zeros(k)
    lam[:rank] = rng.uniform(floor, 1.0, rank)
    return (Q * lam) @ Q.T


def random_graph(rng, n, density=0.6, low=0.1, high=2.0, connected=True):
    while True:
        W = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        mask = rng.random(iu[0].size) < density
        W[iu[0][mask], iu[1][mask]] = rng.uniform(low, high, mask.sum())
        W = W + W.T
        g = Graph(W)
        if not connected or n == 1 or g.is_connected():
            return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdict lines, printed after the run so they appear in captured logs
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
