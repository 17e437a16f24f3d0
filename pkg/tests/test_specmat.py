import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netfrechet import specmat
from netfrechet.errors import InvalidMatrix, NotPSD
from netfrechet.graphcore import laplacian, make_named, triangle

from conftest import psd_with_spectrum, random_psd


def test_eigh_identity_and_diagonal():
    w, U = specmat.eigh(np.eye(3))
    np.testing.assert_allclose(w, [1, 1, 1])
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)
    w, _ = specmat.eigh(np.diag([4.0, 1.0]))
    np.testing.assert_allclose(w, [1, 4])


def test_eigh_reconstruction(rng):
    A = rng.standard_normal((5, 5))
    S = A + A.T
    w, U = specmat.eigh(S)
    assert np.all(np.diff(w) >= 0)
    tol = 1e-10 * 5 * np.abs(w).max()
    assert np.abs(U @ np.diag(w) @ U.T - S).max() < tol
    assert np.abs(U.T @ U - np.eye(5)).max() < 1e-10


@pytest.mark.parametrize("bad", [np.array([[np.nan, 0], [0, 1]]), np.array([[np.inf]]), np.ones((2, 3))])
def test_invalid_matrix(bad):
    with pytest.raises(InvalidMatrix):
        specmat.eigh(bad)


def test_as_sym_exact_symmetry(rng):
    S = specmat.as_sym(rng.standard_normal((6, 6)))
    assert np.array_equal(S, S.T)


def test_matrix_power_examples(rng):
    S = random_psd(rng, 4)
    np.testing.assert_allclose(specmat.matrix_power(S, 1.0), S, atol=1e-12)
    np.testing.assert_allclose(specmat.matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]), atol=1e-14)


def test_matrix_power_composition(rng):
    S = random_psd(rng, 6)
    a = specmat.matrix_power(specmat.matrix_power(S, 0.5), 0.5)
    b = specmat.matrix_power(S, 0.25)
    # direct eigenvalue powering as the independent route
    w, U = np.linalg.eigh(S)
    c = (U * w**0.25) @ U.T
    np.testing.assert_allclose(a, b, atol=1e-9)
    np.testing.assert_allclose(b, c, atol=1e-9)


def test_matrix_power_rejects_negative():
    with pytest.raises(NotPSD):
        specmat.matrix_power(np.diag([1.0, -0.5]), 0.5)
    with pytest.raises(ValueError):
        specmat.matrix_power(np.eye(2), 0.0)


def test_matrix_power_clamps_noise():
    out = specmat.matrix_power(np.diag([1.0, -1e-14]), 0.5)
    np.testing.assert_allclose(out, np.diag([1.0, 0.0]), atol=1e-15)


def test_psd_sqrt_examples(rng):
    np.testing.assert_allclose(specmat.psd_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(specmat.psd_sqrt(np.diag([0.0, 4.0])), np.diag([0.0, 2.0]), atol=1e-15)
    S = random_psd(rng, 8)
    R = specmat.psd_sqrt(S)
    np.testing.assert_allclose(R @ R, S, atol=1e-9)


def test_matrix_power_batch_matches_single(rng):
    mats = np.stack([random_psd(rng, 5, rank=3) for _ in range(4)])
    out = specmat.matrix_power_batch(mats, 0.5)
    for m, o in zip(mats, out):
        np.testing.assert_allclose(o, specmat.matrix_power(m, 0.5), atol=1e-12)


def test_pinv_examples():
    np.testing.assert_allclose(specmat.pinv_psd(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    L = laplacian(triangle(2.0))
    np.testing.assert_allclose(specmat.pinv_psd(specmat.pinv_psd(L)), L, atol=1e-9)
    C = laplacian(make_named("cycle", 10))
    np.testing.assert_allclose(C @ specmat.pinv_psd(C) @ C, C, atol=1e-9)


def _penrose(S, A, tol):
    assert np.abs(S @ A @ S - S).max() < tol
    assert np.abs(A @ S @ A - A).max() < tol
    assert np.abs((S @ A).T - S @ A).max() < tol
    assert np.abs((A @ S).T - A @ S).max() < tol


@given(k=st.integers(2, 50), rank_frac=st.floats(0.2, 1.0), seed=st.integers(0, 2**32 - 1))
def test_penrose_property(k, rank_frac, seed):
    rng = np.random.default_rng(seed)
    rank = max(1, int(round(rank_frac * k)))
    S = random_psd(rng, k, rank) / k
    A = specmat.pinv_psd(S)
    # Penrose conditions at 1e-9 relative to the operator scale
    scale = max(1.0, np.abs(S).max() * np.abs(A).max())
    _penrose(S, A, 1e-9 * scale)


@given(a=st.sampled_from([0.5, 1.0, 2.0]), b=st.sampled_from([0.5, 1.0, 2.0]), seed=st.integers(0, 2**32 - 1))
def test_power_semigroup(a, b, seed):
    rng = np.random.default_rng(seed)
    S = psd_with_spectrum(rng, 6, int(rng.integers(1, 7)))
    lhs = specmat.matrix_power(specmat.matrix_power(S, b), a)
    rhs = specmat.matrix_power(S, a * b)
    assert np.abs(lhs - rhs).max() < 1e-9 * max(1.0, np.abs(rhs).max())


def test_power_zeroes_eigenvalues_below_rank_threshold():
    out = specmat.matrix_power(np.diag([1.0, 1e-12]), 0.5)
    np.testing.assert_array_equal(out, np.diag([1.0, 0.0]))
    out = specmat.matrix_power(np.diag([1.0, 1e-8]), 0.5)
    np.testing.assert_allclose(out, np.diag([1.0, 1e-4]), rtol=1e-12)


def test_center_examples(rng):
    J = np.ones((4, 4))
    np.testing.assert_allclose(specmat.center(J), np.zeros((4, 4)), atol=1e-15)
    L = laplacian(make_named("wheel", 7))
    np.testing.assert_allclose(specmat.center(L), L, atol=1e-12)
    S = rng.standard_normal((5, 5))
    c = specmat.center(S)
    np.testing.assert_allclose(specmat.center(c), c, atol=1e-12)
    assert np.abs(c.sum(axis=1)).max() < 1e-12
    P = np.eye(5) - np.ones((5, 5)) / 5
    np.testing.assert_allclose(c, P @ specmat.as_sym(S) @ P, atol=1e-12)


def test_clip_psd_examples():
    np.testing.assert_array_equal(specmat.clip_psd(np.eye(2), 0.0), np.eye(2))
    np.testing.assert_allclose(specmat.clip_psd(np.diag([1.0, -1e-14])), np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(specmat.clip_psd(np.diag([2.0, -0.5])), np.diag([2.0, 0.0]), atol=1e-15)
    out = specmat.clip_psd(np.diag([3.0, 0.1]), floor=0.5)
    np.testing.assert_allclose(out, np.diag([3.0, 0.5]), atol=1e-14)
    with pytest.raises(ValueError):
        specmat.clip_psd(np.eye(2), -1.0)


def test_dense_text_round_trip(rng):
    S = specmat.as_sym(rng.standard_normal((4, 4)))
    buf = io.StringIO()
    specmat.write_dense(S, buf)
    assert buf.getvalue().splitlines()[0] == "4"
    back = specmat.read_dense(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back, S)
    with pytest.raises(InvalidMatrix):
        specmat.read_dense(io.StringIO("3\n1 2 3\n"))
