import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex import core
from cstarindex.errors import GapTooSmall, NotSelfAdjoint

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 12)


@settings(max_examples=40, deadline=None)
@given(seeds, sizes)
def test_eigh_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    H = core.random_hermitian(n, rng)
    w, V = core.eigh(H)
    assert np.all(np.diff(w) >= -1e-12)
    assert np.allclose(V @ np.diag(w) @ V.conj().T, H, atol=1e-10)
    assert np.allclose(V.conj().T @ V, np.eye(n), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, sizes)
def test_eigh_phase_is_deterministic(seed, n):
    rng = np.random.default_rng(seed)
    H = core.random_hermitian(n, rng)
    _, V1 = core.eigh(H)
    U = np.diag(np.exp(2j * np.pi * rng.random(n)))
    # Same matrix, different input representation: phases must not depend on LAPACK choices.
    _, V2 = core.eigh(H.copy(order="F"))
    assert np.allclose(V1, V2)
    w3, V3 = core.eigh(U @ H @ U.conj().T)
    assert np.allclose(np.abs(V3), np.abs(U @ V1), atol=1e-8) or len(set(np.round(w3, 8))) < n


def test_eigh_rejects_non_hermitian():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(NotSelfAdjoint):
        core.eigh(A)


@settings(max_examples=30, deadline=None)
@given(seeds, sizes)
def test_random_unitary(seed, n):
    U = core.random_unitary(n, np.random.default_rng(seed))
    assert core.is_unitary(U)
    sv = core.singular_values(U)
    assert np.allclose(sv, 1.0)


def test_kernel_dimension_counts_and_gap():
    M = np.diag([0.0, 0.0, 1.0, 2.0])
    assert core.kernel_dimension(M) == 2
    with pytest.raises(GapTooSmall):
        core.kernel_dimension(np.diag([0.0, 5e-8, 1.0]), tol=1e-8)


def test_projection_and_rank():
    v = np.array([1.0, 1j]) / np.sqrt(2)
    P = np.outer(v, v.conj())
    assert core.is_projection(P)
    assert not core.is_projection(2 * P)
    assert core.numerical_rank(P) == 1
    assert core.hermiticity_defect(P) < 1e-15
