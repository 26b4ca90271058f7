"""Dense complex matrix kernel shared by the other modules.

All functions are pure and accept anything ``numpy.asarray`` understands.
"""
from __future__ import annotations

import numpy as np

from .errors import GapTooSmall, NotSelfAdjoint

TOL_SYM = 1e-9
TOL_RANK = 1e-8
TOL_EQ = 1e-10


def adjoint(M) -> np.ndarray:
    M = np.asarray(M)
    return M.conj().swapaxes(-1, -2)


def operator_norm(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hermiticity_defect(M) -> float:
    """Relative size of the anti-Hermitian part, ``||M - M*|| / ||M||``."""
    M = np.asarray(M)
    scale = operator_norm(M)
    if scale == 0.0:
        return 0.0
    return operator_norm(M - adjoint(M)) / scale


def is_self_adjoint(M, tol: float = TOL_SYM) -> bool:
    return hermiticity_defect(M) <= tol


def fix_phases(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate each column so that its first non-negligible entry is real positive."""
    V = np.array(V, dtype=complex, copy=True)
    if V.size == 0:
        return V
    mags = np.abs(V)
    thresh = tol * np.maximum(mags.max(axis=0), 1e-300)
    first = np.argmax(mags > thresh, axis=0)
    lead = V[first, np.arange(V.shape[1])]
    phase = np.where(np.abs(lead) > 0, lead / np.abs(lead), 1.0)
    return V / phase


def eigh(M, tol_sym: float = TOL_SYM) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a self-adjoint matrix.

    Eigenvalues come back ascending; eigenvectors are phase-fixed so that the
    first non-negligible component of each column is real and positive.
    """
    M = np.asarray(M, dtype=complex)
    if hermiticity_defect(M) > tol_sym:
        raise NotSelfAdjoint(f"relative anti-Hermitian part {hermiticity_defect(M):.3e} exceeds {tol_sym:g}")
    H = 0.5 * (M + adjoint(M))
    w, V = np.linalg.eigh(H)
    return w, fix_phases(V)


def eigvalsh(M, tol_sym: float = TOL_SYM) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if hermiticity_defect(M) > tol_sym:
        raise NotSelfAdjoint(f"relative anti-Hermitian part {hermiticity_defect(M):.3e} exceeds {tol_sym:g}")
    return np.linalg.eigvalsh(0.5 * (M + adjoint(M)))


def singular_values(M) -> np.ndarray:
    M = np.asarray(M)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def kernel_dimension(M, tol: float = TOL_RANK) -> int:
    """Dimension of the (numerical) kernel of ``M`` acting on its columns.

    Singular values below ``tol`` count as zero. The smallest retained
    singular value must exceed ``10 * tol``; otherwise the decision is
    considered unreliable and :class:`GapTooSmall` is raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.atleast_2d(np.asarray(M))
    ncols = M.shape[1]
    s = singular_values(M)
    retained = s[s >= tol]
    if retained.size and retained.min() <= 10 * tol:
        raise GapTooSmall(f"smallest retained singular value {retained.min():.3e} is within 10x of tol={tol:g}")
    return int(ncols - retained.size)


def numerical_rank(M, tol: float = TOL_RANK, relative: bool = True) -> int:
    s = singular_values(M)
    if s.size == 0:
        return 0
    cut = tol * s[0] if relative else tol
    return int(np.count_nonzero(s > cut))


def is_unitary(U, tol: float = 1e-9) -> bool:
    U = np.asarray(U)
    eye = np.eye(U.shape[-1])
    return operator_norm(adjoint(U) @ U - eye) <= tol and operator_norm(U @ adjoint(U) - eye) <= tol


def is_projection(P, tol: float = 1e-9) -> bool:
    P = np.asarray(P)
    return operator_norm(P @ P - P) <= tol and operator_norm(P - adjoint(P)) <= tol


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (X + adjoint(X))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(X)
    d = np.diag(R)
    return Q * (d / np.abs(d))
