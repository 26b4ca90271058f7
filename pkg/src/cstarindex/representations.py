"""Concrete representations of model elements.

* Coordinate windows ``V_K`` of the GNS space: orthonormal basis
  ``{e_j W_λ : |λ|_∞ ≤ K}`` (tensored with ``ℂ^n`` for amplified operators).
* Left multiplication matrices, exact compressions of the left regular
  representation.
* The C*-norm of an element, through a family of finite-dimensional
  evaluation representations when one is available.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .action_model import ActionModel, GradedElement, box_labels
from .core import operator_norm


@dataclass(frozen=True, eq=False)
class Window:
    """Coordinate space ``V_K ⊗ ℂ^n``; index order is (label, amp, basis)."""

    model: ActionModel
    radius: int
    amp: int = 1

    @cached_property
    def labels(self) -> np.ndarray:
        return box_labels(self.radius, self.model.r)

    @cached_property
    def gradings(self) -> np.ndarray:
        return self.labels @ self.model.G.T

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def fiber(self) -> int:
        return self.amp * self.model.nB

    @property
    def dim(self) -> int:
        return self.n_labels * self.fiber

    def label_index(self, labels) -> np.ndarray:
        labels = np.atleast_2d(np.asarray(labels, dtype=np.int64))
        side = 2 * self.radius + 1
        idx = np.zeros(len(labels), dtype=np.int64)
        for i in range(self.model.r):
            idx = idx * side + (labels[:, i] + self.radius)
        return idx

    def contains(self, labels) -> np.ndarray:
        labels = np.atleast_2d(np.asarray(labels))
        return np.all(np.abs(labels) <= self.radius, axis=-1)

    def grading_mask(self, chi) -> np.ndarray:
        """Coordinate mask of the grading-χ subspace."""
        chi = np.atleast_1d(np.asarray(chi))
        lab = np.all(self.gradings == chi, axis=-1)
        return np.repeat(lab, self.fiber)

    def label_of_coordinate(self) -> np.ndarray:
        return np.repeat(self.labels, self.fiber, axis=0)

    def unit_vector(self, column: int = 0) -> np.ndarray:
        """Coordinates of ``1 ⊗ e_column``."""
        v = np.zeros((self.n_labels, self.amp, self.model.nB), dtype=complex)
        v[self.label_index(np.zeros(self.model.r, dtype=int))[0], column] = self.model.unit_coords
        return v.reshape(-1)

    def frame(self, mode: str = "unit") -> np.ndarray:
        """Columns spanning a frame used for the scalarized traces.

        ``mode="unit"`` gives ``1 ⊗ e_i`` (the trace τ⊗Tr on left
        multipliers); ``mode="module"`` gives one unitary monomial per
        distinct grading in the window (a frame of the module ``H(A)``).
        """
        if mode == "unit":
            return np.stack([self.unit_vector(i) for i in range(self.amp)], axis=1)
        if mode != "module":
            raise ValueError(mode)
        seen = {}
        for idx, (lab, g) in enumerate(zip(self.labels, self.gradings)):
            key = tuple(int(x) for x in g)
            cand = (int(np.abs(lab).sum()), tuple(int(x) for x in np.abs(lab)), tuple(-int(x) for x in lab), idx)
            if key not in seen or cand < seen[key]:
                seen[key] = cand
        cols = []
        for key in sorted(seen):
            idx = seen[key][3]
            for i in range(self.amp):
                v = np.zeros((self.n_labels, self.amp, self.model.nB), dtype=complex)
                v[idx, i] = self.model.unit_coords
                cols.append(v.reshape(-1))
        return np.stack(cols, axis=1)

    def coords(self, x: GradedElement) -> np.ndarray:
        """Coordinates of an unamplified element in the first slot (outside labels dropped)."""
        if x.amp != 1:
            raise ValueError("vectors are unamplified elements")
        return self.coords_columns([x] + [x.model.zero()] * (self.amp - 1))

    def coords_columns(self, xs) -> np.ndarray:
        """Coordinates of the column vector ``(x_1, ..., x_n)``."""
        m = self.model
        if len(xs) != self.amp:
            raise ValueError("need one element per amplification slot")
        v = np.zeros((self.n_labels, self.amp, m.nB), dtype=complex)
        for i, x in enumerate(xs):
            supp = x.support()
            if supp.size == 0:
                continue
            inside = self.contains(supp)
            supp = supp[inside]
            idx = self.label_index(supp)
            vals = x.coeffs[tuple((supp + x.model.budget).T)]
            v[idx, i] = m.coefficient_coords(vals)
        return v.reshape(-1)

    def element(self, vec: np.ndarray, budget: int | None = None, column: int = 0) -> GradedElement:
        """Inverse of :meth:`coords` for one amplification slot."""
        m = self.model
        budget = self.radius if budget is None else budget
        mm = m.with_budget(budget)
        v = np.asarray(vec).reshape(self.n_labels, self.amp, m.nB)[:, column]
        c = np.zeros((mm.side,) * m.r + (m.d, m.d), dtype=complex)
        c[tuple((self.labels + budget).T)] = m.from_coefficient_coords(v)
        return GradedElement(mm, c)


def _amp_block(model: ActionModel, coeff: np.ndarray, lam, amp: int) -> np.ndarray:
    """Matrix of ``x ↦ coeff · β_λ(x)`` on ``ℂ^n ⊗ B`` coordinates."""
    d = model.d
    nB = model.nB
    Tw = model.twist_coefficient_matrix(lam)
    blocks = coeff.reshape(amp, d, amp, d).transpose(0, 2, 1, 3)
    c = model.coefficient_coords(blocks)  # (n, n, nB)
    L = np.einsum("ikl,plj->ipkj", c, model.structure_constants)
    L = L.reshape(amp * nB, amp * nB)
    return L @ np.kron(np.eye(amp), Tw)


def left_mult_matrix(a: GradedElement, radius_in: int, radius_out: int | None = None) -> np.ndarray:
    """Compression ``P_out L(a) P_in`` of left multiplication by ``a``.

    ``a`` may be amplified; the result acts on ``V_K ⊗ ℂ^n`` columns.
    """
    m = a.model
    radius_out = radius_in if radius_out is None else radius_out
    win_in = Window(m, radius_in, a.amp)
    win_out = Window(m, radius_out, a.amp)
    F = win_in.fiber
    X = np.zeros((win_out.n_labels, F, win_in.n_labels, F), dtype=complex)
    lab_in = win_in.labels
    idx_in = np.arange(win_in.n_labels)
    for mu in a.support():
        if np.any(np.abs(mu) > radius_in + radius_out):
            continue
        out = lab_in + mu
        ok = win_out.contains(out)
        if not ok.any():
            continue
        block = _amp_block(m, a.coeffs[tuple(mu + m.budget)], mu, a.amp)
        ph = m.phase(mu, lab_in[ok])
        X[win_out.label_index(out[ok]), :, idx_in[ok], :] += ph[:, None, None] * block
    return X.reshape(win_out.dim, win_in.dim)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def _evaluation_factors(model: ActionModel, labels: np.ndarray) -> np.ndarray | None:
    """Unitaries ``Ω_λ`` with ``Ω_λ Ω_μ = σ(λ,μ) Ω_{λ+μ}`` or None if unavailable."""
    if not model.has_cocycle:
        return np.ones((len(labels), 1, 1), dtype=complex)
    th = model.cocycle
    if model.r == 1:
        t = model.theta_float[0, 0]
        return np.exp(-1j * np.pi * t * labels[:, 0] ** 2)[:, None, None] * np.ones((1, 1, 1))
    if model.r == 2 and th[0][0] == 0 and th[1][1] == 0 and model.theta_is_rational:
        eff = th[0][1] - th[1][0]
        q = eff.denominator
        C = np.diag(np.exp(2j * np.pi * float(eff) * np.arange(q)))
        S = np.roll(np.eye(q), 1, axis=0)
        out = np.empty((len(labels), q, q), dtype=complex)
        for i, (a, b) in enumerate(labels):
            pref = np.exp(-2j * np.pi * float(th[0][1]) * a * b)
            out[i] = pref * np.linalg.matrix_power(C if a >= 0 else C.conj().T, abs(a)) @ np.linalg.matrix_power(
                S if b >= 0 else S.T, abs(b)
            )
        return out
    return None


def element_norm(a: GradedElement, grid: int | None = None) -> float:
    """C*-norm of ``a``.

    Uses the supremum over a torus grid of finite-dimensional evaluation
    representations when the model admits them, otherwise the norm of a
    large compression of the left regular representation (a lower bound).
    """
    if a.is_zero():
        return 0.0
    m = a.model
    supp = a.support()
    R = int(np.abs(supp).max())
    omegas = _evaluation_factors(m, supp)
    if omegas is None:
        K = max(3 * R, 8)
        return operator_norm(left_mult_matrix(a, K))
    n = a.amp
    q = omegas.shape[-1]
    D = a.block_dim * q
    P = grid or max(16, 8 * R + 8)
    if m.r == 2:
        P = min(P, 400)
    vals = np.zeros((P,) * m.r + (D, D), dtype=complex)
    for lam, om in zip(supp, omegas):
        b = a.coeffs[tuple(lam + m.budget)]
        if m.has_twist:
            V = np.kron(np.eye(n), m.twist_power(lam))
            b = b @ V
        vals[tuple(np.mod(lam, P))] += np.kron(b, om)
    vals = scipy.fft.ifftn(vals, axes=tuple(range(m.r))) * (P**m.r)
    s = np.linalg.svd(vals.reshape(-1, D, D), compute_uv=False)
    return float(s.max())


def evaluate(a: GradedElement, x) -> np.ndarray:
    """Evaluation representation at a torus point ``x`` (untwisted cocycle only)."""
    m = a.model
    x = np.atleast_1d(np.asarray(x, dtype=float))
    supp = a.support()
    omegas = _evaluation_factors(m, supp)
    if omegas is None:
        raise ValueError("no evaluation representation for this cocycle")
    q = omegas.shape[-1]
    out = np.zeros((a.block_dim * q,) * 2, dtype=complex)
    for lam, om in zip(supp, omegas):
        b = a.coeffs[tuple(lam + m.budget)]
        if m.has_twist:
            b = b @ np.kron(np.eye(a.amp), m.twist_power(lam))
        out += np.exp(2j * np.pi * float(np.dot(lam, x))) * np.kron(b, om)
    return out
