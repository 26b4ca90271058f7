"""Truncated torus-graded *-algebras.

An :class:`ActionModel` describes a twisted group algebra over a finite
dimensional coefficient algebra ``B ⊆ M_d``.  Elements are finite sums
``Σ_λ b_λ W_λ`` indexed by integer labels ``λ ∈ ℤ^r`` with ``|λ_i| ≤ M``
(the degree budget).  The multiplication rule is

    (b W_λ)(c W_μ) = σ(λ, μ) · b β_λ(c) · W_{λ+μ},

with the bicharacter ``σ(λ, μ) = exp(2πi λᵀΘμ)`` and the twist
``β_λ = Ad(V^λ)``.  The torus ``T^k`` acts through an integer grading
matrix ``G``: the label ``λ`` carries the character ``χ = Gλ``.
The invariant trace is ``τ(b W_λ) = δ_{λ,0} tr_w(b)`` where
``tr_w(b) = Σ_i w_i b_ii``.

Matrix amplification (elements of ``M_n(A)``) is supported by storing
``(n·d) × (n·d)`` coefficient blocks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.fft

from .core import TOL_RANK
from .errors import BudgetOverflow

Scalar = Fraction | float

_FFT_THRESHOLD = 4096


def _as_fraction_or_float(x) -> Scalar:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


@dataclass(frozen=True)
class Generator:
    name: str
    label: tuple[int, ...]
    coefficient: np.ndarray = field(compare=False)


@dataclass(frozen=True, eq=False)
class ActionModel:
    """A truncated ``T^k``-algebra in twisted group-algebra form.

    Parameters
    ----------
    name : str
        Identifier used in reports.
    grading_matrix : k x r integer matrix mapping labels to characters.
    budget : degree budget ``M``; labels satisfy ``|λ_i| ≤ M``.
    cocycle : r x r matrix Θ of Fractions (exact phases) or floats.
    coefficient_basis : array (nB, d, d), orthonormal for ``tr_w(x* y)``.
    trace_weights : array (d,), positive, summing to one.
    twist : optional array (r, d, d) of commuting unitaries ``V_i``.
    generators : named monomial generators.
    relations : free-text description of the defining relations.
    """

    name: str
    grading_matrix: tuple[tuple[int, ...], ...]
    budget: int
    cocycle: tuple[tuple[Scalar, ...], ...]
    coefficient_basis: np.ndarray
    trace_weights: np.ndarray
    twist: np.ndarray | None = None
    generators: tuple[Generator, ...] = ()
    relations: str = ""

    def __post_init__(self):
        G = tuple(tuple(int(x) for x in row) for row in self.grading_matrix)
        object.__setattr__(self, "grading_matrix", G)
        theta = tuple(tuple(_as_fraction_or_float(x) for x in row) for row in self.cocycle)
        object.__setattr__(self, "cocycle", theta)
        basis = np.array(self.coefficient_basis, dtype=complex)
        basis.setflags(write=False)
        object.__setattr__(self, "coefficient_basis", basis)
        w = np.array(self.trace_weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "trace_weights", w)
        if self.twist is not None:
            V = np.array(self.twist, dtype=complex)
            V.setflags(write=False)
            object.__setattr__(self, "twist", V)
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if len(theta) != self.r or any(len(row) != self.r for row in theta):
            raise ValueError("cocycle must be r x r")
        if basis.ndim != 3 or basis.shape[1:] != (self.d, self.d):
            raise ValueError("coefficient_basis must have shape (nB, d, d)")

    # ---- shapes -------------------------------------------------------
    @property
    def k(self) -> int:
        return len(self.grading_matrix)

    @property
    def r(self) -> int:
        return len(self.grading_matrix[0])

    @property
    def d(self) -> int:
        return len(self.trace_weights)

    @property
    def nB(self) -> int:
        return self.coefficient_basis.shape[0]

    @property
    def side(self) -> int:
        return 2 * self.budget + 1

    @cached_property
    def G(self) -> np.ndarray:
        G = np.array(self.grading_matrix, dtype=np.int64)
        G.setflags(write=False)
        return G

    @cached_property
    def labels(self) -> np.ndarray:
        """All labels of the budget box, in storage order, shape (side**r, r)."""
        return box_labels(self.budget, self.r)

    @cached_property
    def label_gradings(self) -> np.ndarray:
        """Grading of every label in storage order, shape (side**r, k)."""
        return self.labels @ self.G.T

    # ---- cocycle and twist ---------------------------------------------
    @cached_property
    def theta_is_rational(self) -> bool:
        return all(isinstance(x, Fraction) for row in self.cocycle for x in row)

    @cached_property
    def _theta_int(self) -> tuple[np.ndarray, int]:
        q = 1
        for row in self.cocycle:
            for x in row:
                q = q * x.denominator // math.gcd(q, x.denominator)
        T = np.array([[int(x * q) for x in row] for row in self.cocycle], dtype=np.int64)
        return T, q

    @cached_property
    def theta_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.cocycle])

    @cached_property
    def has_cocycle(self) -> bool:
        return any(x != 0 for row in self.cocycle for x in row)

    @cached_property
    def has_twist(self) -> bool:
        if self.twist is None:
            return False
        eye = np.eye(self.d)
        return any(not np.allclose(V, eye, atol=0, rtol=0) for V in self.twist)

    @property
    def untwisted(self) -> bool:
        return not self.has_cocycle and not self.has_twist

    def phase(self, lam, mus) -> np.ndarray:
        """``σ(λ, μ)`` for a single ``λ`` against an array of labels ``μ`` (shape (..., r))."""
        mus = np.asarray(mus, dtype=np.int64)
        if not self.has_cocycle:
            return np.ones(mus.shape[:-1], dtype=complex)
        lam = np.asarray(lam, dtype=np.int64)
        if self.theta_is_rational:
            T, q = self._theta_int
            n = np.mod(mus @ (lam @ T), q)
            return np.exp(2j * np.pi * n / q)
        return np.exp(2j * np.pi * (mus @ (lam @ self.theta_float)))

    def phase_pairs(self, lams, mus) -> np.ndarray:
        """Elementwise ``σ(λ_i, μ_i)`` for matching label arrays."""
        lams = np.asarray(lams, dtype=np.int64)
        mus = np.asarray(mus, dtype=np.int64)
        if not self.has_cocycle:
            return np.ones(lams.shape[:-1], dtype=complex)
        if self.theta_is_rational:
            T, q = self._theta_int
            n = np.mod(np.einsum("...i,ij,...j->...", lams, T, mus), q)
            return np.exp(2j * np.pi * n / q)
        return np.exp(2j * np.pi * np.einsum("...i,ij,...j->...", lams, self.theta_float, mus))

    def twist_power(self, lam) -> np.ndarray:
        """``V^λ = V_1^{λ_1} ... V_r^{λ_r}``."""
        if not self.has_twist:
            return np.eye(self.d, dtype=complex)
        out = np.eye(self.d, dtype=complex)
        for V, n in zip(self.twist, lam):
            out = out @ np.linalg.matrix_power(V if n >= 0 else V.conj().T, abs(int(n)))
        return out

    # ---- coefficient algebra ------------------------------------------
    def tr_w(self, b: np.ndarray) -> complex:
        return complex(np.einsum("i,...ii->...", self.trace_weights, b))

    def coefficient_coords(self, b: np.ndarray) -> np.ndarray:
        """Coordinates of ``b`` (shape (..., d, d)) in the orthonormal basis, shape (..., nB)."""
        basis_adj = self.coefficient_basis.conj().transpose(0, 2, 1)
        prod = np.einsum("jab,...bc->...jac", basis_adj, b)
        return np.einsum("a,...jaa->...j", self.trace_weights, prod)

    def from_coefficient_coords(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("...j,jab->...ab", c, self.coefficient_basis)

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """``S[j', l, j] = tr_w(e_{j'}* e_l e_j)``."""
        E = self.coefficient_basis
        prods = np.einsum("lab,jbc->ljac", E, E)
        return self.coefficient_coords(prods).transpose(2, 0, 1)

    def left_coefficient_matrix(self, b: np.ndarray) -> np.ndarray:
        """Matrix of ``x ↦ b x`` on B in basis coordinates."""
        c = self.coefficient_coords(b)
        return np.einsum("l,plj->pj", c, self.structure_constants)

    def twist_coefficient_matrix(self, lam) -> np.ndarray:
        """Matrix of ``β_λ`` on B in basis coordinates."""
        if not self.has_twist:
            return np.eye(self.nB, dtype=complex)
        V = self.twist_power(lam)
        moved = np.einsum("ab,jbc,dc->jad", V, self.coefficient_basis, V.conj())
        return self.coefficient_coords(moved).T

    @cached_property
    def unit_coords(self) -> np.ndarray:
        return self.coefficient_coords(np.eye(self.d, dtype=complex))

    # ---- derived models -----------------------------------------------
    def with_budget(self, budget: int) -> "ActionModel":
        return replace(self, budget=int(budget))

    def generator(self, name: str, amp: int = 1) -> "GradedElement":
        for g in self.generators:
            if g.name == name:
                return GradedElement.monomial(self, g.label, g.coefficient, amp=amp)
        raise KeyError(f"model {self.name!r} has no generator {name!r}")

    @property
    def generator_names(self) -> list[str]:
        return [g.name for g in self.generators]

    def unit(self, amp: int = 1) -> "GradedElement":
        return GradedElement.unit(self, amp)

    def zero(self, amp: int = 1) -> "GradedElement":
        return GradedElement.zeros(self, amp)

    def __repr__(self) -> str:
        return f"ActionModel({self.name!r}, k={self.k}, r={self.r}, d={self.d}, M={self.budget})"


def box_labels(radius: int, r: int) -> np.ndarray:
    axes = [np.arange(-radius, radius + 1)] * r
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)


def grading_order(k: int, radius: int) -> list[tuple[int, ...]]:
    """Characters of the box ``|χ_i| ≤ radius`` ordered 0, 1, -1, 2, -2, ... per axis."""
    order = [0]
    for n in range(1, radius + 1):
        order += [n, -n]
    chars = list(itertools.product(order, repeat=k))
    chars.sort(key=lambda c: max((abs(x) for x in c), default=0))
    return chars


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GradedElement:
    """An element ``Σ_λ a_λ W_λ`` of a model (or of ``M_n`` over it).

    ``coeffs`` has shape ``(2M+1,)*r + (n·d, n·d)`` and is read-only.
    """

    model: ActionModel
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        m = self.model
        if c.shape[: m.r] != (m.side,) * m.r or c.ndim != m.r + 2 or c.shape[-1] != c.shape[-2]:
            raise ValueError(f"coefficient array of shape {c.shape} does not fit {m!r}")
        if c.shape[-1] % m.d:
            raise ValueError("block size must be a multiple of d")
        if c.flags.writeable:
            c = c.copy()
            c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # ---- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, model: ActionModel, amp: int = 1) -> "GradedElement":
        D = amp * model.d
        return cls(model, np.zeros((model.side,) * model.r + (D, D), dtype=complex))

    @classmethod
    def monomial(cls, model: ActionModel, label, coefficient=None, amp: int = 1) -> "GradedElement":
        label = tuple(int(x) for x in np.atleast_1d(label))
        if len(label) != model.r:
            raise ValueError(f"label {label} has wrong length for r={model.r}")
        if any(abs(x) > model.budget for x in label):
            raise BudgetOverflow(f"label {label} exceeds budget {model.budget}")
        D = amp * model.d
        if coefficient is None:
            coefficient = np.eye(D)
        coefficient = np.asarray(coefficient, dtype=complex)
        if coefficient.ndim == 0:
            coefficient = coefficient * np.eye(D)
        elif coefficient.shape == (model.d, model.d) and amp > 1:
            coefficient = np.kron(np.eye(amp), coefficient)
        c = np.zeros((model.side,) * model.r + (D, D), dtype=complex)
        c[tuple(x + model.budget for x in label)] = coefficient
        return cls(model, c)

    @classmethod
    def unit(cls, model: ActionModel, amp: int = 1) -> "GradedElement":
        return cls.monomial(model, (0,) * model.r, amp=amp)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence["GradedElement | int | float | complex"]]) -> "GradedElement":
        """Assemble an ``n x n`` matrix over the model from scalar-size elements."""
        first = next(x for row in blocks for x in row if isinstance(x, GradedElement))
        m = first.model
        n = len(blocks)
        d = m.d
        c = np.zeros((m.side,) * m.r + (n * d, n * d), dtype=complex)
        for i, row in enumerate(blocks):
            for j, x in enumerate(row):
                if isinstance(x, GradedElement):
                    if x.amp != 1:
                        raise ValueError("blocks must be unamplified elements")
                    c[..., i * d:(i + 1) * d, j * d:(j + 1) * d] = x.coeffs
                else:
                    c[(m.budget,) * m.r + (slice(i * d, (i + 1) * d), slice(j * d, (j + 1) * d))] = complex(x) * np.eye(d)
        return cls(m, c)

    # ---- basic data ---------------------------------------------------
    @property
    def amp(self) -> int:
        return self.coeffs.shape[-1] // self.model.d

    @property
    def block_dim(self) -> int:
        return self.coeffs.shape[-1]

    def block(self, i: int, j: int) -> "GradedElement":
        d = self.model.d
        return GradedElement(self.model, self.coeffs[..., i * d:(i + 1) * d, j * d:(j + 1) * d])

    def coefficient(self, label) -> np.ndarray:
        label = tuple(int(x) for x in np.atleast_1d(label))
        if any(abs(x) > self.model.budget for x in label):
            return np.zeros((self.block_dim,) * 2, dtype=complex)
        return np.array(self.coeffs[tuple(x + self.model.budget for x in label)])

    @cached_property
    def _nonzero_mask(self) -> np.ndarray:
        flat = self.coeffs.reshape(self.coeffs.shape[: self.model.r] + (-1,))
        return np.any(flat != 0, axis=-1)

    def support(self) -> np.ndarray:
        """Labels with a nonzero coefficient, shape (s, r)."""
        idx = np.argwhere(self._nonzero_mask)
        return idx - self.model.budget

    def bbox(self) -> tuple[np.ndarray, np.ndarray] | None:
        s = self.support()
        if s.size == 0:
            return None
        return s.min(axis=0), s.max(axis=0)

    def radius(self) -> int:
        s = self.support()
        return int(np.abs(s).max()) if s.size else 0

    def gradings(self) -> list[tuple[int, ...]]:
        s = self.support()
        if s.size == 0:
            return []
        return sorted({tuple(int(x) for x in row) for row in s @ self.model.G.T})

    def grading_radius(self) -> int:
        g = self.gradings()
        return max((max(abs(x) for x in c) for c in g), default=0)

    def is_zero(self) -> bool:
        return not self._nonzero_mask.any()

    # ---- arithmetic ---------------------------------------------------
    def _check_compatible(self, other: "GradedElement"):
        if other.model is not self.model and not _same_model(other.model, self.model):
            raise ValueError("elements belong to different models")
        if other.coeffs.shape != self.coeffs.shape:
            raise ValueError("amplification mismatch")

    def __add__(self, other):
        if isinstance(other, GradedElement):
            self._check_compatible(other)
            return GradedElement(self.model, self.coeffs + other.coeffs)
        return self + other * GradedElement.unit(self.model, self.amp)

    __radd__ = __add__

    def __neg__(self):
        return GradedElement(self.model, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GradedElement):
            return multiply(self, other)
        return GradedElement(self.model, self.coeffs * complex(other))

    def __rmul__(self, other):
        return GradedElement(self.model, self.coeffs * complex(other))

    def __truediv__(self, other):
        return GradedElement(self.model, self.coeffs / complex(other))

    def adjoint(self) -> "GradedElement":
        return element_adjoint(self)

    @property
    def H(self) -> "GradedElement":
        return element_adjoint(self)

    def power(self, n: int) -> "GradedElement":
        if n < 0:
            return self.adjoint().power(-n)
        out = GradedElement.unit(self.model, self.amp)
        for _ in range(n):
            out = out * self
        return out

    def chop(self, tol: float = 1e-14) -> "GradedElement":
        """Zero out coefficient entries below ``tol`` times the largest entry."""
        c = np.array(self.coeffs)
        scale = np.abs(c).max() if c.size else 0.0
        c[np.abs(c) <= tol * scale] = 0
        return GradedElement(self.model, c)

    def rebudget(self, model_or_budget) -> "GradedElement":
        """Re-embed into the same model with a different degree budget."""
        new = model_or_budget if isinstance(model_or_budget, ActionModel) else self.model.with_budget(model_or_budget)
        if new.r != self.model.r or new.d != self.model.d:
            raise ValueError("incompatible model")
        rad = self.radius()
        if rad > new.budget:
            raise BudgetOverflow(f"element radius {rad} exceeds budget {new.budget}")
        c = np.zeros((new.side,) * new.r + self.coeffs.shape[-2:], dtype=complex)
        lo = min(self.model.budget, new.budget)
        src = tuple(slice(self.model.budget - lo, self.model.budget + lo + 1) for _ in range(new.r))
        dst = tuple(slice(new.budget - lo, new.budget + lo + 1) for _ in range(new.r))
        c[dst] = self.coeffs[src]
        return GradedElement(new, c)

    def amplify(self, n: int) -> "GradedElement":
        """``a ⊗ 1_n`` as an element of ``M_n`` over the model."""
        c = np.einsum("...ab,ij->...iajb", self.coeffs, np.eye(n))
        D = self.block_dim * n
        return GradedElement(self.model, c.reshape(c.shape[:-4] + (D, D)))

    def allclose(self, other: "GradedElement", tol: float = 1e-10) -> bool:
        return coefficient_distance(self, other) <= tol

    def norm(self) -> float:
        from .representations import element_norm

        return element_norm(self)

    def __repr__(self) -> str:
        return f"GradedElement({self.model.name}, amp={self.amp}, support={len(self.support())} labels)"


def _same_model(a: ActionModel, b: ActionModel) -> bool:
    return (
        a.grading_matrix == b.grading_matrix
        and a.budget == b.budget
        and a.cocycle == b.cocycle
        and a.coefficient_basis.shape == b.coefficient_basis.shape
        and np.array_equal(a.coefficient_basis, b.coefficient_basis)
        and np.array_equal(a.trace_weights, b.trace_weights)
        and ((a.twist is None and b.twist is None) or (a.twist is not None and b.twist is not None and np.array_equal(a.twist, b.twist)))
    )


def coefficient_distance(a: GradedElement, b: GradedElement) -> float:
    """Largest entrywise coefficient difference (a cheap equality proxy)."""
    a._check_compatible(b)
    diff = a.coeffs - b.coeffs
    return float(np.abs(diff).max()) if diff.size else 0.0


def _amp_twist(model: ActionModel, lam, n: int) -> np.ndarray:
    V = model.twist_power(lam)
    return np.kron(np.eye(n), V) if n > 1 else V


def multiply(a: GradedElement, b: GradedElement) -> GradedElement:
    """Product in the twisted algebra; raises BudgetOverflow outside the budget."""
    a._check_compatible(b)
    m = a.model
    M = m.budget
    ba, bb = a.bbox(), b.bbox()
    if ba is None or bb is None:
        return GradedElement.zeros(m, a.amp)
    lo = ba[0] + bb[0]
    hi = ba[1] + bb[1]
    if np.any(lo < -M) or np.any(hi > M):
        raise BudgetOverflow(f"product support [{lo.tolist()}, {hi.tolist()}] leaves budget {M}")
    sa = a.support()
    b_slices = tuple(slice(int(l) + M, int(h) + M + 1) for l, h in zip(*bb))
    b_box = b.coeffs[b_slices]
    out = np.zeros_like(a.coeffs)
    n_b = int(np.prod([h - l + 1 for l, h in zip(*bb)]))
    if m.untwisted and len(sa) * n_b > _FFT_THRESHOLD and len(sa) > 64:
        a_slices = tuple(slice(int(l) + M, int(h) + M + 1) for l, h in zip(*ba))
        a_box = a.coeffs[a_slices]
        shape = [x + y - 1 for x, y in zip(a_box.shape[: m.r], b_box.shape[: m.r])]
        fshape = [scipy.fft.next_fast_len(s) for s in shape]
        axes = tuple(range(m.r))
        A = scipy.fft.fftn(a_box, s=fshape, axes=axes)
        B = scipy.fft.fftn(b_box, s=fshape, axes=axes)
        C = scipy.fft.ifftn(A @ B, axes=axes)
        C = C[tuple(slice(0, s) for s in shape)]
        out[tuple(slice(int(l) + M, int(h) + M + 1) for l, h in zip(lo, hi))] = C
        return GradedElement(m, out)
    grid = None
    if m.has_cocycle:
        axes = [np.arange(int(l), int(h) + 1) for l, h in zip(*bb)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    n = a.amp
    for lam in sa:
        a_lam = a.coeffs[tuple(lam + M)]
        if m.has_twist:
            V = _amp_twist(m, lam, n)
            moved = V @ b_box @ V.conj().T
        else:
            moved = b_box
        term = a_lam @ moved
        if grid is not None:
            term = term * m.phase(lam, grid)[..., None, None]
        target = tuple(slice(int(l + x) + M, int(h + x) + M + 1) for l, h, x in zip(bb[0], bb[1], lam))
        out[target] += term
    return GradedElement(m, out)


def element_adjoint(a: GradedElement) -> GradedElement:
    """``(a*)_{-λ} = conj(σ(λ,-λ)) β_{-λ}(a_λ*)``."""
    m = a.model
    r = m.r
    flipped = a.coeffs[(slice(None, None, -1),) * r]
    c = flipped.conj().swapaxes(-1, -2)
    if m.has_cocycle:
        labs = m.labels.reshape((m.side,) * r + (r,))
        # at storage position of label μ = -λ we need conj(σ(λ, -λ)) with λ = -μ
        ph = np.conj(m.phase_pairs(-labs, labs))
        c = c * ph[..., None, None]
    if m.has_twist:
        c = np.array(c)
        n = a.amp
        for lam in a.support():
            pos = tuple(-lam + m.budget)
            V = _amp_twist(m, -lam, n)
            c[pos] = V @ c[pos] @ V.conj().T
    return GradedElement(m, c)


# ---------------------------------------------------------------------------
# Action, mean, trace
# ---------------------------------------------------------------------------


def apply_action(a: GradedElement, g) -> GradedElement:
    """``α_g``: multiply the grading-χ part by ``exp(2πi χ·g)``."""
    m = a.model
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if g.shape != (m.k,):
        raise ValueError(f"group element must have {m.k} coordinates")
    ph = np.exp(2j * np.pi * (m.label_gradings @ g))
    return GradedElement(m, a.coeffs * ph.reshape((m.side,) * m.r)[..., None, None])


def _grading_mask(m: ActionModel, chi) -> np.ndarray:
    chi = np.atleast_1d(np.asarray(chi, dtype=np.int64))
    mask = np.all(m.label_gradings == chi, axis=-1)
    return mask.reshape((m.side,) * m.r)


def spectral_component(a: GradedElement, chi) -> GradedElement:
    mask = _grading_mask(a.model, chi)
    return GradedElement(a.model, a.coeffs * mask[..., None, None])


def mean(a: GradedElement) -> GradedElement:
    return spectral_component(a, (0,) * a.model.k)


def trace(a: GradedElement) -> complex:
    """``τ ⊗ Tr`` on ``M_n(A)`` (unnormalized over the amplification)."""
    m = a.model
    c0 = a.coeffs[(m.budget,) * m.r]
    w = np.tile(m.trace_weights, a.amp)
    return complex(np.sum(w * np.diagonal(c0)))


def inner_product_fixed(a: GradedElement, b: GradedElement) -> GradedElement:
    """The fixed-point-valued inner product ``⟨a, b⟩ = mean(a* b)``."""
    return mean(element_adjoint(a) * b)


def sobolev_norm(a: GradedElement, s: float) -> float:
    """``|| Σ_χ (1 + 4π²|χ|²)^s a_χ* a_χ ||^{1/2}``."""
    m = a.model
    total = GradedElement.zeros(m, a.amp)
    for chi in a.gradings():
        comp = spectral_component(a, chi)
        weight = (1.0 + 4.0 * np.pi**2 * float(np.dot(chi, chi))) ** s
        total = total + weight * inner_product_fixed(comp, comp)
    return math.sqrt(max(total.norm(), 0.0))


# ---------------------------------------------------------------------------
# Coordinates on the full budget box
# ---------------------------------------------------------------------------


def element_coords(a: GradedElement) -> np.ndarray:
    """Flat coordinate vector of ``a`` over (label, block row, block col, basis)."""
    m = a.model
    n = a.amp
    d = m.d
    c = a.coeffs.reshape((-1, n, d, n, d)).transpose(0, 1, 3, 2, 4)
    return m.coefficient_coords(c).reshape(-1)


def rank_of(elements: Sequence[GradedElement], tol: float = TOL_RANK) -> int:
    if not elements:
        return 0
    X = np.stack([element_coords(e) for e in elements], axis=1)
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.count_nonzero(s > tol * max(s[0], 1.0)))


def reduce_to_basis(elements: Sequence[GradedElement], tol: float = TOL_RANK) -> list[GradedElement]:
    """Orthonormal (for the scalarized trace inner product) basis of the span."""
    if not elements:
        return []
    m = elements[0].model
    X = np.stack([element_coords(e) for e in elements], axis=1)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    keep = s > tol * max(s[0], 1.0) if s.size else np.zeros(0, bool)
    out = []
    n = elements[0].amp
    d = m.d
    for col in U[:, keep].T:
        coords = col.reshape((-1, n, n, m.nB))
        blocks = m.from_coefficient_coords(coords)  # (L, n, n, d, d)
        c = blocks.transpose(0, 1, 3, 2, 4).reshape((m.side,) * m.r + (n * d, n * d))
        out.append(GradedElement(m, fix_element_phase(c)))
    return out


def fix_element_phase(c: np.ndarray) -> np.ndarray:
    flat = c.reshape(-1)
    idx = np.argmax(np.abs(flat) > 1e-12 * np.abs(flat).max()) if flat.size and np.abs(flat).max() > 0 else None
    if idx is None:
        return c
    ph = flat[idx] / abs(flat[idx])
    return c / ph


# ---------------------------------------------------------------------------
# Fixed points and saturation
# ---------------------------------------------------------------------------


def fixed_point_basis(model: ActionModel, word_length: int) -> list[GradedElement]:
    """Basis of the grading-0 span of generator words of length ≤ L.

    The empty word (the unit) is included.  Words whose labels leave the
    budget raise BudgetOverflow.
    """
    if word_length < 1:
        raise ValueError("word length must be at least 1")
    letters = []
    for g in model.generators:
        x = model.generator(g.name)
        letters.append(x)
        letters.append(x.adjoint())
    zero = (0,) * model.k
    level: dict[tuple[int, ...], list[GradedElement]] = {zero: [model.unit()]}
    fixed = list(level[zero])
    for _ in range(word_length):
        nxt: dict[tuple[int, ...], list[GradedElement]] = {}
        for chi, elems in level.items():
            for e in elems:
                for x in letters:
                    prod = e * x
                    if prod.is_zero():
                        continue
                    for c in prod.gradings():
                        nxt.setdefault(c, []).append(spectral_component(prod, c))
        level = {c: reduce_to_basis(v) for c, v in nxt.items()}
        fixed.extend(level.get(zero, []))
    return reduce_to_basis(fixed)


def spectral_subspace_basis(model: ActionModel, chi) -> list[GradedElement]:
    """Basis ``{e_j W_λ : Gλ = χ}`` of the truncated spectral subspace."""
    chi = np.atleast_1d(np.asarray(chi, dtype=np.int64))
    out = []
    for lam, g in zip(model.labels, model.label_gradings):
        if np.array_equal(g, chi):
            for e in model.coefficient_basis:
                out.append(GradedElement.monomial(model, lam, e))
    return out


@dataclass(frozen=True)
class CharacterVerdict:
    character: tuple[int, ...]
    subspace_dim: int
    product_rank: int
    fixed_rank: int
    joint_rank: int
    saturated: bool
    structural: bool


@dataclass(frozen=True)
class SaturationReport:
    verdict: str
    witness_character: tuple[int, ...] | None
    per_character: tuple[CharacterVerdict, ...]
    truncation: dict
    singular_values: tuple[float, ...] = ()

    @property
    def saturated(self) -> bool:
        return self.verdict == "SATURATED_AT_TRUNCATION"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness_character": list(self.witness_character) if self.witness_character is not None else None,
            "per_character": [
                {
                    "character": list(v.character),
                    "subspace_dim": v.subspace_dim,
                    "product_rank": v.product_rank,
                    "fixed_rank": v.fixed_rank,
                    "joint_rank": v.joint_rank,
                    "saturated": v.saturated,
                    "structural": v.structural,
                }
                for v in self.per_character
            ],
            "singular_values": list(self.singular_values),
            "truncation": dict(self.truncation),
        }


def saturation_check(model: ActionModel, chi_radius: int = 2, word_length: int = 2) -> SaturationReport:
    """Rieffel-type check: is the fixed-point span inside span A(χ)*A(χ) for each χ?

    Spectral subspaces use labels within the model budget; products and
    generator words are formed in a model with doubled budget.
    """
    if chi_radius < 0:
        raise ValueError("chi_radius must be nonnegative")
    wide = model.with_budget(2 * model.budget)
    fixed = fixed_point_basis(wide, word_length)
    per = []
    witness = None
    profile: tuple[float, ...] = ()
    for chi in grading_order(model.k, chi_radius):
        basis = [e.rebudget(wide) for e in spectral_subspace_basis(model, chi)]
        prods = [a.adjoint() * b for a in basis for b in basis]
        prods = reduce_to_basis(prods) if prods else []
        pr = len(prods)
        fr = len(fixed)
        jr = rank_of(prods + fixed)
        ok = jr == pr and fr > 0
        v = CharacterVerdict(tuple(chi), len(basis), pr, fr, jr, ok, structural=len(basis) == 0)
        per.append(v)
        if not ok and witness is None:
            witness = tuple(chi)
            if prods or fixed:
                X = np.stack([element_coords(e) for e in prods + fixed], axis=1)
                profile = tuple(float(x) for x in np.linalg.svd(X, compute_uv=False))
    verdict = "SATURATED_AT_TRUNCATION" if witness is None else "UNSATURATED"
    return SaturationReport(
        verdict,
        witness,
        tuple(per),
        {"M": model.budget, "L": word_length, "chi_radius": chi_radius},
        profile,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _encode_scalar(x: Scalar):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return float(x)


def _encode_matrix(A: np.ndarray) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def model_to_dict(model: ActionModel) -> dict:
    d = model.d
    weights = model.trace_weights
    normalized = np.allclose(weights, np.full(d, 1.0 / d), rtol=0, atol=0)
    return {
        "name": model.name,
        "rank": model.k,
        "label_rank": model.r,
        "ambient_dim": d,
        "degree_budget": model.budget,
        "grading_matrix": [list(row) for row in model.grading_matrix],
        "cocycle": [[_encode_scalar(x) for x in row] for row in model.cocycle],
        "coefficient_basis": [_encode_matrix(e) for e in model.coefficient_basis],
        "twist": None if model.twist is None else [_encode_matrix(V) for V in model.twist],
        "generators": [
            {
                "name": g.name,
                "label": list(g.label),
                "grading": [int(x) for x in model.G @ np.array(g.label)],
                "coefficient_matrix": _encode_matrix(g.coefficient),
            }
            for g in model.generators
        ],
        "relations": model.relations,
        "trace": "normalized" if normalized else [float(x) for x in weights],
    }


def model_from_dict(doc: dict) -> ActionModel:
    d = int(doc["ambient_dim"])
    k = int(doc["rank"])
    r = int(doc.get("label_rank", k))
    G = doc.get("grading_matrix") or np.eye(k, r, dtype=int).tolist()
    theta = doc.get("cocycle") or [[0] * r for _ in range(r)]
    basis = doc.get("coefficient_basis")
    basis = np.array([_decode_matrix(e) for e in basis]) if basis else np.eye(d, dtype=complex)[None] * math.sqrt(d)
    tr = doc.get("trace", "normalized")
    weights = np.full(d, 1.0 / d) if tr == "normalized" else np.array(tr, dtype=float)
    twist = doc.get("twist")
    twist = None if twist is None else np.array([_decode_matrix(V) for V in twist])
    gens = []
    for g in doc.get("generators", []):
        label = g.get("label")
        if label is None:
            if r != k:
                raise ValueError(f"generator {g['name']!r} needs an explicit label")
            label = g["grading"]
        gens.append(Generator(g["name"], tuple(int(x) for x in label), _decode_matrix(g["coefficient_matrix"])))
    return ActionModel(
        name=doc.get("name", "custom"),
        grading_matrix=G,
        budget=int(doc["degree_budget"]),
        cocycle=theta,
        coefficient_basis=basis,
        trace_weights=weights,
        twist=twist,
        generators=tuple(gens),
        relations=doc.get("relations", ""),
    )


def element_to_dict(a: GradedElement) -> dict:
    comps = []
    for lam in a.support():
        comps.append({"label": [int(x) for x in lam], "coefficient_matrix": _encode_matrix(a.coefficient(lam))})
    return {"amp": a.amp, "components": comps}


def element_from_dict(model: ActionModel, doc: dict) -> GradedElement:
    amp = int(doc.get("amp", 1))
    out = GradedElement.zeros(model, amp)
    c = np.array(out.coeffs)
    for comp in doc["components"]:
        lam = tuple(int(x) for x in comp["label"])
        if any(abs(x) > model.budget for x in lam):
            raise BudgetOverflow(f"label {lam} exceeds budget {model.budget}")
        c[tuple(x + model.budget for x in lam)] = _decode_matrix(comp["coefficient_matrix"])
    return GradedElement(model, c)


def iter_label_window(radius: int, r: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(-radius, radius + 1), repeat=r)
