"""The Hilbert module ``H(A)`` over the fixed-point algebra, at truncation.

Vectors are model elements; the module inner product is
``⟨a, b⟩ = mean(a* b)``.  Operators are matrices on a coordinate window
``V_K``.  Rank-one operators ``Θ_{v,w}: x ↦ v⟨w, x⟩`` and the map
``C_α(f)(a) = Σ_k f̂(−k) a_k`` are built as exact compressions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .action_model import (
    ActionModel,
    GradedElement,
    box_labels,
    element_adjoint,
    inner_product_fixed,
    trace,
)
from .core import operator_norm
from .crossed_product import CrossedElement, TruncatedOperator, crossed_trace, fin_element, invariance_check
from .errors import NotInvariant
from .representations import Window, left_mult_matrix


@dataclass(frozen=True, eq=False)
class HOperator:
    """Matrix on ``V_K ⊗ ℂ^n ⊗ E``; index order (label, amp, basis, fiber)."""

    matrix: np.ndarray
    window: Window
    fiber: int = 1
    finite_rank: bool = False
    dirac: object | None = None
    picture: str = "module"

    @property
    def model(self) -> ActionModel:
        return self.window.model

    @property
    def K(self) -> int:
        return self.window.radius

    @property
    def amp(self) -> int:
        return self.window.amp

    @property
    def dim(self) -> int:
        return self.window.dim * self.fiber

    @cached_property
    def coordinate_labels(self) -> np.ndarray:
        return np.repeat(self.window.labels, self.window.fiber * self.fiber, axis=0)

    @cached_property
    def coordinate_gradings(self) -> np.ndarray:
        return self.coordinate_labels @ self.model.G.T

    def interior_mask(self, label_margin: int = 0) -> np.ndarray:
        return np.all(np.abs(self.coordinate_labels) <= self.K - label_margin, axis=-1)

    def with_matrix(self, matrix, **kw) -> "HOperator":
        params = dict(window=self.window, fiber=self.fiber, finite_rank=self.finite_rank, dirac=self.dirac)
        params.update(kw)
        return HOperator(matrix, **params)

    def adjoint(self) -> "HOperator":
        return self.with_matrix(self.matrix.conj().T)

    def __matmul__(self, other: "HOperator") -> "HOperator":
        return self.with_matrix(self.matrix @ other.matrix, finite_rank=self.finite_rank or other.finite_rank)

    def frame(self, mode: str = "module") -> np.ndarray:
        cols = self.window.frame(mode)
        if self.fiber == 1:
            return cols
        return np.kron(cols, np.eye(self.fiber))


def module_inner(v: GradedElement, w: GradedElement) -> GradedElement:
    return inner_product_fixed(v, w)


def scalar_inner(v: GradedElement, w: GradedElement) -> complex:
    """Scalarized inner product ``τ(⟨v, w⟩)``."""
    return trace(inner_product_fixed(v, w))


def _wide(x: GradedElement, budget: int) -> GradedElement:
    return x if x.model.budget >= budget else x.rebudget(budget)


def theta(v: GradedElement, w: GradedElement, K: int) -> HOperator:
    """``Θ_{v,w}: x ↦ v⟨w, x⟩`` on the window ``V_K``."""
    if v.amp != 1 or w.amp != 1:
        raise ValueError("module vectors are unamplified elements")
    model = v.model
    mid = K + max(v.radius(), w.radius())
    win_mid = Window(model, mid)
    Lv = left_mult_matrix(v, mid, K)
    Lw = left_mult_matrix(element_adjoint(w), K, mid)
    zero = win_mid.grading_mask(np.zeros(model.k, dtype=int))
    X = Lv[:, zero] @ Lw[zero, :]
    return HOperator(X, Window(model, K), finite_rank=True)


def identity_h(model: ActionModel, K: int, amp: int = 1, fiber: int = 1) -> HOperator:
    win = Window(model, K, amp)
    return HOperator(np.eye(win.dim * fiber, dtype=complex), win, fiber)


def left_mult_h(a: GradedElement, K: int, fiber: int = 1) -> HOperator:
    X = left_mult_matrix(a, K)
    if fiber > 1:
        X = np.kron(X, np.eye(fiber))
    return HOperator(X, Window(a.model, K, a.amp), fiber)


def c_alpha(f: CrossedElement, K: int) -> HOperator:
    """``C_α(f)(a) = Σ_k f̂(−k) a_k`` on the window ``V_K``."""
    win = Window(f.model, K, f.amp)
    X = np.zeros((win.dim, win.dim), dtype=complex)
    for m, x in f.modes.items():
        mask = win.grading_mask(-np.asarray(m))
        if not mask.any():
            continue
        L = left_mult_matrix(x, K)
        X[:, mask] += L[:, mask]
    return HOperator(X, win)


def trace_identity(v: GradedElement, w: GradedElement, N: int | None = None) -> tuple[complex, complex]:
    """``(Tr_τ(Θ_{v,w}), τ(⟨w, v⟩))`` with the left side read off the Fin preimage."""
    N = max(w.grading_radius(), 1) if N is None else N
    f = fin_element(v, w, N)
    if f.clipped:
        raise ValueError("mode truncation cuts the Fin preimage; enlarge N")
    return crossed_trace(f), trace(inner_product_fixed(w, v))


def module_trace(T: HOperator) -> complex:
    """``Tr_τ(T) = Σ_f τ(⟨f, T f⟩)`` over a frame of one unitary per grading."""
    F = T.frame("module")
    return complex(np.einsum("ij,ik,kj->", F.conj(), T.matrix, F))


def transfer_operator(T: TruncatedOperator, check: bool = True, samples=(0.1234, 0.3779)) -> HOperator:
    """Compress ``T`` to the ``R^α``-invariant vectors, identified with ``H(A)``.

    The label ``λ`` of grading ``χ`` sits in mode ``−χ``; every grading in
    the label window must fit in the mode truncation.
    """
    if check:
        pts = [np.full(T.k, s) + 0.071 * np.arange(T.k) for s in samples]
        res = invariance_check(T, pts, mode_margin=0)
        if not res.invariant:
            raise NotInvariant(f"operator is not invariant (deviation {res.max_deviation:.3e})")
    win = T.window
    grads = win.gradings
    if np.any(np.abs(grads) > T.N):
        raise ValueError("label window has gradings beyond the mode truncation; enlarge N")
    per_label = win.fiber * T.fiber
    idx = []
    for li, g in enumerate(grads):
        block = T.mode_index(-g) * T.block_size + li * per_label
        idx.extend(range(block, block + per_label))
    idx = np.asarray(idx)
    X = T.matrix[np.ix_(idx, idx)]
    return HOperator(X, Window(T.model, T.K, T.amp), T.fiber, dirac=T.dirac)


# ---------------------------------------------------------------------------
# Saturation versus compactness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompactnessVerdict:
    verdict: str
    nullity: int
    spanning_size: int
    image_rank: int
    theta_rank: int
    onto_compacts: bool
    inside_compacts: bool
    singular_values: tuple[float, ...]
    truncation: dict

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness_character": None,
            "nullity": self.nullity,
            "spanning_size": self.spanning_size,
            "image_rank": self.image_rank,
            "theta_rank": self.theta_rank,
            "onto_compacts": self.onto_compacts,
            "inside_compacts": self.inside_compacts,
            "singular_values": list(self.singular_values),
            "truncation": dict(self.truncation),
        }


def _gram_rank(S: sp.csr_matrix, tol: float = 1e-10) -> tuple[int, np.ndarray]:
    """Rank of the row span of ``S`` from Gram eigenvalues.

    The Gram matrix splits into blocks along connected components of the
    rows sharing a column, so each block is diagonalized separately.
    """
    n = S.shape[0]
    if n == 0:
        return 0, np.zeros(0)
    S = S.tocsr()
    G = (S @ S.conj().T).tocsr()
    pattern = (abs(G) > 0).astype(np.int8)
    ncomp, comp = connected_components(pattern, directed=False)
    ev = []
    for c in range(ncomp):
        idx = np.flatnonzero(comp == c)
        block = G[idx][:, idx].toarray()
        ev.append(np.linalg.eigvalsh(0.5 * (block + block.conj().T)))
    ev = np.clip(np.sort(np.concatenate(ev))[::-1], 0, None)
    top = ev[0] if ev.size else 0.0
    rank = int(np.count_nonzero(ev > tol * max(top, 1e-300)))
    return rank, np.sqrt(ev)


def saturation_by_compactness(model: ActionModel, N: int = 2, L: int | None = None) -> CompactnessVerdict:
    """Rank certificates for ``C_α`` being injective with image the compacts.

    Spanning set: ``e_m ⊗ e_j W_λ`` with ``|m| ≤ N`` and ``|λ| ≤ L``
    (default ``L = 2N``).  Operators live on ``V_K`` with ``K = N + L``.
    Checked: nullity of ``f ↦ C_α(f)``; ``Θ_{v,w}`` for basis vectors with
    ``|λ| ≤ min(N, L/2)`` lie in the image; the image lies in the span of
    all ``Θ_{v,w}`` over ``V_K``.
    """
    L = 2 * N if L is None else L
    K = N + L
    h = min(N, L // 2)
    big = model.with_budget(max(model.budget, 2 * K))
    win = Window(big, K)
    rows = []
    for m in box_labels(N, model.k):
        mask = win.grading_mask(-m)
        for lam in box_labels(L, model.r):
            for e in big.coefficient_basis:
                X = np.zeros((win.dim, win.dim), dtype=complex)
                if mask.any():
                    x = GradedElement.monomial(big, lam, e)
                    X[:, mask] = left_mult_matrix(x, K)[:, mask]
                rows.append(sp.csr_matrix(X.reshape(1, -1)))
    image = sp.vstack(rows).tocsr()
    n_span = image.shape[0]
    r_img, s_img = _gram_rank(image)
    nullity = n_span - r_img

    def thetas(radius: int) -> sp.csr_matrix:
        # Θ_{v,w} = L(v) Π_0 L(w*), with the factors computed once per vector
        vecs = [GradedElement.monomial(big, lam, e) for lam in box_labels(radius, model.r) for e in big.coefficient_basis]
        mid = K + radius
        zero = Window(big, mid).grading_mask(np.zeros(model.k, dtype=int))
        left = [sp.csr_matrix(left_mult_matrix(v, mid, K)[:, zero]) for v in vecs]
        right = [sp.csr_matrix(left_mult_matrix(element_adjoint(w), K, mid)[zero, :]) for w in vecs]
        out = [(lv @ rw).reshape(1, -1) for lv in left for rw in right]
        return sp.vstack(out).tocsr()

    th_small = thetas(h)
    th_all = thetas(K)
    r_all, _ = _gram_rank(th_all)
    onto = _gram_rank(sp.vstack([image, th_small]).tocsr())[0] == r_img
    inside = _gram_rank(sp.vstack([th_all, image]).tocsr())[0] == r_all
    if nullity > 0:
        verdict = "NOT_INJECTIVE"
    elif not (onto and inside):
        verdict = "NOT_ONTO_COMPACTS"
    else:
        verdict = "ISO"
    return CompactnessVerdict(
        verdict,
        nullity,
        n_span,
        r_img,
        r_all,
        onto,
        inside,
        tuple(float(x) for x in s_img),
        {"N": N, "M": model.budget, "L": L, "K": K},
    )


def adjoint_defect(T: HOperator, vectors: list[GradedElement]) -> float:
    """``max ||⟨Tv, w⟩ − ⟨v, T*w⟩||`` of module-valued inner products over vector pairs."""
    win = T.window
    if T.fiber != 1 or T.amp != 1:
        raise ValueError("defined for unamplified operators without fiber")
    budget = max(win.radius, max(v.radius() for v in vectors))
    wide = win.model.with_budget(2 * budget)
    vecs = [v.rebudget(wide) for v in vectors]
    C = np.stack([win.coords(v) for v in vectors], axis=1)
    Tv = [win.element(x, budget=wide.budget) for x in (T.matrix @ C).T]
    Tsw = [win.element(x, budget=wide.budget) for x in (T.matrix.conj().T @ C).T]
    worst = 0.0
    for i, v in enumerate(vecs):
        for j, w in enumerate(vecs):
            d = inner_product_fixed(Tv[i], w) - inner_product_fixed(v, Tsw[j])
            worst = max(worst, float(np.abs(d.coeffs).max()))
    return worst


def gram_matrix(vectors: list[GradedElement]) -> np.ndarray:
    return np.array([[scalar_inner(v, w) for w in vectors] for v in vectors])


def operator_distance(A: HOperator, B: HOperator, label_margin: int = 0) -> float:
    mask = A.interior_mask(label_margin)
    return operator_norm((A.matrix - B.matrix)[np.ix_(mask, mask)])
