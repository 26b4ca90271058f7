"""Truncated crossed products ``A ⋊ T^k`` in Fourier-mode form.

A :class:`CrossedElement` stores the Fourier coefficients ``f̂(m)`` of a
function ``f: T^k → A`` for modes ``|m|_∞ ≤ N``.  The convolution
``(f₁ ⋆ f₂)(g) = ∫ f₁(h) α_h(f₂(h⁻¹g)) dh`` becomes

    (f₁ ⋆ f₂)^(p) = Σ_m f̂₁(m) · [f̂₂(p)]_{p−m},

where ``[x]_χ`` is the grading-χ component.  The regular representation
acts on ``L²(T^k, A)`` truncated to modes ``|m| ≤ N`` and a label window
``|λ| ≤ K`` of the coefficient space.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .action_model import (
    ActionModel,
    GradedElement,
    box_labels,
    element_adjoint,
    element_from_dict,
    element_to_dict,
    model_from_dict,
    model_to_dict,
    spectral_component,
    trace,
)
from .core import operator_norm
from .representations import Window, left_mult_matrix

Mode = tuple[int, ...]


def _mode(m, k: int) -> Mode:
    m = tuple(int(x) for x in np.atleast_1d(m))
    if len(m) != k:
        raise ValueError(f"mode {m} must have {k} entries")
    return m


def _inside(m: Mode, N: int) -> bool:
    return all(abs(x) <= N for x in m)


@dataclass(frozen=True, eq=False)
class CrossedElement:
    """Finite Fourier series ``Σ_m f̂(m) e^{2πi m·g}`` with values in the model."""

    model: ActionModel
    N: int
    modes: dict = field(default_factory=dict)
    clipped: bool = False

    def __post_init__(self):
        k = self.model.k
        clean = {}
        for m, x in self.modes.items():
            m = _mode(m, k)
            if not _inside(m, self.N):
                raise ValueError(f"mode {m} outside truncation N={self.N}")
            if x.model.budget != self.model.budget:
                x = x.rebudget(self.model)
            if not x.is_zero():
                clean[m] = x
        object.__setattr__(self, "modes", dict(sorted(clean.items())))

    @property
    def k(self) -> int:
        return self.model.k

    @property
    def amp(self) -> int:
        for x in self.modes.values():
            return x.amp
        return 1

    def coefficient(self, m) -> GradedElement:
        m = _mode(m, self.k)
        return self.modes.get(m, GradedElement.zeros(self.model, self.amp))

    def mode_radius(self) -> int:
        return max((max(abs(x) for x in m) for m in self.modes), default=0)

    def grading_radius(self) -> int:
        return max((x.grading_radius() for x in self.modes.values()), default=0)

    def __add__(self, other: "CrossedElement") -> "CrossedElement":
        _check_pair(self, other)
        out = dict(self.modes)
        for m, x in other.modes.items():
            out[m] = out[m] + x if m in out else x
        return CrossedElement(self.model, self.N, out, self.clipped or other.clipped)

    def __sub__(self, other):
        return self + other * (-1)

    def __mul__(self, c) -> "CrossedElement":
        return CrossedElement(self.model, self.N, {m: x * c for m, x in self.modes.items()}, self.clipped)

    __rmul__ = __mul__

    def adjoint(self) -> "CrossedElement":
        return crossed_adjoint(self)

    def sup_norm(self) -> float:
        """``max_m ||f̂(m)||`` (C*-norms of the coefficients)."""
        return max((x.norm() for x in self.modes.values()), default=0.0)

    def distance(self, other: "CrossedElement") -> float:
        return (self - other).sup_norm()

    def with_N(self, N: int) -> "CrossedElement":
        keep = {m: x for m, x in self.modes.items() if _inside(m, N)}
        return CrossedElement(self.model, N, keep, self.clipped or len(keep) < len(self.modes))


def _check_pair(f1: CrossedElement, f2: CrossedElement):
    if f1.N != f2.N or f1.model.k != f2.model.k:
        raise ValueError("crossed elements must share model and N")


def zero(model: ActionModel, N: int) -> CrossedElement:
    return CrossedElement(model, N, {})


def unit_at_mode(model: ActionModel, N: int, m=None, amp: int = 1) -> CrossedElement:
    m = (0,) * model.k if m is None else _mode(m, model.k)
    return CrossedElement(model, N, {m: GradedElement.unit(model, amp)})


def constant_function(x: GradedElement, N: int) -> CrossedElement:
    """The function ``g ↦ x`` (only mode 0)."""
    return CrossedElement(x.model, N, {(0,) * x.model.k: x})


def fin_element(a: GradedElement, b: GradedElement, N: int) -> CrossedElement:
    """``g ↦ a α_g(b*)``; mode ``n`` carries ``a (b*)_n``."""
    m = a.model
    bs = element_adjoint(b)
    modes = {}
    clipped = False
    for chi in bs.gradings():
        if not _inside(chi, N):
            clipped = True
            continue
        modes[chi] = a * spectral_component(bs, chi)
    return CrossedElement(m, N, modes, clipped)


def convolve(f1: CrossedElement, f2: CrossedElement) -> CrossedElement:
    """``(f₁ ⋆ f₂)^(p) = Σ_m f̂₁(m) [f̂₂(p)]_{p−m}``."""
    _check_pair(f1, f2)
    out = {}
    for p, y in f2.modes.items():
        acc = None
        for m, x in f1.modes.items():
            chi = tuple(pi - mi for pi, mi in zip(p, m))
            comp = spectral_component(y, chi)
            if comp.is_zero():
                continue
            term = x * comp
            acc = term if acc is None else acc + term
        if acc is not None:
            out[p] = acc
    return CrossedElement(f1.model, f1.N, out, f1.clipped or f2.clipped)


def crossed_adjoint(f: CrossedElement) -> CrossedElement:
    """``f*(g) = α_g(f(g⁻¹)*)``: mode ``p`` is ``Σ_m [f̂(m)*]_{p−m}``."""
    out: dict = {}
    clipped = f.clipped
    for m, x in f.modes.items():
        xs = element_adjoint(x)
        for chi in xs.gradings():
            p = tuple(mi + ci for mi, ci in zip(m, chi))
            if not _inside(p, f.N):
                clipped = True
                continue
            comp = spectral_component(xs, chi)
            out[p] = out[p] + comp if p in out else comp
    return CrossedElement(f.model, f.N, out, clipped)


def dual_action(f: CrossedElement, n) -> CrossedElement:
    """``f̂'(m) = f̂(m − n)``: multiplication of ``f`` by the character ``n``."""
    n = _mode(n, f.k)
    out = {}
    clipped = f.clipped
    for m, x in f.modes.items():
        p = tuple(a + b for a, b in zip(m, n))
        if _inside(p, f.N):
            out[p] = x
        else:
            clipped = True
    return CrossedElement(f.model, f.N, out, clipped)


def heat_weights(modes, t: float) -> np.ndarray:
    modes = np.atleast_2d(np.asarray(modes, dtype=float))
    return np.exp(-4.0 * np.pi**2 * (modes**2).sum(axis=-1) * t)


def heat_smooth(f: CrossedElement, t: float) -> CrossedElement:
    """Left convolution with the heat kernel ``k_t`` (scalar, mode weights ``e^{-4π²|m|²t}``)."""
    if t <= 0:
        raise ValueError("t must be positive")
    out = {}
    for p, y in f.modes.items():
        acc = GradedElement.zeros(f.model, y.amp)
        for chi in y.gradings():
            m = tuple(pi - ci for pi, ci in zip(p, chi))
            acc = acc + float(heat_weights(m, t)[0]) * spectral_component(y, chi)
        out[p] = acc
    return CrossedElement(f.model, f.N, out, f.clipped)


def heat_smooth_element(a: GradedElement, t: float) -> GradedElement:
    """``a_t = Σ_n e^{-4π²|n|²t} a_n``."""
    acc = GradedElement.zeros(a.model, a.amp)
    for chi in a.gradings():
        acc = acc + float(heat_weights(chi, t)[0]) * spectral_component(a, chi)
    return acc


def crossed_trace(f: CrossedElement) -> complex:
    """``Tr_τ(C(f)) = τ(Σ_m f̂(m))``."""
    return complex(sum(trace(x) for x in f.modes.values()))


def thom_derivative(f: CrossedElement) -> CrossedElement:
    """Mode realization of ``f ↦ −α(i d/dx α⁻¹ f)`` (rank one only).

    ``α⁻¹f`` has frequency ``m − n`` on the grading-``n`` part of ``f̂(m)``,
    so the result has ``ĝ(m) = Σ_n 2π(m − n) [f̂(m)]_n``.
    """
    if f.k != 1:
        raise ValueError("defined for circle actions")
    out = {}
    for m, y in f.modes.items():
        acc = GradedElement.zeros(f.model, y.amp)
        for chi in y.gradings():
            acc = acc + 2 * np.pi * (m[0] - chi[0]) * spectral_component(y, chi)
        out[m] = acc
    return CrossedElement(f.model, f.N, out, f.clipped)


# ---------------------------------------------------------------------------
# Operators on L²(T^k, A)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Matrix on ``⊕_{|m|≤N} V_K ⊗ ℂ^n ⊗ E``; index order (mode, label, amp, basis, fiber)."""

    matrix: np.ndarray
    model: ActionModel
    N: int
    K: int
    amp: int = 1
    fiber: int = 1
    margin: int = 0
    dirac: object | None = None
    picture: str = "crossed"

    @property
    def k(self) -> int:
        return self.model.k

    @cached_property
    def window(self) -> Window:
        return Window(self.model, self.K, self.amp)

    @cached_property
    def modes(self) -> np.ndarray:
        return box_labels(self.N, self.k)

    @property
    def block_size(self) -> int:
        return self.window.dim * self.fiber

    @property
    def dim(self) -> int:
        return len(self.modes) * self.block_size

    def mode_index(self, m) -> int:
        m = _mode(m, self.k)
        side = 2 * self.N + 1
        idx = 0
        for x in m:
            idx = idx * side + (x + self.N)
        return idx

    def block(self, q, m) -> np.ndarray:
        s = self.block_size
        i, j = self.mode_index(q), self.mode_index(m)
        return self.matrix[i * s:(i + 1) * s, j * s:(j + 1) * s]

    @cached_property
    def coordinate_modes(self) -> np.ndarray:
        return np.repeat(self.modes, self.block_size, axis=0)

    @cached_property
    def coordinate_labels(self) -> np.ndarray:
        per_mode = np.repeat(self.window.labels, self.window.fiber * self.fiber, axis=0)
        return np.tile(per_mode, (len(self.modes), 1))

    @cached_property
    def coordinate_gradings(self) -> np.ndarray:
        return self.coordinate_labels @ self.model.G.T

    def interior_mask(self, mode_margin: int | None = None, label_margin: int = 0) -> np.ndarray:
        mm = self.margin if mode_margin is None else mode_margin
        ok = np.all(np.abs(self.coordinate_modes) <= self.N - mm, axis=-1)
        if label_margin:
            ok &= np.all(np.abs(self.coordinate_labels) <= self.K - label_margin, axis=-1)
        return ok

    def with_matrix(self, matrix: np.ndarray, **kw) -> "TruncatedOperator":
        params = dict(model=self.model, N=self.N, K=self.K, amp=self.amp, fiber=self.fiber, margin=self.margin, dirac=self.dirac, picture=self.picture)
        params.update(kw)
        return TruncatedOperator(matrix, **params)

    def frame(self) -> np.ndarray:
        """Columns ``e_m ⊗ 1 ⊗ e_i ⊗ e_f``: the trace ``Tr ⊗ τ`` is ``Σ ⟨f, X f⟩``."""
        unit = self.window.frame("unit")
        cols = []
        for mi in range(len(self.modes)):
            for c in unit.T:
                for e in range(self.fiber):
                    v = np.zeros((len(self.modes), self.window.dim, self.fiber), dtype=complex)
                    v[mi, :, e] = c
                    cols.append(v.reshape(-1))
        return np.stack(cols, axis=1)


def _empty_blocks(model: ActionModel, N: int, K: int, amp: int):
    win = Window(model, K, amp)
    nm = (2 * N + 1) ** model.k
    return win, np.zeros((nm, win.dim, nm, win.dim), dtype=complex)


def _finish(X: np.ndarray, fiber: int) -> np.ndarray:
    nm, D = X.shape[0], X.shape[1]
    M = X.reshape(nm * D, nm * D)
    if fiber > 1:
        M = np.kron(M, np.eye(fiber))
    return M


def regular_rep(f: CrossedElement, K: int | None = None, fiber: int = 1) -> TruncatedOperator:
    """``C(f)``: block (q, m) is left multiplication by ``[f̂(m)]_{m−q}``."""
    m_ = f.model
    K = f.N if K is None else K
    ops = TruncatedOperator(np.zeros((0, 0)), m_, f.N, K, f.amp, fiber)
    win, X = _empty_blocks(m_, f.N, K, f.amp)
    for m, y in f.modes.items():
        j = ops.mode_index(m)
        for chi in y.gradings():
            q = tuple(a - b for a, b in zip(m, chi))
            if not _inside(q, f.N):
                continue
            X[ops.mode_index(q), :, j, :] += left_mult_matrix(spectral_component(y, chi), K)
    margin = f.grading_radius()
    return TruncatedOperator(_finish(X, fiber), m_, f.N, K, f.amp, fiber, margin=margin)


def multiplier_rep(x: GradedElement, N: int, K: int, fiber: int = 1) -> TruncatedOperator:
    """The multiplier ``α⁻¹(x)``: block (q, m) is left multiplication by ``x_{m−q}``."""
    m_ = x.model
    ops = TruncatedOperator(np.zeros((0, 0)), m_, N, K, x.amp, fiber)
    win, X = _empty_blocks(m_, N, K, x.amp)
    comps = {chi: left_mult_matrix(spectral_component(x, chi), K) for chi in x.gradings()}
    for m in ops.modes:
        j = ops.mode_index(m)
        for chi, L in comps.items():
            q = tuple(int(a - b) for a, b in zip(m, chi))
            if _inside(q, N):
                X[ops.mode_index(q), :, j, :] += L
    return TruncatedOperator(_finish(X, fiber), m_, N, K, x.amp, fiber, margin=x.grading_radius())


def identity_operator(model: ActionModel, N: int, K: int, amp: int = 1, fiber: int = 1) -> TruncatedOperator:
    ops = TruncatedOperator(np.zeros((0, 0)), model, N, K, amp, fiber)
    return ops.with_matrix(np.eye(ops.dim, dtype=complex))


def rotation_phases(T: TruncatedOperator, g) -> np.ndarray:
    """Diagonal of ``R^α_g``: phase ``e^{2πi(m + χ(λ))·g}`` on ``e_m ⊗ W_λ``."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    total = T.coordinate_modes + T.coordinate_gradings
    return np.exp(2j * np.pi * (total @ g))


@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    max_deviation: float
    threshold: float


def invariance_check(T: TruncatedOperator, samples, mode_margin: int | None = None) -> InvarianceResult:
    """Compare ``R_g T R_g⁻¹`` with ``T`` on interior modes for each sample ``g``."""
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample point")
    mask = T.interior_mask(mode_margin)
    A = T.matrix[np.ix_(mask, mask)]
    scale = max(operator_norm(T.matrix), 1e-300)
    worst = 0.0
    for g in samples:
        ph = rotation_phases(T, g)[mask]
        conj = ph[:, None] * A * ph.conj()[None, :]
        worst = max(worst, operator_norm(conj - A))
    thr = 1e-9 * scale
    return InvarianceResult(worst <= thr, worst, thr)


def mode_shift_matrix(T: TruncatedOperator, n: int = 1) -> np.ndarray:
    """``S^n``: ``e_m ⊗ v ↦ e_{m+n} ⊗ v`` (truncated at the mode boundary)."""
    if T.k != 1:
        raise ValueError("mode shift is defined for circle actions")
    nm = 2 * T.N + 1
    shift = np.eye(nm, k=-n)
    return np.kron(shift, np.eye(T.block_size))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def crossed_to_dict(f: CrossedElement) -> dict:
    doc = model_to_dict(f.model)
    doc["N"] = f.N
    doc["clipped"] = f.clipped
    doc["modes"] = [{"mode": list(m), **element_to_dict(x)} for m, x in f.modes.items()]
    return doc


def crossed_from_dict(doc: dict) -> CrossedElement:
    model = model_from_dict(doc)
    modes = {tuple(e["mode"]): element_from_dict(model, e) for e in doc["modes"]}
    return CrossedElement(model, int(doc["N"]), modes, bool(doc.get("clipped", False)))


def block_norms_csv(T: TruncatedOperator) -> str:
    """CSV of operator norms of all nonzero blocks (columns q, m, norm)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "m", "norm"])
    for q in T.modes:
        for m in T.modes:
            nrm = operator_norm(T.block(q, m))
            if nrm > 0:
                w.writerow([" ".join(map(str, q)), " ".join(map(str, m)), repr(nrm)])
    return buf.getvalue()
