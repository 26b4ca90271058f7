"""Truncated Dirac operators and index pairings for circle and torus actions.

Two pictures are available:

* crossed: ``L²(T^k, A)`` truncated to modes ``|m| ≤ N`` and labels
  ``|λ| ≤ K``.  Mode ``m`` carries the weight ``2π m·c + ω`` and elements act
  as the multipliers ``α⁻¹(a)``.
* module: the window ``V_K`` of ``H(A)``; a vector of grading ``χ`` carries
  ``−2π χ·c + ω`` and elements act by left multiplication.

In both, ``[D, a] = Σ_i c_i ⊗ δ_i(a)`` with ``δ_i(a)_χ = −2π χ_i a_χ``.

Sign conventions (fixed once, recorded in every report): a zero eigenvalue
counts as nonnegative, so a crossing that lands on zero at ``t = 1`` is
counted and one that starts at zero at ``t = 0`` is not.  With these,
``sf(D, z^w) = +w`` on the rotation model.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.integrate
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .action_model import (
    ActionModel,
    GradedElement,
    element_adjoint,
    trace,
)
from .core import TOL_SYM, fix_phases, hermiticity_defect, kernel_dimension, operator_norm
from .crossed_product import (
    TruncatedOperator,
    constant_function,
    dual_action,
    fin_element,
    multiplier_rep,
    regular_rep,
    thom_derivative,
)
from .errors import (
    CrossingUnresolved,
    GapTooSmall,
    NotProjection,
    NotSelfAdjoint,
    NotScalar,
    PhaseUnwrapAmbiguous,
    Unstable,
    UnitarityViolated,
)
from .hilbert_module import HOperator
from .representations import Window, evaluate, left_mult_matrix

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

ENDPOINTS = "t=0 excluded, t=1 included; zero eigenvalues count as nonnegative"

Operator = TruncatedOperator | HOperator


# ---------------------------------------------------------------------------
# Dirac data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiracModel:
    """Clifford data on the fiber ``E`` (``ℂ`` for k=1, ``ℂ²`` for k=2)."""

    k: int
    omega: np.ndarray | None = None

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError("k must be 1 or 2")
        om = np.zeros((self.fiber, self.fiber), dtype=complex) if self.omega is None else np.atleast_2d(np.asarray(self.omega, dtype=complex))
        if om.shape != (self.fiber, self.fiber):
            raise ValueError(f"omega must be {self.fiber}x{self.fiber}")
        if np.abs(om - om.conj().T).max() > 1e-12:
            raise ValueError("omega must be self-adjoint")
        om = om.copy()
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @property
    def fiber(self) -> int:
        return 1 if self.k == 1 else 2

    @property
    def clifford(self) -> list[np.ndarray]:
        if self.k == 1:
            return [np.ones((1, 1), dtype=complex)]
        return [SIGMA1, SIGMA2]

    @property
    def grading(self) -> np.ndarray:
        return np.eye(1, dtype=complex) if self.k == 1 else SIGMA3

    def weight(self, v) -> np.ndarray:
        """``2π Σ v_i c_i + ω`` on ``E``."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = self.omega.copy()
        for vi, c in zip(v, self.clifford):
            out = out + 2 * np.pi * vi * c
        return out

    def with_omega(self, omega) -> "DiracModel":
        return DiracModel(self.k, omega)

    def to_dict(self) -> dict:
        return {"k": self.k, "fiber": self.fiber, "omega": _cplx(self.omega)}


def clifford_defect(dirac: DiracModel) -> float:
    cs = dirac.clifford
    worst = 0.0
    for i, a in enumerate(cs):
        for j, b in enumerate(cs):
            target = 2.0 * np.eye(dirac.fiber) * (i == j)
            worst = max(worst, float(np.abs(a @ b + b @ a - target).max()))
    return worst


def dirac_matrix(model: ActionModel, dirac: DiracModel, N: int, K: int = 4, amp: int = 1) -> TruncatedOperator:
    """Crossed-picture Dirac: block ``m`` is ``1 ⊗ (2π m·c + ω)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if dirac.k != model.k:
        raise ValueError("Dirac rank differs from the action rank")
    shell = TruncatedOperator(np.zeros((0, 0)), model, N, K, amp, dirac.fiber, dirac=dirac)
    nd = shell.window.dim
    blocks = [np.kron(np.eye(nd), dirac.weight(m)) for m in shell.modes]
    X = _block_diag(blocks)
    return shell.with_matrix(X)


def module_dirac(model: ActionModel, dirac: DiracModel, K: int, amp: int = 1) -> HOperator:
    """Module-picture Dirac on ``V_K``: grading ``χ`` carries ``−2π χ·c + ω``."""
    if dirac.k != model.k:
        raise ValueError("Dirac rank differs from the action rank")
    win = Window(model, K, amp)
    blocks = [dirac.weight(-g) for g in win.gradings for _ in range(win.fiber)]
    return HOperator(_block_diag(blocks), win, dirac.fiber, dirac=dirac)


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    f = blocks[0].shape[0]
    n = len(blocks)
    if f == 1:
        return np.diag(np.array([b[0, 0] for b in blocks]))
    X = np.zeros((n * f, n * f), dtype=complex)
    for i, b in enumerate(blocks):
        X[i * f:(i + 1) * f, i * f:(i + 1) * f] = b
    return X


def rebuild(D: Operator, scale: int = 1, amp: int | None = None, dirac: DiracModel | None = None) -> Operator:
    """Same Dirac on a truncation ``scale`` times larger (or another amplification)."""
    dirac = D.dirac if dirac is None else dirac
    amp = D.amp if amp is None else amp
    if isinstance(D, TruncatedOperator):
        return dirac_matrix(D.model, dirac, D.N * scale, D.K, amp)
    return module_dirac(D.model, dirac, D.K * scale, amp)


def picture(D: Operator) -> str:
    return "crossed" if isinstance(D, TruncatedOperator) else "module"


# ---------------------------------------------------------------------------
# Commutators
# ---------------------------------------------------------------------------


def derivation(a: GradedElement, i: int) -> GradedElement:
    """``δ_i(a)_χ = −2π χ_i a_χ``, so that ``[D, a] = Σ c_i ⊗ δ_i(a)``."""
    m = a.model
    w = -2 * np.pi * m.label_gradings[:, i].reshape((m.side,) * m.r)
    return GradedElement(m, a.coeffs * w[..., None, None])


def represent(D: Operator, a: GradedElement, fiber_matrix: np.ndarray | None = None) -> np.ndarray:
    """Matrix of ``a ⊗ F`` in the picture of ``D`` (``F`` on the fiber, default 1)."""
    if a.amp != D.amp:
        raise ValueError(f"element amplification {a.amp} does not match the operator ({D.amp})")
    F = np.eye(D.fiber) if fiber_matrix is None else fiber_matrix
    if isinstance(D, TruncatedOperator):
        X = multiplier_rep(a, D.N, D.K).matrix
    else:
        X = left_mult_matrix(a, D.K)
    return np.kron(X, F) if D.fiber > 1 or fiber_matrix is not None else X


def commutator_action(D: Operator, a: GradedElement) -> Operator:
    """``[D, a]`` with ``a`` acting in the picture of ``D``."""
    R = represent(D, a)
    return D.with_matrix(D.matrix @ R - R @ D.matrix)


def algebraic_commutator(D: Operator, a: GradedElement) -> np.ndarray:
    """``Σ_i c_i ⊗ δ_i(a)`` in the picture of ``D`` (equals :func:`commutator_action`)."""
    return sum(represent(D, derivation(a, i), c) for i, c in enumerate(D.dirac.clifford))


def _widen(a: GradedElement, factor: int = 2) -> GradedElement:
    need = factor * max(a.radius(), 1)
    return a if a.model.budget >= need else a.rebudget(need)


def check_unitary(u: GradedElement, tol: float = 1e-9) -> GradedElement:
    """Return ``u`` re-embedded with room for products; raise if not unitary."""
    u = _widen(u)
    one = GradedElement.unit(u.model, u.amp)
    us = element_adjoint(u)
    err = max(np.abs((us * u - one).coeffs).max(), np.abs((u * us - one).coeffs).max())
    if err > tol:
        raise UnitarityViolated(f"u*u − 1 has size {err:.3e}")
    return u


# ---------------------------------------------------------------------------
# Spectral flow
# ---------------------------------------------------------------------------


@dataclass
class FlowResult:
    value: float
    weight: str
    crossings: list[dict]
    ts: np.ndarray
    path: np.ndarray
    components: int
    endpoints: str = ENDPOINTS

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "weight": self.weight,
            "crossings": self.crossings,
            "components": self.components,
            "steps": int(len(self.ts) - 1),
            "endpoints": self.endpoints,
        }


def flow_perturbation(D: Operator, u: GradedElement) -> np.ndarray:
    """``u D u* − D = Σ_i c_i ⊗ u δ_i(u*)`` (exact in the algebra)."""
    us = element_adjoint(u)
    return sum(represent(D, u * derivation(us, i), c) for i, c in enumerate(D.dirac.clifford))


def _frame(D: Operator) -> np.ndarray:
    return D.frame() if isinstance(D, TruncatedOperator) else D.frame("module")


class _Component:
    """Spectral data of ``A + tB`` on one invariant block, cached per ``t``."""

    def __init__(self, A, B, F, tol_zero):
        for X in (A, B):
            if hermiticity_defect(X) > TOL_SYM:
                raise NotSelfAdjoint("flow endpoints must be self-adjoint")
        # symmetrize once so that A + tB is exactly Hermitian even under cancellation
        self.A, self.B, self.F = 0.5 * (A + A.conj().T), 0.5 * (B + B.conj().T), F
        self.tol_zero = tol_zero
        self.rate = operator_norm(B) if B.size else 0.0
        self.cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def eig(self, t: float):
        if t not in self.cache:
            w, V = np.linalg.eigh(self.A + t * self.B)
            self.cache[t] = (w, fix_phases(V))
        return self.cache[t]

    def weight(self, V: np.ndarray, mode: str) -> float:
        if mode == "counting":
            return float(V.shape[1])
        return float(np.sum(np.abs(self.F.conj().T @ V) ** 2))


def _crossings(comp: _Component, t0: float, t1: float, mode: str) -> tuple[float, list[dict], bool]:
    """Signed weight of crossings on ``[t0, t1]``; the flag reports a count mismatch."""
    e0, V0 = comp.eig(t0)
    e1, V1 = comp.eig(t1)
    tz = comp.tol_zero
    W = comp.rate * (t1 - t0) + 10 * tz
    neg0, neg1 = e0 < -tz, e1 < -tz
    near0, near1 = np.abs(e0) <= W, np.abs(e1) <= W
    total = 0.0
    events = []
    n_up = n_down = 0
    for direction, src, dst in ((+1, neg0 & near0, ~neg1 & near1), (-1, ~neg0 & near0, neg1 & near1)):
        if not src.any() or not dst.any():
            continue
        S = V0[:, src].conj().T @ V1[:, dst]
        _, s, Wh = np.linalg.svd(S)
        keep = s > 0.5
        if not keep.any():
            continue
        vecs = V1[:, dst] @ Wh[keep].conj().T
        w = comp.weight(vecs, mode)
        total += direction * w
        if direction > 0:
            n_up += int(keep.sum())
        else:
            n_down += int(keep.sum())
        events.append({"t0": t0, "t1": t1, "direction": direction, "multiplicity": int(keep.sum()), "weight": w})
    consistent = (int(neg0.sum()) - int(neg1.sum())) == n_up - n_down
    return total, events, consistent


def _ambiguous(e: np.ndarray, tol_zero: float, band: float) -> bool:
    a = np.abs(e)
    return bool(np.any((a > tol_zero) & (a < band)))


def _flow_component(comp: _Component, ts: list[float], mode: str, band: float, max_refine: int) -> tuple[float, list[dict]]:
    # move interior samples off the ambiguous band
    pts = [ts[0]]
    for j in range(1, len(ts) - 1):
        t = ts[j]
        if not _ambiguous(comp.eig(t)[0], comp.tol_zero, band):
            pts.append(t)
            continue
        lo, hi = ts[j - 1], ts[j + 1]
        for depth in range(1, max_refine + 1):
            sub = 4**depth
            cand = [lo + (hi - lo) * i / (2 * sub) for i in range(1, 2 * sub) if i != sub]
            good = [c for c in cand if not _ambiguous(comp.eig(c)[0], comp.tol_zero, band)]
            if len(good) >= 1:
                pts.extend(c for c in good if pts[-1] < c < hi)
                break
        else:
            raise CrossingUnresolved(f"eigenvalue within {band:g} of zero near t={t:.6f}")
    pts.append(ts[-1])
    pts = sorted(set(pts))
    for end in (pts[0], pts[-1]):
        if _ambiguous(comp.eig(end)[0], comp.tol_zero, band):
            raise CrossingUnresolved(f"eigenvalue within {band:g} of zero at endpoint t={end}")

    total = 0.0
    events: list[dict] = []
    stack = [(pts[i], pts[i + 1], 0) for i in range(len(pts) - 1)][::-1]
    while stack:
        a, b, depth = stack.pop()
        val, ev, ok = _crossings(comp, a, b, mode)
        if ok:
            total += val
            events.extend(ev)
            continue
        if depth >= max_refine:
            raise CrossingUnresolved(f"unmatched crossing on [{a:.6f}, {b:.6f}]")
        sub = [a + (b - a) * i / 4 for i in range(5)]
        stack.extend((sub[i], sub[i + 1], depth + 1) for i in range(3, -1, -1))
    return total, events


def spectral_flow(
    D: Operator,
    u: GradedElement,
    steps: int = 64,
    weight: str = "tau",
    tol_zero: float = 1e-9,
    band: float = 1e-6,
    max_refine: int = 3,
    path_size: int = 8,
) -> FlowResult:
    """Flow of ``D_t = D + t (u D u* − D)`` for ``t ∈ [0, 1]``.

    The perturbation ``u[D, u*]`` is formed in the algebra, so ``D_1`` is the
    exact conjugate on the truncation.  The path splits into blocks that
    ``D_t`` leaves invariant for every ``t``; each is sampled on its own grid.
    """
    if weight not in ("tau", "counting"):
        raise ValueError("weight must be 'tau' or 'counting'")
    if steps < 1:
        raise ValueError("steps must be positive")
    u = check_unitary(u)
    if u.amp != D.amp:
        D = rebuild(D, amp=u.amp)
    A = D.matrix
    B = flow_perturbation(D, u)
    F = _frame(D)
    pattern = csr_matrix((np.abs(A) + np.abs(B)) > 0)
    ncomp, labels = connected_components(pattern, directed=False)
    ts = [i / steps for i in range(steps + 1)]
    total = 0.0
    crossings: list[dict] = []
    snapshots = [[] for _ in ts]
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        idx = order[bounds[c]:bounds[c + 1]]
        Fc = F[idx]
        if weight == "tau" and not np.any(Fc):
            continue
        comp = _Component(A[np.ix_(idx, idx)], B[np.ix_(idx, idx)], Fc, tol_zero)
        val, ev = _flow_component(comp, ts, weight, band, max_refine)
        total += val
        crossings.extend(ev)
        for j, t in enumerate(ts):
            snapshots[j].append(comp.eig(t)[0])
    path = _eigen_path(snapshots, path_size)
    value = float(round(total, 9))
    crossings.sort(key=lambda e: (e["t1"], -e["direction"]))
    return FlowResult(value, weight, crossings, np.array(ts), path, ncomp)


def _eigen_path(snapshots: list[list[np.ndarray]], size: int) -> np.ndarray:
    rows = []
    for parts in snapshots:
        e = np.concatenate(parts) if parts else np.zeros(0)
        n = min(size, e.size)
        near = e[np.argsort(np.abs(e), kind="stable")[:n]]
        rows.append(np.sort(near))
    n = min((r.size for r in rows), default=0)
    return np.array([r[:n] if r.size == n else _center(r, n) for r in rows])


def _center(r: np.ndarray, n: int) -> np.ndarray:
    return np.sort(r[np.argsort(np.abs(r), kind="stable")[:n]])


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def _weighted_kernel(M: np.ndarray, frame: np.ndarray, tol: float) -> float:
    nullity = kernel_dimension(M, tol)
    if nullity == 0:
        return 0.0
    _, _, Vh = np.linalg.svd(M)
    K = Vh[-nullity:].conj().T
    return float(np.sum(np.abs(frame.conj().T @ K) ** 2))


def toeplitz_index(u: GradedElement, N: int | None = None, tol: float = 1e-8) -> int:
    """``dim_τ ker(PuP) − dim_τ ker(Pu*P)`` on nonnegative gradings (k=1).

    The domain is the gradings ``[0, N]``; the codomain keeps every
    nonnegative grading the image can reach, so only the cut at grading 0
    produces kernel.  Dimensions are τ-weighted through the module frame.
    """
    m = u.model
    if m.k != 1:
        raise ValueError("Toeplitz oracle is defined for circle actions")
    u = check_unitary(u)
    R = u.radius()
    N = max(4 * max(u.grading_radius(), 1), 8) if N is None else N
    win_in = Window(m, N, u.amp)
    win_out = Window(m, N + R, u.amp)
    frame_all = win_in.frame("module")
    dom = np.repeat((win_in.gradings[:, 0] >= 0) & (win_in.gradings[:, 0] <= N), win_in.fiber)
    cod = np.repeat(win_out.gradings[:, 0] >= 0, win_out.fiber)
    frame = frame_all[dom]
    vals = []
    for x in (u, element_adjoint(u)):
        L = left_mult_matrix(x, N, N + R)[np.ix_(cod, dom)]
        vals.append(_weighted_kernel(L, frame, tol))
    idx = vals[0] - vals[1]
    if abs(idx - round(idx)) > 1e-6:
        raise GapTooSmall(f"τ-weighted Toeplitz index {idx:.6f} is not an integer")
    return int(round(idx))


def _scalar_coefficients(u: GradedElement) -> np.ndarray:
    if u.amp != 1:
        raise NotScalar("winding is defined for unamplified unitaries")
    D = u.block_dim
    c = u.coeffs.reshape(-1, D, D)
    diag = np.einsum("sii->s", c) / D
    if np.abs(c - diag[:, None, None] * np.eye(D)).max() > 1e-12:
        raise NotScalar("coefficients are not multiples of the identity")
    return diag.reshape(u.coeffs.shape[:-2])


def winding_number(u: GradedElement) -> int:
    """Degree of ``g ↦ α_g(u)`` for a scalar unitary of a circle action.

    Mode arithmetic gives ``Σ_χ χ ||u_χ||²``; for commutative rank-one models
    the value is cross-checked by phase unwrapping on ``8(2M+1)`` points.
    """
    m = u.model
    if m.k != 1:
        raise ValueError("winding is defined for circle actions")
    c = _scalar_coefficients(u).reshape(-1)
    weights = np.abs(c) ** 2 * m.trace_weights.sum()
    wn = float(np.sum(m.label_gradings[:, 0] * weights))
    try:
        uu = check_unitary(u, tol=1e-6)
    except UnitarityViolated as exc:
        raise PhaseUnwrapAmbiguous(str(exc)) from exc
    if m.r == 1 and not m.has_cocycle and not m.has_twist and int(m.G[0, 0]) != 0:
        P = 8 * (2 * m.budget + 1)
        xs = np.arange(P + 1) / P
        vals = np.array([evaluate(uu, x)[0, 0] for x in xs])
        if np.abs(np.abs(vals) - 1).max() > 1e-6:
            raise PhaseUnwrapAmbiguous("|u| deviates from 1 on the grid")
        steps = np.angle(vals[1:] / vals[:-1])
        if np.abs(steps).max() > 0.9 * np.pi:
            raise PhaseUnwrapAmbiguous("grid too coarse for phase unwrapping")
        turns = steps.sum() / (2 * np.pi) / int(m.G[0, 0])
        if abs(turns - wn) > 1e-6:
            raise PhaseUnwrapAmbiguous(f"unwrapped degree {turns:.6f} differs from mode count {wn:.6f}")
    if abs(wn - round(wn)) > 1e-6:
        raise PhaseUnwrapAmbiguous(f"winding {wn:.6f} is not an integer")
    return int(round(wn))


def _is_scalar(u: GradedElement) -> bool:
    try:
        _scalar_coefficients(u)
        return True
    except NotScalar:
        return False


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _cplx(z):
    z = np.asarray(z)
    if z.ndim == 0:
        return [float(z.real), float(z.imag)]
    return [_cplx(x) for x in z]


@dataclass
class PairingReport:
    kind: str
    formula_value: complex
    flow_value: float
    oracle_value: int
    calibration_constant: complex
    raw_value: complex
    truncation: dict
    converged: bool
    oracle: str
    flow: FlowResult | None = None
    extra: dict = field(default_factory=dict)

    def formula_defect(self) -> float:
        return abs(self.formula_value - self.oracle_value)

    def consistent(self, tol: float = 1e-6) -> bool:
        """The report invariant: formula and flow both match the oracle."""
        return self.formula_defect() <= tol and abs(self.flow_value - self.oracle_value) == 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "formula_value": _cplx(self.formula_value),
            "flow_value": self.flow_value,
            "oracle_value": self.oracle_value,
            "oracle": self.oracle,
            "calibration_constant": _cplx(self.calibration_constant),
            "raw_value": _cplx(self.raw_value),
            "truncation": self.truncation,
            "converged": self.converged,
            "consistent": self.consistent(),
            "flow": self.flow.to_dict() if self.flow is not None else None,
            **self.extra,
        }


# ---------------------------------------------------------------------------
# Odd pairing
# ---------------------------------------------------------------------------


def _base_frame(D: Operator) -> np.ndarray:
    """Frame realizing ``τ ⊗ Tr`` on multipliers: ``1 ⊗ e_i`` (at mode 0 when crossed)."""
    if isinstance(D, TruncatedOperator):
        F = D.frame()
        mask = np.all(D.coordinate_modes == 0, axis=-1)
        cols = np.any(F[mask] != 0, axis=0)
        return F[:, cols]
    return D.frame("unit")


def odd_raw(D: Operator, u: GradedElement) -> complex:
    """``Tr_τ(u⁻¹[D, u])`` per unit mode, computed from the matrices of ``D`` and ``u``."""
    if u.amp != D.amp:
        D = rebuild(D, amp=u.amp)
    Ru = represent(D, u)
    Rus = represent(D, element_adjoint(u))
    F = _base_frame(D)
    XF = Rus @ (D.matrix @ (Ru @ F) - Ru @ (D.matrix @ F))
    return complex(np.sum(F.conj() * XF))


def odd_oracle(u: GradedElement) -> tuple[int, str]:
    """Oracle aligned with the flow sign: the winding, else minus the Toeplitz index."""
    if _is_scalar(u):
        return winding_number(u), "winding"
    return -toeplitz_index(u), "-toeplitz"


def odd_pairing(
    u: GradedElement,
    D: Operator,
    C1: complex | None = None,
    steps: int = 64,
    check_convergence: bool = True,
    cache: "CalibrationCache | None" = None,
) -> PairingReport:
    """Pairing of a unitary with the Dirac class of a circle action."""
    if D.dirac is None or D.dirac.k != 1:
        raise ValueError("odd pairing needs a k=1 Dirac operator")
    u = check_unitary(u)
    if u.amp != D.amp:
        D = rebuild(D, amp=u.amp)
    C1 = calibrate_constant(1, cache) if C1 is None else C1
    raw = odd_raw(D, u)
    flow = spectral_flow(D, u, steps)
    oracle, kind = odd_oracle(u)
    converged = True
    if check_convergence:
        D2 = rebuild(D, 2)
        raw2 = odd_raw(D2, u)
        flow2 = spectral_flow(D2, u, steps)
        converged = abs(raw2 - raw) <= 1e-8 * max(1.0, abs(raw)) and flow2.value == flow.value
    trunc = _truncation(D, steps)
    return PairingReport("odd", C1 * raw, flow.value, oracle, C1, raw, trunc, converged, kind, flow)


def _truncation(D: Operator, steps: int | None = None) -> dict:
    out = {"picture": picture(D), "K": D.K, "amp": D.amp, "endpoints": ENDPOINTS}
    if isinstance(D, TruncatedOperator):
        out.update(N=D.N, margin=D.margin)
    else:
        out.update(N=D.K, margin=0)
    if steps is not None:
        out["steps"] = steps
    return out


# ---------------------------------------------------------------------------
# Even pairing
# ---------------------------------------------------------------------------


def check_projection(p: GradedElement, tol: float = 1e-9) -> GradedElement:
    p = _widen(p)
    err = max(np.abs((p * p - p).coeffs).max(), np.abs((element_adjoint(p) - p).coeffs).max())
    if err > tol:
        raise NotProjection(f"p² − p or p* − p has size {err:.3e}")
    return p


def _fiber_constant(model: ActionModel, F: np.ndarray, n: int) -> GradedElement:
    return GradedElement.monomial(model, (0,) * model.r, np.kron(F, np.eye(n * model.d)), amp=2 * n)


def supertrace_term(p: GradedElement, dirac: DiracModel) -> complex:
    """``τ ⊗ tr_E(γ p [D, p]²)`` computed in ``M_2 ⊗ M_n(A)``."""
    if dirac.k != 2:
        raise ValueError("even pairing needs k=2")
    if p.is_zero():
        return 0.0j
    R = max(p.radius(), 1)
    m = p.model.with_budget(max(p.model.budget, 3 * R))
    p = p.rebudget(m)
    n = p.amp
    P = p.amplify(2)
    comm = sum(_fiber_constant(m, c, n) * derivation(P, i) for i, c in enumerate(dirac.clifford))
    Om = _fiber_constant(m, dirac.omega, n)
    comm = comm + (Om * P - P * Om)
    G = _fiber_constant(m, dirac.grading, n)
    return trace(G * (P * (comm * comm)))


def _dirac_of(D) -> DiracModel:
    if isinstance(D, DiracModel):
        return D
    if getattr(D, "dirac", None) is None:
        raise ValueError("operator carries no Dirac data")
    return D.dirac


def brute_force_even_index(
    p: GradedElement,
    D,
    N: int = 6,
    tol: float = 1e-4,
    check_stability: bool = True,
) -> int:
    """Index of ``p D⁺ p`` between the chiral halves of ``p(V_N ⊗ ℂ^n)``.

    ``Q`` spans the eigenvectors of the compression ``P_N p P_N`` above 1/2.
    Small singular vectors of ``Q* D⁺ Q`` count only when localized in the
    inner half of the window; vectors on the truncation edge are artifacts
    of the cut.  The value must agree at ``N`` and ``N + 2``.
    """
    dirac = _dirac_of(D)
    if dirac.k != 2 or p.model.k != 2:
        raise ValueError("even index needs a k=2 action and Dirac")
    value = _even_index_at(p, dirac, N, tol)
    if check_stability:
        other = _even_index_at(p, dirac, N + 2, tol)
        if other != value:
            raise Unstable(f"index {value} at N={N} but {other} at N={N + 2}")
    return value


def _even_index_at(p: GradedElement, dirac: DiracModel, N: int, tol: float) -> int:
    if p.is_zero():
        return 0
    win = Window(p.model, N, p.amp)
    P = left_mult_matrix(p, N)
    P = 0.5 * (P + P.conj().T)
    w, V = np.linalg.eigh(P)
    Q = V[:, w > 0.5]
    if Q.shape[1] == 0:
        return 0
    g = np.repeat(win.gradings, win.fiber, axis=0).astype(float)
    dplus = -2 * np.pi * (g[:, 0] + 1j * g[:, 1])
    T = Q.conj().T @ (dplus[:, None] * Q) + dirac.omega[1, 0] * np.eye(Q.shape[1])
    nullity = kernel_dimension(T, tol)
    if nullity == 0:
        return 0
    U, s, Vh = np.linalg.svd(T)
    inner = np.repeat(np.all(np.abs(win.labels) <= N // 2, axis=-1), win.fiber)
    right = Q @ Vh[-nullity:].conj().T
    left = Q @ U[:, -nullity:]
    n_right = int(np.sum(np.sum(np.abs(right[inner]) ** 2, axis=0) > 0.5))
    n_left = int(np.sum(np.sum(np.abs(left[inner]) ** 2, axis=0) > 0.5))
    return n_right - n_left


def even_pairing(
    p: GradedElement,
    q: GradedElement,
    D,
    C2: complex | None = None,
    N_list=(6, 8, 10),
    cache: "CalibrationCache | None" = None,
) -> PairingReport:
    """``C₂ (τ(γ p[D,p]²) − τ(γ q[D,q]²))`` against the compressed chiral index.

    ``flow_value`` carries the index at the finest truncation and
    ``oracle_value`` the value at the coarsest; ``converged`` records that
    every truncation in ``N_list`` agrees.
    """
    dirac = _dirac_of(D)
    p = check_projection(p)
    q = check_projection(q)
    C2 = calibrate_constant(2, cache) if C2 is None else C2
    raw = supertrace_term(p, dirac) - supertrace_term(q, dirac)
    values = [_even_index_at(p, dirac, N, 1e-4) - _even_index_at(q, dirac, N, 1e-4) for N in N_list]
    trunc = {"picture": "algebra", "N_list": list(N_list), "indices": values, "normalization": "[p] - [q] as given"}
    return PairingReport(
        "even",
        C2 * raw,
        float(values[-1]),
        int(values[0]),
        C2,
        raw,
        trunc,
        len(set(values)) == 1,
        "brute_force_even_index",
    )


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


class CalibrationCache:
    """Write-once store of calibration constants, optionally backed by a JSON file."""

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._values: dict[int, complex] = {}
        self.path = Path(path) if path is not None else None
        if self.path is not None and self.path.exists():
            doc = json.loads(self.path.read_text())
            self._values = {int(k): complex(*v) for k, v in doc.items()}

    def get(self, k: int) -> complex | None:
        return self._values.get(k)

    def get_or_compute(self, k: int, compute) -> complex:
        with self._lock:
            if k not in self._values:
                self._values[k] = complex(compute())
                if self.path is not None:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    doc = {str(j): _cplx(v) for j, v in sorted(self._values.items())}
                    self.path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            return self._values[k]

    def set(self, k: int, value: complex) -> None:
        with self._lock:
            if k in self._values and self._values[k] != value:
                raise ValueError(f"calibration constant for k={k} is already fixed")
            self._values[k] = complex(value)


DEFAULT_CACHE = CalibrationCache()


def _calibrate_odd() -> complex:
    from .models import rotation_circle

    model = rotation_circle(8)
    D = module_dirac(model, DiracModel(1), 8)
    z = model.generator("z")
    consts = []
    for w in (1, 2):
        u = z.power(w)
        flow = spectral_flow(D, u, 64).value
        oracle, _ = odd_oracle(u)
        if flow != oracle:
            raise CrossingUnresolved(f"flow {flow} disagrees with oracle {oracle} on the calibration example")
        consts.append(oracle / odd_raw(D, u))
    if abs(consts[0] - consts[1]) > 1e-8 * abs(consts[0]):
        raise ValueError(f"calibration is not reproducible: {consts[0]} vs {consts[1]}")
    return consts[0]


def _calibrate_even() -> complex:
    from .models import bott_projection, constant_projection, rotation_torus

    model = rotation_torus(40)
    dirac = DiracModel(2)
    q = constant_projection(model, (1, 0))
    consts = []
    for shift in ((0.0, 0.0), (0.25, 0.1)):
        p = bott_projection(model, shift=shift)
        oracle = brute_force_even_index(p, dirac, 6) - brute_force_even_index(q, dirac, 6)
        raw = supertrace_term(p, dirac) - supertrace_term(q, dirac)
        consts.append(oracle / raw)
    if abs(consts[0] - consts[1]) > 1e-6 * abs(consts[0]):
        raise ValueError(f"calibration is not reproducible: {consts[0]} vs {consts[1]}")
    return consts[0]


def calibrate_constant(k: int, cache: CalibrationCache | None = None) -> complex:
    """``C_k = oracle / raw`` on the reference example, cross-checked on a second one.

    k=1: ``u = z`` on the rotation circle (checked on ``z²``); k=2: the Bott
    projection on the rotation torus (checked on a translate).
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    cache = DEFAULT_CACHE if cache is None else cache
    return cache.get_or_compute(k, _calibrate_odd if k == 1 else _calibrate_even)


# ---------------------------------------------------------------------------
# Summability
# ---------------------------------------------------------------------------


@dataclass
class SummabilityProfile:
    p: float
    N_list: list[int]
    partial_sums: list[complex]
    increments: list[float]
    tail: float
    relative_tail: float
    cauchy: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "N_list": self.N_list,
            "partial_sums": [_cplx(s) for s in self.partial_sums],
            "increments": self.increments,
            "tail": self.tail,
            "relative_tail": self.relative_tail,
            "cauchy": self.cauchy,
        }


def _mode_weights(dirac: DiracModel, p: float, N: int) -> np.ndarray:
    """``tr_E (1 + D_m²)^{-p/2}`` on the cube ``|m| ≤ N``, shape ``(2N+1,)^k``."""
    ax = np.arange(-N, N + 1)
    grids = np.meshgrid(*([ax] * dirac.k), indexing="ij")
    mats = np.broadcast_to(dirac.omega, grids[0].shape + dirac.omega.shape).copy()
    for g, c in zip(grids, dirac.clifford):
        mats = mats + 2 * np.pi * g[..., None, None] * c
    ev = np.linalg.eigvalsh(mats)
    return np.sum((1 + ev**2) ** (-p / 2), axis=-1)


def _tail_estimate(dirac: DiracModel, p: float, N: int) -> float:
    """Integral estimate of the mode sum outside the cube of half-width ``N``."""
    if p <= dirac.k:
        return math.inf
    if dirac.k == 1:
        shift = float(dirac.omega[0, 0].real)
        f = lambda x: (1 + (2 * np.pi * x + shift) ** 2) ** (-p / 2)
        up = scipy.integrate.quad(f, N + 0.5, np.inf)[0]
        down = scipy.integrate.quad(lambda x: f(-x), N + 0.5, np.inf)[0]
        return up + down
    f = lambda r: 2 * 2 * np.pi * r * (1 + 4 * np.pi**2 * r**2) ** (-p / 2)
    return scipy.integrate.quad(f, N + 0.5, np.inf)[0]


def summability_profile(a: GradedElement, D, p: float, N_list=(16, 32, 64, 128, 256)) -> SummabilityProfile:
    """Partial sums of ``Tr_τ(a (1 + D²)^{-p/2})`` over the mode cubes ``|m| ≤ N``.

    The multiplier ``a`` contributes ``τ(a)`` in every mode, so each partial
    sum is ``τ(a) Σ_m tr_E (1 + D_m²)^{-p/2}``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    dirac = _dirac_of(D)
    N_list = sorted(int(n) for n in N_list)
    ta = trace(a)
    full = _mode_weights(dirac, p, N_list[-1])
    c = N_list[-1]
    sums = []
    for N in N_list:
        box = tuple(slice(c - N, c + N + 1) for _ in range(dirac.k))
        sums.append(ta * float(full[box].sum()))
    incs = [abs(sums[i + 1] - sums[i]) for i in range(len(sums) - 1)]
    tail = abs(ta) * _tail_estimate(dirac, p, N_list[-1])
    total = abs(sums[-1]) + tail
    rel = tail / total if total > 0 else 0.0
    decreasing = all(incs[i + 1] < incs[i] for i in range(len(incs) - 1)) if len(incs) > 1 else True
    cauchy = bool(math.isfinite(tail) and decreasing)
    return SummabilityProfile(p, N_list, sums, incs, float(tail), float(rel), cauchy)


# ---------------------------------------------------------------------------
# Dual-PV consistency
# ---------------------------------------------------------------------------


@dataclass
class PVReport:
    winding: int
    pairing: PairingReport
    operator_identity_defect: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "winding": self.winding,
            "pairing": self.pairing.to_dict(),
            "operator_identity_defect": self.operator_identity_defect,
            "consistent": self.consistent,
        }


def thom_identity_defect(D: TruncatedOperator, f) -> float:
    """Frobenius bound on ``|| D C(f) − C(−α(i d/dx α⁻¹ f)) ||`` over interior modes."""
    C = regular_rep(f, K=D.K).matrix
    G = regular_rep(thom_derivative(f), K=D.K).matrix
    mask = D.interior_mask(mode_margin=f.grading_radius() + 1)
    d = np.diag(D.matrix)
    DC = d[:, None] * C if np.count_nonzero(D.matrix - np.diag(d)) == 0 else D.matrix @ C
    return float(np.linalg.norm((DC - G)[np.ix_(mask, mask)]))


def pv_pairing_check(u: GradedElement, N: int = 64, K: int | None = None, steps: int = 64, cache=None) -> PVReport:
    """The pairing with the circle Dirac equals the winding (the connecting-map value)."""
    if u.model.k != 1:
        raise ValueError("defined for circle actions")
    wn = winding_number(u)
    K = max(2 * u.radius(), 2) if K is None else K
    D = dirac_matrix(u.model, DiracModel(1), N, K)
    rep = odd_pairing(u, D, steps=steps, check_convergence=False, cache=cache)
    uu = _widen(u)
    fs = [fin_element(uu, uu, N), dual_action(constant_function(uu, N), 1)]
    defect = max(thom_identity_defect(D, f) for f in fs)
    ok = rep.flow_value == wn and rep.oracle_value == wn and abs(rep.flow_value) == abs(wn) and defect <= 1e-10
    return PVReport(wn, rep, defect, bool(ok))
