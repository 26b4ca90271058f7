"""Constructors for the example algebras and their torus actions."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .action_model import (
    ActionModel,
    Generator,
    GradedElement,
    apply_action,
    box_labels,
    element_adjoint,
    trace,
)
from .errors import CStarIndexError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_SCALAR_BASIS = np.ones((1, 1, 1), dtype=complex)


class ModelInvariantError(CStarIndexError):
    pass


def parse_theta(theta) -> Fraction | float:
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, int):
        return Fraction(theta)
    if isinstance(theta, str):
        t = theta.strip().lower()
        if t in ("golden", "phi"):
            return GOLDEN
        if "/" in t or t.lstrip("-").isdigit():
            return Fraction(t)
        return float(t)
    return float(theta)


def rotation_circle(M: int = 8) -> ActionModel:
    """``C(T)`` truncated to Fourier degree ``M`` with the rotation action."""
    if M < 1:
        raise ValueError("M must be at least 1")
    return validated(
        ActionModel(
            name="rotation_circle",
            grading_matrix=((1,),),
            budget=M,
            cocycle=((0,),),
            coefficient_basis=_SCALAR_BASIS,
            trace_weights=[1.0],
            generators=(Generator("z", (1,), np.eye(1)),),
            relations="z unitary, commutative",
        )
    )


def double_rotation(M: int = 8) -> ActionModel:
    """``C(T)`` where the circle acts at double speed (only even characters occur)."""
    return validated(
        ActionModel(
            name="double_rotation",
            grading_matrix=((2,),),
            budget=M,
            cocycle=((0,),),
            coefficient_basis=_SCALAR_BASIS,
            trace_weights=[1.0],
            generators=(Generator("z", (1,), np.eye(1)),),
            relations="z unitary, commutative; z has grading 2",
        )
    )


def trivial_action(base: ActionModel | None = None, M: int = 8) -> ActionModel:
    """The same algebra as ``base`` with every element fixed by the action."""
    base = rotation_circle(M) if base is None else base
    if base.has_cocycle:
        raise ValueError("trivial_action expects a commutative base")
    return validated(
        ActionModel(
            name="trivial_action",
            grading_matrix=tuple((0,) * base.r for _ in range(base.k)),
            budget=base.budget,
            cocycle=base.cocycle,
            coefficient_basis=base.coefficient_basis,
            trace_weights=base.trace_weights,
            twist=base.twist,
            generators=base.generators,
            relations=base.relations + "; all gradings 0",
        )
    )


def nc_torus(theta=Fraction(1, 3), M: int = 4) -> ActionModel:
    """Rotation algebra ``U1 U2 = e^{2πiθ} U2 U1`` with the gauge action of ``T²``.

    ``W_{(m,n)} = U1^m U2^n`` and ``σ((m,n),(m',n')) = e^{-2πiθ n m'}``.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    th = parse_theta(theta)
    name = "rotation_torus" if th == 0 else f"nc_torus[{th}]"
    return validated(
        ActionModel(
            name=name,
            grading_matrix=((1, 0), (0, 1)),
            budget=M,
            cocycle=((0, 0), (-th, 0)),
            coefficient_basis=_SCALAR_BASIS,
            trace_weights=[1.0],
            generators=(Generator("U1", (1, 0), np.eye(1)), Generator("U2", (0, 1), np.eye(1))),
            relations=f"U1 U2 = exp(2 pi i {th}) U2 U1",
        )
    )


def rotation_torus(M: int = 4) -> ActionModel:
    """Commutative ``C(T²)`` with the translation action."""
    return nc_torus(Fraction(0), M)


def restrict_to_circle(model: ActionModel, direction=(1, 0)) -> ActionModel:
    """Restrict a ``T²``-action to the circle ``z ↦ (z^a, z^b)``.

    The character ``(m, n)`` becomes ``a·m + b·n``.  No division by
    ``gcd(a, b)`` is performed, so a non-primitive direction yields a
    circle acting with multiplicity.
    """
    if model.k != 2:
        raise ValueError("restriction needs a rank-2 action")
    a, b = (int(x) for x in direction)
    if a == 0 and b == 0:
        raise ValueError("direction must be nonzero")
    G = np.array([[a, b]]) @ model.G
    return validated(
        ActionModel(
            name=f"{model.name}|({a},{b})",
            grading_matrix=tuple(tuple(int(x) for x in row) for row in G),
            budget=model.budget,
            cocycle=model.cocycle,
            coefficient_basis=model.coefficient_basis,
            trace_weights=model.trace_weights,
            twist=model.twist,
            generators=model.generators,
            relations=model.relations + f"; circle direction ({a},{b})",
        )
    )


def orthonormal_coefficient_basis(spanning, weights) -> np.ndarray:
    """Gram-Schmidt of a spanning set of ``B`` for ``⟨x, y⟩ = tr_w(x* y)``."""
    spanning = np.asarray(spanning, dtype=complex)
    w = np.asarray(weights, dtype=float)
    n = len(spanning)
    gram = np.einsum("a,iba,jba->ij", w, spanning.conj(), spanning)
    evals, evecs = np.linalg.eigh(gram)
    keep = evals > 1e-12 * evals.max()
    T = evecs[:, keep] / np.sqrt(evals[keep])
    basis = np.einsum("ik,iab->kab", T, spanning)
    return basis[: n]


def z_crossed_product(B=None, V=None, M: int = 6) -> ActionModel:
    """Truncated ``B ⋊_β ℤ`` with ``β = Ad V`` and the dual circle action.

    Default: ``B`` the diagonal algebra ``ℂ²`` and ``V`` the swap.
    ``B`` is given by a spanning list of ``d × d`` matrices.
    """
    if B is None:
        B = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    if V is None:
        V = np.array([[0.0, 1.0], [1.0, 0.0]])
    B = np.asarray(B, dtype=complex)
    V = np.asarray(V, dtype=complex)
    d = V.shape[0]
    if not np.allclose(V.conj().T @ V, np.eye(d), atol=1e-12):
        raise ValueError("V must be unitary")
    weights = np.full(d, 1.0 / d)
    basis = orthonormal_coefficient_basis(B, weights)
    gens = [Generator("s", (1,), np.eye(d))]
    for i, b in enumerate(B):
        gens.append(Generator(f"b{i}", (0,), b))
    model = ActionModel(
        name="z_crossed_product",
        grading_matrix=((1,),),
        budget=M,
        cocycle=((0,),),
        coefficient_basis=basis,
        trace_weights=weights,
        twist=V[None],
        generators=tuple(gens),
        relations="s b s* = V b V*",
    )
    _check_coefficient_algebra(model)
    return validated(model)


# ---------------------------------------------------------------------------
# Bott projection
# ---------------------------------------------------------------------------

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bott_projection(model: ActionModel | None = None, mass: float = 1.0, shift=(0.0, 0.0), cutoff: int = 40, grid: int = 256) -> GradedElement:
    """A rank-one ``2 × 2`` projection over ``C(T²)`` with nonzero Chern number.

    The projection ``½(1 + d̂·σ)`` with ``d = (sin x, sin y, m + cos x + cos y)``
    is sampled on a grid and Fourier-truncated at ``|λ|_∞ ≤ cutoff``.  For
    ``0 < |m| < 2`` its class is a generator; ``|m| > 2`` gives a trivial class.
    The coefficients decay geometrically, so the truncation is a projection
    to near machine precision for the default cutoff.  ``shift`` translates
    the torus, ``p ↦ α_shift(p)``.
    """
    model = rotation_torus(cutoff) if model is None else model
    if model.r != 2 or model.has_cocycle or model.d != 1:
        raise ValueError("Bott projection lives over the commutative 2-torus model")
    if cutoff > model.budget:
        model = model.with_budget(cutoff)
    x = np.arange(grid) / grid
    X, Y = np.meshgrid(x, x, indexing="ij")
    dvec = np.stack([np.sin(2 * np.pi * X), np.sin(2 * np.pi * Y), mass + np.cos(2 * np.pi * X) + np.cos(2 * np.pi * Y)])
    norm = np.sqrt((dvec**2).sum(axis=0))
    if norm.min() < 1e-9:
        raise ValueError("mass parameter closes the gap")
    dhat = dvec / norm
    P = 0.5 * (np.eye(2)[:, :, None, None] + np.einsum("iab,ixy->abxy", np.array(_PAULI), dhat))
    coef = np.fft.fft2(P, axes=(2, 3)) / grid**2
    labs = box_labels(cutoff, 2)
    c = np.zeros((model.side, model.side, 2, 2), dtype=complex)
    vals = coef[:, :, labs[:, 0] % grid, labs[:, 1] % grid].transpose(2, 0, 1)
    c[tuple((labs + model.budget).T)] = vals
    p = GradedElement(model, c)
    # symmetrize away round-off so that p = p* exactly
    p = 0.5 * (p + element_adjoint(p))
    if any(shift):
        p = apply_action(p, np.asarray(shift, dtype=float))
    return p


def constant_projection(model: ActionModel, diag=(1, 0)) -> GradedElement:
    """Constant diagonal projection in ``M_n`` over the model."""
    return GradedElement.monomial(model, (0,) * model.r, np.diag(np.asarray(diag, dtype=complex)), amp=len(diag))


# ---------------------------------------------------------------------------
# Validation and presets
# ---------------------------------------------------------------------------


def _check_coefficient_algebra(model: ActionModel) -> None:
    E = model.coefficient_basis
    w = model.trace_weights
    if np.any(w <= 0) or not math.isclose(float(w.sum()), 1.0, rel_tol=1e-12):
        raise ModelInvariantError("trace weights must be positive and sum to one")
    gram = np.einsum("a,iba,jba->ij", w, E.conj(), E)
    if not np.allclose(gram, np.eye(len(E)), atol=1e-10):
        raise ModelInvariantError("coefficient basis is not orthonormal")
    prods = np.einsum("iab,jbc->ijac", E, E)
    recon = model.from_coefficient_coords(model.coefficient_coords(prods))
    if not np.allclose(recon, prods, atol=1e-10):
        raise ModelInvariantError("coefficient span is not closed under multiplication")
    adj = E.conj().transpose(0, 2, 1)
    if not np.allclose(model.from_coefficient_coords(model.coefficient_coords(adj)), adj, atol=1e-10):
        raise ModelInvariantError("coefficient span is not closed under adjoints")
    if model.twist is not None:
        for V in model.twist:
            moved = np.einsum("ab,jbc,dc->jad", V, E, V.conj())
            if not np.allclose(model.from_coefficient_coords(model.coefficient_coords(moved)), moved, atol=1e-10):
                raise ModelInvariantError("twist does not preserve the coefficient algebra")
    tr_ab = np.einsum("a,ijaa->ij", w, prods)
    if not np.allclose(tr_ab, tr_ab.T, atol=1e-10):
        raise ModelInvariantError("trace is not tracial on the coefficient algebra")


def validate_model(model: ActionModel, seed: int = 0) -> None:
    """Run the model invariant suite on a small-budget copy; raises on failure."""
    _check_coefficient_algebra(model)
    small = model.with_budget(min(model.budget, 2))
    rng = np.random.default_rng(seed)
    labs = box_labels(1, small.r)
    monos = [GradedElement.monomial(small, lam, e) for lam in labs for e in small.coefficient_basis]
    gram = np.array([[trace(element_adjoint(x) * y) for y in monos] for x in monos])
    if not np.allclose(gram, np.eye(len(monos)), atol=1e-10):
        raise ModelInvariantError("τ(x* y) is not the identity Gram matrix on monomials")
    for x in monos:
        for y in monos:
            xy = x * y
            if abs(trace(xy) - trace(y * x)) > 1e-10:
                raise ModelInvariantError("τ is not tracial on monomials")
            supp = xy.support()
            if supp.size:
                g = supp @ small.G.T
                expect = (np.atleast_1d(x.gradings()[0]) + np.atleast_1d(y.gradings()[0]))
                if not np.all(g == expect):
                    raise ModelInvariantError("grading is not multiplicative")
    a = _random_small(small, rng)
    b = _random_small(small, rng)
    g = rng.random(small.k)
    lhs = apply_action(a * b, g)
    rhs = apply_action(a, g) * apply_action(b, g)
    if not lhs.allclose(rhs, 1e-10):
        raise ModelInvariantError("action is not multiplicative")
    if not apply_action(element_adjoint(a), g).allclose(element_adjoint(apply_action(a, g)), 1e-10):
        raise ModelInvariantError("action does not commute with the adjoint")
    if abs(trace(apply_action(a, g)) - trace(a)) > 1e-10:
        raise ModelInvariantError("trace is not invariant")
    if not element_adjoint(element_adjoint(a)).allclose(a, 1e-12):
        raise ModelInvariantError("adjoint is not an involution")
    if not element_adjoint(a * b).allclose(element_adjoint(b) * element_adjoint(a), 1e-10):
        raise ModelInvariantError("adjoint is not anti-multiplicative")


def _random_small(model: ActionModel, rng) -> GradedElement:
    out = model.zero()
    for lam in box_labels(1, model.r):
        c = rng.standard_normal(model.nB) + 1j * rng.standard_normal(model.nB)
        out = out + GradedElement.monomial(model, lam, model.from_coefficient_coords(c))
    return out


def validated(model: ActionModel) -> ActionModel:
    validate_model(model)
    return model


PRESETS = {
    "rotation_circle": lambda M: rotation_circle(M),
    "double_rotation": lambda M: double_rotation(M),
    "trivial_action": lambda M: trivial_action(M=M),
    "nc_torus": lambda M: nc_torus(Fraction(1, 3), M),
    "nc_torus_golden": lambda M: nc_torus(GOLDEN, M),
    "rotation_torus": lambda M: rotation_torus(M),
    "z_crossed_product": lambda M: z_crossed_product(M=M),
    "nc_torus_first_circle": lambda M: restrict_to_circle(nc_torus(Fraction(1, 3), M), (1, 0)),
}


def preset(spec: str, M: int) -> ActionModel:
    """Build a named preset; ``nc_torus:<theta>`` selects the parameter."""
    name, _, arg = spec.partition(":")
    if name == "nc_torus" and arg:
        return nc_torus(parse_theta(arg), M)
    if name == "nc_torus_first_circle" and arg:
        return restrict_to_circle(nc_torus(parse_theta(arg), M), (1, 0))
    if name not in PRESETS:
        raise KeyError(f"unknown model preset {spec!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](M)
