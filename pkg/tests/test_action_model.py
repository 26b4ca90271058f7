import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import (
    GradedElement,
    apply_action,
    element_adjoint,
    element_from_dict,
    element_to_dict,
    inner_product_fixed,
    model_from_dict,
    model_to_dict,
    saturation_check,
    spectral_component,
    trace,
)
from cstarindex.errors import BudgetOverflow
from cstarindex.models import nc_torus, rotation_circle, rotation_torus, z_crossed_product

from helpers import random_element

MODELS = {
    "rotation_circle": lambda: rotation_circle(6),
    "nc_torus": lambda: nc_torus(M=4),
    "nc_torus_float": lambda: nc_torus(math.sqrt(2) - 1, M=4),
    "z_crossed_product": lambda: z_crossed_product(M=4),
    "rotation_torus": lambda: rotation_torus(4),
}
seeds = st.integers(0, 2**32 - 1)
names = st.sampled_from(sorted(MODELS))


def naive_product(a, b):
    """Term-by-term ``(x W_λ)(y W_μ) = x V^λ y V^{-λ} σ(λ, μ) W_{λ+μ}`` over dicts."""
    m = a.model
    theta = np.array([[float(t) for t in row] for row in m.cocycle])
    out = {}
    for lam in a.support():
        x = a.coefficient(lam)
        V = m.twist_power(lam)
        for mu in b.support():
            y = b.coefficient(mu)
            s = cmath.exp(2j * math.pi * float(lam @ theta @ mu))
            key = tuple(int(v) for v in lam + mu)
            out[key] = out.get(key, 0) + s * x @ V @ y @ V.conj().T
    return out


@settings(max_examples=25, deadline=None)
@given(names, seeds)
def test_product_matches_naive_oracle(name, seed):
    m = MODELS[name]()
    rng = np.random.default_rng(seed)
    a, b = random_element(m, 2, rng), random_element(m, 2, rng)
    ab = a * b
    ref = naive_product(a, b)
    for lam, c in ref.items():
        assert np.allclose(ab.coefficient(lam), c, atol=1e-10)
    assert len(ab.support()) <= len(ref)


@settings(max_examples=25, deadline=None)
@given(names, seeds)
def test_associative_and_star(name, seed):
    m = MODELS[name]()
    rng = np.random.default_rng(seed)
    a, b, c = (random_element(m, 1, rng) for _ in range(3))
    assert ((a * b) * c).allclose(a * (b * c), 1e-9)
    assert element_adjoint(a * b).allclose(element_adjoint(b) * element_adjoint(a), 1e-9)
    assert element_adjoint(element_adjoint(a)).allclose(a)


@settings(max_examples=25, deadline=None)
@given(names, seeds)
def test_trace_is_tracial_and_positive(name, seed):
    m = MODELS[name]()
    rng = np.random.default_rng(seed)
    a, b = random_element(m, 2, rng), random_element(m, 2, rng)
    assert abs(trace(a * b) - trace(b * a)) < 1e-9 * (1 + abs(trace(a * b)))
    t = trace(element_adjoint(a) * a)
    assert t.real > 0 and abs(t.imag) < 1e-9 * t.real


@settings(max_examples=25, deadline=None)
@given(names, seeds, st.floats(0, 1), st.floats(0, 1))
def test_action_is_automorphism(name, seed, g1, g2):
    m = MODELS[name]()
    g = [g1, g2][: m.k]
    rng = np.random.default_rng(seed)
    a, b = random_element(m, 2, rng), random_element(m, 2, rng)
    assert apply_action(a * b, g).allclose(apply_action(a, g) * apply_action(b, g), 1e-9)
    assert apply_action(element_adjoint(a), g).allclose(element_adjoint(apply_action(a, g)), 1e-12)


@settings(max_examples=25, deadline=None)
@given(names, seeds)
def test_spectral_components_sum_and_inner_product(name, seed):
    m = MODELS[name]()
    rng = np.random.default_rng(seed)
    a = random_element(m, 2, rng)
    total = GradedElement.zeros(m)
    for chi in a.gradings():
        total = total + spectral_component(a, chi)
    assert total.allclose(a)
    ip = inner_product_fixed(a, a)
    assert ip.gradings() in ([], [(0,) * m.k])
    assert trace(ip).real >= 0


def test_clock_shift_commutation():
    m = nc_torus(M=2)
    U1, U2 = m.generator("U1"), m.generator("U2")
    comm = U1 * U2 * U1.adjoint() * U2.adjoint()
    assert comm.allclose(cmath.exp(2j * math.pi / 3) * m.unit())


def test_budget_overflow():
    m = rotation_circle(2)
    z = m.generator("z")
    with pytest.raises(BudgetOverflow):
        z.power(3)
    with pytest.raises(BudgetOverflow):
        GradedElement.monomial(m, (3,))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_serialization_roundtrip(name):
    m = MODELS[name]()
    m2 = model_from_dict(model_to_dict(m))
    assert model_to_dict(m2) == model_to_dict(m)
    a = random_element(m, 1, np.random.default_rng(0))
    assert element_from_dict(m2, element_to_dict(a)).allclose(a, 0)


def test_saturation_report_shape():
    rep = saturation_check(rotation_circle(4))
    assert rep.saturated
    doc = rep.to_dict()
    assert doc["verdict"] == "SATURATED_AT_TRUNCATION"
    assert doc["witness_character"] is None
