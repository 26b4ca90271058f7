import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import GradedElement
from cstarindex.models import nc_torus, rotation_circle, rotation_torus, z_crossed_product
from cstarindex.representations import Window, element_norm, evaluate, left_mult_matrix

from helpers import random_element

seeds = st.integers(0, 2**32 - 1)
MODELS = [lambda: rotation_circle(8), lambda: nc_torus(M=6), lambda: z_crossed_product(M=6), lambda: rotation_torus(6)]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(range(len(MODELS))), seeds)
def test_left_mult_is_multiplicative_inside(i, seed):
    m = MODELS[i]()
    rng = np.random.default_rng(seed)
    a, b, x = random_element(m, 1, rng), random_element(m, 1, rng), random_element(m, 1, rng)
    win = Window(m, 3)
    lhs = left_mult_matrix(a * b, 3) @ win.coords(x)
    rhs = left_mult_matrix(a, 3) @ (left_mult_matrix(b, 3) @ win.coords(x))
    assert np.allclose(lhs, rhs, atol=1e-10)
    assert np.allclose(lhs, win.coords(a * b * x), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_evaluation_is_homomorphism(seed, x1, x2):
    m = nc_torus(M=6)
    rng = np.random.default_rng(seed)
    a, b = random_element(m, 2, rng), random_element(m, 2, rng)
    A, B = evaluate(a, (x1, x2)), evaluate(b, (x1, x2))
    assert np.allclose(evaluate(a * b, (x1, x2)), A @ B, atol=1e-9)
    assert np.allclose(evaluate(a.adjoint(), (x1, x2)), A.conj().T, atol=1e-12)


def test_window_roundtrip_and_norm():
    m = rotation_circle(4)
    a = random_element(m, 2, np.random.default_rng(1))
    win = Window(m, 4)
    assert win.element(win.coords(a), budget=4).allclose(a)
    z = m.generator("z")
    assert abs(element_norm(z) - 1) < 1e-9
    assert abs(element_norm(GradedElement.unit(m) + z) - 2) < 1e-6
