import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import trace
from cstarindex.crossed_product import (
    CrossedElement,
    convolve,
    crossed_adjoint,
    crossed_from_dict,
    crossed_to_dict,
    crossed_trace,
    dual_action,
    fin_element,
    heat_smooth,
    invariance_check,
    multiplier_rep,
    regular_rep,
)
from cstarindex.models import nc_torus, rotation_circle, rotation_torus

from helpers import random_element

seeds = st.integers(0, 2**32 - 1)


def rand_f(model, N, rng, mr=1, R=1):
    from cstarindex.action_model import box_labels

    return CrossedElement(model, N, {tuple(m): random_element(model, R, rng) for m in box_labels(mr, model.k)})


@settings(max_examples=15, deadline=None)
@given(seeds, st.booleans())
def test_convolution_associative_and_star(seed, torus):
    m = rotation_torus(6) if torus else rotation_circle(8)
    rng = np.random.default_rng(seed)
    f, g, h = (rand_f(m, 6, rng) for _ in range(3))
    lhs, rhs = convolve(convolve(f, g), h), convolve(f, convolve(g, h))
    assert lhs.distance(rhs) < 1e-9
    left = crossed_adjoint(convolve(f, g))
    right = convolve(crossed_adjoint(g), crossed_adjoint(f))
    assert left.distance(right) < 1e-9


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_fin_elements_compose(seed):
    # (a α(b*)) ⋆ (c α(d*)) = a⟨b, c⟩ α(d*): the Fin-form product rule.
    m = nc_torus(M=6)
    rng = np.random.default_rng(seed)
    a, b, c, d = (random_element(m, 1, rng) for _ in range(4))
    from cstarindex.action_model import inner_product_fixed

    lhs = convolve(fin_element(a, b, 4), fin_element(c, d, 4))
    rhs = fin_element(a * inner_product_fixed(b, c), d, 4)
    assert lhs.distance(rhs) < 1e-9
    assert abs(crossed_trace(fin_element(a, b, 4)) - trace(inner_product_fixed(b, a))) < 1e-10


def test_regular_rep_is_invariant_and_dual_action_shifts():
    m = rotation_circle(8)
    f = rand_f(m, 8, np.random.default_rng(3))
    T = regular_rep(f, 4)
    assert invariance_check(T, [0.3, 0.71]).invariant
    g = dual_action(f, 2)
    assert set(g.modes) == {(k[0] + 2,) for k in f.modes}


def test_multipliers_are_invariant_and_random_matrices_are_not():
    m = rotation_circle(8)
    z = m.generator("z")
    T = multiplier_rep(z, 6, 4)
    assert invariance_check(T, [0.3]).invariant
    noise = np.random.default_rng(0).standard_normal(T.matrix.shape)
    assert not invariance_check(T.with_matrix(noise), [0.3]).invariant


def test_heat_smoothing_damps_high_modes():
    m = rotation_circle(8)
    f = rand_f(m, 10, np.random.default_rng(4), mr=4)
    d = [heat_smooth(f, t).distance(f) for t in (1.0, 0.1, 0.01, 0.001)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(d, d[1:]))
    with pytest.raises(ValueError):
        heat_smooth(f, 0.0)


def test_serialization_roundtrip():
    m = nc_torus(M=3)
    f = rand_f(m, 3, np.random.default_rng(5))
    assert crossed_from_dict(crossed_to_dict(f)).distance(f) == 0


def test_mode_outside_truncation_rejected():
    m = rotation_circle(4)
    with pytest.raises(ValueError):
        CrossedElement(m, 2, {(3,): m.unit()})
