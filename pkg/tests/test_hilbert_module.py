import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import element_adjoint, inner_product_fixed, trace
from cstarindex.crossed_product import CrossedElement, fin_element, regular_rep
from cstarindex.errors import NotInvariant
from cstarindex.hilbert_module import (
    adjoint_defect,
    c_alpha,
    gram_matrix,
    left_mult_h,
    module_trace,
    saturation_by_compactness,
    theta,
    trace_identity,
    transfer_operator,
)
from cstarindex.models import double_rotation, nc_torus, rotation_circle, trivial_action, z_crossed_product
from cstarindex.representations import Window

from helpers import random_element

seeds = st.integers(0, 2**32 - 1)
MODELS = [lambda: rotation_circle(8), lambda: nc_torus(M=6), lambda: z_crossed_product(M=6)]


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(range(len(MODELS))), seeds)
def test_inner_product_axioms(i, seed):
    m = MODELS[i]()
    rng = np.random.default_rng(seed)
    v, w = random_element(m, 2, rng), random_element(m, 2, rng)
    a = random_element(m, 1, rng)
    from cstarindex.action_model import mean

    a0 = mean(a)
    # ⟨v, w a⟩ = ⟨v, w⟩ a for fixed-point a; ⟨v, w⟩* = ⟨w, v⟩.
    assert inner_product_fixed(v, w * a0).allclose(inner_product_fixed(v, w) * a0, 1e-9)
    assert element_adjoint(inner_product_fixed(v, w)).allclose(inner_product_fixed(w, v), 1e-10)
    G = gram_matrix([v, w])
    assert np.allclose(G, G.conj().T) and np.linalg.eigvalsh(G).min() > -1e-9


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(range(len(MODELS))), seeds)
def test_theta_acts_as_rank_one(i, seed):
    m = MODELS[i]()
    rng = np.random.default_rng(seed)
    v, w, x = (random_element(m, 1, rng) for _ in range(3))
    K = 4
    win = Window(m.with_budget(8), K)
    T = theta(v, w, K)
    got = T.matrix @ win.coords(x.rebudget(8))
    ref = win.coords((v * inner_product_fixed(w, x)).rebudget(8))
    assert np.allclose(got, ref, atol=1e-10)
    assert np.allclose(theta(w, v, K).matrix, T.matrix.conj().T, atol=1e-12)
    assert abs(module_trace(T) - trace(inner_product_fixed(w, v))) < 1e-9


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_fin_preimage_and_trace(seed):
    m = nc_torus(M=6)
    rng = np.random.default_rng(seed)
    v, w = random_element(m, 1, rng), random_element(m, 1, rng)
    f = fin_element(v, w, 4)
    assert np.allclose(c_alpha(f, 4).matrix, theta(v, w, 4).matrix, atol=1e-10)
    lhs, rhs = trace_identity(v, w)
    assert abs(lhs - rhs) < 1e-10


def test_transfer_matches_c_alpha():
    m = rotation_circle(8)
    rng = np.random.default_rng(2)
    f = CrossedElement(m, 10, {(j,): random_element(m, 1, rng) for j in (-1, 0, 1)})
    H = transfer_operator(regular_rep(f, 4))
    assert np.allclose(H.matrix, c_alpha(f, 4).matrix, atol=1e-12)


def test_transfer_rejects_non_invariant():
    m = rotation_circle(8)
    from cstarindex.crossed_product import multiplier_rep

    T = multiplier_rep(m.generator("z"), 8, 4)
    noisy = T.with_matrix(T.matrix + np.random.default_rng(0).standard_normal(T.matrix.shape))
    with pytest.raises(NotInvariant):
        transfer_operator(noisy)


def test_left_multiplication_is_adjointable():
    m = nc_torus(M=8)
    rng = np.random.default_rng(7)
    a = random_element(m, 1, rng)
    vecs = [random_element(m, 1, rng) for _ in range(3)]
    assert adjoint_defect(left_mult_h(a, 4), vecs) < 1e-10


@pytest.mark.parametrize(
    "make, verdict",
    [
        (lambda: rotation_circle(4), "ISO"),
        (lambda: z_crossed_product(M=4), "ISO"),
        (lambda: trivial_action(M=4), "NOT_INJECTIVE"),
        (lambda: double_rotation(4), "NOT_INJECTIVE"),
    ],
)
def test_compactness_verdicts(make, verdict):
    rep = saturation_by_compactness(make(), 2)
    assert rep.verdict == verdict
    assert rep.to_dict()["verdict"] == verdict
