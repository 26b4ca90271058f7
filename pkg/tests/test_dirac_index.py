import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import GradedElement
from cstarindex.core import kernel_dimension
from cstarindex.dirac_index import (
    CalibrationCache,
    DiracModel,
    brute_force_even_index,
    calibrate_constant,
    check_projection,
    check_unitary,
    clifford_defect,
    dirac_matrix,
    even_pairing,
    module_dirac,
    odd_pairing,
    pv_pairing_check,
    spectral_flow,
    summability_profile,
    toeplitz_index,
    winding_number,
)
from cstarindex.errors import NotProjection, NotScalar, UnitarityViolated
from cstarindex.models import bott_projection, constant_projection, nc_torus, preset, restrict_to_circle, rotation_circle, rotation_torus

CACHE = CalibrationCache()
C1 = -1 / (2 * np.pi)


def toeplitz_oracle(w: int, n: int = 30) -> int:
    """Compression of ``z^w`` to ``ℓ²(ℕ)``: domain ``[0, n)``, codomain ``[0, n + w)``."""
    T = np.zeros((n + w, n))
    for j in range(n):
        if j + w >= 0:
            T[j + w, j] = 1
    return kernel_dimension(T) - kernel_dimension(T.T)


def test_clifford_relations():
    assert clifford_defect(DiracModel(1)) == 0
    assert clifford_defect(DiracModel(2)) == 0
    with pytest.raises(ValueError):
        DiracModel(2, [[0, 1], [0, 0]])


@settings(max_examples=7, deadline=None)
@given(st.integers(-3, 3))
def test_winding_and_toeplitz_on_circle(w):
    m = rotation_circle(8)
    u = m.generator("z").power(w)
    assert winding_number(u) == w
    assert toeplitz_index(u) == -w
    assert toeplitz_oracle(w) == -w


@settings(max_examples=10, deadline=None)
@given(st.integers(-2, 2), st.integers(-2, 2), st.floats(0, 1))
def test_flow_on_first_circle_of_nc_torus(a, b, phase):
    m = restrict_to_circle(nc_torus(M=6), (1, 0))
    U1, U2 = m.generator("U1"), m.generator("U2")
    u = np.exp(2j * np.pi * phase) * U1.power(a) * U2.power(b)
    D = module_dirac(m, DiracModel(1), 6)
    rep = odd_pairing(u, D, C1)
    assert rep.flow_value == a
    assert rep.oracle_value == a
    assert abs(rep.formula_value - a) < 1e-8
    assert rep.consistent()


@pytest.mark.parametrize("picture", ["module", "crossed"])
def test_flow_matches_eigenvalue_count(picture):
    # Counting oracle: with D_1 = u D u*, the flow is the drop in negative eigenvalues
    # on the τ-frame, here visible as a constant shift of the spectrum by 2π w.
    m = rotation_circle(8)
    w = 2
    u = m.generator("z").power(w)
    D = module_dirac(m, DiracModel(1), 8) if picture == "module" else dirac_matrix(m, DiracModel(1), 16, 6)
    res = spectral_flow(D, u, 32)
    assert res.value == w
    assert sum(c["direction"] * c["weight"] for c in res.crossings) == w
    assert res.path.shape[0] == 33


def test_amplified_unitary():
    m = rotation_circle(8)
    z = m.generator("z")
    one = GradedElement.unit(m)
    zero = m.zero()
    u = GradedElement.from_blocks([[z, zero], [zero, one]])
    D = module_dirac(m, DiracModel(1), 8, amp=2)
    assert spectral_flow(D, u).value == 1
    v = GradedElement.from_blocks([[zero, z], [one, zero]])
    rep = odd_pairing(v, D, C1)
    assert rep.oracle == "-toeplitz" and rep.oracle_value == 1 and rep.flow_value == 1


def test_omega_does_not_change_odd_pairing():
    m = rotation_circle(8)
    u = m.generator("z").power(-1)
    a = odd_pairing(u, module_dirac(m, DiracModel(1), 8), C1)
    b = odd_pairing(u, module_dirac(m, DiracModel(1, [[0.37]]), 8), C1)
    assert a.flow_value == b.flow_value and abs(a.formula_value - b.formula_value) < 1e-10


def test_input_validation():
    m = rotation_circle(4)
    z = m.generator("z")
    with pytest.raises(UnitarityViolated):
        check_unitary(z + z)
    with pytest.raises(NotProjection):
        check_projection(z)
    with pytest.raises(NotScalar):
        winding_number(constant_projection(m, (1, 0)))
    D = module_dirac(m, DiracModel(1), 4)
    with pytest.raises(ValueError):
        spectral_flow(D, z, weight="other")


def test_calibration_constants_and_cache(tmp_path):
    path = tmp_path / "cal.json"
    cache = CalibrationCache(path)
    c1 = calibrate_constant(1, cache)
    assert abs(c1 - C1) < 1e-12
    doc = json.loads(path.read_text())
    assert "1" in doc
    reloaded = CalibrationCache(path)
    assert reloaded.get(1) == c1
    with pytest.raises(ValueError):
        reloaded.set(1, 2.0)


@pytest.mark.parametrize("mass, index", [(1.0, 1), (-1.0, -1), (3.0, 0)])
def test_even_index_and_pairing(mass, index):
    m = rotation_torus(40)
    p = bott_projection(m, mass=mass)
    q = constant_projection(m, (1, 0))
    assert brute_force_even_index(p, DiracModel(2), 6) - brute_force_even_index(q, DiracModel(2), 6) == index
    rep = even_pairing(p, q, DiracModel(2), N_list=(6, 8), cache=CACHE)
    assert rep.converged and rep.oracle_value == index
    assert abs(rep.formula_value - index) < 1e-6


def test_summability_profiles():
    m = rotation_circle(4)
    one = GradedElement.unit(m)
    conv = summability_profile(one, DiracModel(1), 1.5, (8, 16, 32))
    assert conv.cauchy and all(a > b for a, b in zip(conv.increments, conv.increments[1:]))
    div = summability_profile(one, DiracModel(1), 0.5, (8, 16, 32))
    assert not np.isfinite(div.tail) and not div.cauchy
    with pytest.raises(ValueError):
        summability_profile(one, DiracModel(1), 0.0)


def test_pv_check():
    m = rotation_circle(8)
    rep = pv_pairing_check(m.generator("z").power(2), N=24)
    assert rep.consistent and rep.winding == 2 and rep.operator_identity_defect < 1e-10


def test_preset_z_crossed_product_pairing():
    m = preset("z_crossed_product", 6)
    rep = odd_pairing(m.generator("s"), module_dirac(m, DiracModel(1), 6), C1)
    assert rep.flow_value == 1 and rep.consistent()
