import math
from fractions import Fraction

import numpy as np
import pytest

from cstarindex.action_model import element_adjoint, trace
from cstarindex.models import (
    PRESETS,
    bott_projection,
    constant_projection,
    nc_torus,
    parse_theta,
    preset,
    restrict_to_circle,
    rotation_torus,
    validate_model,
)
from cstarindex.representations import evaluate


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_pass_invariant_suite(name):
    validate_model(preset(name, 3))


def test_parse_theta():
    assert parse_theta("1/3") == Fraction(1, 3)
    assert parse_theta("golden") == pytest.approx((math.sqrt(5) - 1) / 2)
    assert isinstance(parse_theta("0.25"), float)


def test_preset_with_parameter_and_unknown():
    m = preset("nc_torus:2/5", 3)
    assert m.theta_is_rational
    with pytest.raises(KeyError):
        preset("no_such_model", 3)


def test_restrict_to_circle_grading():
    m = restrict_to_circle(nc_torus(M=3), (1, 0))
    assert m.k == 1 and m.r == 2
    assert m.generator("U1").gradings() == [(1,)]
    assert m.generator("U2").gradings() == [(0,)]


@pytest.mark.parametrize("mass, chern", [(1.0, 1), (-1.0, -1), (3.0, 0)])
def test_bott_projection(mass, chern):
    m = rotation_torus(40)
    p = bott_projection(m, mass=mass)
    wide = p.rebudget(80)
    assert (wide * wide).allclose(wide, 1e-9)
    assert element_adjoint(p).allclose(p, 1e-12)
    assert abs(trace(p) - 1) < 1e-9
    # Pointwise oracle: rank one at every sampled point.
    for x in [(0.1, 0.2), (0.5, 0.5), (0.9, 0.3)]:
        P = evaluate(p, x)
        assert np.allclose(P @ P, P, atol=1e-8)
        assert abs(np.trace(P) - 1) < 1e-8


def test_constant_projection():
    m = rotation_torus(2)
    q = constant_projection(m, (1, 0))
    assert q.amp == 2 and (q * q).allclose(q)
