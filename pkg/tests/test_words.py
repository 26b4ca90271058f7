import cmath
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarindex.action_model import element_to_dict
from cstarindex.models import nc_torus, rotation_circle
from cstarindex.words import WordError, load_element, parse_word, tokenize


@settings(max_examples=30, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4))
def test_powers_add(a, b):
    m = rotation_circle(8)
    assert parse_word(m, f"z^{a}*z^{b}").allclose(m.generator("z").power(a + b))


def test_adjoint_and_grouping():
    m = nc_torus(M=4)
    x = parse_word(m, "U1*U2*U1'*U2'")
    assert x.allclose(cmath.exp(2j * math.pi / 3) * m.unit())
    assert parse_word(m, "(U1*U2)'").allclose(m.generator("U2").adjoint() * m.generator("U1").adjoint())
    assert parse_word(m, "2*U1").allclose(2 * m.generator("U1"))


@pytest.mark.parametrize("bad", ["", "z^", "z^1.5", "q", "z)", "z $"])
def test_errors(bad):
    with pytest.raises(WordError):
        parse_word(rotation_circle(4), bad)


def test_tokenize():
    assert [t[1] for t in tokenize("U1 ^ -2")] == ["U1", "^", "-", "2"]


def test_load_element_from_file(tmp_path):
    m = rotation_circle(4)
    z = m.generator("z")
    p = tmp_path / "u.json"
    p.write_text(json.dumps(element_to_dict(z)))
    assert load_element(m, str(p)).allclose(z)
    assert load_element(m, "z").allclose(z)
