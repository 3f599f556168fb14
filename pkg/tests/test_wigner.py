import math
import random

import pytest
from hypothesis import given, settings, strategies as st
from sympy.physics.wigner import wigner_3j as sympy_3j

from oracles import gaunt_quadrature
from wgmpair.errors import DomainError
from wgmpair.wigner import _racah, gaunt, three_j_series, wigner_3j


def test_racah_matches_sympy():
    rng = random.Random(3)
    for _ in range(300):
        j2, j3 = rng.randint(0, 12), rng.randint(0, 12)
        j1 = rng.randint(abs(j2 - j3), j2 + j3)
        m2, m3 = rng.randint(-j2, j2), rng.randint(-j3, j3)
        m1 = -m2 - m3
        if abs(m1) > j1:
            continue
        assert _racah(j1, j2, j3, m1, m2, m3) == pytest.approx(
            float(sympy_3j(j1, j2, j3, m1, m2, m3)), abs=1e-14)


def test_recursion_matches_exact():
    rng = random.Random(11)
    worst = 0.0
    for _ in range(600):
        j2, j3 = rng.randint(0, 45), rng.randint(0, 45)
        m2, m3 = rng.randint(-j2, j2), rng.randint(-j3, j3)
        jmin, vals = three_j_series(j2, j3, m2, m3)
        for k, v in enumerate(vals):
            worst = max(worst, abs(v - _racah(jmin + k, j2, j3, -m2 - m3, m2, m3)))
    assert worst < 1e-12


@pytest.mark.parametrize("J", [1, 2, 7, 30])
def test_recursion_jmin_zero(J):
    for m in range(-J, J + 1):
        jmin, vals = three_j_series(J, J, m, -m)
        assert jmin == 0
        assert vals[0] == pytest.approx((-1) ** (J - m) / math.sqrt(2 * J + 1), abs=1e-14)


@pytest.mark.parametrize("args", [(100, 80, 60, 5, -3, -2), (150, 120, 90, 0, 0, 0),
                                  (200, 110, 95, 12, -7, -5)])
def test_large_j_against_sympy(args):
    assert wigner_3j(*args) == pytest.approx(float(sympy_3j(*args)), abs=1e-12)


def test_forbidden_symbols_zero():
    assert wigner_3j(1, 1, 3, 0, 0, 0) == 0.0
    assert wigner_3j(2, 2, 2, 1, 1, 1) == 0.0
    with pytest.raises(DomainError):
        wigner_3j(-1, 1, 1, 0, 0, 0)


def test_gaunt_constant_harmonics():
    assert gaunt(0, 0, 0, 0, 0, 0) == pytest.approx(1 / math.sqrt(4 * math.pi), abs=1e-15)


def test_gaunt_quadrature_l2_l1_l1():
    val = gaunt(1, 0, 1, 0, 2, 0)
    ref = gaunt_quadrature(1, 0, 1, 0, 2, 0).real
    assert val == pytest.approx(ref, abs=1e-10)


def test_gaunt_parity_exact_zero():
    assert gaunt(1, 0, 1, 0, 1, 0) == 0.0
    assert gaunt(3, 1, 2, 1, 2, 2) == 0.0


def test_gaunt_invalid():
    with pytest.raises(DomainError):
        gaunt(1, 2, 1, 0, 1, 2)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_gaunt_against_quadrature(data):
    l1 = data.draw(st.integers(0, 5))
    l2 = data.draw(st.integers(0, 5))
    m1 = data.draw(st.integers(-l1, l1))
    m2 = data.draw(st.integers(-l2, l2))
    l3 = data.draw(st.integers(max(abs(l1 - l2), abs(m1 + m2)), l1 + l2))
    val = gaunt(l1, m1, l2, m2, l3, m1 + m2)
    ref = gaunt_quadrature(l1, m1, l2, m2, l3, m1 + m2)
    assert abs(ref.imag) < 1e-12
    assert val == pytest.approx(ref.real, abs=1e-10)
