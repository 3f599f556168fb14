import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgmpair.errors import ConfigError, DomainError
from wgmpair.materials import Polarization, constant_index, parse_material
from wgmpair.modes import refractive_index

# Direct evaluation of the extended Sellmeier form for 5% MgO:LiNbO3.
N_O_1064_25C = 2.2296274040398476
N_E_532_25C = 2.2245813809938446


def _gayer_by_hand(lam, T, a1, a2, a3, a4, a5, a6, b1, b2, b3, b4):
    f = (T - 24.5) * (T + 570.82)
    return np.sqrt(a1 + b1 * f + (a2 + b2 * f) / (lam ** 2 - (a3 + b3 * f) ** 2)
                   + (a4 + b4 * f) / (lam ** 2 - a5 ** 2) - a6 * lam ** 2)


def test_golden_ordinary_index(material):
    n = refractive_index(material, Polarization.ORDINARY, 1064e-9, 25.0)
    assert n == pytest.approx(N_O_1064_25C, abs=1e-14)


def test_golden_extraordinary_index(material):
    n = refractive_index(material, Polarization.EXTRAORDINARY, 532e-9, 25.0)
    assert n == pytest.approx(N_E_532_25C, abs=1e-14)


def test_matches_hand_evaluation(material):
    coef = material.sellmeier_ordinary
    for lam, T in [(0.6, 30.0), (1.55, 120.0), (3.9, 199.0)]:
        assert material.index(Polarization.ORDINARY, lam, T) == pytest.approx(
            _gayer_by_hand(lam, T, *coef), rel=1e-15)


def test_birefringence_sign(material):
    # Lithium niobate is negative uniaxial.
    no = material.index(Polarization.ORDINARY, 1.0, 40.0)
    ne = material.index(Polarization.EXTRAORDINARY, 1.0, 40.0)
    assert ne < no


def test_deterministic(material):
    a = refractive_index(material, Polarization.ORDINARY, 1.03e-6, 41.3)
    b = refractive_index(material, Polarization.ORDINARY, 1.03e-6, 41.3)
    assert a == b


@pytest.mark.parametrize("lam,T,word", [(0.4e-6, 40, "below"), (4.5e-6, 40, "above"),
                                        (1e-6, 10, "below"), (1e-6, 250, "above")])
def test_out_of_window(material, lam, T, word):
    with pytest.raises(DomainError, match=word):
        refractive_index(material, Polarization.ORDINARY, lam, T)


@settings(max_examples=200, deadline=None)
@given(lam=st.floats(0.5, 4.0), T=st.floats(20, 200),
       pol=st.sampled_from(list(Polarization)))
def test_index_above_one_in_window(material, lam, T, pol):
    assert material.index(pol, lam, T) > 1


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0.5, 3.99), T=st.floats(20, 199))
def test_index_smooth(material, lam, T):
    n0 = material.index(Polarization.ORDINARY, lam, T)
    assert abs(material.index(Polarization.ORDINARY, lam + 1e-6, T) - n0) < 1e-5
    assert abs(material.index(Polarization.ORDINARY, lam, T + 1e-3) - n0) < 1e-6


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_material("name = x\nbogus = 1\n")


def test_parse_missing_keys():
    with pytest.raises(ConfigError, match="missing"):
        parse_material("name = x\nformula = constant\n")


def test_parse_round_trip(material, tmp_path):
    text = (
        "name = test\nformula = constant\nordinary = 1.5\nextraordinary = 1.6\n"
        "wavelength_um = 0.5, 2\ntemperature_c = 0, 100\n")
    m = parse_material(text)
    assert m.index(Polarization.EXTRAORDINARY, 1.0, 50) == 1.6


def test_constant_index_validation():
    with pytest.raises(DomainError):
        constant_index(0.9)
