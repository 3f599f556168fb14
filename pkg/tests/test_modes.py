import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import airy_zero, sphere_frequency
from wgmpair.errors import DomainError
from wgmpair.materials import Polarization, constant_index
from wgmpair.modes import (C_LIGHT, EXACT_ORDER_LIMIT, ModeIndex, ResonatorGeometry,
                           airy_negative_zero, asymptotic_size_parameter, boundary_factor,
                           free_spectral_range, linewidth_to_q_factor, mode_frequency,
                           size_parameter)

E, O = Polarization.EXTRAORDINARY, Polarization.ORDINARY
SPHERE = ResonatorGeometry(50e-6, 50e-6)
GLASS = constant_index(1.45)


# -- Airy zeros -----------------------------------------------------------------

@pytest.mark.parametrize("q,value", [(1, 2.338107410), (2, 4.087949444), (3, 5.520559828)])
def test_airy_zero_frozen(q, value):
    assert airy_negative_zero(q) == pytest.approx(value, abs=1e-9)


@pytest.mark.parametrize("q", [1, 2, 3])
def test_airy_zero_oracle(q):
    assert airy_negative_zero(q) == pytest.approx(airy_zero(q), abs=1e-9)


def test_airy_zero_domain():
    with pytest.raises(DomainError):
        airy_negative_zero(0)


# -- types ----------------------------------------------------------------------------

def test_geometry_validation():
    with pytest.raises(DomainError):
        ResonatorGeometry(1e-3, 2e-3)
    with pytest.raises(DomainError):
        ResonatorGeometry(-1e-3, 1e-4)


@pytest.mark.parametrize("q,m,p", [(0, 5, 0), (1, 0, 0), (1, 5, -1)])
def test_mode_index_validation(q, m, p):
    with pytest.raises(DomainError):
        ModeIndex(q, m, p, O)


# -- sphere oracle --------------------------------------------------------------------

@pytest.mark.parametrize("pol", [E, O])
def test_sphere_l20_oracle(pol):
    f = mode_frequency(SPHERE, GLASS, ModeIndex(1, 20, 0, pol), 25.0).frequency
    ref = sphere_frequency(SPHERE.major_radius, 20, 1, 1.45, boundary_factor(pol, 1.45))
    assert f == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("l", [1, 7, 33, 50])
@pytest.mark.parametrize("q", [1, 2, 3])
def test_sphere_oracle_grid(l, q):
    f = mode_frequency(SPHERE, GLASS, ModeIndex(q, l, 0, O), 25.0).frequency
    ref = sphere_frequency(SPHERE.major_radius, l, q, 1.45, boundary_factor(O, 1.45))
    assert f == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("l", [10, 40])
def test_sphere_degeneracy(l):
    freqs = [mode_frequency(SPHERE, GLASS, ModeIndex(2, l - p, p, E), 25.0).frequency
             for p in range(0, l)]
    assert max(freqs) - min(freqs) <= 1e3


def test_asymptotic_series_near_crossover():
    # Above the crossover the series replaces the exact root; check its error there.
    order = EXACT_ORDER_LIMIT
    for P in (1.0, 1 / 1.45 ** 2):
        exact = size_parameter(order, 1, 1.45, P)
        series = asymptotic_size_parameter(order, 1, 1.45, P)
        assert abs(series - exact) / exact < 1e-6


# -- millimetre resonator -------------------------------------------------------------------

def test_fsr_leading_order(geometry, material, pump):
    f = mode_frequency(geometry, material, pump, 40.0)
    fsr = free_spectral_range(geometry, material, pump, 40.0)
    lam_um = f.vacuum_wavelength * 1e6
    n = f.index
    dn = (material.index(E, lam_um + 1e-4, 40.0) - material.index(E, lam_um - 1e-4, 40.0)) / 2e-4
    n_group = n - lam_um * dn
    assert fsr == pytest.approx(C_LIGHT / (2 * math.pi * geometry.major_radius * n), rel=0.1)
    assert fsr == pytest.approx(C_LIGHT / (2 * math.pi * geometry.major_radius * n_group), rel=0.01)


def test_fsr_near_1064(geometry, material):
    from wgmpair.modes import mode_near_wavelength
    mode = mode_near_wavelength(geometry, material, 1, 0, O, 1064e-9, 40.0)
    fsr = free_spectral_range(geometry, material, mode, 40.0)
    assert 3e9 < fsr < 30e9


def test_fsr_sphere_large_m():
    sphere = ResonatorGeometry(1e-3, 1e-3)
    for m in (1000, 5000):
        fsr = free_spectral_range(sphere, GLASS, ModeIndex(1, m, 0, O), 25.0)
        assert fsr == pytest.approx(C_LIGHT / (2 * math.pi * 1e-3 * 1.45), rel=0.01)
        assert fsr == free_spectral_range(sphere, GLASS, ModeIndex(1, m, 0, O), 25.0)


def test_pump_frequency_and_size_parameter(geometry, material, pump):
    f = mode_frequency(geometry, material, pump, 40.0)
    assert f.vacuum_wavelength == pytest.approx(532e-9, abs=0.05e-9)
    assert f.vacuum_wavelength * f.frequency == pytest.approx(C_LIGHT, rel=1e-15)
    assert f.size_parameter > pump.m


def test_self_consistency_residual(geometry, material, pump):
    for mode in (pump, ModeIndex(2, 23000, 3, O)):
        f = mode_frequency(geometry, material, mode, 40.0)
        n = material.index(mode.polarization, f.vacuum_wavelength * 1e6, 40.0)
        x = 2 * math.pi * geometry.major_radius * n * f.frequency / C_LIGHT
        assert abs(x - f.size_parameter) / x < 1e-9


def test_wavelength_leaves_window(geometry, material):
    with pytest.raises(DomainError):
        mode_frequency(geometry, material, ModeIndex(1, 2000, 0, O), 40.0)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(15000, 40000), p=st.integers(0, 8), q=st.integers(1, 3),
       pol=st.sampled_from([E, O]))
def test_monotonicity(geometry, material, m, p, q, pol):
    base = mode_frequency(geometry, material, ModeIndex(q, m, p, pol), 40.0).frequency
    for other in (ModeIndex(q, m + 1, p, pol), ModeIndex(q, m, p + 1, pol),
                  ModeIndex(q + 1, m, p, pol)):
        assert mode_frequency(geometry, material, other, 40.0).frequency > base


@settings(max_examples=30, deadline=None)
@given(l=st.integers(2, 60), q=st.integers(1, 3))
def test_sphere_degeneracy_property(l, q):
    freqs = [mode_frequency(SPHERE, GLASS, ModeIndex(q, l - p, p, O), 25.0).frequency
             for p in (0, l // 2, l - 1)]
    assert max(freqs) - min(freqs) <= 1e3


# -- Q factor --------------------------------------------------------------------------

def test_q_factor_green_pump():
    assert linewidth_to_q_factor(C_LIGHT / 532e-9, 78.1e6) == pytest.approx(7.2e6, rel=0.01)


def test_q_factor_identity():
    assert linewidth_to_q_factor(5e14, 5e14) == 1.0


def test_q_factor_inverse():
    nu = C_LIGHT / 532e-9
    assert nu / 3e7 == pytest.approx(18.8e6, rel=0.01)
    assert linewidth_to_q_factor(nu, nu / 3e7) == pytest.approx(3e7)


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (-1, 1)])
def test_q_factor_domain(args):
    with pytest.raises(DomainError):
        linewidth_to_q_factor(*args)
