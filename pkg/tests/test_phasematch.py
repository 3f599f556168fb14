import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_matches
from wgmpair.errors import DomainError, NotFoundError, UnsupportedScaleError
from wgmpair.materials import Polarization
from wgmpair.modes import ModeIndex, mode_near_wavelength
from wgmpair.phasematch import (ModeTriple, angular_overlap, cluster_csv, cluster_members,
                                cluster_number, cluster_size, cluster_spectrum,
                                enumerate_phase_matches, phase_match_temperature,
                                radial_overlap, radial_overlap_adaptive,
                                selection_rules_satisfied, solutions_csv, triple_detuning)

E, O = Polarization.EXTRAORDINARY, Polarization.ORDINARY


def triple_from_l(lp, ls, li, mp=None, ms=None, mi=None):
    ms = ms or 1
    mi = mi or 1
    mp = mp or ms + mi
    return ModeTriple(ModeIndex(1, mp, lp - mp, E), ModeIndex(1, ms, ls - ms, O),
                      ModeIndex(1, mi, li - mi, O))


# -- selection rules and cluster algebra -------------------------------------------

def test_rules_all_hold():
    assert selection_rules_satisfied(triple_from_l(10, 6, 4, 10, 6, 4))


def test_rules_parity_violation():
    assert not selection_rules_satisfied(triple_from_l(4, 2, 1, 2, 1, 1))


def test_rules_triangle_violation():
    assert not selection_rules_satisfied(triple_from_l(10, 2, 3, 3, 2, 1))


def test_rules_azimuthal_violation():
    t = ModeTriple(ModeIndex(1, 5, 0, E), ModeIndex(1, 3, 0, O), ModeIndex(1, 3, 0, O))
    assert not selection_rules_satisfied(t)


def test_triple_polarization_contract():
    with pytest.raises(DomainError):
        ModeTriple(ModeIndex(1, 5, 0, O), ModeIndex(1, 3, 0, O), ModeIndex(1, 2, 0, O))
    ModeTriple(ModeIndex(1, 5, 0, O), ModeIndex(1, 3, 0, O), ModeIndex(1, 2, 0, O),
               allow_any_polarization=True)


@pytest.mark.parametrize("p,expected", [((0, 0, 0), 0), ((0, 1, 1), 2), ((2, 0, 1), None),
                                        ((0, 0, 1), None), ((3, 2, 3), 2)])
def test_cluster_number(p, expected):
    assert cluster_number(*p) == expected


@pytest.mark.parametrize("pp,a,k", [(0, 0, 1), (0, 4, 5), (2, 2, 5)])
def test_cluster_size_examples(pp, a, k):
    assert cluster_size(pp, a) == k


@pytest.mark.parametrize("a", [-2, 1, 3])
def test_cluster_size_domain(a):
    with pytest.raises(DomainError):
        cluster_size(0, a)


def test_cluster_size_brute_force():
    for pp in range(7):
        for a in range(0, 11, 2):
            combos = {(ps, pi) for ps in range(40) for pi in range(40) if ps + pi - pp == a}
            assert cluster_size(pp, a) == len(combos)
            assert set(cluster_members(pp, a)) == combos


def test_layer_count_grows_by_one():
    for pp in range(6):
        for a in range(0, 11, 2):
            assert len(cluster_members(pp + 1, a)) - len(cluster_members(pp, a)) == 1


@settings(max_examples=300, deadline=None)
@given(pp=st.integers(0, 8), ps=st.integers(0, 8), pi=st.integers(0, 8),
       mp=st.integers(2, 40), ms_frac=st.floats(0.01, 0.99))
def test_cluster_number_agrees_with_rules(pp, ps, pi, mp, ms_frac):
    # With m_p = m_s + m_i, parity and the lower triangle bound reduce to a even, >= 0.
    ms = min(max(1, int(ms_frac * mp)), mp - 1)
    mi = mp - ms
    t = ModeTriple(ModeIndex(1, mp, pp, E), ModeIndex(1, ms, ps, O), ModeIndex(1, mi, pi, O))
    a = cluster_number(pp, ps, pi)
    if a is None:
        assert not selection_rules_satisfied(t)
    else:
        ls, li, lp = ms + ps, mi + pi, mp + pp
        assert (ls + li - lp) == a


# -- overlaps ---------------------------------------------------------------------------

def test_angular_overlap_forbidden_is_zero():
    assert angular_overlap(3, 0, 1, 0, 1, 0) == 0.0


def test_angular_overlap_argument_order():
    from wgmpair.wigner import gaunt
    assert angular_overlap(4, 3, 2, 1, 2, 2) == gaunt(2, 1, 2, 2, 4, 3)


def test_radial_overlap_matches_adaptive():
    for q in [(1, 1, 1), (1, 1, 2), (2, 1, 1)]:
        assert radial_overlap(*q, 40, 20, 20) == pytest.approx(
            radial_overlap_adaptive(*q, 40, 20, 20), rel=1e-10)


def test_radial_overlap_converged():
    a = radial_overlap(1, 1, 1, 60, 30, 30, nodes=300)
    b = radial_overlap(1, 1, 1, 60, 30, 30, nodes=600)
    assert abs(a - b) / abs(b) < 1e-8


def test_radial_overlap_fundamental_largest():
    assert abs(radial_overlap(1, 1, 1, 40, 20, 20)) > abs(radial_overlap(1, 1, 2, 40, 20, 20))


def test_radial_overlap_scale_cap():
    with pytest.raises(UnsupportedScaleError):
        radial_overlap(1, 1, 1, 2000, 1000, 1000)


# -- enumeration ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def operating_point(geometry, material, pump):
    sig = mode_near_wavelength(geometry, material, 1, 0, O, 1030e-9, 40.0)
    triple = ModeTriple(pump, sig, ModeIndex(1, pump.m - sig.m, 0, O))
    T = phase_match_temperature(triple, geometry, material, (30.0, 60.0))
    return triple, T


@pytest.fixture(scope="module")
def solutions(geometry, material, pump, operating_point):
    _, T = operating_point
    return enumerate_phase_matches(pump, geometry, material, T, (0.9e-6, 1.064e-6),
                                   q_max=2, p_max=10, tolerance=200e6)


def test_enumeration_a0_unique(solutions):
    a0 = {(s.triple.signal.p, s.triple.idler.p) for s in solutions if s.cluster == 0}
    assert a0 == {(0, 0)}


def test_enumeration_invariants(solutions):
    assert solutions
    d = [abs(s.detuning) for s in solutions]
    assert d == sorted(d)
    for s in solutions:
        t = s.triple
        assert t.pump.m == t.signal.m + t.idler.m
        assert abs(s.detuning) <= 200e6
        assert selection_rules_satisfied(t)
        excess = t.signal.l + t.idler.l - t.pump.l
        assert excess >= 0 and excess % 2 == 0
        assert s.cluster == t.signal.p + t.idler.p - t.pump.p == excess


def test_enumeration_matches_brute_force(geometry, material, pump, operating_point):
    _, T = operating_point
    window = (1.02e-6, 1.04e-6)
    tol = 1.5e9
    fast = enumerate_phase_matches(pump, geometry, material, T, window, q_max=1, p_max=2,
                                   tolerance=tol)
    got = {(s.triple.signal.q, s.triple.idler.q, s.triple.signal.p, s.triple.idler.p,
            s.triple.signal.m) for s in fast}
    ref = brute_force_matches(pump, geometry, material, T, window, 1, 2, tol)
    assert ref
    assert got == ref


def test_enumeration_thread_independent(geometry, material, pump, operating_point):
    _, T = operating_point
    args = (pump, geometry, material, T, (0.95e-6, 1.05e-6))
    a = enumerate_phase_matches(*args, q_max=2, p_max=6, tolerance=300e6)
    b = enumerate_phase_matches(*args, q_max=2, p_max=6, tolerance=300e6, threads=4)
    assert solutions_csv(a) == solutions_csv(b)


def test_enumeration_empty_is_valid(geometry, material, pump, operating_point):
    _, T = operating_point
    assert enumerate_phase_matches(pump, geometry, material, T, (0.9e-6, 0.901e-6),
                                   q_max=1, p_max=0, tolerance=1.0) == []


def test_enumeration_bad_tolerance(geometry, material, pump):
    with pytest.raises(DomainError):
        enumerate_phase_matches(pump, geometry, material, 40.0, (0.9e-6, 1e-6), tolerance=0)


# -- cluster spectrum -------------------------------------------------------------------

@pytest.fixture(scope="module")
def spectrum(geometry, material, pump, operating_point):
    _, T = operating_point
    return cluster_spectrum(pump, geometry, material, T, a_max=10)


def test_cluster_sizes(spectrum):
    for a, g in spectrum.groups.items():
        assert g.size == a + 1 == g.expected_size


def test_cluster_spread_megahertz(spectrum):
    for g in spectrum.groups.values():
        assert 0 <= g.detuning_spread < 50e6


def test_cluster_gaps_nanometres(spectrum):
    gaps = spectrum.gaps_nm()
    assert len(gaps) == 5
    assert all(gap >= 5 for _, _, gap in gaps)


def test_cluster_membership_from_indices(spectrum):
    for a, g in spectrum.groups.items():
        for s in g.solutions:
            assert s.triple.signal.p + s.triple.idler.p == a


def test_cluster_spectrum_needs_fundamental_pump(geometry, material, pump):
    with pytest.raises(DomainError):
        cluster_spectrum(pump.replace(p=1), geometry, material, 40.0)


def test_cluster_csv_schema(spectrum):
    lines = cluster_csv(spectrum).splitlines()
    assert lines[0] == ("cluster_a,size,expected_size,centroid_wavelength_nm,"
                        "detuning_spread_hz,gap_to_next_nm")
    assert len(lines) == 7


# -- temperature tuning ---------------------------------------------------------------

def test_temperature_below_threshold(geometry, material, operating_point):
    triple, T = operating_point
    assert abs(triple_detuning(triple, geometry, material, T)) < 0.1 * 78.1e6


def test_temperature_bracket_stable(geometry, material, operating_point):
    triple, T = operating_point
    T2 = phase_match_temperature(triple, geometry, material, (T - 0.5, T + 0.7))
    assert T2 == pytest.approx(T, abs=1e-6)


def test_temperature_dense_scan(geometry, material, operating_point):
    triple, T = operating_point
    grid = np.round(np.arange(T - 0.05, T + 0.05, 1e-3), 6)
    d = [abs(triple_detuning(triple, geometry, material, t)) for t in grid]
    assert abs(grid[int(np.argmin(d))] - T) <= 1e-3


def test_temperature_not_found_reports_endpoints(geometry, material, operating_point):
    triple, T = operating_point
    with pytest.raises(NotFoundError, match="MHz at"):
        phase_match_temperature(triple, geometry, material, (T + 1.0, T + 2.0))


def test_rules_violated_implies_zero_overlap():
    from oracles import signed_rules
    lm = [(l, m) for l in range(7) for m in range(-l, l + 1)]
    for (lp, mp), (ls, ms), (li, mi) in itertools.product(lm, lm, lm):
        if not signed_rules(lp, mp, ls, ms, li, mi):
            assert angular_overlap(lp, mp, ls, ms, li, mi) == 0.0


@pytest.mark.parametrize("idx", [(5, 4, 4, 1, 5, 3), (5, 3, 4, 2, 5, 1), (6, 5, 3, 1, 5, 4),
                                 (6, 3, 5, 1, 3, 2)])
def test_accidental_zeros_are_real(idx):
    # the rules hold, yet the integral vanishes by cancellation
    from oracles import gaunt_quadrature, signed_rules
    lp, mp, ls, ms, li, mi = idx
    assert signed_rules(*idx)
    assert abs(angular_overlap(*idx)) < 1e-15
    assert abs(gaunt_quadrature(ls, ms, li, mi, lp, mp)) < 1e-12
