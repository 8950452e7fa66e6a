import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhwalk.errors import DegenerateSteadyStateError
from nhwalk.spectral import (BlochLoop, LineSpec, bloch_loop, bloch_operator, dominant_state,
                             edge_separating_line, finite_bloch_spectrum, full_spectrum,
                             homogeneous_critical_angle, line_gap_metric, multiset_distance,
                             point_gap_metric, quasi_energy, skin_localization, steady_state,
                             sublattice_indices)
from nhwalk.walk import Boundary, Coin, WalkConfig, build_step_operator, evolve, initial_state

from conftest import PI, kron_operator, line_gap, point_gap


def spectrum(cfg):
    return full_spectrum(build_step_operator(cfg))


# ------------------------------------------------------------------ full spectrum

def test_quasi_energy_branch():
    e = quasi_energy(np.array([1.0, -1.0, 1j, 2.0, 0.0]))
    assert e[0] == 0
    assert e[1].real == pytest.approx(PI)  # Re E in (-pi, pi]
    assert e[2].real == pytest.approx(-PI / 2)
    assert e[3].imag == pytest.approx(math.log(2))
    assert e[4].imag == -math.inf and e[4].real == 0


def test_unitary_spectrum_on_unit_circle(rng):
    for _ in range(5):
        cfg = WalkConfig(5, *rng.uniform(0, 2 * PI, 4), 0.0, Boundary.CBC)
        assert np.abs(np.abs(spectrum(cfg).eigenvalues) - 1).max() < 1e-10


def test_small_toy_against_characteristic_polynomial():
    cfg = WalkConfig.homogeneous(1, 0.0, 0.0, gamma=0.3, boundary=Boundary.CBC)
    oracle = np.roots(np.poly(kron_operator(cfg)))
    assert multiset_distance(spectrum(cfg).eigenvalues, oracle) < 1e-6
    # S Gamma on three sites: cube roots of e^{3 gamma} and e^{-3 gamma}
    roots = np.exp(2j * PI * np.arange(3) / 3)
    expected = np.concatenate([math.exp(0.3) * roots, math.exp(-0.3) * roots])
    assert multiset_distance(spectrum(cfg).eigenvalues, expected) < 1e-12


def test_spectrum_sorted_and_residuals(rng):
    cfg = point_gap(10, 0.07 * PI)
    sp = spectrum(cfg)
    mods = np.abs(sp.eigenvalues)
    assert (np.diff(np.round(mods, 12)) <= 0).all()
    assert sp.residuals.max() < 1e-8
    np.testing.assert_allclose(np.linalg.norm(sp.eigenvectors, axis=0), 1, atol=1e-12)


# ------------------------------------------------------------------ steady state

def test_steady_state_degenerate_when_unitary():
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(spectrum(WalkConfig(5, 0.3, 0.5, 0.7, 0.9, 0.0, Boundary.CBC)))


def test_line_gap_steady_state_is_edge_state():
    sp = spectrum(line_gap(50, 0.8 * PI))
    lam, vec = steady_state(sp)
    assert abs(lam) == pytest.approx(abs(sp.eigenvalues[0]))
    p = (np.abs(vec) ** 2).reshape(-1, 2).sum(1)
    assert p[45:56].sum() > 0.9  # within five sites of the wall


def test_long_time_evolution_reaches_steady_state():
    cfg = line_gap(25, 0.8 * PI)
    op = build_step_operator(cfg)
    psi = evolve(initial_state(cfg, Coin.H_MINUS_V), op, 10 * cfg.size).amplitudes
    # even step counts keep the walker on the sublattice of the origin
    lam, vec = steady_state(full_spectrum(op))
    idx = sublattice_indices(cfg, 0)
    proj = np.zeros_like(vec)
    proj[idx] = vec[idx]
    proj /= np.linalg.norm(proj)
    assert abs(np.vdot(proj, psi)) > 0.99
    _, dom = dominant_state(op, parity=0)
    assert abs(np.vdot(dom, psi)) > 0.99


def test_dominant_state_ratio_above_one():
    for est in (0.8, 0.85):
        sp = spectrum(line_gap(20, est * PI))
        mods = np.unique(np.round(np.abs(sp.eigenvalues), 9))[::-1]
        assert mods[0] / mods[1] > 1


# ------------------------------------------------------------------ Bloch picture

def test_bloch_operator_identity_and_validation():
    np.testing.assert_allclose(bloch_operator(WalkConfig.homogeneous(3, 0, 0), 0.0), np.eye(2), atol=1e-15)
    with pytest.raises(ValueError, match="homogeneous"):
        bloch_operator(point_gap(3), 0.1)


@pytest.mark.parametrize("n", [5, 25, 50])
def test_bloch_finite_equivalence(n, rng):
    for _ in range(3):
        t1, t2 = rng.uniform(0, 2 * PI, 2)
        cfg = WalkConfig.homogeneous(n, t1, t2, gamma=rng.uniform(0, 0.5), boundary=Boundary.CBC)
        assert multiset_distance(spectrum(cfg).eigenvalues, finite_bloch_spectrum(cfg)) < 1e-9


def test_coinless_loops_are_circles():
    cfg = WalkConfig.homogeneous(3, 0.0, 0.0, gamma=0.3)
    loop = bloch_loop(cfg, 512)
    radii = sorted(float(np.abs(l).mean()) for l in loop.loops)
    assert radii == pytest.approx([math.exp(-0.3), math.exp(0.3)], abs=1e-12)
    report = point_gap_metric(loop, 0j)
    assert sorted(report.loop_windings) == [-1, 1]
    assert point_gap_metric(loop, 10 + 0j).winding == 0
    assert point_gap_metric(loop, 10 + 0j).loop_windings == (0, 0)


def test_point_gap_closes_at_homogeneous_criticality():
    crit = WalkConfig.homogeneous(3, 0.9 * PI, 0.1 * PI, gamma=0.3)
    assert point_gap_metric(bloch_loop(crit), 0.5 + 0j).is_closed
    off = WalkConfig.homogeneous(3, 0.9 * PI, 0.05 * PI, gamma=0.3)
    rep = point_gap_metric(bloch_loop(off), 0j)
    assert not rep.is_closed and rep.loop_area > 1e-2 and rep.authoritative


def test_finite_point_gap_metric_is_heuristic():
    sp = spectrum(point_gap(50, 0.05 * PI, Boundary.CBC))
    assert not point_gap_metric(sp, 0j).authoritative


def test_reference_on_loop_is_rejected():
    loop = bloch_loop(WalkConfig.homogeneous(3, 0.0, 0.0, gamma=0.0))
    with pytest.raises(ValueError, match="lies on"):
        point_gap_metric(loop, 1 + 0j)


@given(t1=st.floats(0.1, 6.0), t2=st.floats(0.1, 6.0), g=st.floats(0.05, 0.5),
       phi=st.floats(0, 2 * math.pi), ref=st.complex_numbers(max_magnitude=2))
@settings(max_examples=30, deadline=None)
def test_winding_refinement_and_rotation_invariance(t1, t2, g, phi, ref):
    cfg = WalkConfig.homogeneous(3, t1, t2, gamma=g)
    coarse, fine = bloch_loop(cfg, 256), bloch_loop(cfg, 1024)
    try:
        a = point_gap_metric(coarse, ref)
        b = point_gap_metric(fine, ref)
    except ValueError:
        return
    from nhwalk.spectral import _distance_to_polygon
    if min(_distance_to_polygon(l, ref) for l in fine.loops) < 1e-2:
        return  # too close to resolve on the coarse grid
    assert a.winding == b.winding
    rot = np.exp(1j * phi)
    turned = BlochLoop(fine.ks, fine.bands * rot, [l * rot for l in fine.loops])
    c = point_gap_metric(turned, ref * rot)
    assert c.winding == b.winding
    assert c.loop_area == pytest.approx(b.loop_area, rel=1e-9, abs=1e-12)


def test_homogeneous_critical_angle():
    plus, minus = homogeneous_critical_angle(0.9 * PI)
    assert plus == pytest.approx(0.1 * PI)
    assert math.cos((0.9 * PI - minus) / 2) == pytest.approx(0, abs=1e-12)
    assert homogeneous_critical_angle(0.0)[0] == pytest.approx(PI)
    plus, minus = homogeneous_critical_angle(PI)
    assert plus == pytest.approx(0.0) and minus == pytest.approx(0.0)


# ------------------------------------------------------------------ line gap

def test_line_gap_one_sided_spectrum():
    sp = spectrum(WalkConfig.homogeneous(4, 0.3, 0.4, gamma=0.2))
    rep = line_gap_metric(sp, LineSpec(10j, 1.0))
    assert rep.both_sides is False and not rep.is_closed


def test_line_gap_closes_at_critical_line_angle():
    closed = spectrum(line_gap(50, 0.779 * PI, Boundary.CBC))
    rep = line_gap_metric(closed, edge_separating_line(closed))
    assert rep.is_closed and rep.both_sides
    opened = spectrum(line_gap(50, 0.8 * PI, Boundary.CBC))
    rep = line_gap_metric(opened, edge_separating_line(opened))
    assert not rep.is_closed and rep.min_line_distance > 1e-2


def test_default_line_is_vertical_axis():
    rep = line_gap_metric(spectrum(line_gap(10, 0.8 * PI, Boundary.CBC)))
    assert rep.line_spec.point == 0 and rep.line_spec.direction == 1j


# ------------------------------------------------------------------ skin effect

def test_population_sums_to_dimension():
    sp = spectrum(point_gap(20, 0.05 * PI))
    prof = skin_localization(sp)
    assert prof.site_population.sum() == pytest.approx(sp.eigenvectors.shape[0], abs=1e-8)
    assert (prof.participation_ratio >= 1 - 1e-12).all()


def test_cbc_unitary_population_uniform():
    prof = skin_localization(spectrum(WalkConfig.homogeneous(20, 0.4, 1.1, gamma=0.0)))
    p = prof.site_population
    assert np.abs(p / p.mean() - 1).max() < 0.05


def test_skin_effect_off_criticality():
    cfg = point_gap(50, 0.05 * PI)
    prof = skin_localization(spectrum(cfg))
    p = prof.site_population
    edges = p[:10].sum() + p[-10:].sum() + p[45:56].sum()
    assert edges / p.sum() > 0.5
    crit = skin_localization(spectrum(point_gap(50, 0.1 * PI)))
    assert crit.mean_participation >= 3 * prof.mean_participation
