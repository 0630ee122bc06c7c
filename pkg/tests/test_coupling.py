from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannhole.assembly import assemble, norm0
from neumannhole.coupling import (CouplingPair, TestSet, angular_energy, annulus_energy,
                                  choose_radius, closeness_report, default_test_set, estimate_delta,
                                  extend_radial_J1prime, extend_zero_Jprime, restrict_J,
                                  trace_on_circle)
from neumannhole.eigen import solve_lowest
from neumannhole.errors import DegenerateInputError
from neumannhole.experiments import fit_rate
from neumannhole.geometry import DomainSpec, HoleSpec, triangulate
from neumannhole.potential import PotentialModel

POT = PotentialModel.uniform(1.0)
CENTER = (0.5, 0.5)


def _pair(parent, eps, kind="disk", h=None):
    square = DomainSpec.unit_square()
    child = triangulate(square, HoleSpec(kind=kind, center=CENTER, eps=eps), parent.h, parent=parent)
    return CouplingPair(assemble(parent, POT), assemble(child, POT), CENTER, eps)


@pytest.fixture(scope="module")
def cp(coarse_parent):
    return _pair(coarse_parent, 0.2)


@pytest.fixture(scope="module")
def spectra(cp):
    return solve_lowest(cp.omega, 8), solve_lowest(cp.hole, 8)


def test_restrict_constant(cp):
    f = np.ones(cp.parent_mesh.n_nodes)
    assert np.array_equal(restrict_J(cp, f), np.ones(cp.child_mesh.n_nodes))


def test_restrict_eigenvector_mass(cp, spectra):
    for f in spectra[0].eigenvectors.T:
        assert norm0(cp.hole, restrict_J(cp, f)) <= norm0(cp.omega, f)


def test_restrict_interior_indicator(cp):
    f = np.zeros(cp.parent_mesh.n_nodes)
    f[cp.interior[0]] = 1.0
    assert not restrict_J(cp, f).any()


def test_extend_zero(cp):
    assert not extend_zero_Jprime(cp, np.zeros(cp.child_mesh.n_nodes)).any()
    out = extend_zero_Jprime(cp, np.ones(cp.child_mesh.n_nodes))
    assert np.all(out[cp.node_map] == 1) and np.all(out[cp.interior] == 0)


@given(seed=st.integers(0, 10_000))
def test_JJprime_identity(cp, seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=cp.child_mesh.n_nodes) + 1j * rng.normal(size=cp.child_mesh.n_nodes)
    assert np.array_equal(restrict_J(cp, extend_zero_Jprime(cp, u)), u)


def test_slit_Jprime_averages_copies(coarse_parent):
    cps = _pair(coarse_parent, 0.2, kind="segment-slit")
    f = np.random.default_rng(0).normal(size=coarse_parent.n_nodes)
    # a field continuous across the slit survives J J' unchanged
    u = restrict_J(cps, f)
    assert np.array_equal(extend_zero_Jprime(cps, u), f)


def test_choose_radius_constant(cp):
    u = np.full(cp.child_mesh.n_nodes, 2.0 + 1j)
    rho, e = choose_radius(cp, u)
    assert cp.eps < rho < 2 * cp.eps
    assert e == pytest.approx(0.0, abs=1e-20)


def test_choose_radius_linear_field(cp):
    u = cp.child_mesh.nodes[:, 0].astype(complex)
    rho, e = choose_radius(cp, u)
    from neumannhole.coupling import sample_radii
    assert rho == sample_radii(cp)[0]
    assert e == pytest.approx(np.pi * rho ** 2, rel=1e-3)


def test_angular_energy_sine():
    phi = 2 * np.pi * np.arange(256) / 256
    d = 2 * np.pi / 256
    # centred differences damp mode k by sin(k d) / (k d)
    assert angular_energy(np.sin(3 * phi)) == pytest.approx(
        9 * np.pi * (np.sin(3 * d) / (3 * d)) ** 2, rel=1e-12)
    assert angular_energy(np.sin(3 * phi)) == pytest.approx(9 * np.pi, rel=3e-3)


def test_choose_radius_auxiliary_bound(cp, spectra):
    for u in spectra[1].eigenvectors.T:
        _, e = choose_radius(cp, u)
        assert e <= 1.1 * 4 * annulus_energy(cp, u)


def test_radial_extension_constant(cp):
    u = np.ones(cp.child_mesh.n_nodes)
    rho, _ = choose_radius(cp, u)
    v = extend_radial_J1prime(cp, u, rho)
    inside = cp.r < rho
    assert np.allclose(v[inside], cp.r[inside] / rho)
    assert np.all(v[~inside] == 1)


def test_radial_extension_center_node(cp, spectra):
    centre = np.flatnonzero(cp.r == 0)
    assert len(centre) == 1
    v = extend_radial_J1prime(cp, spectra[1].eigenvectors[:, 2])
    assert v[centre[0]] == 0


def test_radial_extension_energy_bound(cp, spectra):
    n_phi = 256
    for u in spectra[1].eigenvectors.T:
        rho, e_ang = choose_radius(cp, u)
        v = extend_radial_J1prime(cp, u, rho)
        _, _, K0 = cp.omega.restricted(cp.ball_mask(rho))
        lhs = np.vdot(v, K0 @ v).real
        trace = np.sum(np.abs(trace_on_circle(cp, u, rho, n_phi)) ** 2) * 2 * np.pi / n_phi
        assert lhs <= 1.1 * 4 * (trace + e_ang)


def test_condition_values(cp, spectra):
    ts = default_test_set(cp, *spectra)
    rep = closeness_report(cp, ts)
    assert rep.delta["1"] == 0.0 and rep.delta["3"] == 0.0
    assert rep.delta["4"] <= 2.0
    assert all(v >= 0 for v in rep.delta.values())
    assert all(cp.eps < r < 2 * cp.eps for r in rep.radii)
    assert "seed 0" in ts.description


def test_estimate_single_condition(cp, spectra):
    ts = default_test_set(cp, *spectra)
    assert estimate_delta(cp, "5'", ts) == closeness_report(cp, ts).delta["5'"]


def test_zero_test_function(cp):
    ts = TestSet([np.zeros(cp.parent_mesh.n_nodes)], [np.ones(cp.child_mesh.n_nodes)])
    with pytest.raises(DegenerateInputError):
        estimate_delta(cp, "5'", ts)


def test_empty_test_set(cp):
    with pytest.raises(DegenerateInputError):
        estimate_delta(cp, "1", TestSet([], []))


def test_no_hole_is_exact(coarse_parent):
    square = DomainSpec.unit_square()
    child = triangulate(square, HoleSpec(kind="none"), coarse_parent.h, parent=coarse_parent)
    cp0 = CouplingPair(assemble(coarse_parent, POT), assemble(child, POT), CENTER, 0.0)
    so, sh = solve_lowest(cp0.omega, 8), solve_lowest(cp0.hole, 8)
    rep = closeness_report(cp0, default_test_set(cp0, so, sh))
    assert max(rep.delta[c] for c in ("1", "2", "3", "5'", "6", "7")) <= 1e-10


@pytest.fixture(scope="module")
def trend():
    square = DomainSpec.unit_square()
    parent = triangulate(square, None, 1 / 80)
    fo = assemble(parent, POT)
    so = solve_lowest(fo, 8)
    out = {}
    for eps in (0.2, 0.1, 0.05):
        child = triangulate(square, HoleSpec(kind="disk", center=CENTER, eps=eps), parent.h, parent=parent)
        fh = assemble(child, POT)
        c = CouplingPair(fo, fh, CENTER, eps)
        out[eps] = closeness_report(c, default_test_set(c, so, solve_lowest(fh, 8))).delta
    return out


def test_delta5p_trend(trend):
    vals = [trend[e]["5'"] for e in (0.2, 0.1, 0.05)]
    assert vals[0] > vals[1] > vals[2]
    assert fit_rate(list(zip((0.2, 0.1, 0.05), vals))).p >= 0.4


def test_delta7_trend(trend):
    vals = [trend[e]["7"] for e in (0.2, 0.1, 0.05)]
    assert vals[0] > vals[1] > vals[2]
    assert fit_rate(list(zip((0.2, 0.1, 0.05), vals))).p > 0
