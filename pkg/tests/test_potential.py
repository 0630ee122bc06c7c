from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannhole.errors import CatalogError, GeometryError
from neumannhole.geometry import DomainSpec, build_domain, triangulate
from neumannhole.potential import (PotentialModel, eval_potential, from_config, gauge_shift,
                                   mesh_sup_norm, numeric_curl, sup_norm)


def test_zero_field():
    ax, ay = eval_potential(PotentialModel(), 0.3, 0.7)
    assert ax == 0 and ay == 0


def test_uniform_b2_at_1_0():
    ax, ay = eval_potential(PotentialModel.uniform(2.0), 1.0, 0.0)
    assert (ax, ay) == pytest.approx((0.0, 1.0))


def test_uniform_plus_xy_at_1_1():
    m = gauge_shift(PotentialModel.uniform(1.0), "xy", 1.0)
    assert eval_potential(m, 1.0, 1.0) == pytest.approx((0.5, 1.5))


def test_curl_zero_field_exact():
    assert numeric_curl(PotentialModel(), 0.5, 0.5) == 0.0


def test_curl_uniform():
    assert numeric_curl(PotentialModel.uniform(3.0), 0.4, 0.6, step=1e-3) == pytest.approx(3.0, abs=1e-6)


def test_curl_stencil_outside_domain():
    poly = build_domain(DomainSpec.unit_square())
    with pytest.raises(GeometryError):
        numeric_curl(PotentialModel.uniform(1.0), 0.0005, 0.5, step=1e-3, domain_poly=poly)


def test_gauge_amplitude_zero_identity():
    m = PotentialModel.uniform(1.0)
    assert gauge_shift(m, "xy", 0.0) == m


def test_gauge_xy_on_zero_field():
    m = gauge_shift(PotentialModel(), "xy", 1.0)
    assert eval_potential(m, 0.2, 0.7) == pytest.approx((0.7, 0.2))
    assert numeric_curl(m, 0.2, 0.7) == pytest.approx(0.0, abs=1e-6)


def test_gauge_x2_amplitude_two():
    base = PotentialModel.uniform(1.0)
    m = gauge_shift(base, "x2", 2.0)
    x, y = 0.3, 0.8
    a0 = np.array(eval_potential(base, x, y))
    a1 = np.array(eval_potential(m, x, y))
    assert a1 - a0 == pytest.approx((4 * x, 0.0))


def test_unknown_gauge():
    with pytest.raises(CatalogError):
        gauge_shift(PotentialModel(), "exp", 1.0)


def test_from_config():
    m = from_config({"type": "uniform", "b0": 2.0, "gauge": {"chi": "sin(x)cos(y)", "amplitude": 0.5}})
    assert m.b0 == 2.0 and m.gauges == (("sin(x)cos(y)", 0.5),)


@given(chi=st.sampled_from(["xy", "x2", "sin(x)cos(y)"]), amp=st.floats(-3, 3),
       b0=st.floats(-5, 5), seed=st.integers(0, 2**16))
def test_gauge_preserves_curl(chi, amp, b0, seed):
    rng = np.random.default_rng(seed)
    base = PotentialModel.uniform(b0)
    shifted = gauge_shift(base, chi, amp)
    for x, y in rng.uniform(0.05, 0.95, size=(100, 2)):
        assert numeric_curl(shifted, x, y) == pytest.approx(numeric_curl(base, x, y), abs=1e-6)


def test_sup_norm_monotone_in_density():
    m = gauge_shift(PotentialModel.uniform(1.0), "sin(x)cos(y)", 2.0)
    values = [mesh_sup_norm(m, triangulate(DomainSpec.unit_square(), None, 1 / n)) for n in (4, 8, 16, 32)]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


def test_sup_norm_uniform_square():
    pts = np.array([[0, 0], [1, 1], [0.5, 0.5]])
    assert sup_norm(PotentialModel.uniform(2.0), pts) == pytest.approx(np.sqrt(2))
