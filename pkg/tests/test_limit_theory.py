import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefield.field_model import StableFieldSpec
from stablefield.geometry import integral_v_alpha, leb_delta
from stablefield.limit_theory import (
    Bump,
    LimitValue,
    TestFunctionPair,
    c_f,
    c_lvh,
    limit_functional,
    max_limit_conservative,
    order_stats_limit,
    passage_limit_conservative,
    passage_limit_dissipative,
    tail_mass_bound,
    tail_measure,
)


def test_two_point_constants(two_point_field):
    assert order_stats_limit(two_point_field, [1.0]).value == 2.0
    assert order_stats_limit(two_point_field, [1.0, 1.0]).value == 1.0
    assert order_stats_limit(two_point_field, [1.0, 1.0, 1.0]).value == 0.0
    assert passage_limit_dissipative(two_point_field, 1.0, 0.5).value == 1.0
    assert c_f(two_point_field).value == 3.0
    assert order_stats_limit(two_point_field, [2.0], side="two-sided").value == 2.0


def test_tail_measure():
    assert tail_measure(4.0, 0.5) == 0.5


kernels = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).filter(lambda v: any(abs(x) > 1e-3 for x in v))


@settings(max_examples=60, deadline=None)
@given(kernels, st.floats(0.3, 1.9), st.floats(0.2, 5), st.floats(0.2, 5))
def test_homogeneity_and_invariances(f, alpha, y, c):
    spec = StableFieldSpec.dissipative(alpha, f)
    base = order_stats_limit(spec, [y]).value
    assert order_stats_limit(spec, [c * y]).value == pytest.approx(c ** (-alpha) * base, rel=1e-9, abs=1e-300)
    # scaling the kernel by c multiplies every constant by c^alpha
    scaled = StableFieldSpec.dissipative(alpha, [c * x for x in f])
    assert order_stats_limit(scaled, [y]).value == pytest.approx(c**alpha * base, rel=1e-9, abs=1e-300)
    assert c_f(scaled).value == pytest.approx(c * c_f(spec).value, rel=1e-9, abs=1e-300)
    # reflection and sign reversal of the kernel change nothing
    reflected = StableFieldSpec.dissipative(alpha, list(f)[::-1])
    flipped = StableFieldSpec.dissipative(alpha, [-x for x in f])
    for other in (reflected, flipped):
        assert order_stats_limit(other, [y]).value == pytest.approx(base, rel=1e-9)
        assert passage_limit_dissipative(other, y, 0.7).value == pytest.approx(passage_limit_dissipative(spec, y, 0.7).value, rel=1e-9)
    # passage limit scales with lam^d, and the two-sided event dominates the upper one
    assert passage_limit_dissipative(spec, y, 0.5).value == pytest.approx(0.5 * passage_limit_dissipative(spec, y, 1.0).value)
    assert passage_limit_dissipative(spec, y, 1.0, "two-sided").value >= passage_limit_dissipative(spec, y, 1.0).value - 1e-12


def test_order_stats_monotone_in_thresholds(two_point_field):
    vals = [order_stats_limit(two_point_field, [1.0, y]).value for y in (0.1, 0.3, 0.5, 0.8)]
    assert vals == sorted(vals, reverse=True)


def test_translation_of_kernel_support():
    a = StableFieldSpec.dissipative(1.3, [0.0, 1.0, -0.4])
    b = StableFieldSpec.dissipative(1.3, [0.0, 0.0, 0.0, 1.0, -0.4])
    assert order_stats_limit(a, [1.0, 0.2]).value == pytest.approx(order_stats_limit(b, [1.0, 0.2]).value)
    assert c_f(a).value == pytest.approx(c_f(b).value)


def test_multi_w_weights():
    kernel = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    spec = StableFieldSpec(1.0, kernel, np.array([0.25, 0.75]))
    assert order_stats_limit(spec, [1.0]).value == pytest.approx(2 * (0.25 * 1 + 0.75 * 2))


def test_conservative_constants(single_atom_field, diagonal_geometry):
    g = diagonal_geometry
    assert max_limit_conservative(single_atom_field, g, 1.0).value == 4.0
    assert max_limit_conservative(single_atom_field, g, 2.0).value == 2.0
    assert passage_limit_conservative(single_atom_field, g, 1.0, 0.5).value == 2.0
    assert c_lvh(single_atom_field, g).value == pytest.approx(4.0)
    for alpha in (0.5, 1.5):
        spec = StableFieldSpec.conservative(alpha, {single_atom_field.group.identity: 2.0}, single_atom_field.group)
        expected = (integral_v_alpha(alpha, g) * 2.0**alpha) ** (1 / alpha)
        assert c_lvh(spec, g).value == pytest.approx(expected, rel=1e-10)
        assert max_limit_conservative(spec, g, 1.0).value == pytest.approx(leb_delta(g) * 2.0**alpha)


def test_regime_mismatch(two_point_field, single_atom_field, diagonal_geometry):
    with pytest.raises(ValueError):
        c_f(single_atom_field)
    with pytest.raises(ValueError):
        max_limit_conservative(two_point_field, diagonal_geometry, 1.0)
    with pytest.raises(ValueError):
        order_stats_limit(two_point_field, [0.0])


def test_limit_value_rejects_negative():
    with pytest.raises(ValueError):
        LimitValue(-1.0)


@pytest.mark.parametrize("ramp", [1e-2, 1e-3, 1e-4])
def test_functional_approaches_order_stats_limit(two_point_field, ramp):
    pair = TestFunctionPair.exceedance(1.0, 0, 1, ramp, 1 / ramp, ramp)
    val = limit_functional(two_point_field, None, pair)
    assert val.value <= 2.0
    assert val.value == pytest.approx(2.0, rel=5 * ramp)


def test_functional_zero_when_thresholds_unreachable(two_point_field):
    g = Bump.exceedance(1.0, ramp=0.1, height=1.0)
    assert limit_functional(two_point_field, None, TestFunctionPair(g, g, 1e6, 1e6)).value == 0.0


def test_functional_marginalises_unused_neighbours(two_point_field):
    g0 = Bump(3.0, [0.8], [2.0], 0.2)
    lo = np.array([-np.inf, 0.8, -np.inf])
    hi = np.array([np.inf, 2.0, np.inf])
    g1 = Bump(3.0, lo, hi, 0.2)
    v0 = limit_functional(two_point_field, None, TestFunctionPair(g0, g0, 0.5, 0.2))
    v1 = limit_functional(two_point_field.with_q(1), None, TestFunctionPair(g1, g1, 0.5, 0.2))
    assert v0.value > 0
    assert v1.value == pytest.approx(v0.value, rel=1e-9)


def test_functional_time_window_matches_passage(two_point_field):
    # restricting t to [-1/2, 1/2] approximates the passage event with lam = 1/2
    r = 1e-3
    g = Bump(1 / r, [1.0 + r], [np.inf], r, t_lower=[-0.5 + r], t_upper=[0.5 - r], t_ramp=r)
    val = limit_functional(two_point_field, None, TestFunctionPair(g, g, r, r))
    assert val.value == pytest.approx(passage_limit_dissipative(two_point_field, 1.0, 0.5).value, rel=0.02)


def test_functional_bounded_by_tail_certificate(two_point_field):
    g = Bump(5.0, [0.4], [3.0], 0.1)
    pair = TestFunctionPair(g, g, 0.1, 0.1)
    eta = pair.vanishing_radius
    assert eta == pytest.approx(0.3)
    assert limit_functional(two_point_field, None, pair).value <= tail_mass_bound(two_point_field, eta)
    assert tail_mass_bound(two_point_field, 2 * eta) == pytest.approx(2**-1.0 * tail_mass_bound(two_point_field, eta))


def test_functional_scale_invariance():
    # scaling the kernel by c and the bump levels by c leaves the functional times c^-alpha
    alpha, c = 1.4, 2.5
    a = StableFieldSpec.dissipative(alpha, [0.0, 1.0, -0.7])
    b = StableFieldSpec.dissipative(alpha, [0.0, c, -0.7 * c])
    ga = Bump(2.0, [0.5], [1.5], 0.1)
    gb = Bump(2.0, [0.5 * c], [1.5 * c], 0.1 * c)
    va = limit_functional(a, None, TestFunctionPair(ga, ga, 0.3, 0.3)).value
    vb = limit_functional(b, None, TestFunctionPair(gb, gb, 0.3, 0.3)).value
    assert va == pytest.approx(vb, rel=1e-8)


def test_functional_requires_vanishing_near_zero(two_point_field):
    g = Bump(1.0, [-1.0], [1.0], 0.1)
    with pytest.raises(ValueError):
        limit_functional(two_point_field, None, TestFunctionPair(g, g, 0.1, 0.1))


def test_conservative_functional_approaches_max_limit(single_atom_field, diagonal_geometry):
    r = 1e-3
    pair = TestFunctionPair.exceedance(1.0, 0, 2, r, 1 / r, r)
    val = limit_functional(single_atom_field, diagonal_geometry, pair)
    assert val.value == pytest.approx(4.0, rel=0.01)
    assert val.error_bound < 0.01


def test_bump_lipschitz_and_from_center():
    g = Bump.from_center(2.0, [1.0, 0.0], 0.5, 0.75)
    assert np.allclose(g.z_lower, [0.5, -0.5]) and g.z_ramp == pytest.approx(0.25)
    assert g.lipschitz == pytest.approx(2.0 * 4 / 0.25)
    assert g(np.zeros(1), np.array([1.0, 0.0])) == 2.0
    assert g(np.zeros(1), np.array([1.0, 0.8])) == 0.0
    assert math.isclose(g.vanishing_radius, 0.25)
