import math
import warnings

import mpmath
import numpy as np
import pytest
from scipy import stats

from stablefield.field_model import (
    ConfigError,
    FieldLayout,
    RngStream,
    SaturationWarning,
    StableFieldSpec,
    c_alpha,
    exact_scale,
    kernel_from_entries,
    sample_field_exact,
    sample_field_series,
    sample_sas,
    series_scale_factor,
    small_jump_variance,
    stable_cdf,
    stable_quantile,
)
from stablefield.lattice_algebra import HElement, analyze_action, project_to_H


def sine_integral_inverse(alpha):
    """``(int_0^inf x^-alpha sin x dx)^-1``; the singular part on [0, 1] is integrated in closed form."""
    with mpmath.workdps(30):
        a = mpmath.mpf(alpha)
        head = mpmath.quad(lambda x: x ** (-a) * (mpmath.sin(x) - x), [0, 1]) + 1 / (2 - a)
        tail = mpmath.quadosc(lambda x: x ** (-a) * mpmath.sin(x), [1, mpmath.inf], omega=1)
        return float(1 / (head + tail))


@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.9, 1.7, 1.99])
def test_c_alpha_against_quadrature(alpha):
    assert c_alpha(alpha) == pytest.approx(sine_integral_inverse(alpha), rel=1e-12)


def test_c_alpha_continuous_at_one():
    below, at, above = c_alpha(1 - 1e-7), c_alpha(1.0), c_alpha(1 + 1e-7)
    assert at == pytest.approx(2 / math.pi)
    assert abs(below - at) < 1e-6 and abs(above - at) < 1e-6


def test_c_alpha_domain():
    for bad in (0.0, 2.0, -1.0):
        with pytest.raises(ValueError):
            c_alpha(bad)


def test_rng_streams_reproducible_and_distinct():
    a = RngStream(5, 1).generator().standard_normal(4)
    b = RngStream(5, 1).generator().standard_normal(4)
    c = RngStream(5, 2).generator().standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.4])
def test_sample_sas_matches_scipy(alpha):
    x = sample_sas(alpha, 2.0, RngStream(1), size=4000)
    ref = stats.levy_stable(alpha, 0.0, scale=2.0)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


def test_sample_sas_small_alpha_saturates():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        x = sample_sas(0.005, 1.0, RngStream(3), size=2000)
    assert np.all(np.isfinite(x))
    assert any(issubclass(w.category, SaturationWarning) for w in rec)


def test_spec_validation():
    with pytest.raises(ConfigError, match=r"alpha must lie in \(0,2\)"):
        StableFieldSpec.dissipative(2.0, [1.0])
    with pytest.raises(ConfigError):
        StableFieldSpec.dissipative(1.0, [1.0, 2.0])  # even side length
    with pytest.raises(ConfigError):
        StableFieldSpec(1.0, np.ones((2, 3)), np.array([1.0]))


def test_kernel_from_entries():
    k = kernel_from_entries({(0,): 1.0, (1,): 0.5}, d=1)
    assert k.tolist() == [[0.0, 1.0, 0.5]]
    k2 = kernel_from_entries({(1, 0, 1): 2.0}, d=2, n_w=2)
    assert k2.shape == (2, 3, 3) and k2[1, 1, 2] == 2.0


def test_exact_scale_closed_forms(two_point_field):
    alpha = 1.0
    c = np.zeros(3)
    c[1] = 1.0
    assert exact_scale(two_point_field, c) == pytest.approx(1.5 * math.pi)
    n = 10
    assert exact_scale(two_point_field, np.ones(2 * n + 1)) == pytest.approx(1.5 * math.pi * (2 * n + 1))
    cancel = StableFieldSpec.dissipative(alpha, [0.0, 1.0, -1.0])
    # interior terms cancel, two boundary atoms survive
    assert exact_scale(cancel, np.ones(2 * n + 1)) == pytest.approx(2 * math.pi)
    zero = StableFieldSpec.dissipative(alpha, [0.0])
    assert exact_scale(zero, np.ones(5)) == 0.0


def test_exact_scale_conservative(single_atom_field):
    # every window point with the same projection shares one atom
    n = 3
    G = single_atom_field.group
    layout = FieldLayout(single_atom_field, n)
    total = (layout.multiplicity.astype(float) ** 1.0).sum()
    assert exact_scale(single_atom_field, np.ones((2 * n + 1,) * 2)) == pytest.approx(math.pi * total)
    assert layout.n_sites == 4 * n + 1
    assert G.l == 1


def _ks_two_sample(a, b):
    return stats.ks_2samp(a, b).pvalue


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5])
def test_exact_and_series_agree(alpha):
    spec = StableFieldSpec.dissipative(alpha, [0.0, 1.0, 0.5])
    layout = FieldLayout(spec, 0)
    ex = layout.sample_exact(RngStream(11, 0).generator(), 30000)[:, 0]
    se = layout.sample_series(RngStream(11, 1).generator(), 30000, eps=0.05)[:, 0]
    assert _ks_two_sample(ex, se) > 1e-3


def test_series_without_compensation_reports_truncation(two_point_field):
    s = sample_field_series(two_point_field, 3, 0.1, RngStream(2))
    assert s.truncation_sd == pytest.approx(math.sqrt(small_jump_variance(1.0, 0.1) * 1.25))
    assert s.values.shape == (7,)


def test_field_marginal_is_stable(two_point_field):
    layout = FieldLayout(two_point_field, 0)
    x = layout.sample_exact(RngStream(4).generator(), 50000)[:, 0]
    sigma = exact_scale(two_point_field, np.ones(1))
    assert stats.kstest(x, lambda z: stats.cauchy.cdf(z, scale=sigma)).pvalue > 1e-3


def test_stationarity_and_symmetry(two_point_field):
    layout = FieldLayout(two_point_field, 5)
    x = layout.sample_exact(RngStream(8).generator(), 40000)
    assert stats.ks_2samp(x[:, 0], x[:, 7]).pvalue > 1e-3
    assert stats.ks_2samp(x[:, 3], -x[:, 3]).pvalue > 1e-3
    # lag-one dependence is shift invariant
    pairs = [(x[:, i], x[:, i + 1]) for i in (0, 6)]
    conc = [np.mean(np.sign(a) == np.sign(b)) for a, b in pairs]
    assert abs(conc[0] - conc[1]) < 0.02


def test_conservative_field_is_kernel_periodic(single_atom_field):
    s = sample_field_exact(single_atom_field, 4, RngStream(9))
    G = single_atom_field.group
    v = s.values
    # shifting along the kernel (1,1) leaves the field unchanged
    assert np.array_equal(v[:-1, :-1], v[1:, 1:])
    assert project_to_H((1, 1), G) == G.identity


def test_conservative_torsion_layout():
    G = analyze_action(np.array([[2], [0]]))
    spec = StableFieldSpec.conservative(1.2, {G.identity: 1.0, HElement(1, (0,)): -0.5}, G)
    s = sample_field_exact(spec, 3, RngStream(2))
    assert np.array_equal(s.values[:-2, :], s.values[2:, :])


def test_marginal_tail(two_point_field):
    # P(X_0 > x) ~ ||f||_alpha^alpha x^-alpha in the series convention
    layout = FieldLayout(two_point_field, 0)
    x = layout.sample_exact(RngStream(6).generator(), 400000)[:, 0]
    thr = 200.0
    p = np.mean(x > thr)
    assert p * thr == pytest.approx(1.5, rel=0.1)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_stable_cdf_against_scipy(alpha):
    ref = stats.levy_stable(alpha, 0.0)
    for z in (-3.0, -0.4, 0.0, 1.0, 5.0):
        assert stable_cdf(z, alpha) == pytest.approx(ref.cdf(z), abs=2e-6)
    q = stable_quantile(0.75, alpha, 2.0)
    assert stable_cdf(q / 2.0, alpha) == pytest.approx(0.75, abs=1e-9)


def test_series_scale_factor_value():
    assert series_scale_factor(1.0) == pytest.approx(math.pi)
    assert series_scale_factor(0.5) == pytest.approx((2 / c_alpha(0.5)) ** 2)


def test_field_sample_csv(two_point_field):
    s = sample_field_exact(two_point_field, 1, RngStream(1))
    lines = s.to_csv().splitlines()
    assert lines[0] == "t1,value" and len(lines) == 4
    assert float(lines[2].split(",")[1]) == s.values[1]
