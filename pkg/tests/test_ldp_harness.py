import json
import math

import numpy as np
import pytest

from stablefield.field_model import ConfigError, StableFieldSpec, series_scale_factor
from stablefield.ldp_harness import (
    CSV_HEADER,
    EstimateRecord,
    EventSpec,
    ExperimentConfig,
    empirical_point_functional,
    fit_tail_exponent,
    records_to_csv,
    run_ldp_experiment,
    sigma_equivalence_check,
    summarize,
    weak_convergence_check,
)
from stablefield.limit_theory import Bump, TestFunctionPair


def cfg(spec, event, ns=(20,), R=5000, seed=1, delta=0.5, **kw):
    return ExperimentConfig(spec, ns, delta, R, seed, event, **kw)


def test_reproducible_across_thread_counts(two_point_field):
    ev = EventSpec.order_stats(1.0)
    a = run_ldp_experiment(cfg(two_point_field, ev, (10, 20), R=9000, parallelism=1))
    b = run_ldp_experiment(cfg(two_point_field, ev, (10, 20), R=9000, parallelism=3))
    assert a == b
    c = run_ldp_experiment(cfg(two_point_field, ev, (10, 20), R=9000, seed=2))
    assert a != c


def test_common_random_numbers_make_order_stats_monotone(two_point_field):
    vals = [run_ldp_experiment(cfg(two_point_field, EventSpec.order_stats(1.0, y), R=20000))[0].p_hat for y in (0.05, 0.2, 0.5, 1.0)]
    assert vals == sorted(vals, reverse=True)


def test_standard_error_is_binomial(two_point_field):
    r = run_ldp_experiment(cfg(two_point_field, EventSpec.max_exceed(1.0), R=4000))[0]
    assert r.se == pytest.approx(math.sqrt(r.p_hat * (1 - r.p_hat) / 4000))
    assert 0 <= r.p_hat <= 1
    assert r.scaled == pytest.approx(r.p_hat * r.scaling / r.n)


def test_unreachable_event_scales_to_zero(two_point_field):
    r = run_ldp_experiment(cfg(two_point_field, EventSpec.sum_exceed(1e12), R=2000))[0]
    assert r.p_hat == 0.0 and r.scaled == 0.0 and r.ratio == 0.0


def test_zero_limit_gives_infinite_ratio(two_point_field):
    ev = EventSpec.order_stats(0.01, 0.01, 0.01)
    r = run_ldp_experiment(cfg(two_point_field, ev, (5,), R=5000, delta=0.1))[0]
    assert r.limit == 0.0
    assert r.p_hat > 0 and r.ratio == math.inf


def test_event_regime_mismatch(single_atom_field, diagonal_geometry, two_point_field):
    with pytest.raises(ConfigError):
        cfg(single_atom_field, EventSpec.order_stats(1.0), geometry=diagonal_geometry)
    with pytest.raises(ConfigError):
        cfg(single_atom_field, EventSpec.max_exceed(1.0))
    with pytest.raises(ConfigError):
        cfg(two_point_field, EventSpec.max_exceed(1.0), ns=())
    with pytest.raises(ConfigError):
        cfg(two_point_field, EventSpec.max_exceed(1.0), ns=(10, 5))
    with pytest.raises(ConfigError):
        EventSpec.max_exceed(-1.0)
    with pytest.raises(ConfigError):
        EventSpec.passage(1.0, 1.5)


def test_dissipative_order_stats_near_limit(two_point_field):
    r = run_ldp_experiment(cfg(two_point_field, EventSpec.order_stats(1.0), (100,), R=100000))[0]
    assert abs(r.scaled - 2.0) <= 3 * r.scaled_se + 0.2 * 2.0


def test_conservative_max_matches_exact_finite_n(single_atom_field, diagonal_geometry):
    # 4n + 1 independent Cauchy(pi) sites: P(max > b) = 1 - (1 - P(Z > b))^(4n+1)
    n = 40
    r = run_ldp_experiment(cfg(single_atom_field, EventSpec.max_exceed(1.0), (n,), R=40000, geometry=diagonal_geometry))[0]
    b = n**1.5
    p1 = math.atan(math.pi / b) / math.pi
    exact = 1 - (1 - p1) ** (4 * n + 1)
    assert abs(r.p_hat - exact) < 4 * r.se
    assert r.limit == 4.0


def test_conservative_sum_uses_multiplicities(single_atom_field, diagonal_geometry):
    r = run_ldp_experiment(cfg(single_atom_field, EventSpec.sum_exceed(1.0), (10,), R=40000, geometry=diagonal_geometry))[0]
    assert r.oracle is not None
    assert abs(r.scaled - r.oracle) < 4 * r.scaled_se
    assert r.limit == pytest.approx(4.0)


def test_sum_exceed_two_sided_doubles(two_point_field):
    up = run_ldp_experiment(cfg(two_point_field, EventSpec.sum_exceed(1.0), R=40000))[0]
    two = run_ldp_experiment(cfg(two_point_field, EventSpec.sum_exceed(1.0, side="two-sided"), R=40000, seed=3))[0]
    assert two.limit == 2 * up.limit
    assert two.oracle == pytest.approx(2 * up.oracle)
    assert abs(two.scaled - two.oracle) < 4 * two.scaled_se


def test_passage_event(two_point_field):
    r = run_ldp_experiment(cfg(two_point_field, EventSpec.passage(1.0, 0.5), (60,), R=40000))[0]
    assert r.limit == 1.0
    assert 0.7 < r.ratio < 1.1


def test_functional_with_unreachable_eps(two_point_field):
    g = Bump.exceedance(1.0)
    r = empirical_point_functional(cfg(two_point_field, EventSpec.functional(TestFunctionPair(g, g, 1e9, 1e9)), R=500))[0]
    assert r.p_hat == 0.0 and r.scaled == 0.0


def test_functional_marginal_consistency(two_point_field):
    g0 = Bump(1e3, [1.001], [np.inf], 1e-3)
    g1 = Bump(1e3, [-np.inf, 1.001, -np.inf], [np.inf, np.inf, np.inf], 1e-3)
    r0 = empirical_point_functional(cfg(two_point_field, EventSpec.functional(TestFunctionPair(g0, g0, 1e-3, 1e-3)), (30,), R=30000))[0]
    spec1 = two_point_field.with_q(1)
    r1 = empirical_point_functional(cfg(spec1, EventSpec.functional(TestFunctionPair(g1, g1, 1e-3, 1e-3)), (30,), R=30000, seed=5))[0]
    assert abs(r0.scaled - r1.scaled) < 4 * math.hypot(r0.scaled_se, r1.scaled_se)
    assert r0.limit == pytest.approx(r1.limit, rel=1e-9)


def test_functional_rejects_wrong_neighbourhood(two_point_field):
    g = Bump(1.0, [0.5, 0.5, 0.5], [1, 1, 1], 0.1)
    with pytest.raises(ConfigError):
        cfg(two_point_field, EventSpec.functional(TestFunctionPair(g, g, 0.1, 0.1)))


def test_conservative_functional_runs(single_atom_field, diagonal_geometry):
    pair = TestFunctionPair.exceedance(1.0, 0, 2, 1e-3, 1e3, 1e-3)
    r = empirical_point_functional(cfg(single_atom_field, EventSpec.functional(pair), (10,), R=2000, geometry=diagonal_geometry))[0]
    m = run_ldp_experiment(cfg(single_atom_field, EventSpec.max_exceed(1.0), (10,), R=2000, geometry=diagonal_geometry))[0]
    # same seed and layout: the sharp bump reproduces the max event almost surely
    assert abs(r.p_hat - m.p_hat) <= 0.01


def test_fit_tail_exponent_exact():
    recs = [EstimateRecord("dissipative", "x", n, n**1.5, 1, 3.0 * n * (n**1.5) ** -1.2, 0, 0, 1, 1) for n in (10, 20, 40)]
    assert fit_tail_exponent(recs, 1) == pytest.approx(-1.2)
    assert fit_tail_exponent(recs[:1], 1) is None


def test_weak_convergence_dissipative(two_point_field):
    rep = weak_convergence_check(two_point_field, 100, 3000, seed=4)
    assert rep.constant == 2.0
    assert rep.ks_distance < 0.04
    with pytest.raises(ValueError):
        weak_convergence_check(two_point_field, 100, 10)


def test_weak_convergence_positive_kernel_only_upper():
    spec = StableFieldSpec.dissipative(1.2, [0.0, 1.0, 0.3])
    rep = weak_convergence_check(spec, 50, 2000, seed=1)
    assert rep.constant == pytest.approx(2.0)


def test_sigma_equivalence(two_point_field):
    out = sigma_equivalence_check(two_point_field, [50, 100, 200])
    assert out["constant"] == 3.0
    normed = [row["normalised"] for row in out["rows"]]
    assert normed[-1] == pytest.approx(3 * math.pi, rel=0.01)
    assert out["expected_factor"] == pytest.approx(series_scale_factor(1.0))
    assert out["relative_gap"] < 0.01
    cancel = sigma_equivalence_check(StableFieldSpec.dissipative(1.0, [0.0, 1.0, -1.0]), [10, 100])
    assert cancel["rows"][1]["normalised"] < cancel["rows"][0]["normalised"] / 5
    zero = sigma_equivalence_check(StableFieldSpec.dissipative(1.0, [0.0]), [10])
    assert zero["rows"][0]["sigma_n"] == 0.0


def test_sigma_equivalence_conservative(single_atom_field, diagonal_geometry):
    out = sigma_equivalence_check(single_atom_field, [20, 80], diagonal_geometry)
    assert out["constant"] == pytest.approx(4.0)
    assert out["rows"][-1]["factor"] == pytest.approx(math.pi, rel=0.05)


def test_csv_and_summary(two_point_field):
    c = cfg(two_point_field, EventSpec.sum_exceed(1.0), (10, 20), R=2000)
    recs = run_ldp_experiment(c)
    text = records_to_csv(recs, "config-hash: abc")
    lines = text.splitlines()
    assert lines[0] == "# config-hash: abc"
    assert lines[1] == ",".join(CSV_HEADER)
    assert lines[2].startswith("dissipative,sumExceed(y=1),10,")
    summary = summarize(c, recs, sigma=sigma_equivalence_check(two_point_field, [10, 20]))
    json.dumps(summary, allow_nan=False)
    assert summary["oracleRatios"][0] == pytest.approx(recs[0].oracle_ratio)
