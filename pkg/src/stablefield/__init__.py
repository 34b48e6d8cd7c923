"""Stationary symmetric alpha-stable random fields: lattice structure, simulation and large deviations."""

from .field_model import (
    ConfigError,
    FieldLayout,
    FieldSample,
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
    stable_cdf,
)
from .geometry import ActionGeometry, UnsupportedGeometryError, integral_v_alpha, leb_delta, q_volume
from .lattice_algebra import (
    CapacityError,
    GroupStructure,
    HElement,
    InvalidActionError,
    analyze_action,
    coset_counts,
    count_coset_points,
    enumerate_Hn,
    h_add,
    h_inv,
    h_norm,
    project_to_H,
    smith_normal_form,
    trivial_action,
)
from .ldp_harness import (
    EstimateRecord,
    EventSpec,
    ExperimentConfig,
    empirical_point_functional,
    run_ldp_experiment,
    sigma_equivalence_check,
    weak_convergence_check,
)
from .limit_theory import (
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
)

__version__ = "0.1.0"
