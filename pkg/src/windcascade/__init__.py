"""Stochastic cascade power maximization for actuator-disk turbine rows."""

from .additive import (
    AdditivePolicyParams,
    GridValueTable,
    expected_cubic,
    grid_dp_additive,
    penultimate_policy,
)
from .dp import (
    GAIN_LOWER,
    GAIN_UPPER,
    CascadeConfig,
    GainStatus,
    PolicySolution,
    StageNoise,
    gain_unconstrained,
    max_power,
    solve_cascade,
    subarray_efficiency,
    value_coefficient,
)
from .errors import SamplerError, ValidationError
from .moments import (
    Family,
    MomentSet,
    SampledDistribution,
    analytic_moments,
    build_sampler,
    central_to_raw,
    raw_to_central,
    sample,
    sample_array,
)
from .oracle import StageComparison, VerificationReport, grid_argmax_stage, verify_policy
from .simulator import (
    BetzGreedyPolicy,
    LinearGainsPolicy,
    Policy,
    SimulationReport,
    TabulatedPolicy,
    Trajectory,
    build_stage_samplers,
    compare_policies,
    estimate_expected_power,
    rollout,
)

__version__ = "0.1.0"

__all__ = [
    "AdditivePolicyParams",
    "BetzGreedyPolicy",
    "CascadeConfig",
    "Family",
    "GAIN_LOWER",
    "GAIN_UPPER",
    "GainStatus",
    "GridValueTable",
    "LinearGainsPolicy",
    "MomentSet",
    "Policy",
    "PolicySolution",
    "SampledDistribution",
    "SamplerError",
    "SimulationReport",
    "StageComparison",
    "StageNoise",
    "TabulatedPolicy",
    "Trajectory",
    "ValidationError",
    "VerificationReport",
    "analytic_moments",
    "build_sampler",
    "build_stage_samplers",
    "central_to_raw",
    "compare_policies",
    "estimate_expected_power",
    "expected_cubic",
    "gain_unconstrained",
    "grid_argmax_stage",
    "grid_dp_additive",
    "max_power",
    "penultimate_policy",
    "raw_to_central",
    "rollout",
    "sample",
    "sample_array",
    "solve_cascade",
    "subarray_efficiency",
    "value_coefficient",
    "verify_policy",
]
