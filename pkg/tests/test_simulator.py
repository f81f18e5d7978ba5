"""Monte Carlo simulator tests."""

import numpy as np
import pytest

from windcascade.additive import grid_dp_additive
from windcascade.dp import CascadeConfig, StageNoise, max_power, solve_cascade
from windcascade.errors import SamplerError, ValidationError
from windcascade.moments import Family
from windcascade.simulator import (
    BetzGreedyPolicy,
    LinearGainsPolicy,
    TabulatedPolicy,
    build_stage_samplers,
    compare_policies,
    estimate_expected_power,
    rollout,
)

DET2 = CascadeConfig.homogeneous(2, StageNoise.deterministic())


def test_linear_policy_validates_gains():
    LinearGainsPolicy([0.0, 0.5])
    with pytest.raises(ValidationError):
        LinearGainsPolicy([0.6])
    with pytest.raises(ValidationError):
        LinearGainsPolicy([-0.1])


def test_rollout_deterministic_trajectory():
    solution = solve_cascade(DET2)
    policy = LinearGainsPolicy.from_solution(solution)
    samplers = build_stage_samplers(DET2)
    trajectory = rollout(DET2, policy, samplers, np.random.default_rng(0))
    # x0=1, psi0=1/5: u=0.2, wake 1-0.4=0.6; then Betz stage
    assert trajectory.states == pytest.approx((1.0, 0.6, 0.2))
    assert trajectory.controls == pytest.approx((0.2, 0.2))
    assert trajectory.disk_velocities == pytest.approx((0.8, 0.4))
    coeff = 2.0 * DET2.rho * DET2.area
    assert trajectory.powers == pytest.approx((coeff * 0.128, coeff * 0.032))
    assert trajectory.total_power == pytest.approx(coeff * 4.0 / 25.0)
    assert trajectory.clamped_state_events == 0


def test_rollout_checks_sampler_consistency():
    policy = BetzGreedyPolicy()
    wrong_count = build_stage_samplers(CascadeConfig.homogeneous(3, StageNoise.deterministic()))
    with pytest.raises(ValidationError):
        rollout(DET2, policy, wrong_count, np.random.default_rng(0))
    other_noise = CascadeConfig.homogeneous(2, StageNoise.from_central(mu_a=0.9, mu_b=-2.0))
    with pytest.raises(ValidationError):
        rollout(DET2, policy, build_stage_samplers(other_noise), np.random.default_rng(0))


def test_single_sample_deterministic_estimates_are_exact():
    solution = solve_cascade(DET2)
    optimal = LinearGainsPolicy.from_solution(solution)
    report = estimate_expected_power(DET2, optimal, n_samples=1, seed=0)
    assert report.mean_total_power == pytest.approx(
        max_power(4.0 / 25.0, DET2.rho, DET2.area, DET2.x0), abs=1e-14
    )
    assert report.std_error == 0.0
    # leading subarray takes 4Q0 of the available power, trailing one is Betz
    assert report.per_subarray_efficiency[0] == pytest.approx(16.0 / 25.0, abs=1e-12)
    assert report.per_subarray_efficiency[1] == pytest.approx(16.0 / 27.0, abs=1e-12)

    betz = BetzGreedyPolicy()
    betz_report = estimate_expected_power(DET2, betz, n_samples=1, seed=0)
    assert betz_report.mean_total_power == pytest.approx(
        max_power(112.0 / 729.0, DET2.rho, DET2.area, DET2.x0), abs=1e-14
    )


def test_same_seed_reproduces_everything():
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_b=0.4)
    config = CascadeConfig.homogeneous(4, noise)
    policy = LinearGainsPolicy.from_solution(solve_cascade(config))
    first = estimate_expected_power(config, policy, n_samples=5000, seed=123)
    second = estimate_expected_power(config, policy, n_samples=5000, seed=123)
    assert first == second
    third = estimate_expected_power(config, policy, n_samples=5000, seed=124)
    assert third.mean_total_power != first.mean_total_power


def test_monte_carlo_tracks_analytic_value():
    noise = StageNoise.from_central(mu_a=0.98, mu_b=-2.0, sigma_a=0.05, sigma_b=0.3)
    config = CascadeConfig.homogeneous(5, noise)
    solution = solve_cascade(config)
    policy = LinearGainsPolicy.from_solution(solution)
    report = estimate_expected_power(config, policy, n_samples=200_000, seed=9)
    target = max_power(solution.coefficients[0], config.rho, config.area, config.x0)
    assert abs(report.mean_total_power - target) <= 4.0 * report.std_error
    assert report.per_subarray_efficiency[0] == pytest.approx(
        4.0 * solution.coefficients[0], abs=5e-3
    )


def test_negative_states_are_clamped_and_counted():
    # a ~ two-point on {1.5, -0.5}: with controls off, half of the first
    # transitions go negative; surviving states fail again half the time,
    # putting the expected per-transition fraction at (0.5 + 0.25) / 2.
    noise = StageNoise.from_central(mu_a=0.5, mu_b=-2.0, sigma_a=1.0)
    config = CascadeConfig.homogeneous(2, noise)
    policy = LinearGainsPolicy([0.0, 0.0])
    report = estimate_expected_power(config, policy, n_samples=40_000, seed=21)
    assert 0.35 < report.negative_state_fraction < 0.40

    samplers = build_stage_samplers(config)
    rng = np.random.default_rng(2)
    for _ in range(50):
        trajectory = rollout(config, policy, samplers, rng)
        assert all(s >= 0.0 for s in trajectory.states)


def test_compare_policies_common_random_numbers():
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_b=0.4)
    config = CascadeConfig.homogeneous(3, noise)
    solution = solve_cascade(config)
    optimal = LinearGainsPolicy.from_solution(solution)
    twin = LinearGainsPolicy(solution.gains, name="twin")
    betz = BetzGreedyPolicy()

    reports = compare_policies(config, [optimal, twin, betz], n_samples=20_000, seed=5)
    assert [r.mean_total_power for r in reports] == sorted(
        (r.mean_total_power for r in reports), reverse=True
    )
    by_name = {r.policy_name: r for r in reports}
    # identical policies see identical draws, so the whole report matches
    assert by_name["optimal"].mean_total_power == by_name["twin"].mean_total_power
    assert by_name["optimal"].std_error == by_name["twin"].std_error
    assert by_name["optimal"].mean_total_power > by_name["betz"].mean_total_power


def test_compare_policies_needs_two():
    with pytest.raises(ValidationError):
        compare_policies(DET2, [BetzGreedyPolicy()], n_samples=10, seed=0)


def test_estimate_validates_sample_count():
    with pytest.raises(ValidationError):
        estimate_expected_power(DET2, BetzGreedyPolicy(), n_samples=0, seed=0)


def test_family_incompatibility_surfaces_as_sampler_error():
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_b=0.3, gamma_b=1.0)
    config = CascadeConfig.homogeneous(2, noise)
    with pytest.raises(SamplerError):
        estimate_expected_power(config, BetzGreedyPolicy(), n_samples=10, seed=0, family=Family.NORMAL)


def test_normal_family_runs_when_symmetric():
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_b=0.3)
    config = CascadeConfig.homogeneous(2, noise)
    report = estimate_expected_power(
        config, BetzGreedyPolicy(), n_samples=50_000, seed=3, family=Family.NORMAL
    )
    assert report.mean_total_power > 0.0


def test_tabulated_policy_reproduces_grid_value():
    # Simulating the grid DP's own policy should recover the grid's value
    # at the free-stream point up to interpolation and sampling error.
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_c=0.2)
    config = CascadeConfig.homogeneous(3, noise)
    table = grid_dp_additive(config, x_max=3.0, n_x=300, n_u=600)
    policy = TabulatedPolicy(table)
    report = estimate_expected_power(config, policy, n_samples=200_000, seed=77)
    grid_value = 2.0 * config.rho * config.area * float(
        np.interp(config.x0, table.x_grid, table.values[0])
    )
    assert report.mean_total_power == pytest.approx(grid_value, rel=1e-2)
    assert abs(report.mean_total_power - grid_value) <= 5.0 * report.std_error + 1e-3
