"""Analytic backward recursion tests."""

import numpy as np
import pytest

from windcascade.dp import (
    GAIN_UPPER,
    CascadeConfig,
    GainStatus,
    StageNoise,
    constrain_gain,
    gain_unconstrained,
    max_power,
    solve_cascade,
    subarray_efficiency,
    value_coefficient,
)
from windcascade.errors import ValidationError
from windcascade.moments import central_to_raw


def _random_noise(rng) -> StageNoise:
    return StageNoise.from_central(
        mu_a=float(rng.uniform(0.9, 1.05)),
        mu_b=float(rng.uniform(-2.2, -1.8)),
        sigma_a=float(rng.uniform(0.0, 0.5)),
        gamma_a=float(rng.uniform(-1.0, 1.0)),
        sigma_b=float(rng.uniform(0.0, 0.5)),
        gamma_b=float(rng.uniform(-1.0, 1.0)),
    )


def test_single_stage_betz():
    solution = solve_cascade(CascadeConfig.homogeneous(1, StageNoise.deterministic()))
    assert solution.gains[0] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert solution.coefficients[0] == pytest.approx(4.0 / 27.0, abs=1e-15)
    assert solution.clamped[0] is GainStatus.INTERIOR


def test_deterministic_gain_ladder():
    # With noise-free wake dynamics the gain of the k-th turbine from the
    # end is 1/(2j+1) for j stages remaining.
    n = 8
    solution = solve_cascade(CascadeConfig.homogeneous(n, StageNoise.deterministic()))
    for k, psi in enumerate(solution.gains):
        remaining = n - k
        assert psi == pytest.approx(1.0 / (2.0 * remaining + 1.0), abs=1e-13)


def test_three_stage_values():
    solution = solve_cascade(CascadeConfig.homogeneous(3, StageNoise.deterministic()))
    assert solution.coefficients[2] == pytest.approx(4.0 / 27.0, abs=1e-15)
    assert solution.coefficients[1] == pytest.approx(4.0 / 25.0, abs=1e-15)
    assert solution.coefficients[0] == pytest.approx(8.0 / 49.0, abs=1e-15)


def test_terminal_stage_ignores_noise():
    # The last turbine has no downstream value, so any valid moments give
    # the single-turbine optimum.
    rng = np.random.default_rng(5)
    for _ in range(50):
        config = CascadeConfig.homogeneous(2, _random_noise(rng))
        solution = solve_cascade(config)
        assert solution.gains[-1] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert solution.coefficients[-2] == pytest.approx(4.0 / 27.0, abs=1e-12)


def test_value_coefficient_matches_direct_expectation():
    # Against a direct evaluation of (1-psi)^2 psi + q E[(a + b psi)^3]
    # with the expectation expanded over a two-point support.
    rng = np.random.default_rng(9)
    for _ in range(25):
        noise = _random_noise(rng)
        q = float(rng.uniform(0.0, 0.2))
        psi = float(rng.uniform(0.0, 0.5))
        from windcascade.moments import build_sampler

        total = 0.0
        dist_a = build_sampler(noise.a)
        dist_b = build_sampler(noise.b)
        for av, aw in ([(dist_a.parameters[0], 1.0)] if len(dist_a.parameters) == 1
                       else [(dist_a.parameters[1], dist_a.parameters[0]),
                             (dist_a.parameters[2], 1.0 - dist_a.parameters[0])]):
            for bv, bw in ([(dist_b.parameters[0], 1.0)] if len(dist_b.parameters) == 1
                           else [(dist_b.parameters[1], dist_b.parameters[0]),
                                 (dist_b.parameters[2], 1.0 - dist_b.parameters[0])]):
                total += aw * bw * (av + bv * psi) ** 3
        direct = (1.0 - psi) ** 2 * psi + q * total
        assert value_coefficient(psi, q, noise.a, noise.b) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_unconstrained_gain_is_stationary_and_maximal():
    rng = np.random.default_rng(17)
    for _ in range(50):
        noise = _random_noise(rng)
        q = float(rng.uniform(0.0, 0.2))
        psi = gain_unconstrained(q, noise.a, noise.b)
        if not isinstance(psi, float):
            continue
        h = 1e-7
        up = value_coefficient(psi + h, q, noise.a, noise.b)
        down = value_coefficient(psi - h, q, noise.a, noise.b)
        center = value_coefficient(psi, q, noise.a, noise.b)
        assert center >= up - 1e-12
        assert center >= down - 1e-12


def test_gain_formula_stable_near_vanishing_constant_term():
    # When 3 q raw2_a mu_b + 1 crosses zero the naive root formula loses
    # digits; the returned root must stay a clean stationary point.
    a = central_to_raw(1.0, 0.3, 0.0)
    b = central_to_raw(-2.0, 0.0, 0.0)
    # pick q so the constant term is within 1e-12 of zero: q = 1/(6*raw2_a)
    q = 1.0 / (6.0 * a.raw2) * (1.0 + 1e-12)
    psi = gain_unconstrained(q, a, b)
    assert isinstance(psi, float)
    quad = 3.0 * (q * b.raw3 + 1.0)
    half_lin = 3.0 * q * b.raw2 * a.mean - 2.0
    const = 3.0 * q * a.raw2 * b.mean + 1.0
    residual = quad * psi * psi + 2.0 * half_lin * psi + const
    assert abs(residual) < 1e-14


def test_constrain_gain_prefers_interior():
    noise = StageNoise.deterministic()
    psi, status = constrain_gain(1.0 / 3.0, 0.0, noise.a, noise.b)
    assert (psi, status) == (1.0 / 3.0, GainStatus.INTERIOR)


def test_constrain_gain_clamps_outside_candidates():
    noise = StageNoise.deterministic()
    psi, status = constrain_gain(0.9, 0.0, noise.a, noise.b)
    # candidate outside [0, 1/2]: best feasible point wins
    assert status in (GainStatus.CLAMPED_LOW, GainStatus.CLAMPED_HIGH)
    assert psi in (0.0, GAIN_UPPER)


def test_state_noise_clamps_leading_turbines():
    # Strong state noise with unit mean makes waiting worthless only for
    # downstream turbines; upstream ones shut off entirely.
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_a=0.3)
    solution = solve_cascade(CascadeConfig.homogeneous(10, noise))
    assert solution.gains[0] == 0.0
    assert solution.clamped[0] is GainStatus.CLAMPED_LOW
    assert solution.clamped[-1] is GainStatus.INTERIOR
    # clamped stages still propagate a positive value coefficient
    assert solution.coefficients[0] > solution.coefficients[1] > 0.0


def test_gain_increases_with_deficit_noise():
    # More variance on the deficit factor pushes every gain toward the
    # single-turbine optimum.
    previous = None
    for sigma_b in (0.0, 0.2, 0.4):
        noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_b=sigma_b)
        gains = solve_cascade(CascadeConfig.homogeneous(5, noise)).gains
        if previous is not None:
            assert all(g >= p - 1e-12 for g, p in zip(gains, previous))
        previous = gains


def test_solve_rejects_additive_noise():
    noise = StageNoise.from_central(mu_a=1.0, mu_b=-2.0, sigma_c=0.1)
    with pytest.raises(ValidationError):
        solve_cascade(CascadeConfig.homogeneous(2, noise))


def test_stage_noise_rejects_nonzero_additive_mean():
    with pytest.raises(ValidationError):
        StageNoise(
            a=central_to_raw(1.0, 0.0, 0.0),
            b=central_to_raw(-2.0, 0.0, 0.0),
            c=central_to_raw(0.5, 0.1, 0.0),
        )


def test_config_validation():
    noise = StageNoise.deterministic()
    with pytest.raises(ValidationError):
        CascadeConfig(n_turbines=0, stages=())
    with pytest.raises(ValidationError):
        CascadeConfig(n_turbines=2, stages=(noise,))
    with pytest.raises(ValidationError):
        CascadeConfig.homogeneous(1, noise, x0=-1.0)


def test_power_and_efficiency_helpers():
    assert max_power(4.0 / 27.0, rho=1.225, area=1.0, x0=1.0) == pytest.approx(
        2.0 * 1.225 * 4.0 / 27.0
    )
    assert max_power(0.16, rho=0.5, area=2.0, x0=2.0) == pytest.approx(0.16 * 2.0 * 8.0)
    assert subarray_efficiency(4.0 / 27.0) == pytest.approx(16.0 / 27.0, abs=1e-15)
    with pytest.raises(ValidationError):
        max_power(0.1, rho=0.0, area=1.0, x0=1.0)


def test_gain_bounds_hold_for_random_configs():
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        config = CascadeConfig.homogeneous(n, _random_noise(rng))
        solution = solve_cascade(config)
        assert all(0.0 <= g <= GAIN_UPPER for g in solution.gains)
        assert all(q >= 0.0 for q in solution.coefficients)
        assert solution.coefficients[-1] == 0.0
