"""Cascade control when the wake recovery carries additive noise.

With a zero-mean additive disturbance the optimal control stops being
proportional to the inflow, so the linear-gain recursion no longer
applies everywhere.  This module provides the pieces that still have
closed form (the stage expectation of a cubic and the exact penultimate
policy) plus a discretized value iteration for the general case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dp import GAIN_UPPER, CascadeConfig, StageNoise
from .errors import ValidationError
from .moments import Family, MomentSet, build_sampler

_DEGENERATE_TOL = 1e-10


def expected_cubic(x, u, noise: StageNoise, coeff: float):
    """E[coeff * (a x + b u + c)^3] for independent a, b, c with E[c] = 0.

    Accepts scalars or broadcastable arrays for x and u.  Expanding the
    trinomial and dropping every term with a lone centered c factor
    leaves seven contributions.
    """
    if noise.c.mean != 0.0:
        raise ValidationError("additive disturbance must have zero mean")
    a, b, c = noise.a, noise.b, noise.c
    val = (
        a.raw3 * x**3
        + b.raw3 * u**3
        + 3.0 * a.raw2 * b.mean * x**2 * u
        + 3.0 * b.raw2 * a.mean * x * u**2
        + 3.0 * c.raw2 * a.mean * x
        + 3.0 * c.raw2 * b.mean * u
        + c.raw3
    )
    return coeff * val


def _stationarity_coefficients(q_next: float, noise: StageNoise):
    # d/du of (x-u)^2 u + expected_cubic(x, u, noise, q_next) collects to
    #   quad * u^2 + 2 * half_lin * x * u + (const * x^2 + addi)
    # reusing the multiplicative-only coefficients plus one offset from
    # the additive second moment.
    a, b, c = noise.a, noise.b, noise.c
    quad = 3.0 * (q_next * b.raw3 + 1.0)
    half_lin = 3.0 * q_next * b.raw2 * a.mean - 2.0
    const = 3.0 * q_next * a.raw2 * b.mean + 1.0
    addi = 3.0 * q_next * c.raw2 * b.mean
    return quad, half_lin, const, addi


@dataclass(frozen=True)
class AdditivePolicyParams:
    """Closed-form penultimate policy u(x) = delta x + sign * sqrt(alpha + beta x^2).

    With no additive noise alpha vanishes and the policy collapses to a
    plain linear gain; otherwise the square-root term makes it
    non-homogeneous in x.
    """

    delta: float
    alpha: float
    beta: float
    radical_sign: float
    q_next: float

    @classmethod
    def from_noise(cls, q_next: float, noise: StageNoise) -> "AdditivePolicyParams":
        quad, half_lin, const, addi = _stationarity_coefficients(q_next, noise)
        if abs(quad) < _DEGENERATE_TOL:
            raise ValidationError("stationarity condition degenerates to linear; no radical form")
        disc_quadratic = half_lin * half_lin - quad * const
        # The maximizing root moves away from -half_lin/quad by the radical,
        # downhill in quad: subtract for quad > 0, add for quad < 0.
        sign = -1.0 if quad > 0.0 else 1.0
        return cls(
            delta=-half_lin / quad,
            alpha=-addi / quad,
            beta=disc_quadratic / (quad * quad),
            radical_sign=sign,
            q_next=q_next,
        )

    def evaluate(self, x: float) -> float:
        radicand = self.alpha + self.beta * x * x
        if radicand < 0.0:
            raise ValidationError(f"policy radical undefined at x={x}")
        return self.delta * x + self.radical_sign * math.sqrt(radicand)


def penultimate_policy(x: float, q_next: float, noise: StageNoise) -> float:
    """Exact optimal control for the stage before a proportional tail value.

    Valid whenever the downstream value is q_next * x^3, which holds one
    step before the end of the array even with additive noise in the
    current stage.  Returns the constrained maximizer on [0, x/2].
    """
    if x < 0.0:
        raise ValidationError(f"inflow must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0

    def objective(u: float) -> float:
        return (x - u) ** 2 * u + float(expected_cubic(x, u, noise, q_next))

    upper = GAIN_UPPER * x
    candidates = [0.0, upper]
    quad, half_lin, const, addi = _stationarity_coefficients(q_next, noise)
    if abs(quad) < _DEGENERATE_TOL:
        slope = 2.0 * half_lin * x
        if abs(slope) > _DEGENERATE_TOL:
            root = -(const * x * x + addi) / slope
            if 0.0 <= root <= upper:
                candidates.append(root)
    else:
        radicand = (half_lin * x) ** 2 - quad * (const * x * x + addi)
        if radicand >= 0.0:
            try:
                params = AdditivePolicyParams.from_noise(q_next, noise)
                root = params.evaluate(x)
            except ValidationError:
                root = (-half_lin * x - math.sqrt(radicand)) / quad
            if math.isfinite(root) and 0.0 <= root <= upper:
                candidates.append(root)
    return max(candidates, key=objective)


@dataclass(frozen=True)
class GridValueTable:
    """Value functions and controls tabulated on a uniform inflow grid.

    values has one row per stage plus the terminal zero row; policies has
    one row per stage.  Both are indexed [stage, grid point].
    """

    x_grid: np.ndarray
    values: np.ndarray
    policies: np.ndarray

    @property
    def n_stages(self) -> int:
        return self.policies.shape[0]


def _exact_support(moments: MomentSet) -> list[tuple[float, float]]:
    # Discrete (value, weight) support matching the stage moments, so the
    # expectation below is exact rather than sampled.
    dist = build_sampler(moments, family=Family.TWO_POINT)
    if dist.family is Family.CONSTANT:
        return [(dist.parameters[0], 1.0)]
    p, v1, v2 = dist.parameters
    return [(v1, p), (v2, 1.0 - p)]


_CUBIC_FIT_RTOL = 1e-8


def _cubic_fit(x: np.ndarray, values: np.ndarray) -> float | None:
    # Least-squares scale of x^3 against the tabulated values; accepted
    # only when the fit reproduces the table to rounding noise.
    x3 = x**3
    denom = float(np.dot(x3, x3))
    coeff = float(np.dot(values, x3)) / denom if denom > 0.0 else 0.0
    residual = float(np.max(np.abs(values - coeff * x3)))
    scale = 1.0 + float(np.max(np.abs(values)))
    return coeff if residual <= _CUBIC_FIT_RTOL * scale else None


def grid_dp_additive(config: CascadeConfig, x_max: float, n_x: int, n_u: int) -> GridValueTable:
    """Backward value iteration on a uniform state grid with exact expectations.

    Transition expectations are taken over the discrete supports of the
    moment-matched two-point noise, so the only discretization error comes
    from the state and control grids and the linear interpolation of the
    downstream value.  When the downstream table is numerically a pure
    cubic (true for every stage under multiplicative-only noise, and for
    the stage just before the end regardless), the interpolation is
    bypassed in favor of the closed-form cubic expectation.  States pushed
    negative by additive noise are treated as zero inflow, matching the
    simulator; states above x_max saturate at the table edge.
    """
    if x_max <= 0.0:
        raise ValidationError(f"x_max must be positive, got {x_max}")
    if n_x < 2 or n_u < 2:
        raise ValidationError(f"grid sizes must be >= 2, got n_x={n_x}, n_u={n_u}")

    n = config.n_turbines
    x = np.linspace(0.0, x_max, n_x)
    values = np.zeros((n + 1, n_x))
    policies = np.zeros((n, n_x))

    fractions = np.linspace(0.0, 1.0, n_u + 1)
    controls = np.outer(x, GAIN_UPPER * fractions)  # row i spans [0, x_i / 2]
    x_col = x[:, None]
    stage_cost = (x_col - controls) ** 2 * controls

    for k in range(n - 1, -1, -1):
        noise = config.stages[k]
        tail = values[k + 1]
        coeff = _cubic_fit(x, tail)
        if coeff is not None:
            continuation = expected_cubic(x_col, controls, noise, coeff)
        else:
            continuation = np.zeros_like(controls)
            supports = [_exact_support(m) for m in (noise.a, noise.b, noise.c)]
            for a_val, a_w in supports[0]:
                for b_val, b_w in supports[1]:
                    for c_val, c_w in supports[2]:
                        nxt = a_val * x_col + b_val * controls + c_val
                        np.maximum(nxt, 0.0, out=nxt)
                        interp = np.interp(nxt.ravel(), x, tail).reshape(nxt.shape)
                        continuation += (a_w * b_w * c_w) * interp
        total = stage_cost + continuation
        best = np.argmax(total, axis=1)
        rows = np.arange(n_x)
        policies[k] = controls[rows, best]
        values[k] = total[rows, best]

    return GridValueTable(x_grid=x, values=values, policies=policies)
