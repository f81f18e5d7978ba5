"""Brute-force certification of the analytic gain recursion.

The one-stage objective is re-maximized by dense grid search (plus one
golden-section refinement pass), sharing no code with the closed-form
root in `windcascade.dp`.  The verifier replays the whole backward
recursion on its own value chain so that an error in any stage compounds
visibly instead of being masked by analytic coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dp import GAIN_LOWER, GAIN_UPPER, CascadeConfig, GainStatus, PolicySolution, StageNoise
from .errors import ValidationError

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _objective(psi, q_next: float, noise: StageNoise):
    # Scale-free expected stage-plus-tail power under gain psi; written out
    # here independently of dp.value_coefficient on purpose.
    a, b = noise.a, noise.b
    tail = a.raw3 + psi * (3.0 * a.raw2 * b.mean + psi * (3.0 * b.raw2 * a.mean + psi * b.raw3))
    return (1.0 - psi) ** 2 * psi + q_next * tail


def _golden_max(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    a, b = lo, hi
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    c = b - _INV_PHI * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def grid_argmax_stage(q_next: float, noise: StageNoise, n_u: int) -> float:
    """Derivative-free maximizer of the one-stage objective over [0, 1/2].

    Evaluates n_u + 1 uniform gain values, then refines the winning
    bracket by golden-section search.
    """
    if n_u < 1000:
        raise ValidationError(f"n_u must be >= 1000, got {n_u}")
    psi = np.linspace(GAIN_LOWER, GAIN_UPPER, n_u + 1)
    values = _objective(psi, q_next, noise)
    i = int(np.argmax(values))
    lo = float(psi[max(i - 1, 0)])
    hi = float(psi[min(i + 1, n_u)])
    refined = _golden_max(lambda t: _objective(t, q_next, noise), lo, hi)
    candidates = (float(psi[i]), refined, lo, hi)
    return max(candidates, key=lambda t: _objective(t, q_next, noise))


@dataclass(frozen=True)
class StageComparison:
    stage: int
    analytic_gain: float
    oracle_gain: float
    gap: float
    status: GainStatus


@dataclass(frozen=True)
class VerificationReport:
    """Stage-by-stage comparison of analytic and brute-force gains."""

    stages: tuple
    max_gap: float
    passed: bool
    grid_spacing: float
    n_u: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_gap": self.max_gap,
            "grid_spacing": self.grid_spacing,
            "n_u": self.n_u,
            "stages": [
                {
                    "stage": s.stage,
                    "analytic_gain": s.analytic_gain,
                    "oracle_gain": s.oracle_gain,
                    "gap": s.gap,
                    "status": s.status.value,
                }
                for s in self.stages
            ],
        }


def verify_policy(config: CascadeConfig, solution: PolicySolution, n_u: int = 1_000_000) -> VerificationReport:
    """Replay the backward recursion with grid search and compare gains.

    The oracle feeds its own gains back into its own value chain.  The
    pass criterion applies to stages the analytic solver reported as
    Interior: their gap must not exceed twice the grid spacing.  Clamped
    and fallback stages are reported but not gated, since both routes sit
    on the same interval ends there.
    """
    if len(solution.gains) != config.n_turbines:
        raise ValidationError(
            f"solution has {len(solution.gains)} gains for {config.n_turbines} turbines"
        )
    if config.has_additive_noise:
        raise ValidationError("verification covers multiplicative-noise cascades only")

    spacing = (GAIN_UPPER - GAIN_LOWER) / n_u
    comparisons: list[StageComparison] = [None] * config.n_turbines  # type: ignore[list-item]
    q_oracle = 0.0
    for k in range(config.n_turbines - 1, -1, -1):
        noise = config.stages[k]
        psi_oracle = grid_argmax_stage(q_oracle, noise, n_u)
        gap = abs(psi_oracle - solution.gains[k])
        comparisons[k] = StageComparison(
            stage=k,
            analytic_gain=float(solution.gains[k]),
            oracle_gain=psi_oracle,
            gap=gap,
            status=solution.clamped[k],
        )
        q_oracle = float(_objective(psi_oracle, q_oracle, noise))

    max_gap = max(c.gap for c in comparisons)
    passed = all(
        c.gap <= 2.0 * spacing for c in comparisons if c.status is GainStatus.INTERIOR
    )
    return VerificationReport(
        stages=tuple(comparisons),
        max_gap=max_gap,
        passed=passed,
        grid_spacing=spacing,
        n_u=n_u,
    )
