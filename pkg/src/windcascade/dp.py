"""Closed-form backward recursion for cascade power maximization.

A row of N turbines is modeled as a cascade: the wind speed x_{k+1} seen
by turbine k+1 is a random multiple of the speed and the velocity deficit
at turbine k,

    x_{k+1} = a_k x_k + b_k u_k,

with independent multiplicative factors a_k, b_k known through their first
three moments.  Each turbine extracts (normalized) power (x_k - u_k)^2 u_k
and the deficit is constrained to u_k in [0, x_k/2] so the far wake stays
non-negative.  Maximizing expected total power admits policies linear in
the state, u_k = psi_k x_k, and cubic value functions Q_k x_k^3; this
module computes the gain sequence psi_k and coefficients Q_k by backward
induction, handling clamped (boundary) stages so the solver is total for
any valid moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import ValidationError
from .moments import MomentSet, central_to_raw

# Feasible range for the gain psi = u/x; the upper end keeps the far-wake
# velocity non-negative in the mean dynamics.
GAIN_LOWER = 0.0
GAIN_UPPER = 0.5

# Below this size the quadratic stationarity condition is treated as linear.
_DEGENERATE_TOL = 1e-10


class GainSignal(Enum):
    """Non-numeric outcomes of the unconstrained gain formula."""

    NO_INTERIOR_MAX = "no_interior_max"
    DEGENERATE_LINEAR = "degenerate_linear"


class GainStatus(Enum):
    """How the constrained stage gain was selected."""

    INTERIOR = "Interior"
    CLAMPED_LOW = "ClampedLow"
    CLAMPED_HIGH = "ClampedHigh"
    BOUNDARY_FALLBACK = "BoundaryFallback"


def _zero_moment() -> MomentSet:
    return central_to_raw(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StageNoise:
    """Moment triple (a, b, c) for one cascade stage.

    `a` scales the incoming speed, `b` scales the deficit, and `c` is an
    optional zero-mean additive term (defaults to the degenerate zero).
    """

    a: MomentSet
    b: MomentSet
    c: MomentSet = field(default_factory=_zero_moment)

    def __post_init__(self):
        if self.c.mean != 0.0:
            raise ValidationError(f"additive noise must have zero mean, got {self.c.mean}")

    @classmethod
    def from_central(
        cls,
        mu_a: float,
        mu_b: float,
        sigma_a: float = 0.0,
        gamma_a: float = 0.0,
        sigma_b: float = 0.0,
        gamma_b: float = 0.0,
        sigma_c: float = 0.0,
        gamma_c: float = 0.0,
    ) -> "StageNoise":
        return cls(
            a=central_to_raw(mu_a, sigma_a, gamma_a),
            b=central_to_raw(mu_b, sigma_b, gamma_b),
            c=central_to_raw(0.0, sigma_c, gamma_c),
        )

    @classmethod
    def deterministic(cls) -> "StageNoise":
        """Noise-free stage matching the classical wake relation x - 2u."""
        return cls.from_central(mu_a=1.0, mu_b=-2.0)

    @property
    def has_additive(self) -> bool:
        return self.c.raw2 > 0.0


@dataclass(frozen=True)
class CascadeConfig:
    """Cascade description: turbine count, inflow, air data, per-stage noise."""

    n_turbines: int
    stages: tuple
    x0: float = 1.0
    rho: float = 1.225
    area: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.n_turbines < 1:
            raise ValidationError(f"n_turbines must be >= 1, got {self.n_turbines}")
        if len(self.stages) != self.n_turbines:
            raise ValidationError(
                f"expected {self.n_turbines} stage noise entries, got {len(self.stages)}"
            )
        for name, value in (("x0", self.x0), ("rho", self.rho), ("area", self.area)):
            if not (value > 0.0):
                raise ValidationError(f"{name} must be positive, got {value}")

    @classmethod
    def homogeneous(
        cls,
        n_turbines: int,
        noise: StageNoise,
        x0: float = 1.0,
        rho: float = 1.225,
        area: float = 1.0,
    ) -> "CascadeConfig":
        """Apply one StageNoise to every turbine."""
        return cls(n_turbines, (noise,) * n_turbines, x0=x0, rho=rho, area=area)

    @property
    def has_additive_noise(self) -> bool:
        return any(stage.has_additive for stage in self.stages)


@dataclass(frozen=True)
class PolicySolution:
    """Gain sequence, value coefficients (length N+1, last entry 0), and
    per-stage clamp diagnostics."""

    gains: tuple
    coefficients: tuple
    clamped: tuple

    @property
    def n_turbines(self) -> int:
        return len(self.gains)


def _foc_coefficients(q_next: float, a: MomentSet, b: MomentSet) -> tuple[float, float, float]:
    # Stationarity of (x-u)^2 u + q E[(a x + b u)^3] in u is the quadratic
    # quad*(u/x)^2 + 2*half_lin*(u/x) + const = 0 (scaled by x^2 > 0).
    quad = 3.0 * (q_next * b.raw3 + 1.0)
    half_lin = 3.0 * q_next * b.raw2 * a.mean - 2.0
    const = 3.0 * q_next * a.raw2 * b.mean + 1.0
    return quad, half_lin, const


def gain_unconstrained(q_next: float, a: MomentSet, b: MomentSet):
    """Interior candidate for the optimal gain at one stage.

    Returns the stationary point of the expected stage-plus-tail power that
    is a local maximum (the other quadratic root is always a local
    minimum).  Returns GainSignal.NO_INTERIOR_MAX when the stationarity
    quadratic has no real root and GainSignal.DEGENERATE_LINEAR when its
    quadratic coefficient vanishes; `constrain_gain` resolves both.
    """
    quad, half_lin, const = _foc_coefficients(q_next, a, b)
    if abs(quad) < _DEGENERATE_TOL:
        return GainSignal.DEGENERATE_LINEAR
    disc = half_lin * half_lin - quad * const
    if disc < 0.0:
        return GainSignal.NO_INTERIOR_MAX
    sqrt_disc = math.sqrt(disc)
    # Evaluate the maximizing root -(half_lin + sqrt_disc)/quad in the form
    # free of cancellation for the sign of half_lin at hand.
    if half_lin > 0.0:
        return -(half_lin + sqrt_disc) / quad
    denom = sqrt_disc - half_lin
    if denom == 0.0:
        return 0.0
    return const / denom


def value_coefficient(psi: float, q_next: float, a: MomentSet, b: MomentSet) -> float:
    """Value coefficient produced by playing gain `psi` against tail
    coefficient `q_next`.

    Valid for any psi, optimal or not: the expected power under a
    state-linear policy is always cubic in the state, so clamped gains
    propagate exactly through the same recursion.
    """
    tail = a.raw3 + b.raw3 * psi**3 + 3.0 * b.raw2 * a.mean * psi**2 + 3.0 * a.raw2 * b.mean * psi
    return (1.0 - psi) ** 2 * psi + q_next * tail


def constrain_gain(candidate, q_next: float, a: MomentSet, b: MomentSet):
    """Resolve an unconstrained gain candidate to the feasible maximizer.

    Compares the scale-free stage objective at the interior candidate (when
    there is one inside [0, 1/2]) and at both interval ends, and returns
    the winner together with its selection status.  An end point also wins
    with ClampedLow/ClampedHigh when the stationarity condition has no real
    root (monotone objective); BoundaryFallback is reported only when the
    condition is degenerate in both its quadratic and linear coefficients.
    """

    def objective(psi: float) -> float:
        return value_coefficient(psi, q_next, a, b)

    if candidate is GainSignal.DEGENERATE_LINEAR:
        quad, half_lin, const = _foc_coefficients(q_next, a, b)
        if abs(half_lin) < _DEGENERATE_TOL:
            # Stationarity gives no usable information at all; the
            # two-point comparison is a pure fallback.
            lo, hi = objective(GAIN_LOWER), objective(GAIN_UPPER)
            if lo >= hi:
                return GAIN_LOWER, GainStatus.BOUNDARY_FALLBACK
            return GAIN_UPPER, GainStatus.BOUNDARY_FALLBACK
        candidate = -const / (2.0 * half_lin)

    if candidate is GainSignal.NO_INTERIOR_MAX:
        # No real critical point: the objective is monotone over the
        # interval, so the winning end is a genuine clamp.
        lo, hi = objective(GAIN_LOWER), objective(GAIN_UPPER)
        if lo >= hi:
            return GAIN_LOWER, GainStatus.CLAMPED_LOW
        return GAIN_UPPER, GainStatus.CLAMPED_HIGH

    options = []
    if GAIN_LOWER <= candidate <= GAIN_UPPER:
        options.append((candidate, GainStatus.INTERIOR))
    options.append((GAIN_LOWER, GainStatus.CLAMPED_LOW))
    options.append((GAIN_UPPER, GainStatus.CLAMPED_HIGH))

    best_psi, best_status = options[0]
    best_value = objective(best_psi)
    for psi, status in options[1:]:
        value = objective(psi)
        if value > best_value:
            best_psi, best_status, best_value = psi, status, value
    return best_psi, best_status


def solve_cascade(config: CascadeConfig) -> PolicySolution:
    """Backward induction over all stages of a multiplicative-noise cascade.

    Raises ValidationError when the config carries additive noise; that
    case has no state-linear optimal policy and is handled by the grid
    solver in `windcascade.additive`.
    """
    if config.has_additive_noise:
        raise ValidationError(
            "cascade has additive noise; use windcascade.additive.grid_dp_additive"
        )
    n = config.n_turbines
    coefficients = [0.0] * (n + 1)
    gains = [0.0] * n
    statuses = [GainStatus.INTERIOR] * n
    for k in range(n - 1, -1, -1):
        stage = config.stages[k]
        candidate = gain_unconstrained(coefficients[k + 1], stage.a, stage.b)
        psi, status = constrain_gain(candidate, coefficients[k + 1], stage.a, stage.b)
        gains[k] = psi
        statuses[k] = status
        coefficients[k] = value_coefficient(psi, coefficients[k + 1], stage.a, stage.b)
    return PolicySolution(tuple(gains), tuple(coefficients), tuple(statuses))


def max_power(q0: float, rho: float, area: float, x0: float) -> float:
    """Expected farm power in watts for leading value coefficient `q0`."""
    for name, value in (("rho", rho), ("area", area), ("x0", x0)):
        if not (value > 0.0):
            raise ValidationError(f"{name} must be positive, got {value}")
    return 2.0 * rho * area * q0 * x0**3


def subarray_efficiency(q_l: float) -> float:
    """Extracted fraction of the wind power entering a tail sub-array."""
    return 4.0 * q_l
