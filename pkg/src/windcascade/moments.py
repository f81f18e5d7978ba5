"""Moment algebra and moment-matched samplers.

A scalar random variable is described by its first three moments, kept in
both central form (mean, std_dev, skewness) and raw form (E[X], E[X^2],
E[X^3]).  The two representations are linked by

    raw2 = std_dev^2 + mean^2
    raw3 = std_dev^3 * skewness + 3 * std_dev^2 * mean + mean^3

Samplers are constructed by moment matching.  The default two-point
discrete family reproduces all three target moments exactly and has
bounded support, which keeps simulated velocities from blowing up the way
a heavy-tailed family could.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import SamplerError, ValidationError

# Tolerance for cross-checking the redundant raw/central representation.
_CONSISTENCY_TOL = 1e-9


class Family(Enum):
    """Supported sampler families."""

    TWO_POINT = "two_point"
    NORMAL = "normal"
    CONSTANT = "constant"


@dataclass(frozen=True)
class MomentSet:
    """First three moments of one scalar random variable.

    Both representations are stored; use :func:`central_to_raw` or
    :func:`raw_to_central` to build a consistent instance.
    """

    mean: float
    std_dev: float
    skewness: float
    raw2: float
    raw3: float

    def __post_init__(self):
        if not (self.std_dev >= 0.0):
            raise ValidationError(f"std_dev must be >= 0, got {self.std_dev}")
        scale = 1.0 + abs(self.raw2) + abs(self.raw3)
        if abs(self.raw2 - (self.std_dev**2 + self.mean**2)) > _CONSISTENCY_TOL * scale:
            raise ValidationError("raw2 inconsistent with (mean, std_dev)")
        raw3 = self.std_dev**3 * self.skewness + 3.0 * self.std_dev**2 * self.mean + self.mean**3
        if abs(self.raw3 - raw3) > _CONSISTENCY_TOL * scale:
            raise ValidationError("raw3 inconsistent with (mean, std_dev, skewness)")


def central_to_raw(mean: float, std_dev: float, skewness: float) -> MomentSet:
    """Build a MomentSet from central moments (mean, standard deviation,
    skewness).

    Raises ValidationError if std_dev is negative.
    """
    if not (std_dev >= 0.0):
        raise ValidationError(f"std_dev must be >= 0, got {std_dev}")
    raw2 = std_dev**2 + mean**2
    raw3 = std_dev**3 * skewness + 3.0 * std_dev**2 * mean + mean**3
    return MomentSet(mean=mean, std_dev=std_dev, skewness=skewness, raw2=raw2, raw3=raw3)


def raw_to_central(mean: float, raw2: float, raw3: float) -> MomentSet:
    """Build a MomentSet from raw moments (E[X], E[X^2], E[X^3]).

    The skewness of a degenerate (zero variance) variable is defined as 0.
    Raises ValidationError if raw2 < mean^2.
    """
    var = raw2 - mean**2
    if var < 0.0:
        # Tolerate roundoff-level negatives from upstream arithmetic.
        if var > -_CONSISTENCY_TOL * (1.0 + abs(raw2)):
            var = 0.0
        else:
            raise ValidationError(f"raw2={raw2} is below mean^2={mean**2}")
    std_dev = math.sqrt(var)
    if std_dev > 0.0:
        skewness = (raw3 - 3.0 * var * mean - mean**3) / std_dev**3
    else:
        skewness = 0.0
    # Re-derive raw3 so the stored representation is exactly self-consistent.
    raw3_stored = std_dev**3 * skewness + 3.0 * var * mean + mean**3
    return MomentSet(mean=mean, std_dev=std_dev, skewness=skewness, raw2=var + mean**2, raw3=raw3_stored)


@dataclass(frozen=True)
class SampledDistribution:
    """A concrete, sampleable distribution matched to a MomentSet.

    parameters by family:
      TWO_POINT: (p, v1, v2) -- value v1 with probability p, else v2
      NORMAL:    (mean, std_dev)
      CONSTANT:  (value,)
    """

    family: Family
    parameters: tuple
    target: MomentSet


def build_sampler(target: MomentSet, family: Family = Family.TWO_POINT) -> SampledDistribution:
    """Construct a distribution whose first three moments match `target`.

    A zero-variance target degrades to CONSTANT for every family.  The
    two-point match uses weight p = (1 - g/sqrt(4 + g^2))/2 with
    standardized support sqrt((1-p)/p) and -sqrt(p/(1-p)), which
    reproduces mean, variance and skewness g exactly.

    Raises SamplerError when the family cannot represent the target
    (NORMAL needs zero skewness, CONSTANT needs zero std_dev).
    """
    if target.std_dev == 0.0:
        return SampledDistribution(Family.CONSTANT, (target.mean,), target)
    if family is Family.CONSTANT:
        raise SamplerError("constant family requires std_dev = 0")
    if family is Family.NORMAL:
        if target.skewness != 0.0:
            raise SamplerError("normal family requires zero skewness")
        return SampledDistribution(Family.NORMAL, (target.mean, target.std_dev), target)
    if family is Family.TWO_POINT:
        g = target.skewness
        p = 0.5 * (1.0 - g / math.sqrt(4.0 + g * g))
        s1 = math.sqrt((1.0 - p) / p)
        s2 = -math.sqrt(p / (1.0 - p))
        v1 = target.mean + target.std_dev * s1
        v2 = target.mean + target.std_dev * s2
        return SampledDistribution(Family.TWO_POINT, (p, v1, v2), target)
    raise SamplerError(f"unknown family: {family!r}")


def analytic_moments(dist: SampledDistribution) -> tuple[float, float, float]:
    """Exact (mean, raw2, raw3) implied by the distribution parameters."""
    if dist.family is Family.CONSTANT:
        (v,) = dist.parameters
        return v, v**2, v**3
    if dist.family is Family.NORMAL:
        mu, sd = dist.parameters
        return mu, sd**2 + mu**2, 3.0 * sd**2 * mu + mu**3
    p, v1, v2 = dist.parameters
    q = 1.0 - p
    return (p * v1 + q * v2, p * v1**2 + q * v2**2, p * v1**3 + q * v2**3)


def sample(dist: SampledDistribution, rng: np.random.Generator) -> float:
    """Draw one value.  Deterministic given the generator state."""
    if dist.family is Family.CONSTANT:
        return dist.parameters[0]
    if dist.family is Family.TWO_POINT:
        p, v1, v2 = dist.parameters
        return v1 if rng.random() < p else v2
    mu, sd = dist.parameters
    return mu + sd * rng.standard_normal()


def sample_array(dist: SampledDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw `n` values as an array.

    Constant distributions consume no generator state, so swapping a
    stochastic stage for a deterministic one leaves the other stages'
    draws untouched.
    """
    if dist.family is Family.CONSTANT:
        return np.full(n, dist.parameters[0])
    if dist.family is Family.TWO_POINT:
        p, v1, v2 = dist.parameters
        return np.where(rng.random(n) < p, v1, v2)
    mu, sd = dist.parameters
    return mu + sd * rng.standard_normal(n)
