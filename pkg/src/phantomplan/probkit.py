"""Probability primitives: erf approximation, truncated normals, detection weights.

Everything here is a pure function on immutable values; safe to call from
any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "erf_approx",
    "normal_cdf",
    "TruncatedNormal",
    "DetectorModel",
    "ManeuverWeights",
    "detection_weights",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Mass of the parent normal on [lower, upper] below this is treated as degenerate.
DEGENERATE_MASS = 1e-12


def _erfc_positive(z: np.ndarray) -> np.ndarray:
    """Chebyshev-fit rational approximation of erfc for z >= 0 (abs err < 1.2e-7)."""
    t = 1.0 / (1.0 + 0.5 * z)
    tau = t * np.exp(
        -z * z
        - 1.26551223
        + t * (1.00002368
               + t * (0.37409196
                      + t * (0.09678418
                             + t * (-0.18628806
                                    + t * (0.27886807
                                           + t * (-1.13520398
                                                  + t * (1.48851587
                                                         + t * (-0.82215223
                                                                + t * 0.17087277))))))))
    )
    return tau


def erf_vec(x: np.ndarray) -> np.ndarray:
    """Vectorized erf; odd symmetry is exact by construction (computed on |x|),
    and the origin maps to exactly zero."""
    x = np.asarray(x, dtype=float)
    mag = 1.0 - _erfc_positive(np.abs(x))
    return np.where(x == 0.0, 0.0, np.copysign(mag, x))


def erf_approx(x: float) -> float:
    """Error function, accurate to 1.2e-7 absolute over the real line.

    Raises ValueError for non-finite input.
    """
    if not math.isfinite(x):
        raise ValueError(f"erf_approx requires finite input, got {x!r}")
    return float(erf_vec(np.float64(x)))


def normal_cdf(z):
    """Standard normal CDF built on the erf approximation. Accepts scalars or arrays."""
    return 0.5 * (1.0 + erf_vec(np.asarray(z, dtype=float) / _SQRT2))


def _normal_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal distribution restricted to [lower, upper], renormalized.

    mu/sigma are the parent normal's parameters (meters); by construction
    cdf(lower) = 0 and cdf(upper) = 1.
    """

    mu: float
    sigma: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.sigma > 0.0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.lower < self.upper):
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma

    def _mass(self) -> tuple[float, float, float]:
        """(Phi(alpha), Phi(beta), Z) of the parent normal over the bounds."""
        phi_lo = float(normal_cdf(self._z(self.lower)))
        phi_hi = float(normal_cdf(self._z(self.upper)))
        mass = phi_hi - phi_lo
        if mass < DEGENERATE_MASS:
            raise ArithmeticError(
                f"parent normal mass on [{self.lower}, {self.upper}] is {mass:.3e}; "
                "truncation bounds are too far in the tail")
        return phi_lo, phi_hi, mass

    def cdf(self, x):
        """CDF at x (scalar or array): 0 below lower, 1 above upper."""
        phi_lo, _, mass = self._mass()
        x = np.asarray(x, dtype=float)
        raw = (normal_cdf(self._z(x)) - phi_lo) / mass
        out = np.clip(raw, 0.0, 1.0)
        out = np.where(x <= self.lower, 0.0, out)
        out = np.where(x >= self.upper, 1.0, out)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        """Density at x; zero outside [lower, upper]."""
        _, _, mass = self._mass()
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        dens = _normal_pdf(self._z(x)) / (self.sigma * mass)
        out = np.where(inside, dens, 0.0)
        return float(out) if out.ndim == 0 else out

    def moments(self) -> tuple[float, float]:
        """Closed-form (mean, variance) of the truncated distribution."""
        _, _, mass = self._mass()
        alpha = float(self._z(self.lower))
        beta = float(self._z(self.upper))
        pdf_a = float(_normal_pdf(alpha))
        pdf_b = float(_normal_pdf(beta))
        ratio = (pdf_a - pdf_b) / mass
        mean = self.mu + self.sigma * ratio
        var = self.sigma ** 2 * (1.0 + (alpha * pdf_a - beta * pdf_b) / mass - ratio ** 2)
        return mean, var

    def shifted(self, ds: float) -> "TruncatedNormal":
        """Same distribution translated by ds along its axis."""
        return TruncatedNormal(self.mu + ds, self.sigma, self.lower + ds, self.upper + ds)


def tn_cdf(d: TruncatedNormal, x: float) -> float:
    return float(d.cdf(x))


def tn_moments(d: TruncatedNormal) -> tuple[float, float]:
    return d.moments()


@dataclass(frozen=True)
class DetectorModel:
    """Confusion-matrix probabilities of the object detector."""

    p_tp: float
    p_fp: float
    p_tn: float
    p_fn: float

    def __post_init__(self):
        for name in ("p_tp", "p_fp", "p_tn", "p_fn"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class ManeuverWeights:
    """Nonnegative weights for the two maneuver alternatives (ignore, yield)."""

    w_a: float
    w_b: float

    def __post_init__(self):
        if self.w_a < 0.0 or self.w_b < 0.0 or self.w_a + self.w_b <= 0.0:
            raise ValueError(f"weights must be nonnegative with positive sum, got "
                             f"({self.w_a}, {self.w_b})")

    def normalized(self) -> "ManeuverWeights":
        s = self.w_a + self.w_b
        return ManeuverWeights(self.w_a / s, self.w_b / s)


def detection_weights(p_exist: float, det: DetectorModel) -> ManeuverWeights:
    """Maneuver weights from existence probability and detector confusion rates.

    The ignore-alternative weight collects the ways the detection could be wrong
    about a present object (or right about an absent one); the yield-alternative
    weight collects the converse. Normalized to sum 1: the weighted-cost argmin
    is invariant under positive scaling, and normalization keeps cost magnitudes
    comparable across detector models.
    """
    if not (0.0 <= p_exist <= 1.0):
        raise ValueError(f"p_exist must lie in [0, 1], got {p_exist}")
    raw_a = (1.0 - p_exist) * det.p_tn + p_exist * det.p_fp
    raw_b = p_exist * det.p_tp + (1.0 - p_exist) * det.p_fn
    if raw_a + raw_b <= 0.0:
        raise ArithmeticError(
            f"degenerate detector: both maneuver weights vanish at p_exist={p_exist}")
    return ManeuverWeights(raw_a, raw_b).normalized()


def detection_weights_raw(p_exist: float, det: DetectorModel) -> tuple[float, float]:
    """Unnormalized weights; exposed for tests of the affine-in-p structure."""
    if not (0.0 <= p_exist <= 1.0):
        raise ValueError(f"p_exist must lie in [0, 1], got {p_exist}")
    return ((1.0 - p_exist) * det.p_tn + p_exist * det.p_fp,
            p_exist * det.p_tp + (1.0 - p_exist) * det.p_fn)
