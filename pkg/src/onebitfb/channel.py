"""Correlated block-Rayleigh fading model.

The channel envelope is observed at estimation time (v) and again, after the
feedback delay, at transmission time (v_tau).  Both are unit-power Rayleigh;
their joint law is controlled by the temporal correlation coefficient rho,
which Jakes' model ties to the Doppler spread and the delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .specfun import marcum_q1

__all__ = [
    "CorrelationParams",
    "JakesParams",
    "FadingPair",
    "DegenerateCorrelationError",
    "rho_from_jakes",
    "joint_pdf",
    "conditional_pdf_vtau",
    "sample_pair",
    "sample_pairs",
]

# Treat |rho| this close to 1 as exact instantaneous feedback; the outdated
# closed forms divide by 1 - rho^2 and lose all precision before this point.
RHO_ONE_TOL = 1e-9


class DegenerateCorrelationError(ValueError):
    """|rho| = 1: the joint density degenerates, use the instantaneous forms."""


@dataclass(frozen=True)
class CorrelationParams:
    """Temporal correlation coefficient between estimation and transmission."""

    rho: float

    def __post_init__(self):
        if not math.isfinite(self.rho) or abs(self.rho) > 1.0:
            raise ValueError("rho must be finite with |rho| <= 1")

    @property
    def abs_rho(self) -> float:
        # All densities depend on |rho| only.
        return abs(self.rho)

    @property
    def is_instantaneous(self) -> bool:
        return 1.0 - self.abs_rho < RHO_ONE_TOL


@dataclass(frozen=True)
class JakesParams:
    """Doppler spread (Hz) and feedback delay (s) for Jakes' correlation map."""

    doppler_hz: float
    delay_s: float

    def __post_init__(self):
        if self.doppler_hz < 0 or self.delay_s < 0:
            raise ValueError("doppler_hz and delay_s must be nonnegative")


@dataclass(frozen=True)
class FadingPair:
    """Envelope at estimation time and at transmission time."""

    v: float
    v_tau: float

    def __post_init__(self):
        if self.v < 0 or self.v_tau < 0:
            raise ValueError("envelopes are nonnegative")


def rho_from_jakes(params: JakesParams) -> CorrelationParams:
    """Map (Doppler, delay) to the correlation coefficient J0(2 pi f_D tau)."""
    return CorrelationParams(float(sc.j0(2.0 * math.pi * params.doppler_hz * params.delay_s)))


def joint_pdf(v, v_tau, c: CorrelationParams):
    """Joint density of the two correlated Rayleigh envelopes.

    f(v_tau, v) = 4 v_tau v / (1-rho^2) * exp(-(v_tau^2+v^2)/(1-rho^2))
                  * I0(2 |rho| v_tau v / (1-rho^2)),
    evaluated with the exponentially scaled I0 so large arguments are safe.
    """
    if c.is_instantaneous:
        raise DegenerateCorrelationError(
            "joint density is degenerate at |rho| = 1"
        )
    v = np.asarray(v, dtype=float)
    v_tau = np.asarray(v_tau, dtype=float)
    r = c.abs_rho
    omr2 = 1.0 - r * r
    arg = 2.0 * r * v_tau * v / omr2
    # exp(arg - (v^2+v_tau^2)/(1-rho^2)) = exp(-(v_tau - r v)^2/(1-rho^2) - v^2)
    expo = -((v_tau - r * v) ** 2) / omr2 - v * v
    out = 4.0 * v_tau * v / omr2 * sc.i0e(arg) * np.exp(expo)
    return float(out) if out.ndim == 0 else out


def conditional_pdf_vtau(z, alpha: float, c: CorrelationParams):
    """Density of the transmission-time envelope given the feedback event v^2 >= alpha.

    f(z | v^2 >= alpha) = 2 z exp(-z^2 + alpha)
                          * Q1(sqrt(2)|rho| z / sqrt(1-rho^2),
                               sqrt(2 alpha) / sqrt(1-rho^2)).

    Reduces bit-exactly to the unconditional Rayleigh density 2 z exp(-z^2)
    when alpha = 0 or rho = 0.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    z = np.asarray(z, dtype=float)
    if alpha == 0.0 or c.rho == 0.0:
        out = 2.0 * z * np.exp(-z * z)
        return float(out) if out.ndim == 0 else out
    if c.is_instantaneous:
        raise DegenerateCorrelationError(
            "conditional density requires |rho| < 1; use the truncated "
            "Rayleigh specialization for instantaneous feedback"
        )
    r = c.abs_rho
    s = math.sqrt(1.0 - r * r)
    q = marcum_q1(math.sqrt(2.0) * r / s * z, math.sqrt(2.0 * alpha) / s)
    out = 2.0 * z * np.exp(-z * z + alpha) * q
    return float(out) if np.ndim(out) == 0 else out


def sample_pairs(rng: np.random.Generator, c: CorrelationParams, n: int):
    """Draw ``n`` correlated envelope pairs; returns arrays (v, v_tau).

    The pair is built from the Gaussian construction h_tau = rho h +
    sqrt(1-rho^2) w with h, w independent CN(0,1); each complex Gaussian is
    two real Gaussians of variance 1/2.
    """
    rho = c.rho
    g = rng.standard_normal((4, n)) * math.sqrt(0.5)
    h = g[0] + 1j * g[1]
    w = g[2] + 1j * g[3]
    h_tau = rho * h + math.sqrt(max(0.0, 1.0 - rho * rho)) * w
    return np.abs(h), np.abs(h_tau)


def sample_pair(rng: np.random.Generator, c: CorrelationParams) -> FadingPair:
    """Draw a single correlated envelope pair."""
    v, v_tau = sample_pairs(rng, c, 1)
    return FadingPair(float(v[0]), float(v_tau[0]))
