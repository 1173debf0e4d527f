"""Ergodic sum-rate of the 1-bit feedback scheme with outdated CSI.

Closed-form rate, Jensen upper / truncation lower bounds, threshold policies
and the numerical threshold optimizer, the large-user-count degradation
estimate, wideband (low-SNR) metrics, and multiplexing-gain bounds.

All rates are in nats per channel use; the CLI converts to bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import CorrelationParams
from .specfun import QuadratureSpec, expx_e1, integrate_semi_infinite, marcum_q1, marcum_q1_asymptotic

__all__ = [
    "ErgodicConfig",
    "ErgodicReport",
    "ThresholdPolicy",
    "WidebandReport",
    "prob_some_above",
    "sum_rate",
    "sum_rate_upper",
    "sum_rate_lower",
    "rate_bracket",
    "optimal_threshold",
    "suboptimal_threshold",
    "degradation_estimate",
    "wideband_metrics",
    "affine_rate_approx",
    "ebn0_db_from_power",
    "rate_at_ebn0",
    "multiplexing_gain_bounds",
    "scaling_ratio",
    "ergodic_report",
    "full_csi_rate",
    "no_csi_rate",
]

_LOG2 = math.log(2.0)
_3DB = 10.0 * math.log10(2.0)


@dataclass(frozen=True)
class ErgodicConfig:
    num_users: int
    power: float
    corr: CorrelationParams
    threshold: float

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if not (self.power > 0 and math.isfinite(self.power)):
            raise ValueError("power must be positive and finite")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")


@dataclass(frozen=True)
class ErgodicReport:
    rate_nats: float
    upper_nats: float
    lower_nats: float
    prob_transmit: float


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold selection rule: fixed value, log K - delta, or optimized."""

    kind: str  # "fixed" | "suboptimal" | "optimal"
    alpha: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "suboptimal", "optimal"):
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if self.kind == "fixed" and (self.alpha is None or self.alpha < 0):
            raise ValueError("fixed policy needs alpha >= 0")
        if self.kind == "suboptimal" and (self.delta is None or self.delta <= 0):
            raise ValueError("suboptimal policy needs delta > 0")

    def resolve(self, num_users: int, power: float, corr: CorrelationParams) -> float:
        if self.kind == "fixed":
            return float(self.alpha)
        if self.kind == "suboptimal":
            return suboptimal_threshold(num_users, self.delta)
        return optimal_threshold(num_users, power, corr)


@dataclass(frozen=True)
class WidebandReport:
    ebn0_min_db: float
    slope_s0: float
    ebn0_min_linear: float


def prob_some_above(alpha: float, num_users: int):
    """Probability that at least one of K users exceeds the threshold.

    1 - (1 - e^{-alpha})^K, computed via log1p/expm1 so the near-1 and
    near-0 regimes keep full relative precision.
    """
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(alpha_arr < 0):
        raise ValueError("alpha must be nonnegative")
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    with np.errstate(divide="ignore"):
        out = -np.expm1(num_users * np.log1p(-np.exp(-alpha_arr)))
    return float(out) if out.ndim == 0 else out


def _rate_conditional_instantaneous(power: float, alpha: float) -> float:
    """E[log(1 + v^2 P) | v^2 >= alpha] for instantaneous feedback.

    Closed form from integrating the truncated exponential law by parts:
    log(1 + alpha P) + e^{alpha + 1/P} E1(alpha + 1/P).
    """
    return math.log1p(alpha * power) + expx_e1(alpha + 1.0 / power)


def sum_rate(cfg: ErgodicConfig, quad: QuadratureSpec | None = None) -> float:
    """Ergodic sum-rate (nats) of the 1-bit scheme with outdated feedback.

    Pr(N>0) times the conditional-mean rate of the scheduled user, with the
    conditional law of the delayed envelope expressed through the Marcum-Q
    function.  rho = 0 and |rho| = 1 use their exact specializations.
    """
    prob = prob_some_above(cfg.threshold, cfg.num_users)
    power = cfg.power
    alpha = cfg.threshold
    corr = cfg.corr
    if corr.rho == 0.0:
        # Feedback and transmission-time channel are independent.
        return prob * expx_e1(1.0 / power)
    if corr.is_instantaneous:
        return prob * _rate_conditional_instantaneous(power, alpha)
    r = corr.abs_rho
    s = math.sqrt(1.0 - r * r)
    a_scale = math.sqrt(2.0) * r / s
    b = math.sqrt(2.0 * alpha) / s

    def integrand(z):
        z = np.asarray(z, dtype=float)
        q = marcum_q1(a_scale * z, np.full_like(z, b))
        return np.log1p(z * z * power) * 2.0 * z * np.exp(-z * z + alpha) * q

    return prob * integrate_semi_infinite(integrand, 0.0, quad)


def sum_rate_upper(cfg: ErgodicConfig) -> float:
    """Jensen upper bound: Pr(N>0) log(1 + P (1 + rho^2 alpha))."""
    prob = prob_some_above(cfg.threshold, cfg.num_users)
    r2 = cfg.corr.rho ** 2
    return prob * math.log1p(cfg.power * (1.0 + r2 * cfg.threshold))


def rate_bracket(alpha: float, corr: CorrelationParams, asymptotic: bool = False) -> float:
    """The Marcum-Q brace shared by the lower rate bound and r_low.

    1 + Q1(|rho| s, s) - Q1(s, |rho| s) with s = sqrt(2 alpha)/sqrt(1-rho^2).
    With ``asymptotic=True`` both Q1 terms are replaced by their
    large-argument Gaussian-prefactor approximation (the form under which
    the brace tends to 1 as alpha grows).
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if corr.is_instantaneous:
        return 1.0
    r = corr.abs_rho
    if r == 0.0 or alpha == 0.0:
        # Q1(0, s) = exp(-s^2/2) = exp(-alpha/(1-rho^2)); Q1(s, 0) = 1.
        s2 = 2.0 * alpha / (1.0 - r * r)
        return math.exp(-0.5 * s2)
    s = math.sqrt(2.0 * alpha) / math.sqrt(1.0 - r * r)
    if asymptotic:
        q_rs = marcum_q1_asymptotic(r * s, s)
        q_sr = marcum_q1_asymptotic(s, r * s)
    else:
        q_rs = marcum_q1(r * s, s)
        q_sr = marcum_q1(s, r * s)
    return 1.0 + q_rs - q_sr


def sum_rate_lower(cfg: ErgodicConfig) -> float:
    """Truncation lower bound: Pr(N>0) log(1 + alpha P) times the rate brace."""
    prob = prob_some_above(cfg.threshold, cfg.num_users)
    return prob * math.log1p(cfg.threshold * cfg.power) * rate_bracket(cfg.threshold, cfg.corr)


def suboptimal_threshold(num_users: int, delta: float) -> float:
    """The log K - delta threshold rule."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    log_k = math.log(num_users)
    if not 0.0 < delta < log_k:
        raise ValueError("suboptimal rule requires 0 < delta < log K")
    return log_k - delta


def optimal_threshold(
    num_users: int,
    power: float,
    corr: CorrelationParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """Numerically maximize the sum-rate over the threshold.

    Coarse grid (step 0.05) over [0, log K + 6] with the left-most maximizer
    on ties, then ternary refinement of the best cell down to width 1e-4.
    """
    coarse = quad or QuadratureSpec(abs_tol=1e-9, rel_tol=1e-7)

    def rate(alpha: float) -> float:
        return sum_rate(ErgodicConfig(num_users, power, corr, alpha), coarse)

    hi = math.log(num_users) + 6.0 if num_users > 1 else 6.0
    grid = np.arange(0.0, hi + 0.05, 0.05)
    vals = [rate(a) for a in grid]
    best = int(np.argmax(vals))  # argmax returns the first (left-most) maximizer
    lo = grid[max(best - 1, 0)]
    up = grid[min(best + 1, len(grid) - 1)]
    while up - lo > 1e-4:
        m1 = lo + (up - lo) / 3.0
        m2 = up - (up - lo) / 3.0
        if rate(m1) >= rate(m2):
            up = m2
        else:
            lo = m1
    return 0.5 * (lo + up)


def degradation_estimate(corr: CorrelationParams) -> float:
    """Predicted large-K rate loss from feedback delay: 2 log|rho| (nats, <= 0)."""
    if corr.rho == 0.0:
        raise ValueError("no finite degradation prediction at rho = 0")
    return 2.0 * math.log(corr.abs_rho)


def wideband_metrics(alpha: float, num_users: int, corr: CorrelationParams) -> WidebandReport:
    """Minimum energy per bit and wideband slope of the 1-bit scheme.

    Eb/N0_min = log 2 / [Pr(N>0) (1 + rho^2 alpha)]
    S0 = Pr(N>0) (1 + rho^2 alpha)^2 / (1 + 2 a r2 - a r2^2 + a^2 r2^2 / 2)
    with r2 = rho^2 and a = alpha.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    prob = prob_some_above(alpha, num_users)
    r2 = corr.rho ** 2
    m2 = 1.0 + r2 * alpha
    ebn0_min = _LOG2 / (prob * m2)
    denom = 1.0 + 2.0 * alpha * r2 - alpha * r2 * r2 + 0.5 * alpha * alpha * r2 * r2
    slope = prob * m2 * m2 / denom
    return WidebandReport(
        ebn0_min_db=10.0 * math.log10(ebn0_min),
        slope_s0=slope,
        ebn0_min_linear=ebn0_min,
    )


def affine_rate_approx(ebn0_db: float, report: WidebandReport) -> float:
    """Wideband affine rate approximation, in nats; clamped at zero below Eb/N0_min.

    The slope S0 is in bits per 3.01 dB (per doubling of energy); the result
    is converted to nats to match the rest of the package.
    """
    delta_db = ebn0_db - report.ebn0_min_db
    if delta_db <= 0.0:
        return 0.0
    return report.slope_s0 / _3DB * delta_db * _LOG2


def ebn0_db_from_power(rate_nats: float, power: float) -> float:
    """Eb/N0 (dB) implied by a rate/power operating point: P / R_bits."""
    if rate_nats <= 0:
        raise ValueError("rate must be positive")
    return 10.0 * math.log10(power / (rate_nats / _LOG2))


def rate_at_ebn0(
    ebn0_db: float,
    num_users: int,
    corr: CorrelationParams,
    alpha: float,
    quad: QuadratureSpec | None = None,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """Invert the implicit Eb/N0 relation; returns (rate_nats, power).

    Fixed-point iteration on P = R_bits(P) * Eb/N0 starting from a small
    power; converges to P = 0 (zero rate) below Eb/N0_min.
    """
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    power = 1e-3
    for _ in range(300):
        rate = sum_rate(ErgodicConfig(num_users, power, corr, alpha), quad)
        new_power = rate / _LOG2 * ebn0
        if abs(new_power - power) <= tol * max(1.0, abs(power)):
            power = new_power
            break
        power = new_power
        if power < 1e-14:
            return 0.0, 0.0
    if power < 1e-8:  # converged onto the decaying branch below Eb/N0_min
        return 0.0, 0.0
    rate = sum_rate(ErgodicConfig(num_users, power, corr, alpha), quad)
    return rate, power


def multiplexing_gain_bounds(alpha: float, num_users: int, corr: CorrelationParams) -> tuple[float, float]:
    """(r_low, r_up) bounds on the high-SNR multiplexing gain."""
    if corr.abs_rho >= 1.0 and not corr.is_instantaneous:
        raise ValueError("|rho| must be < 1")
    r_up = prob_some_above(alpha, num_users)
    r_low = r_up * rate_bracket(alpha, corr)
    return min(r_low, r_up), r_up


def scaling_ratio(
    num_users: int,
    power: float,
    corr: CorrelationParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """Rate at the optimal threshold divided by log log K.

    Diagnostic for the multiuser-diversity scaling; requires K >= 16 so the
    denominator is comfortably positive.
    """
    if num_users < 16:
        raise ValueError("scaling_ratio requires num_users >= 16")
    alpha = optimal_threshold(num_users, power, corr, quad)
    rate = sum_rate(ErgodicConfig(num_users, power, corr, alpha), quad)
    return rate / math.log(math.log(num_users))


def ergodic_report(cfg: ErgodicConfig, quad: QuadratureSpec | None = None) -> ErgodicReport:
    """Rate plus both bounds and the transmit probability, in one pass."""
    return ErgodicReport(
        rate_nats=sum_rate(cfg, quad),
        upper_nats=sum_rate_upper(cfg),
        lower_nats=sum_rate_lower(cfg),
        prob_transmit=prob_some_above(cfg.threshold, cfg.num_users),
    )


def full_csi_rate(num_users: int, power: float, quad: QuadratureSpec | None = None) -> float:
    """Reference rate with non-delayed full CSI: E[log(1 + P max_k v_k^2)].

    The max of K unit exponentials has density K (1-e^{-x})^{K-1} e^{-x}.
    """

    def integrand(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            log_pdf = np.log(num_users) + (num_users - 1) * np.log1p(-np.exp(-x)) - x
        return np.log1p(power * x) * np.exp(log_pdf)

    return integrate_semi_infinite(integrand, 0.0, quad)


def no_csi_rate(power: float) -> float:
    """Reference rate with no CSI: E[log(1 + P v^2)] = e^{1/P} E1(1/P)."""
    if power <= 0:
        raise ValueError("power must be positive")
    return expx_e1(1.0 / power)
