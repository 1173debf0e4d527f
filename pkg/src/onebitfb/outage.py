"""Outage probability and diversity-multiplexing tradeoff of the 1-bit scheme.

Covers instantaneous and outdated feedback under short-term, long-term
two-level, and explicit power policies, the zero-outage threshold and the
two-level power split, closed-form long-term outage, analytic DMT curves and
finite-SNR secant diversity estimates.

Rates are in nats; probabilities are plain floats in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import CorrelationParams
from .ergodic import prob_some_above
from .specfun import marcum_q1

__all__ = [
    "PowerMode",
    "OutageConfig",
    "OutageReport",
    "DmtPoint",
    "DmtCurve",
    "OutdatedTerms",
    "DMT_SCHEMES",
    "eps1_instant",
    "eps0_instant",
    "outage_instant",
    "zero_outage_threshold",
    "power_split_longterm",
    "outage_longterm_closed",
    "eps1_outdated",
    "eps0_outdated",
    "outage_outdated",
    "dmt_analytic",
    "dmt_empirical_slope",
    "default_threshold",
]

DMT_SCHEMES = (
    "longterm_1bit",
    "shortterm_1bit",
    "full_csi",
    "outdated_1bit",
    "no_csi",
    "p2p_1bit",
)


@dataclass(frozen=True)
class PowerMode:
    """Transmit-power policy resolved against the feedback outcome.

    short_term: P1 = P0 = P.
    long_term_two_level: P1 = P/2, P0 = P / (2 (1-e^{-alpha})^K).
    explicit: caller-supplied (P1, P0) for sensitivity studies.
    """

    kind: str
    p1: float | None = None
    p0: float | None = None

    def __post_init__(self):
        if self.kind not in ("short_term", "long_term_two_level", "explicit"):
            raise ValueError(f"unknown power mode {self.kind!r}")
        if self.kind == "explicit":
            if self.p1 is None or self.p0 is None or self.p1 < 0 or self.p0 < 0:
                raise ValueError("explicit mode requires P1, P0 >= 0")

    @classmethod
    def short_term(cls) -> "PowerMode":
        return cls("short_term")

    @classmethod
    def long_term(cls) -> "PowerMode":
        return cls("long_term_two_level")

    @classmethod
    def explicit(cls, p1: float, p0: float) -> "PowerMode":
        return cls("explicit", p1=p1, p0=p0)

    def resolve(self, power: float, alpha: float, num_users: int) -> tuple[float, float]:
        """Concrete (P1, P0) for a long-term budget ``power`` and threshold."""
        if self.kind == "short_term":
            return power, power
        if self.kind == "explicit":
            return float(self.p1), float(self.p0)
        return power_split_longterm(power, alpha, num_users)


@dataclass(frozen=True)
class OutageConfig:
    num_users: int
    power: float
    corr: CorrelationParams
    rate_nats: float
    threshold: float
    mode: PowerMode

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.rate_nats <= 0:
            raise ValueError("rate must be positive")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")


@dataclass(frozen=True)
class OutageReport:
    eps: float
    eps1: float
    eps0: float
    p1: float
    p0: float


@dataclass(frozen=True)
class DmtPoint:
    r: float
    d: float


@dataclass(frozen=True)
class DmtCurve:
    scheme: str
    points: tuple[DmtPoint, ...]


@dataclass(frozen=True)
class OutdatedTerms:
    """The two scale parameters of the outdated outage formulas."""

    mu: float  # 2 (e^R - 1) / (1 - rho^2)
    nu: float  # 2 alpha / (1 - rho^2)

    @classmethod
    def from_params(cls, rate_nats: float, alpha: float, corr: CorrelationParams) -> "OutdatedTerms":
        if corr.is_instantaneous:
            raise ValueError("outdated terms are finite only for |rho| < 1")
        omr2 = 1.0 - corr.rho ** 2
        return cls(mu=2.0 * math.expm1(rate_nats) / omr2, nu=2.0 * alpha / omr2)


def eps1_instant(rate_nats: float, p1: float, alpha: float) -> float:
    """Outage probability given feedback "1", instantaneous CSI.

    Zero whenever the qualified channel already supports the rate
    (R <= log(1 + P1 alpha)); otherwise 1 - exp(alpha - (e^R - 1)/P1).
    """
    if rate_nats <= 0 or alpha < 0:
        raise ValueError("need rate > 0 and alpha >= 0")
    if p1 == 0.0:
        return 1.0
    if rate_nats <= math.log1p(p1 * alpha):
        return 0.0
    return -math.expm1(alpha - math.expm1(rate_nats) / p1)


def eps0_instant(rate_nats: float, p0: float, alpha: float) -> float:
    """Outage probability given feedback "0" from every user, instantaneous CSI."""
    if rate_nats <= 0 or p0 < 0:
        raise ValueError("need rate > 0 and p0 >= 0")
    if alpha <= 0:
        raise ValueError("the all-zero feedback event has probability 0 at alpha = 0")
    if p0 == 0.0:
        return 1.0
    if rate_nats <= math.log1p(p0 * alpha):
        return -math.expm1(-math.expm1(rate_nats) / p0) / -math.expm1(-alpha)
    return 1.0


def outage_instant(cfg: OutageConfig) -> OutageReport:
    """Total outage with instantaneous feedback: conditional terms mixed by Pr(N>0)."""
    p1, p0 = cfg.mode.resolve(cfg.power, cfg.threshold, cfg.num_users)
    e1 = eps1_instant(cfg.rate_nats, p1, cfg.threshold)
    if cfg.threshold > 0:
        e0 = eps0_instant(cfg.rate_nats, p0, cfg.threshold)
    else:
        e0 = 0.0  # Pr(N = 0) = 0; the conditional value never enters the mixture
    prob = prob_some_above(cfg.threshold, cfg.num_users)
    eps = e1 * prob + e0 * (1.0 - prob)
    return OutageReport(eps=eps, eps1=e1, eps0=e0, p1=p1, p0=p0)


def zero_outage_threshold(power: float, rate_nats: float) -> float:
    """Threshold making feedback-"1" blocks outage-free under P1 = P/2.

    alpha = 2 (e^R - 1) / P, i.e. R = log(1 + (P/2) alpha) exactly.
    """
    if power <= 0 or rate_nats <= 0:
        raise ValueError("need power > 0 and rate > 0")
    return 2.0 * math.expm1(rate_nats) / power


def power_split_longterm(power: float, alpha: float, num_users: int) -> tuple[float, float]:
    """Two-level split: P1 = P/2 and P0 = P / (2 (1-e^{-alpha})^K).

    The implied average Pr(N>0) P1 + Pr(N=0) P0 never exceeds the budget P.
    """
    if power <= 0 or num_users < 1:
        raise ValueError("need power > 0 and num_users >= 1")
    if alpha <= 0:
        raise ValueError("P0 is unbounded at alpha = 0 (Pr(N=0) = 0)")
    pr_none = (-math.expm1(-alpha)) ** num_users
    return 0.5 * power, 0.5 * power / pr_none


def outage_longterm_closed(power: float, num_users: int, rate_nats: float) -> float:
    """Closed-form outage under the zero-outage threshold and two-level split.

    eps = (1 - e^{-2c/P})^{K-1} (1 - e^{-2c (1 - e^{-2c/P})^K / P}), c = e^R - 1.
    """
    if power <= 0 or num_users < 1 or rate_nats <= 0:
        raise ValueError("need power > 0, num_users >= 1, rate > 0")
    c = math.expm1(rate_nats)
    base = -math.expm1(-2.0 * c / power)
    return base ** (num_users - 1) * -math.expm1(-2.0 * c * base ** num_users / power)


def eps1_outdated(rate_nats: float, p1: float, alpha: float, corr: CorrelationParams) -> float:
    """Outage probability given feedback "1" with outdated CSI.

    Q1(sqrt(mu/P1), |rho| sqrt(nu)) - e^{alpha - (e^R-1)/P1}
    Q1(|rho| sqrt(mu/P1), sqrt(nu)).  Dispatches to the instantaneous form
    at |rho| = 1 and collapses to the unconditional exponential outage at
    rho = 0.
    """
    if rate_nats <= 0 or alpha < 0:
        raise ValueError("need rate > 0 and alpha >= 0")
    if p1 == 0.0:
        return 1.0
    if corr.is_instantaneous:
        return eps1_instant(rate_nats, p1, alpha)
    if corr.rho == 0.0:
        return -math.expm1(-math.expm1(rate_nats) / p1)
    t = OutdatedTerms.from_params(rate_nats, alpha, corr)
    r = corr.abs_rho
    a = math.sqrt(t.mu / p1)
    sb = math.sqrt(t.nu)
    val = marcum_q1(a, r * sb) - math.exp(alpha - math.expm1(rate_nats) / p1) * marcum_q1(r * a, sb)
    return min(max(val, 0.0), 1.0)


def eps0_outdated(rate_nats: float, p0: float, alpha: float, corr: CorrelationParams) -> float:
    """Outage probability given all-zero feedback with outdated CSI."""
    if rate_nats <= 0:
        raise ValueError("need rate > 0")
    if alpha <= 0:
        raise ValueError("the all-zero feedback event has probability 0 at alpha = 0")
    if p0 == 0.0:
        return 1.0
    if corr.is_instantaneous:
        return eps0_instant(rate_nats, p0, alpha)
    if corr.rho == 0.0:
        return -math.expm1(-math.expm1(rate_nats) / p0)
    t = OutdatedTerms.from_params(rate_nats, alpha, corr)
    r = corr.abs_rho
    a = math.sqrt(t.mu / p0)
    sb = math.sqrt(t.nu)
    ecr = math.exp(-math.expm1(rate_nats) / p0)
    val = (
        1.0
        - ecr
        - math.exp(-alpha) * marcum_q1(a, r * sb)
        + ecr * marcum_q1(r * a, sb)
    ) / -math.expm1(-alpha)
    return min(max(val, 0.0), 1.0)


def outage_outdated(cfg: OutageConfig) -> OutageReport:
    """Total outage with outdated feedback; equals the instantaneous result at |rho| = 1."""
    p1, p0 = cfg.mode.resolve(cfg.power, cfg.threshold, cfg.num_users)
    if cfg.corr.is_instantaneous:
        return outage_instant(cfg)
    e1 = eps1_outdated(cfg.rate_nats, p1, cfg.threshold, cfg.corr)
    if cfg.threshold > 0:
        e0 = eps0_outdated(cfg.rate_nats, p0, cfg.threshold, cfg.corr)
    else:
        e0 = 0.0
    prob = prob_some_above(cfg.threshold, cfg.num_users)
    eps = e1 * prob + e0 * (1.0 - prob)
    return OutageReport(eps=eps, eps1=e1, eps0=e0, p1=p1, p0=p0)


def _dmt_intercept(scheme: str, num_users: int) -> float:
    if scheme == "longterm_1bit":
        return 2.0 * num_users
    if scheme in ("shortterm_1bit", "full_csi"):
        return float(num_users)
    if scheme in ("outdated_1bit", "no_csi"):
        return 1.0
    if scheme == "p2p_1bit":
        return 2.0
    raise ValueError(f"unknown DMT scheme {scheme!r}")


def dmt_analytic(scheme: str, num_users: int, n_points: int = 11) -> DmtCurve:
    """Piecewise-linear DMT curve d(r) = d0 * (1 - r)^+ sampled on [0, 1]."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    d0 = _dmt_intercept(scheme, num_users)
    pts = []
    for i in range(n_points):
        r = i / (n_points - 1)
        pts.append(DmtPoint(r=r, d=d0 * max(0.0, 1.0 - r)))
    return DmtCurve(scheme=scheme, points=tuple(pts))


def dmt_empirical_slope(eps_fn, r: float, p_lo: float, p_hi: float) -> float:
    """Finite-SNR secant estimate of the diversity gain at multiplexing gain r.

    -[log eps(P_hi) - log eps(P_lo)] / [log P_hi - log P_lo] where eps_fn
    maps power to outage probability (the caller bakes the rate rule, e.g.
    R = r log P, into the closure).  Only analytic evaluators are usable at
    these powers; Monte-Carlo cannot resolve the probabilities involved.
    """
    if not p_hi > p_lo > 1.0:
        raise ValueError("need P_hi > P_lo > 1")
    e_lo = eps_fn(p_lo)
    e_hi = eps_fn(p_hi)
    if e_lo < 1e-300 or e_hi < 1e-300:
        raise OverflowError(
            "outage probability underflowed; use a lower P_hi"
        )
    return -(math.log(e_hi) - math.log(e_lo)) / (math.log(p_hi) - math.log(p_lo))


def default_threshold(mode: PowerMode, power: float, rate_nats: float) -> float:
    """Zero-outage threshold matched to the power policy.

    Long-term two-level transmits P/2 on "1" blocks, so alpha = 2(e^R-1)/P;
    short-term (and explicit) transmit P1 on "1" blocks, alpha = (e^R-1)/P1.
    """
    if mode.kind == "long_term_two_level":
        return zero_outage_threshold(power, rate_nats)
    p1 = power if mode.kind == "short_term" else float(mode.p1)
    if p1 <= 0:
        raise ValueError("cannot derive a zero-outage threshold for P1 = 0")
    return math.expm1(rate_nats) / p1
