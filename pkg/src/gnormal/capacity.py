"""Closed-form tail capacities of the G-normal distribution.

The one-sided Cauchy problem with indicator data 1{x > c} is solved by the
self-similar profile

    u(t, x) = f((x - c) / sqrt(t)),

where ``f`` splits into two Gaussian tail pieces weighted by the volatility
band edges.  Everything here is evaluated through ``norm_cdf`` in closed
form; no quadrature appears outside the test oracles.

The two-sided capacity has no closed form.  ``p2_approx`` returns twice the
one-sided capacity together with rigorous error bounds: the absolute bound
is the comparison-theorem sandwich

    0 <= u + v - w <= 2 (s_hi - s_lo)/s_hi * Phi(-2c / (s_hi sqrt(t))),

and the relative bound divides it by the exact minimum of u + v (attained
at x = 0).  ``relative_error_bound_closed_form`` keeps the looser printed
expression that avoids a second normal-CDF evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .special import norm_cdf, norm_pdf

__all__ = [
    "VolatilityBand",
    "TailQuery",
    "TwoSidedApprox",
    "profile_f",
    "profile_f_yy",
    "u_one_sided",
    "v_one_sided",
    "p1",
    "p2_approx",
    "two_sided_error_bound",
    "relative_error_bound",
    "relative_error_bound_closed_form",
]


@dataclass(frozen=True)
class VolatilityBand:
    """The pair (sigma_lo, sigma_hi) bounding the adversary's volatility.

    The PDE solver accepts sigma_lo = 0; the closed-form profile functions
    require sigma_lo > 0 (their lower Gaussian piece has scale sigma_lo).
    """

    sigma_lo: float
    sigma_hi: float

    def __post_init__(self) -> None:
        lo, hi = self.sigma_lo, self.sigma_hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"volatility band must be finite, got ({lo!r}, {hi!r})")
        if not 0.0 <= lo <= hi or hi <= 0.0:
            raise DomainError(
                f"volatility band requires 0 <= sigma_lo <= sigma_hi and sigma_hi > 0, "
                f"got ({lo!r}, {hi!r})"
            )

    @property
    def is_classical(self) -> bool:
        return self.sigma_lo == self.sigma_hi


@dataclass(frozen=True)
class TailQuery:
    """Point (t, x) and threshold c at which a one-sided solution is evaluated."""

    c: float
    t: float
    x: float

    def __post_init__(self) -> None:
        if not self.t >= 0.0:
            raise DomainError(f"time horizon must be >= 0, got {self.t!r}")


@dataclass(frozen=True)
class TwoSidedApprox:
    """Two-sided capacity approximation 2*p1 with its guarantee at t = 1."""

    value: float
    abs_error_bound: float
    rel_error_bound: float


def _require_closed_form(band: VolatilityBand) -> None:
    if band.sigma_lo <= 0.0:
        raise DomainError(
            "closed-form capacity functions require sigma_lo > 0 "
            "(use the PDE solver for a degenerate lower edge)"
        )


def profile_f(y: float, band: VolatilityBand) -> float:
    """Self-similar profile f(y); increasing from f(-inf)=0 to f(+inf)=1.

    Piecewise closed form:
        y <= 0:  2 s_hi/(s_hi+s_lo) * Phi(y/s_hi)
        y >  0:  1 - 2 s_lo/(s_hi+s_lo) * Phi(-y/s_lo)
    """
    _require_closed_form(band)
    lo, hi = band.sigma_lo, band.sigma_hi
    s = hi + lo
    if y <= 0.0:
        return 2.0 * hi / s * norm_cdf(y / hi)
    return 1.0 - 2.0 * lo / s * norm_cdf(-y / lo)


def profile_f_yy(y: float, band: VolatilityBand) -> float:
    """Second derivative of the profile; sign(f_yy(y)) = sign(-y).

    |f_yy| over y < 0 is maximized at y = -sigma_hi.
    """
    _require_closed_form(band)
    lo, hi = band.sigma_lo, band.sigma_hi
    sig = hi if y <= 0.0 else lo
    return -2.0 * y / (hi + lo) * norm_pdf(y / sig) / (sig * sig)


def u_one_sided(query: TailQuery, band: VolatilityBand) -> float:
    """Solution u(t, x) of the Cauchy problem with initial data 1{x > c}."""
    if query.t == 0.0:
        _require_closed_form(band)
        return 1.0 if query.x > query.c else 0.0
    return profile_f((query.x - query.c) / math.sqrt(query.t), band)


def v_one_sided(query: TailQuery, band: VolatilityBand) -> float:
    """Mirror solution v(t, x) with initial data 1{x < -c}; v(t,x) = u(t,-x)."""
    return u_one_sided(TailQuery(c=query.c, t=query.t, x=-query.x), band)


def p1(c: float, band: VolatilityBand) -> float:
    """One-sided tail capacity; equals u(1, 0) for threshold c.

    Closed form p1(c) = f(-c): for c >= 0 this is
    2 s_hi/(s_hi+s_lo) * Phi(-c/s_hi).
    """
    _require_closed_form(band)
    lo, hi = band.sigma_lo, band.sigma_hi
    s = hi + lo
    if c >= 0.0:
        return 2.0 * hi / s * norm_cdf(-c / hi)
    return 1.0 - 2.0 * lo / s * norm_cdf(c / lo)


def two_sided_error_bound(c: float, t: float, band: VolatilityBand) -> float:
    """Comparison-theorem bound on u + v - w, valid for c > sigma_hi*sqrt(t)/2."""
    _require_positive_time_regime(c, t, band)
    lo, hi = band.sigma_lo, band.sigma_hi
    if t == 0.0:
        return 0.0
    return 2.0 * (hi - lo) / hi * norm_cdf(-2.0 * c / (hi * math.sqrt(t)))


def relative_error_bound(c: float, t: float, band: VolatilityBand) -> float:
    """Bound on (u + v - w)/(u + v), valid for c > sigma_hi/2 (and the
    sandwich regime c > sigma_hi*sqrt(t)/2).

    The numerator is the absolute sandwich bound; the denominator is the
    exact minimum of u + v over x, attained at x = 0.  This is the sharp
    form behind the reported relative errors; the looser printed expression
    is available as ``relative_error_bound_closed_form``.
    """
    _require_relative_regime(c, t, band)
    if t == 0.0:
        return 0.0
    num = two_sided_error_bound(c, t, band)
    if num == 0.0:
        return 0.0
    den = 2.0 * profile_f(-c / math.sqrt(t), band)
    return num / den


def relative_error_bound_closed_form(c: float, t: float, band: VolatilityBand) -> float:
    """Gaussian-free upper bound on the relative error:

        (s_hi^2 - s_lo^2)(c^2/s_hi^2 + t)/(4 c^2) * exp(-3 c^2/(2 s_hi^2 t)).

    At t = 1 this dominates the asymptotic form
    (1 - s_lo^2/s_hi^2)/4 * exp(-3 c^2/(2 s_hi^2)).
    """
    _require_relative_regime(c, t, band)
    lo, hi = band.sigma_lo, band.sigma_hi
    if t == 0.0:
        return 0.0
    return (
        (hi * hi - lo * lo)
        * (c * c / (hi * hi) + t)
        / (4.0 * c * c)
        * math.exp(-1.5 * c * c / (hi * hi * t))
    )


def p2_approx(c: float, band: VolatilityBand) -> TwoSidedApprox:
    """Two-sided tail capacity approximation 2*p1(c) with its error bounds.

    Over-estimates the true p2: 0 <= 2*p1 - p2 <= abs_error_bound.  Requires
    c > sigma_hi/2, the regime where the bounds hold at t = 1.
    """
    _require_closed_form(band)
    if not c > band.sigma_hi / 2.0:
        raise DomainError(
            f"p2_approx requires c > sigma_hi/2 = {band.sigma_hi / 2.0!r}, got c = {c!r}"
        )
    return TwoSidedApprox(
        value=2.0 * p1(c, band),
        abs_error_bound=two_sided_error_bound(c, 1.0, band),
        rel_error_bound=relative_error_bound(c, 1.0, band),
    )


def _require_positive_time_regime(c: float, t: float, band: VolatilityBand) -> None:
    _require_closed_form(band)
    if not t >= 0.0:
        raise DomainError(f"time horizon must be >= 0, got {t!r}")
    if not c > band.sigma_hi * math.sqrt(t) / 2.0:
        raise DomainError(
            f"error bound requires c > sigma_hi*sqrt(t)/2 = "
            f"{band.sigma_hi * math.sqrt(t) / 2.0!r}, got c = {c!r}"
        )


def _require_relative_regime(c: float, t: float, band: VolatilityBand) -> None:
    _require_positive_time_regime(c, t, band)
    if not c > band.sigma_hi / 2.0:
        raise DomainError(
            f"relative error bound requires c > sigma_hi/2 = "
            f"{band.sigma_hi / 2.0!r}, got c = {c!r}"
        )
