"""Variance-control rules available to the adversarial experimenter.

Every rule is predictable: the volatility for step i depends only on the
observations X_1 .. X_{i-1} carried in the policy state, and the output
always lies inside the volatility band.  All rules except ``constant`` are
bang-bang: they sit at sigma_hi until the running statistic crosses a
threshold and drop to sigma_lo after.

Ties at a threshold resolve toward sigma_hi (inclusive <=), matching the
one-sided optimal rule

    sigma_i = sigma_hi  if S_{i-1}/sqrt(n) <= sigma_hi * Phi^-1(1-alpha),
    sigma_i = sigma_lo  otherwise.

The heuristic rule compares |S_{i-1}| / sqrt(n * s^2_{i-1}) against a
critical value, where s^2_{i-1} is the sample variance of the first i-1
observations (divisor i-2).  The scaling uses the full horizon n, not i-1.
Conventions left open by the construction are configuration:

* critical value: a fixed normal quantile Phi^-1(1-alpha/2) (default), the
  per-step Student-t quantile with i-2 degrees of freedom, or an explicit
  constant;
* steps i = 1, 2 (no variance estimate) and zero sample variance both take
  the sigma_hi branch, consistent with "not yet significant".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .capacity import VolatilityBand
from .errors import ConfigurationError, StateError
from .gheat import ThresholdLevel
from .special import norm_quantile, t_quantile

__all__ = [
    "ThresholdTable",
    "PolicySpec",
    "PolicyState",
    "constant_policy",
    "one_sided_optimal_policy",
    "two_sided_threshold_policy",
    "heuristic_t_policy",
    "next_sigma",
    "heuristic_critical_value",
    "profile_f_yy_values",
    "pde_policy_equiv_check",
]


@dataclass(frozen=True)
class ThresholdTable:
    """Time-indexed thresholds from the two-sided PDE sign-change locus.

    Lookup picks the nearest ``time_remaining`` entry, no interpolation.
    """

    time_remaining: tuple[float, ...]
    threshold: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.time_remaining) != len(self.threshold) or not self.time_remaining:
            raise ConfigurationError("threshold table must be non-empty and matched")
        if max(self.time_remaining) < 1.0 - 1e-12 or min(self.time_remaining) <= 0.0:
            raise ConfigurationError("threshold table must cover time_remaining in (0, 1]")

    @classmethod
    def from_levels(cls, levels: list[ThresholdLevel]) -> "ThresholdTable":
        return cls(
            time_remaining=tuple(lv.time_remaining for lv in levels),
            threshold=tuple(lv.threshold for lv in levels),
        )

    def lookup(self, time_remaining: float) -> float:
        best = min(
            range(len(self.time_remaining)),
            key=lambda j: abs(self.time_remaining[j] - time_remaining),
        )
        return self.threshold[best]


@dataclass(frozen=True)
class PolicySpec:
    """Which variance rule the simulated experimenter applies.

    ``kind`` is one of "constant", "one_sided_optimal",
    "two_sided_threshold", "heuristic_t"; the remaining fields apply per
    kind and are validated on construction.
    """

    kind: str
    band: VolatilityBand
    n: int
    alpha: float | None = None
    sigma_const: float | None = None
    table: ThresholdTable | None = None
    crit_rule: str = "normal"
    c_alpha: float | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigurationError(f"horizon n must be >= 1, got {self.n!r}")
        if self.kind == "constant":
            if self.sigma_const is None or not (
                self.band.sigma_lo <= self.sigma_const <= self.band.sigma_hi
            ):
                raise ConfigurationError(
                    "constant policy needs sigma_const inside the band"
                )
        elif self.kind == "one_sided_optimal":
            self._need_alpha()
        elif self.kind == "two_sided_threshold":
            if self.table is None:
                raise ConfigurationError("two_sided_threshold policy needs a table")
        elif self.kind == "heuristic_t":
            if self.crit_rule not in ("normal", "t_step", "fixed"):
                raise ConfigurationError(
                    f"unknown heuristic critical-value rule {self.crit_rule!r}"
                )
            if self.crit_rule == "fixed":
                if self.c_alpha is None or not self.c_alpha > 0.0:
                    raise ConfigurationError("fixed rule needs c_alpha > 0")
            else:
                self._need_alpha()
        else:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")

    def _need_alpha(self) -> None:
        if self.alpha is None or not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"policy kind {self.kind!r} needs alpha in (0, 1)")


def constant_policy(band: VolatilityBand, n: int, sigma: float) -> PolicySpec:
    return PolicySpec(kind="constant", band=band, n=n, sigma_const=sigma)


def one_sided_optimal_policy(band: VolatilityBand, n: int, alpha: float) -> PolicySpec:
    return PolicySpec(kind="one_sided_optimal", band=band, n=n, alpha=alpha)


def two_sided_threshold_policy(
    band: VolatilityBand, n: int, table: ThresholdTable
) -> PolicySpec:
    return PolicySpec(kind="two_sided_threshold", band=band, n=n, table=table)


def heuristic_t_policy(
    band: VolatilityBand,
    n: int,
    alpha: float | None = None,
    *,
    crit_rule: str = "normal",
    c_alpha: float | None = None,
) -> PolicySpec:
    if c_alpha is not None:
        crit_rule = "fixed"
    return PolicySpec(
        kind="heuristic_t", band=band, n=n, alpha=alpha,
        crit_rule=crit_rule, c_alpha=c_alpha,
    )


@dataclass
class PolicyState:
    """Running summaries of the observations seen so far.

    ``i`` is the 1-based index of the upcoming step; ``count`` must equal
    i - 1 (predictability: the state holds X_1 .. X_{i-1} only).
    """

    i: int = 1
    running_sum: float = 0.0
    running_sum_sq: float = 0.0
    count: int = 0

    def observe(self, x: float) -> None:
        """Advance the state past observation X_i = x."""
        self.running_sum += x
        self.running_sum_sq += x * x
        self.count += 1
        self.i += 1

    def sample_variance(self) -> float:
        """Unbiased sample variance of the count observations seen (divisor
        count - 1); 0.0 while fewer than two observations exist."""
        if self.count < 2:
            return 0.0
        mean_sq = self.running_sum * self.running_sum / self.count
        return max((self.running_sum_sq - mean_sq) / (self.count - 1), 0.0)


@lru_cache(maxsize=None)
def heuristic_critical_value(rule: str, alpha: float, i: int) -> float:
    """Critical value used by the heuristic rule at step i."""
    if rule == "normal":
        return norm_quantile(1.0 - alpha / 2.0)
    if rule == "t_step":
        return t_quantile(1.0 - alpha / 2.0, max(i - 2, 1))
    raise ConfigurationError(f"unknown heuristic critical-value rule {rule!r}")


def next_sigma(spec: PolicySpec, state: PolicyState) -> float:
    """Volatility for step ``state.i`` under ``spec``; always in the band."""
    if state.count != state.i - 1:
        raise StateError(
            f"state count {state.count} inconsistent with step index {state.i}"
        )
    if state.i > spec.n:
        raise StateError(f"step index {state.i} beyond horizon n={spec.n}")
    lo, hi = spec.band.sigma_lo, spec.band.sigma_hi
    root_n = math.sqrt(spec.n)

    if spec.kind == "constant":
        return spec.sigma_const

    if spec.kind == "one_sided_optimal":
        threshold = hi * norm_quantile(1.0 - spec.alpha)
        return hi if state.running_sum / root_n <= threshold else lo

    if spec.kind == "two_sided_threshold":
        time_remaining = 1.0 - (state.i - 1) / spec.n
        threshold = spec.table.lookup(time_remaining)
        return hi if abs(state.running_sum) / root_n <= threshold else lo

    if spec.kind == "heuristic_t":
        if state.i <= 2:
            return hi
        s2 = state.sample_variance()
        if s2 <= 0.0:
            return hi
        if spec.crit_rule == "fixed":
            crit = spec.c_alpha
        else:
            crit = heuristic_critical_value(spec.crit_rule, spec.alpha, state.i)
        stat = abs(state.running_sum) / math.sqrt(spec.n * s2)
        return hi if stat <= crit else lo

    raise ConfigurationError(f"unknown policy kind {spec.kind!r}")


def profile_f_yy_values(y: np.ndarray, band: VolatilityBand) -> np.ndarray:
    """Array version of ``capacity.profile_f_yy`` (same closed form)."""
    lo, hi = band.sigma_lo, band.sigma_hi
    sig = np.where(y <= 0.0, hi, lo)
    dens = np.exp(-0.5 * (y / sig) ** 2) / math.sqrt(2.0 * math.pi)
    return -2.0 * y / (hi + lo) * dens / (sig * sig)


def pde_policy_equiv_check(
    band: VolatilityBand,
    alpha: float,
    n: int,
    *,
    s_points: int = 2001,
) -> bool:
    """Verify the one-sided threshold rule against the curvature-sign rule.

    Rule A takes sigma_hi exactly when the closed-form second derivative of
    the one-sided solution is >= 0 at (1-(i-1)/n, S/sqrt(n)); rule B is the
    printed inequality S/sqrt(n) <= sigma_hi * Phi^-1(1-alpha).  Checked on
    a grid of S spanning +-5 sqrt(n) plus the exact threshold point, for
    every step i.  Returns True iff the rules agree everywhere.
    """
    c = band.sigma_hi * norm_quantile(1.0 - alpha)
    # x = S/sqrt(n); the tie point x = c must take the sigma_hi branch.
    xs = np.append(np.linspace(-5.0, 5.0, s_points), c)
    rule_b = xs <= c
    for i in range(1, n + 1):
        tau = 1.0 - (i - 1) / n
        y = (xs - c) / math.sqrt(tau)
        v = profile_f_yy_values(y, band)
        # The Gaussian factor is strictly positive but underflows for huge
        # |y|; v == 0.0 then resolves by the analytic sign, sign(-y).
        rule_a = (v > 0.0) | ((v == 0.0) & (y <= 0.0))
        if not np.array_equal(rule_a, rule_b):
            return False
    return True
