"""Explicit monotone finite-difference solver for the nonlinear heat equation

    u_t = G(u_xx),   G(m) = (s_hi^2 m+ - s_lo^2 m-) / 2,

with indicator or sampled-Lipschitz initial data.  Forward Euler with the
3-point second difference is monotone under the step restriction
dt <= dx^2 / s_hi^2, so it converges to the viscosity solution; the solver
enforces dt = safety * dx^2 / s_hi^2 with safety in (0, 1].

Numerical conventions that matter to the contracts:

* Indicator thresholds are snapped to the midpoint of the grid cell
  containing them, so the sampled data is an exact 0/1 vector and the jump
  sits midway between nodes.  The snapped threshold is reported on the
  solution object; converged output approximates the problem with the
  snapped threshold exactly.
* Dirichlet boundaries are pinned to the closed-form one-sided solution
  (or the one-sided sum for two-sided data) when the band has a positive
  lower edge, otherwise to the initial datum; default domains put the
  boundary 10 s_hi beyond the threshold, where either choice is accurate
  to well below discretization error.
* The second difference is evaluated as (u[j-1] + u[j+1]) - 2 u[j].  With
  symmetric data on a symmetric grid this makes every step bitwise
  mirror-symmetric.
* Time levels are retained on a uniform subsample (every ``stride`` steps,
  endpoints included); the step count is rounded up so retained times land
  on exact multiples of t_end/(levels-1) at every spatial resolution,
  which lets refinement studies compare matching levels.

Within one solve, the update is a data-parallel map over space with one
synchronization per step; results are independent of how the space loop is
partitioned.  Distinct solves share no mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import VolatilityBand, profile_f, two_sided_error_bound
from .errors import ConfigurationError, DomainError, NumericalError
from .special import norm_quantile

__all__ = [
    "IndicatorAbove",
    "IndicatorAbsAbove",
    "LipschitzTable",
    "indicator_above",
    "indicator_abs_above",
    "lipschitz_sampled",
    "GridSpec",
    "GridSolution",
    "ThresholdLevel",
    "SandwichReport",
    "default_one_sided_grid",
    "default_two_sided_grid",
    "solve",
    "p2_numeric",
    "two_sided_threshold",
    "verify_sandwich",
]

# Sign changes of the discrete second derivative are ignored where both
# endpoint magnitudes sit below this multiple of the rounding noise floor
# eps/dx^2 (cancellation noise in flat regions has exactly that scale).
_D2_NOISE_MULT = 64.0

_DEFAULT_MAX_LEVELS = 201


@dataclass(frozen=True)
class IndicatorAbove:
    """Initial datum 1{x > c}."""

    c: float


@dataclass(frozen=True)
class IndicatorAbsAbove:
    """Initial datum 1{|x| > c}, c >= 0."""

    c: float

    def __post_init__(self) -> None:
        if not self.c >= 0.0:
            raise DomainError(f"two-sided threshold must be >= 0, got {self.c!r}")


@dataclass(frozen=True)
class LipschitzTable:
    """Initial datum sampled at strictly increasing abscissae."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y) or len(self.x) < 2:
            raise DomainError("lipschitz table needs >= 2 matched (x, y) pairs")
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise DomainError("lipschitz table abscissae must be strictly increasing")


InitialCondition = IndicatorAbove | IndicatorAbsAbove | LipschitzTable


def indicator_above(c: float) -> IndicatorAbove:
    return IndicatorAbove(c)


def indicator_abs_above(c: float) -> IndicatorAbsAbove:
    return IndicatorAbsAbove(c)


def lipschitz_sampled(x, y) -> LipschitzTable:
    return LipschitzTable(tuple(float(v) for v in x), tuple(float(v) for v in y))


@dataclass(frozen=True)
class GridSpec:
    """Space-time grid: nx nodes on [x_min, x_max], horizon t_end,
    CFL fraction safety in (0, 1]."""

    x_min: float
    x_max: float
    nx: int
    t_end: float
    safety: float = 0.8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ConfigurationError("grid endpoints must be finite")
        if not self.x_min < self.x_max:
            raise ConfigurationError(
                f"grid requires x_min < x_max, got [{self.x_min!r}, {self.x_max!r}]"
            )
        if self.nx < 3:
            raise ConfigurationError(f"grid requires nx >= 3, got {self.nx!r}")
        if not self.t_end > 0.0:
            raise ConfigurationError(f"grid requires t_end > 0, got {self.t_end!r}")
        if not 0.0 < self.safety <= 1.0:
            raise ConfigurationError(
                f"CFL safety fraction must lie in (0, 1], got {self.safety!r}"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)


@dataclass(frozen=True)
class ThresholdLevel:
    """One row of the second-derivative sign-change locus."""

    time_remaining: float
    threshold: float
    degenerate: bool = False
    multiple: bool = False

    @property
    def flag(self) -> str:
        parts = []
        if self.degenerate:
            parts.append("degenerate")
        if self.multiple:
            parts.append("multiple")
        return "+".join(parts)


@dataclass
class GridSolution:
    """Space-time solution on the retained time levels.

    ``values[k, j]`` is u(times[k], x[j]); ``uxx_sign`` holds the sign of
    the discrete second difference (boundary columns 0).  ``snapped_c`` is
    the cell-midpoint threshold actually used for indicator data.
    """

    grid: GridSpec
    band: VolatilityBand
    ic: InitialCondition
    x: np.ndarray
    times: np.ndarray
    values: np.ndarray
    uxx_sign: np.ndarray
    dt: float
    n_steps: int
    snapped_c: float | None = None
    threshold_times: np.ndarray | None = None
    threshold_roots: np.ndarray | None = None
    threshold_flags: np.ndarray | None = None
    _ic_range: tuple[float, float] = field(default=(0.0, 1.0))

    @property
    def final_values(self) -> np.ndarray:
        return self.values[-1]

    def value_at_final(self, x: float) -> float:
        """Linear interpolation of the t_end level at x."""
        if not self.x[0] <= x <= self.x[-1]:
            raise DomainError(f"x = {x!r} outside the grid")
        return float(np.interp(x, self.x, self.values[-1]))

    def write_csv(self, path) -> None:
        """Dump as ``t,x,u`` rows, time-major then space ascending."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x,u\n")
            for k, t in enumerate(self.times.tolist()):
                row = self.values[k].tolist()
                for xj, uj in zip(self.x.tolist(), row):
                    fh.write(f"{t!r},{xj!r},{uj!r}\n")


@dataclass(frozen=True)
class SandwichReport:
    """Outcome of checking 0 <= u + v - w <= bound on the retained grid.

    ``lower_bound_violation`` is max(w - (u+v)); ``upper_bound_slack`` is
    min(bound - (u+v-w)).  Both are compared against eps_grid, three times
    the observed two-resolution refinement residual.
    """

    c: float
    band: VolatilityBand
    eps_grid: float
    lower_bound_violation: float
    upper_bound_slack: float
    nodes_checked: int

    @property
    def lower_ok(self) -> bool:
        return self.lower_bound_violation <= self.eps_grid

    @property
    def upper_ok(self) -> bool:
        return self.upper_bound_slack >= -self.eps_grid

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def default_one_sided_grid(
    c: float, band: VolatilityBand, *, nx: int = 2001, t_end: float = 1.0
) -> GridSpec:
    span = abs(c) + 10.0 * band.sigma_hi
    return GridSpec(x_min=-span, x_max=span, nx=nx, t_end=t_end)


def default_two_sided_grid(
    c: float, band: VolatilityBand, *, nx: int = 2401, t_end: float = 1.0
) -> GridSpec:
    span = abs(c) + 10.0 * band.sigma_hi
    return GridSpec(x_min=-span, x_max=span, nx=nx, t_end=t_end)


def _snap_to_cell_midpoint(c: float, x_min: float, dx: float) -> float:
    # Midpoint of the cell containing c; a threshold exactly on a node snaps
    # to the midpoint on its right.
    k = math.floor((c - x_min) / dx)
    return x_min + (k + 0.5) * dx


def _sample_ic(ic, x, dx, band):
    """Initial vector, boundary-value callback, snapped threshold, data range."""
    x_min, x_max = float(x[0]), float(x[-1])
    lo_positive = band.sigma_lo > 0.0

    if isinstance(ic, IndicatorAbove):
        if not x_min < ic.c < x_max:
            raise ConfigurationError(
                f"threshold c = {ic.c!r} outside grid [{x_min!r}, {x_max!r}]"
            )
        c = _snap_to_cell_midpoint(ic.c, x_min, dx)
        u0 = (x > c).astype(float)

        if lo_positive:

            def bc(t):
                rt = math.sqrt(t)
                return (
                    profile_f((x_min - c) / rt, band),
                    profile_f((x_max - c) / rt, band),
                )

        else:

            def bc(t):
                return (0.0 if x_min <= c else 1.0, 1.0 if x_max > c else 0.0)

        return u0, bc, c, (0.0, 1.0)

    if isinstance(ic, IndicatorAbsAbove):
        if not ic.c < x_max:
            raise ConfigurationError(
                f"threshold c = {ic.c!r} outside grid [{x_min!r}, {x_max!r}]"
            )
        c = _snap_to_cell_midpoint(ic.c, x_min, dx)
        u0 = (np.abs(x) > c).astype(float)

        if lo_positive:

            def bc(t):
                rt = math.sqrt(t)
                return (
                    profile_f((x_min - c) / rt, band) + profile_f((-x_min - c) / rt, band),
                    profile_f((x_max - c) / rt, band) + profile_f((-x_max - c) / rt, band),
                )

        else:

            def bc(t):
                return (1.0 if abs(x_min) > c else 0.0, 1.0 if abs(x_max) > c else 0.0)

        return u0, bc, c, (0.0, 1.0)

    if isinstance(ic, LipschitzTable):
        tx = np.asarray(ic.x)
        ty = np.asarray(ic.y)
        u0 = np.interp(x, tx, ty)
        left, right = float(u0[0]), float(u0[-1])

        def bc(t):
            return (left, right)

        return u0, bc, None, (float(ty.min()), float(ty.max()))

    raise ConfigurationError(f"unknown initial condition {ic!r}")


def _retention_plan(raw_steps: int, max_levels: int):
    # Round the step count up so retained levels sit at j*t_end/(levels-1).
    levels = min(max_levels, raw_steps + 1)
    segments = max(levels - 1, 1)
    n_steps = ((raw_steps + segments - 1) // segments) * segments
    stride = n_steps // segments
    return n_steps, stride, levels


def solve(
    ic: InitialCondition,
    band: VolatilityBand,
    grid: GridSpec,
    *,
    max_levels: int = _DEFAULT_MAX_LEVELS,
    track_threshold: bool = False,
) -> GridSolution:
    """March the explicit monotone scheme to t_end.

    ``max_levels`` caps how many time levels are retained in the solution
    (uniformly subsampled, endpoints always included).  With
    ``track_threshold`` the positive sign-change root of the discrete
    second derivative is recorded at every step.
    """
    if max_levels < 2:
        raise ConfigurationError("max_levels must be >= 2")
    x = np.linspace(grid.x_min, grid.x_max, grid.nx)
    dx = grid.dx
    u0, bc, snapped_c, ic_range = _sample_ic(ic, x, dx, band)

    dt_max = grid.safety * dx * dx / (band.sigma_hi * band.sigma_hi)
    raw_steps = max(1, math.ceil(grid.t_end / dt_max))
    n_steps, stride, levels = _retention_plan(raw_steps, max_levels)
    dt = grid.t_end / n_steps

    half_hi = 0.5 * band.sigma_hi * band.sigma_hi
    half_lo = 0.5 * band.sigma_lo * band.sigma_lo
    inv_dx2 = 1.0 / (dx * dx)
    d2_noise_floor = _D2_NOISE_MULT * np.finfo(float).eps * inv_dx2 * max(
        abs(ic_range[0]), abs(ic_range[1]), 1.0
    )

    times = np.empty(levels)
    values = np.empty((levels, grid.nx))
    signs = np.zeros((levels, grid.nx), dtype=np.int8)
    if track_threshold:
        thr_times = np.empty(n_steps + 1)
        thr_roots = np.empty(n_steps + 1)
        thr_flags = np.zeros(n_steps + 1, dtype=np.int8)
        pos_from = int(np.searchsorted(x[1:-1], 0.0))
    ref_c = snapped_c if snapped_c is not None else 0.0

    u = u0.copy()
    kept = 0
    nan_step = -1

    def record(t: float, d2: np.ndarray) -> None:
        nonlocal kept
        times[kept] = t
        values[kept] = u
        signs[kept, 1:-1] = np.sign(d2)
        kept += 1

    def track(step_index: int, t: float, d2: np.ndarray) -> None:
        root, degenerate, multiple = _d2_sign_change_root(
            x, d2, pos_from, ref_c, d2_noise_floor
        )
        thr_times[step_index] = t
        thr_roots[step_index] = root
        thr_flags[step_index] = (1 if degenerate else 0) | (2 if multiple else 0)

    for k in range(n_steps):
        # Second difference in mirror-stable order: (u[j-1] + u[j+1]) - 2 u[j].
        d2 = ((u[:-2] + u[2:]) - 2.0 * u[1:-1]) * inv_dx2
        t_now = k * dt
        if k % stride == 0:
            record(t_now, d2)
        if track_threshold:
            track(k, t_now, d2)
        g = half_hi * np.maximum(d2, 0.0) + half_lo * np.minimum(d2, 0.0)
        u[1:-1] += dt * g
        t_next = (k + 1) * dt
        u[0], u[-1] = bc(t_next)
        if nan_step < 0 and not np.isfinite(u[1 :: max(grid.nx // 8, 1)]).all():
            nan_step = k + 1
            break

    if nan_step < 0 and not np.isfinite(u).all():
        nan_step = n_steps
    if nan_step >= 0:
        raise NumericalError(f"non-finite values detected at step {nan_step}")

    d2 = ((u[:-2] + u[2:]) - 2.0 * u[1:-1]) * inv_dx2
    record(grid.t_end, d2)
    if track_threshold:
        track(n_steps, grid.t_end, d2)
    assert kept == levels

    return GridSolution(
        grid=grid, band=band, ic=ic, x=x, times=times, values=values,
        uxx_sign=signs, dt=dt, n_steps=n_steps, snapped_c=snapped_c,
        threshold_times=thr_times if track_threshold else None,
        threshold_roots=thr_roots if track_threshold else None,
        threshold_flags=thr_flags if track_threshold else None,
        _ic_range=ic_range,
    )


def _d2_sign_change_root(x, d2, pos_from, ref_c, noise_floor):
    """Positive-half root of d2 = 0, located by bracketing sign change and
    linear interpolation.  Returns (root, degenerate, multiple)."""
    xs = x[1:-1][pos_from:]
    s = d2[pos_from:]
    if xs.size < 2:
        return ref_c, True, False
    left = s[:-1]
    right = s[1:]
    flip = (left > 0.0) & (right < 0.0) | (left < 0.0) & (right > 0.0)
    flip &= np.maximum(np.abs(left), np.abs(right)) > noise_floor
    idx = np.nonzero(flip)[0]
    if idx.size == 0:
        return ref_c, True, False
    roots = xs[idx] - left[idx] * (xs[idx + 1] - xs[idx]) / (right[idx] - left[idx])
    pick = int(np.argmin(np.abs(roots - ref_c)))
    return float(roots[pick]), False, idx.size > 1


def p2_numeric(c: float, band: VolatilityBand, grid: GridSpec | None = None) -> float:
    """Two-sided tail capacity w(t_end, 0) solved from 1{|x| > c} data.

    The grid must cover [-(c + 8 s_hi), c + 8 s_hi]; the default puts the
    boundary at +-(c + 10 s_hi).
    """
    if not c >= 0.0:
        raise DomainError(f"p2_numeric requires c >= 0, got {c!r}")
    if grid is None:
        grid = default_two_sided_grid(c, band)
    reach = c + 8.0 * band.sigma_hi
    if grid.x_min > -reach or grid.x_max < reach:
        raise ConfigurationError(
            f"grid [{grid.x_min!r}, {grid.x_max!r}] does not cover +-{reach!r}"
        )
    sol = solve(indicator_abs_above(c), band, grid, max_levels=2)
    return sol.value_at_final(0.0)


def two_sided_threshold(
    band: VolatilityBand,
    alpha: float,
    levels: int,
    *,
    grid: GridSpec | None = None,
) -> list[ThresholdLevel]:
    """Sign-change locus of w_xx for initial data 1{|x| > c} with
    c = s_hi * Phi^-1(1 - alpha/2), sampled at ``levels`` uniformly spaced
    times over (0, t_end].

    ``time_remaining`` is the PDE time: the policy that consumes this table
    evaluates it at 1 - (i-1)/n.  Where no sign change is found the row
    reports the threshold c itself with the degenerate flag set.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if levels < 1:
        raise DomainError("levels must be >= 1")
    c = band.sigma_hi * norm_quantile(1.0 - alpha / 2.0)
    if grid is None:
        grid = default_two_sided_grid(c, band, nx=1201)
    sol = solve(indicator_abs_above(c), band, grid, max_levels=2, track_threshold=True)
    t_all = sol.threshold_times
    out = []
    for j in range(1, levels + 1):
        target = j * grid.t_end / levels
        k = int(np.argmin(np.abs(t_all - target)))
        flags = int(sol.threshold_flags[k])
        out.append(
            ThresholdLevel(
                time_remaining=float(t_all[k]),
                threshold=float(sol.threshold_roots[k]),
                degenerate=bool(flags & 1),
                multiple=bool(flags & 2),
            )
        )
    return out


def one_sided_exact_values(sol: GridSolution, t: float) -> np.ndarray:
    """Closed-form one-sided solution on the solution's grid at time t,
    using the solver's snapped threshold."""
    if sol.snapped_c is None:
        raise DomainError("exact values are defined for indicator data only")
    c = sol.snapped_c
    if t == 0.0:
        return (sol.x > c).astype(float)
    rt = math.sqrt(t)
    return np.fromiter(
        (profile_f((xj - c) / rt, sol.band) for xj in sol.x),
        dtype=float,
        count=sol.x.size,
    )


def two_sided_exact_sum(sol: GridSolution, t: float) -> np.ndarray:
    """Closed-form u + v on the solution's grid at time t (snapped c)."""
    if sol.snapped_c is None:
        raise DomainError("exact values are defined for indicator data only")
    c = sol.snapped_c
    if t == 0.0:
        return (np.abs(sol.x) > c).astype(float)
    rt = math.sqrt(t)
    band = sol.band
    return np.fromiter(
        (
            profile_f((xj - c) / rt, band) + profile_f((-xj - c) / rt, band)
            for xj in sol.x
        ),
        dtype=float,
        count=sol.x.size,
    )


def verify_sandwich(
    c: float,
    band: VolatilityBand,
    grid: GridSpec | None = None,
    *,
    max_levels: int = _DEFAULT_MAX_LEVELS,
) -> SandwichReport:
    """Check 0 <= u + v - w <= bound(t) at every retained node with t > 0.

    The tolerance eps_grid is three times the sup difference between the
    requested resolution and a once-coarsened resolution at matching
    space-time nodes.  Violations beyond eps_grid are reported, not raised.
    """
    if grid is None:
        grid = default_two_sided_grid(c, band, nx=1601)
    if grid.nx % 2 == 0:
        raise ConfigurationError("verify_sandwich requires odd nx for coarsening")
    if not c > band.sigma_hi * math.sqrt(grid.t_end) / 2.0:
        raise DomainError(
            "sandwich bound requires c > sigma_hi * sqrt(t_end) / 2"
        )

    coarse_grid = GridSpec(
        x_min=grid.x_min, x_max=grid.x_max, nx=(grid.nx + 1) // 2,
        t_end=grid.t_end, safety=grid.safety,
    )
    # Use one shared level count so retained times match across resolutions.
    raw_coarse = _raw_steps(coarse_grid, band)
    raw_fine = _raw_steps(grid, band)
    levels = min(max_levels, raw_coarse + 1, raw_fine + 1)

    fine = solve(indicator_abs_above(c), band, grid, max_levels=levels)
    coarse = solve(indicator_abs_above(c), band, coarse_grid, max_levels=levels)
    if fine.times.size != coarse.times.size:
        raise NumericalError("refinement levels failed to align")

    residual = float(
        np.max(np.abs(fine.values[1:, 0::2] - coarse.values[1:, :]))
    )
    eps_grid = 3.0 * residual

    lower_violation = -math.inf
    upper_slack = math.inf
    nodes = 0
    for k in range(1, fine.times.size):
        t = float(fine.times[k])
        uv = two_sided_exact_sum(fine, t)
        w = fine.values[k]
        bound = two_sided_error_bound(fine.snapped_c, t, band)
        gap = uv - w
        lower_violation = max(lower_violation, float(np.max(-gap)))
        upper_slack = min(upper_slack, float(np.min(bound - gap)))
        nodes += w.size

    return SandwichReport(
        c=c,
        band=band,
        eps_grid=eps_grid,
        lower_bound_violation=lower_violation,
        upper_bound_slack=upper_slack,
        nodes_checked=nodes,
    )


def _raw_steps(grid: GridSpec, band: VolatilityBand) -> int:
    dt_max = grid.safety * grid.dx * grid.dx / (band.sigma_hi * band.sigma_hi)
    return max(1, math.ceil(grid.t_end / dt_max))
