"""Command-line surface: every capability with machine-readable output.

JSON goes to stdout, diagnostics to stderr.  Exit codes: 0 success,
2 usage/domain error, 3 numerical failure, 4 property-check failure.

Every subcommand echoes a run manifest (inside the JSON payload, next to
file outputs, or on stderr for CSV-emitting commands) holding the resolved
parameters, tool version, seed and a SHA-256 checksum of the deterministic
output content.  Wall-clock runtime is excluded from the checksum; re-runs
with the same manifest parameters reproduce all checksummed bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

from . import __version__
from .capacity import (
    VolatilityBand,
    p1,
    p2_approx,
    relative_error_bound,
    two_sided_error_bound,
)
from .errors import (
    ConfigurationError,
    DomainError,
    GNormalError,
    NumericalError,
    StateError,
    UndefinedStatisticError,
)
from .gheat import (
    GridSpec,
    default_one_sided_grid,
    default_two_sided_grid,
    indicator_above,
    indicator_abs_above,
    lipschitz_sampled,
    solve,
    two_sided_threshold,
)
from .policy import (
    ThresholdTable,
    constant_policy,
    heuristic_t_policy,
    one_sided_optimal_policy,
    two_sided_threshold_policy,
)
from .simulate import SimulationConfig, TestSpec, run, wilson_interval
from .special import norm_quantile

USAGE_ERROR = 2
NUMERICAL_ERROR = 3
PROPERTY_FAILURE = 4

_USAGE_EXCEPTIONS = (DomainError, ConfigurationError, UndefinedStatisticError, StateError)


def _canonical_checksum(payload: dict) -> str:
    """SHA-256 over the canonical JSON of the payload, runtime stripped."""
    stable = {k: v for k, v in payload.items() if k != "runtime_seconds"}
    blob = json.dumps(stable, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _manifest(subcommand: str, parameters: dict, *, seed=None, checksums=None) -> dict:
    return {
        "subcommand": subcommand,
        "parameters": parameters,
        "version": __version__,
        "seed": seed,
        "output_sha256": checksums,
    }


def _emit_json(payload: dict, manifest: dict) -> None:
    manifest["output_sha256"] = _canonical_checksum(payload)
    print(json.dumps({**payload, "manifest": manifest}, indent=2))


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _band(args) -> VolatilityBand:
    return VolatilityBand(sigma_lo=args.sigma_lo, sigma_hi=args.sigma_hi)


def _resolve_c(args, band: VolatilityBand) -> float:
    if args.c is not None:
        return args.c
    if args.alpha is None:
        raise DomainError("provide --c, or --alpha with --sided")
    level = 1.0 - (args.alpha if args.sided == "one" else args.alpha / 2.0)
    return band.sigma_hi * norm_quantile(level)


# --------------------------------------------------------------------------
# capacity


def cmd_capacity(args) -> int:
    band = _band(args)
    c = _resolve_c(args, band)
    t = args.t
    payload: dict = {
        "sigma_lo": band.sigma_lo,
        "sigma_hi": band.sigma_hi,
        "c": c,
        "t": t,
        "p1": p1(c, band),
    }
    bounds_available = c > band.sigma_hi / 2.0 and c > band.sigma_hi * math.sqrt(t) / 2.0
    if args.bounds and not bounds_available:
        raise DomainError(
            f"error bounds require c > sigma_hi/2 and c > sigma_hi*sqrt(t)/2; got c = {c!r}"
        )
    if bounds_available:
        approx = p2_approx(c, band)
        payload["p2_approx"] = approx.value
        payload["abs_error_bound"] = two_sided_error_bound(c, t, band)
        payload["rel_error_bound"] = relative_error_bound(c, t, band)
    else:
        payload["p2_approx"] = None
        payload["abs_error_bound"] = None
        payload["rel_error_bound"] = None

    if args.pde:
        grid = default_two_sided_grid(c, band, nx=args.nx)
        sol = solve(indicator_abs_above(c), band, grid, max_levels=2)
        payload["p2_numeric"] = sol.value_at_final(0.0)
        payload["pde_grid"] = {
            "nx": grid.nx,
            "dx": grid.dx,
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "t_end": grid.t_end,
            "safety": grid.safety,
            "n_steps": sol.n_steps,
            "dt": sol.dt,
            "snapped_c": sol.snapped_c,
        }

    params = {
        "sigma_lo": args.sigma_lo, "sigma_hi": args.sigma_hi, "c": args.c,
        "alpha": args.alpha, "sided": args.sided, "t": args.t,
        "bounds": args.bounds, "pde": args.pde, "nx": args.nx,
    }
    _emit_json(payload, _manifest("capacity", params))
    return 0


# --------------------------------------------------------------------------
# solve


def _load_table(path: str):
    xs, ys = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigurationError(f"table row needs two columns: {line!r}")
            try:
                xs.append(float(parts[0]))
                ys.append(float(parts[1]))
            except ValueError as exc:
                if xs:
                    raise ConfigurationError(f"bad table row {line!r}") from exc
                continue  # tolerate one header line
    return lipschitz_sampled(xs, ys)


def cmd_solve(args) -> int:
    band = _band(args)
    if args.ic in ("one-sided", "two-sided"):
        if args.c is None:
            raise DomainError(f"--ic {args.ic} requires --c")
        ic = indicator_above(args.c) if args.ic == "one-sided" else indicator_abs_above(args.c)
        if args.x_min is None or args.x_max is None:
            default = (
                default_one_sided_grid(args.c, band)
                if args.ic == "one-sided"
                else default_two_sided_grid(args.c, band)
            )
            x_min = args.x_min if args.x_min is not None else default.x_min
            x_max = args.x_max if args.x_max is not None else default.x_max
        else:
            x_min, x_max = args.x_min, args.x_max
    elif args.ic.startswith("table:"):
        ic = _load_table(args.ic[len("table:"):])
        x_min = args.x_min if args.x_min is not None else ic.x[0]
        x_max = args.x_max if args.x_max is not None else ic.x[-1]
    else:
        raise DomainError(f"--ic must be one-sided, two-sided or table:<path>, got {args.ic!r}")

    grid = GridSpec(
        x_min=x_min, x_max=x_max, nx=args.nx, t_end=args.t_end, safety=args.safety
    )
    sol = solve(ic, band, grid, max_levels=args.levels)
    sol.write_csv(args.out)

    params = {
        "ic": args.ic, "c": args.c, "sigma_lo": args.sigma_lo,
        "sigma_hi": args.sigma_hi, "x_min": x_min, "x_max": x_max,
        "nx": args.nx, "t_end": args.t_end, "safety": args.safety,
        "levels": args.levels, "out": args.out,
    }
    manifest = _manifest(
        "solve", params, checksums={args.out: _file_sha256(args.out)}
    )
    manifest["solution"] = {
        "n_steps": sol.n_steps,
        "dt": sol.dt,
        "snapped_c": sol.snapped_c,
        "levels_kept": int(sol.times.size),
    }
    manifest_path = args.out + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} and {manifest_path}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# threshold


def cmd_threshold(args) -> int:
    band = _band(args)
    grid = None
    if args.nx is not None:
        c = band.sigma_hi * norm_quantile(1.0 - args.alpha / 2.0)
        grid = default_two_sided_grid(c, band, nx=args.nx)
    rows = two_sided_threshold(band, args.alpha, args.levels, grid=grid)
    constant_band = band.is_classical
    lines = ["time_remaining,threshold,flag"]
    for row in rows:
        flags = [row.flag] if row.flag else []
        if constant_band:
            flags.append("constant-band")
        lines.append(f"{row.time_remaining!r},{row.threshold!r},{'+'.join(flags)}")
    body = "\n".join(lines) + "\n"
    sys.stdout.write(body)

    params = {
        "alpha": args.alpha, "sigma_lo": args.sigma_lo,
        "sigma_hi": args.sigma_hi, "levels": args.levels, "nx": args.nx,
    }
    manifest = _manifest("threshold", params)
    manifest["output_sha256"] = hashlib.sha256(body.encode("utf-8")).hexdigest()
    print(json.dumps(manifest), file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# simulate


def _build_policy(args, band: VolatilityBand):
    if args.policy == "constant":
        sigma = args.sigma if args.sigma is not None else band.sigma_hi
        return constant_policy(band, args.n, sigma)
    if args.policy == "one-sided-opt":
        return one_sided_optimal_policy(band, args.n, args.alpha)
    if args.policy == "two-sided-thresh":
        rows = two_sided_threshold(band, args.alpha, args.table_levels)
        return two_sided_threshold_policy(band, args.n, ThresholdTable.from_levels(rows))
    if args.policy == "heuristic-t":
        rule = "normal" if args.crit == "normal" else "t_step"
        return heuristic_t_policy(band, args.n, args.alpha, crit_rule=rule)
    raise DomainError(f"unknown policy {args.policy!r}")


def cmd_simulate(args) -> int:
    band = _band(args)
    policy = _build_policy(args, band)
    sigma_ref = args.sigma_ref if args.sigma_ref is not None else band.sigma_hi
    test = TestSpec(
        sided=args.sided,
        alpha=args.alpha,
        statistic=args.stat,
        sigma_ref=sigma_ref if args.stat == "z" else None,
    )
    config = SimulationConfig(
        n=args.n, reps=args.reps, policy=policy, test=test,
        seed=args.seed, workers=args.workers,
    )
    report = run(config)
    payload = report.to_json_dict()

    checksums = None
    if args.hist is not None:
        report.histogram.write_csv(args.hist)
        checksums = {args.hist: _file_sha256(args.hist)}

    print(f"workers: {config.workers}", file=sys.stderr)
    params = {
        "n": args.n, "reps": args.reps, "policy": args.policy,
        "sigma_lo": args.sigma_lo, "sigma_hi": args.sigma_hi,
        "sigma": args.sigma, "alpha": args.alpha, "sided": args.sided,
        "stat": args.stat, "sigma_ref": sigma_ref, "crit": args.crit,
        "table_levels": args.table_levels, "seed": args.seed,
        "hist": args.hist,
    }
    manifest = _manifest("simulate", params, seed=args.seed, checksums=checksums)
    if checksums is not None:
        manifest["file_sha256"] = checksums
    _emit_json(payload, manifest)
    return 0


# --------------------------------------------------------------------------
# repro


def cmd_repro(args) -> int:
    band = VolatilityBand(sigma_lo=0.8, sigma_hi=1.0)
    reps = 100_000 if args.fast else args.reps
    sim_tol = 0.0020 if reps >= 1_000_000 else 0.0045
    checks = []

    for level, rounded, rel_cap in (
        (0.95, 0.11, 2e-3),
        (0.975, 0.056, 4e-4),
        (0.995, 0.011, 5e-6),
    ):
        c = norm_quantile(level)
        approx = p2_approx(c, band)
        ok = round(approx.value, 3 if rounded != 0.11 else 2) == rounded
        ok = ok and approx.rel_error_bound < rel_cap
        checks.append(
            (
                f"p2(Phi^-1({level}))",
                f"{approx.value:.6f} (RE bound {approx.rel_error_bound:.2e})",
                f"rounds to {rounded}, RE < {rel_cap:.0e}",
                ok,
            )
        )

    target = 2 * 0.05 / (1.0 + band.sigma_lo / band.sigma_hi)
    cfg = SimulationConfig(
        n=10_000,
        reps=100_000,
        policy=one_sided_optimal_policy(band, 10_000, 0.05),
        test=TestSpec(sided="one", alpha=0.05, statistic="z", sigma_ref=band.sigma_hi),
        seed=args.seed,
        workers=args.workers,
    )
    rate = run(cfg).rate
    checks.append(
        (
            "one-sided limit n=1e4",
            f"{rate:.5f}",
            f"|rate - {target:.5f}| <= 0.004",
            abs(rate - target) <= 0.004,
        )
    )

    for n, expected in ((20, 0.0565), (200, 0.0589)):
        cfg = SimulationConfig(
            n=n,
            reps=reps,
            policy=heuristic_t_policy(
                band, n, 0.05, crit_rule="normal" if args.crit == "normal" else "t_step"
            ),
            test=TestSpec(sided="two", alpha=0.05, statistic="t"),
            seed=args.seed,
            workers=args.workers,
        )
        report = run(cfg)
        lo3, _ = wilson_interval(report.rejections, report.reps - report.degenerate, 3.0)
        ok = abs(report.rate - expected) <= sim_tol and lo3 > 0.05
        checks.append(
            (
                f"two-sided t rate n={n}",
                f"{report.rate:.5f}",
                f"|rate - {expected}| <= {sim_tol} and > 0.05 by 3 Wilson SDs",
                ok,
            )
        )

    width = max(len(c[0]) for c in checks)
    all_ok = True
    for name, got, want, ok in checks:
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {got}  [{want}]")
    print(f"{'all checks passed' if all_ok else 'SOME CHECKS FAILED'}")
    return 0 if all_ok else PROPERTY_FAILURE


# --------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnormal",
        description="Tail capacities of the G-normal distribution: closed forms, "
        "PDE oracle, and adversarial variance-control simulations.",
    )
    parser.add_argument("--version", action="version", version=f"gnormal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_band(p):
        p.add_argument("--sigma-lo", type=float, required=True)
        p.add_argument("--sigma-hi", type=float, required=True)

    p = sub.add_parser("capacity", help="closed-form capacities and error bounds")
    add_band(p)
    p.add_argument("--c", type=float, default=None, help="threshold")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sided", choices=("one", "two"), default="two")
    p.add_argument("--t", type=float, default=1.0, help="time horizon for the bounds")
    p.add_argument("--bounds", action="store_true", help="require the error bounds")
    p.add_argument("--pde", action="store_true", help="also solve p2 numerically")
    p.add_argument("--nx", type=int, default=2401, help="space points for --pde")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("solve", help="solve the nonlinear heat equation to CSV")
    add_band(p)
    p.add_argument("--ic", required=True, help="one-sided | two-sided | table:<path>")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--x-min", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--nx", type=int, default=2001)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--safety", type=float, default=0.8)
    p.add_argument("--levels", type=int, default=201, help="retained time levels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("threshold", help="two-sided policy thresholds from w_xx = 0")
    add_band(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--levels", type=int, default=20)
    p.add_argument("--nx", type=int, default=None)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("simulate", help="Monte Carlo rejection-rate experiment")
    add_band(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument(
        "--policy",
        choices=("constant", "one-sided-opt", "two-sided-thresh", "heuristic-t"),
        required=True,
    )
    p.add_argument("--sigma", type=float, default=None, help="constant policy value")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sided", choices=("one", "two"), required=True)
    p.add_argument("--stat", choices=("z", "t"), required=True)
    p.add_argument("--sigma-ref", type=float, default=None, help="z scale (default sigma-hi)")
    p.add_argument("--crit", choices=("normal", "t"), default="normal",
                   help="heuristic-t critical value rule")
    p.add_argument("--table-levels", type=int, default=50,
                   help="threshold table rows for two-sided-thresh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--workers", type=int,
        default=int(os.environ.get("GNORMAL_WORKERS", "1")),
    )
    p.add_argument("--hist", default=None, help="write histogram CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("repro", help="re-run the headline numbers and report PASS/FAIL")
    p.add_argument("--reps", type=int, default=1_000_000)
    p.add_argument("--fast", action="store_true", help="desk scale: reps=1e5, wider bands")
    p.add_argument("--crit", choices=("normal", "t"), default="normal")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument(
        "--workers", type=int,
        default=int(os.environ.get("GNORMAL_WORKERS", "1")),
    )
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_EXCEPTIONS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except GNormalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
