"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line
per criterion.  The two-sided simulation reproduction defaults to the full
one-million-replication scale; set GNORMAL_ACCEPT_REPS=100000 for the
desk-scale fallback with its wider tolerance.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gnormal import (
    GridSpec,
    SimulationConfig,
    TestSpec,
    VolatilityBand,
    constant_policy,
    heuristic_t_policy,
    indicator_above,
    norm_cdf,
    norm_quantile,
    one_sided_optimal_policy,
    p2_approx,
    pde_policy_equiv_check,
    profile_f,
    run,
    solve,
    t_cdf,
    t_quantile,
    verify_sandwich,
    wilson_interval,
)

BAND = VolatilityBand(0.8, 1.0)
ACCEPT_REPS = int(os.environ.get("GNORMAL_ACCEPT_REPS", "1000000"))
# full-scale tolerance 0.20pp covers reference MC noise, the independent
# seed, and the open critical-value convention; desk scale widens
SIM_TOL = 0.0020 if ACCEPT_REPS >= 1_000_000 else 0.0045
SEED = 1


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion:2d} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def heuristic_reports():
    """The four heteroscedastic t-test reproductions (n x critical rule)."""
    out = {}
    for n in (20, 200):
        for rule in ("normal", "t_step"):
            config = SimulationConfig(
                n=n,
                reps=ACCEPT_REPS,
                policy=heuristic_t_policy(BAND, n, 0.05, crit_rule=rule),
                test=TestSpec(sided="two", alpha=0.05, statistic="t"),
                seed=SEED,
            )
            out[(n, rule)] = run(config)
    return out


def test_criterion_1_two_sided_capacity_values():
    points = [
        (0.95, 2, 0.11, 2e-3),
        (0.975, 3, 0.056, 4e-4),
        (0.995, 3, 0.011, 5e-6),
    ]
    details = []
    ok = True
    for level, digits, rounded, rel_cap in points:
        approx = p2_approx(norm_quantile(level), BAND)
        good = round(approx.value, digits) == rounded and approx.rel_error_bound < rel_cap
        ok &= good
        details.append(f"p2({level})={approx.value:.6f} RE<{approx.rel_error_bound:.1e}")
    report(1, ok, "; ".join(details))


def test_criterion_2_pde_vs_closed_form():
    c = 1.96
    errors = []
    for nx in (501, 1001, 2001):
        grid = GridSpec(-10.0, 10.0, nx, 1.0)
        sol = solve(indicator_above(c), BAND, grid, max_levels=2)
        exact = np.array([profile_f(x - c, BAND) for x in sol.x])
        errors.append(float(np.abs(sol.final_values - exact).max()))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    ok = errors[2] <= 5e-3 and all(r >= 1.7 for r in ratios)
    report(
        2,
        ok,
        f"sup errors {errors[0]:.2e}/{errors[1]:.2e}/{errors[2]:.2e}, "
        f"ratios {ratios[0]:.2f}, {ratios[1]:.2f}",
    )


def test_criterion_3_sandwich():
    details = []
    ok = True
    for c in (1.0, 1.5, 2.0):
        rep = verify_sandwich(c, BAND)
        ok &= rep.passed
        details.append(
            f"c={c}: lower {rep.lower_bound_violation:.2e} <= eps {rep.eps_grid:.2e}, "
            f"upper slack {rep.upper_bound_slack:.2e}"
        )
    report(3, ok, "; ".join(details))


def test_criterion_4_one_sided_limit():
    target = 2 * 0.05 / (1.0 + BAND.sigma_lo / BAND.sigma_hi)
    config = SimulationConfig(
        n=10_000,
        reps=100_000,
        policy=one_sided_optimal_policy(BAND, 10_000, 0.05),
        test=TestSpec(sided="one", alpha=0.05, statistic="z", sigma_ref=BAND.sigma_hi),
        seed=SEED,
    )
    rate = run(config).rate
    ok = abs(rate - target) <= 0.004
    report(4, ok, f"rate {rate:.5f} vs limit {target:.5f} (|diff| <= 0.004)")


def test_criterion_5_heteroscedastic_reproduction(heuristic_reports):
    ok = True
    details = []
    for n, expected in ((20, 0.0565), (200, 0.0589)):
        in_band = []
        for rule in ("normal", "t_step"):
            rep = heuristic_reports[(n, rule)]
            in_band.append(abs(rep.rate - expected) <= SIM_TOL)
            lo3, _ = wilson_interval(rep.rejections, rep.reps - rep.degenerate, 3.0)
            ok &= lo3 > 0.05
            details.append(f"n={n}/{rule}: {rep.rate:.5f}")
        ok &= any(in_band)
    report(
        5,
        ok,
        f"targets 0.0565/0.0589 +-{SIM_TOL:.4f} at reps={ACCEPT_REPS}; "
        + ", ".join(details),
    )


def test_criterion_6_statistic_distribution(heuristic_reports):
    rep = heuristic_reports[(200, "normal")]
    hist = rep.histogram
    total = rep.reps - rep.degenerate
    edges = hist.edges
    ecdf = hist.cdf_at_edges(total)
    inside = np.abs(edges) <= 1.5 + 1e-12
    kolmogorov = max(
        abs(ecdf[j] - t_cdf(float(edges[j]), 199)) for j in np.nonzero(inside)[0]
    )
    lo3, _ = wilson_interval(rep.rejections, total, 3.0)
    ok = kolmogorov <= 0.01 and lo3 > 0.05
    report(
        6,
        ok,
        f"Kolmogorov on |T|<=1.5: {kolmogorov:.4f} (<= 0.01); "
        f"tail mass {rep.rate:.5f}, Wilson z=3 lower {lo3:.5f} > 0.05",
    )


def test_criterion_7_null_calibration():
    z999 = norm_quantile(0.9995)
    ok = True
    details = []
    for j, alpha in enumerate((0.01, 0.05, 0.1)):
        band = VolatilityBand(1.0, 1.0)
        config = SimulationConfig(
            n=50,
            reps=100_000,
            policy=constant_policy(band, 50, 1.0),
            test=TestSpec(sided="one", alpha=alpha, statistic="z", sigma_ref=1.0),
            seed=SEED + j,
        )
        rep = run(config)
        lo, hi = wilson_interval(rep.rejections, rep.reps, z999)
        ok &= lo <= alpha <= hi
        details.append(f"alpha={alpha}: rate {rep.rate:.5f} in [{lo:.5f},{hi:.5f}]")
    report(7, ok, "; ".join(details))


def test_criterion_8_policy_equivalence():
    bands = [
        VolatilityBand(0.8, 1.0),
        VolatilityBand(0.5, 1.0),
        VolatilityBand(1.0, 1.0),
        VolatilityBand(0.3, 2.0),
    ]
    ok = True
    count = 0
    for band in bands:
        for alpha in (0.01, 0.05, 0.1):
            for n in (10, 100, 1000):
                ok &= pde_policy_equiv_check(band, alpha, n)
                count += 1
    report(8, ok, f"curvature rule == threshold rule on {count} (band, alpha, n) combos")


def test_criterion_9_cli_determinism():
    args = [
        sys.executable, "-m", "gnormal", "simulate", "--n", "40", "--reps", "4000",
        "--policy", "heuristic-t", "--sigma-lo", "0.8", "--sigma-hi", "1",
        "--alpha", "0.05", "--sided", "two", "--stat", "t", "--seed", "123",
    ]
    payloads = []
    checksums = []
    for workers in ("1", "4", "16"):
        proc = subprocess.run(
            args + ["--workers", workers], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout)
        checksums.append(payload["manifest"]["output_sha256"])
        payload.pop("runtime_seconds")  # wall clock, the one volatile field
        payloads.append(json.dumps(payload, sort_keys=True))
    ok = len(set(payloads)) == 1 and len(set(checksums)) == 1
    report(9, ok, f"workers {{1,4,16}} identical modulo runtime; sha {checksums[0][:12]}...")


def test_criterion_10_special_function_contracts():
    ps = np.concatenate([np.logspace(-10, -1, 19), [0.5], 1 - np.logspace(-10, -1, 19)])
    worst = max(abs(norm_cdf(norm_quantile(float(p))) - p) for p in ps)
    q = t_quantile(0.975, 199)
    ok = worst <= 1e-12 and round(q, 2) == 1.97
    report(10, ok, f"quantile round-trip {worst:.2e} <= 1e-12; t_quantile(0.975,199)={q:.4f}")
