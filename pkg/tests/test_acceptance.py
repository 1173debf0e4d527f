"""End-to-end acceptance suite.

Each test covers one numbered criterion, prints a single PASS line with the
measured figure of merit, and pins the tolerance it was specified with.
Closed forms are always checked against an independent path: direct
quadrature of defining integrals, the Monte-Carlo scheduler simulator, or a
frozen golden value.
"""

import csv
import math
import time

import numpy as np
import pytest
from scipy import integrate, special

from onebitfb.channel import CorrelationParams
from onebitfb.cli import main as cli_main
from onebitfb.ergodic import (
    ErgodicConfig,
    optimal_threshold,
    prob_some_above,
    rate_bracket,
    sum_rate,
    sum_rate_lower,
    sum_rate_upper,
    wideband_metrics,
)
from onebitfb.mcsim import (
    SimConfig,
    simulate_avg_power,
    simulate_ergodic_rate,
    simulate_outage,
)
from onebitfb.outage import (
    OutageConfig,
    PowerMode,
    default_threshold,
    dmt_empirical_slope,
    eps0_outdated,
    eps1_outdated,
    outage_instant,
    outage_longterm_closed,
    outage_outdated,
    power_split_longterm,
    zero_outage_threshold,
)
from onebitfb.specfun import QuadratureSpec, marcum_q1, marcum_q1_bounds

RATE_3BITS = 3 * math.log(2)

TIGHT = QuadratureSpec(
    abs_tol=1e-15, rel_tol=1e-12, max_subdivisions=2000, tail_cutoff_tol=1e-18
)


def _report(capsys, line):
    with capsys.disabled():
        print(line)


def _read_series(path, name):
    with open(path) as f:
        lines = [l for l in f if not l.startswith("#")]
    return [float(row[name]) for row in csv.DictReader(lines)]


def test_criterion_01_marcum_fidelity(capsys):
    """Q1 vs direct quadrature of its defining integral; within exp bounds."""
    t0 = time.monotonic()
    grid = np.geomspace(1e-3, 50.0, 30)
    a_mat, b_mat = np.meshgrid(grid, grid, indexing="ij")
    q = marcum_q1(a_mat, b_mat)
    worst = 0.0
    for i in range(30):
        for j in range(30):
            a, b = a_mat[i, j], b_mat[i, j]
            ref, _ = integrate.quad(
                lambda x: x * np.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x),
                b,
                max(a, b) + 60.0,
                limit=300,
            )
            worst = max(worst, abs(q[i, j] - ref))
    lo, hi = marcum_q1_bounds(a_mat, b_mat)
    inside = bool(np.all((q >= lo - 1e-12) & (q <= hi + 1e-12)))
    elapsed = time.monotonic() - t0
    assert worst <= 1e-9
    assert inside
    assert elapsed < 10.0
    _report(
        capsys,
        f"CRITERION 1: PASS - marcum_q1 max |err| {worst:.2e} <= 1e-9 on 30x30 "
        f"grid, inside bounds, {elapsed:.1f}s < 10s",
    )


def test_criterion_02_ergodic_vs_simulator(capsys):
    """Closed-form sum rate within 3 SE of 1e6-block MC on the 24-cell grid."""
    t0 = time.monotonic()
    worst_z = 0.0
    for k in (1, 4, 16):
        for rho in (0.0, 0.5, 0.9, 1.0):
            corr = CorrelationParams(rho)
            for snr_db in (10.0, 20.0):
                power = 10.0 ** (snr_db / 10.0)
                alpha = optimal_threshold(k, power, corr)
                closed = sum_rate(ErgodicConfig(k, power, corr, alpha))
                est = simulate_ergodic_rate(
                    SimConfig(k, power, corr, alpha, 10**6, 2024)
                )
                z = abs(est.mean - closed) / max(est.stderr, 1e-300)
                worst_z = max(worst_z, z)
                assert z <= 3.0, f"cell (K={k}, rho={rho}, {snr_db} dB): z={z:.2f}"
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0
    _report(
        capsys,
        f"CRITERION 2: PASS - 24 ergodic cells within 3 SE (worst z {worst_z:.2f}), "
        f"{elapsed:.0f}s < 300s",
    )


def test_criterion_03_bound_sandwich(capsys):
    """R_low <= R <= R_up with 1e-6 nat margin across the extended grid."""
    worst = 0.0
    cells = 0
    for k in (1, 4, 16):
        for rho in (0.0, 0.5, 0.9, 1.0):
            corr = CorrelationParams(rho)
            for snr_db in (10.0, 20.0):
                power = 10.0 ** (snr_db / 10.0)
                alphas = [optimal_threshold(k, power, corr), 0.5, 1.0, 2.0, 4.0]
                for alpha in alphas:
                    cfg = ErgodicConfig(k, power, corr, alpha)
                    rate = sum_rate(cfg)
                    lo = sum_rate_lower(cfg)
                    hi = sum_rate_upper(cfg)
                    worst = max(worst, lo - rate, rate - hi)
                    cells += 1
                    assert lo <= rate + 1e-6 and rate <= hi + 1e-6
    _report(
        capsys,
        f"CRITERION 3: PASS - sandwich holds on {cells} cells "
        f"(worst violation {max(worst, 0.0):.2e} <= 1e-6)",
    )


def test_criterion_04_degradation_prediction(capsys):
    """Large-K delay penalty tracks -2 log|rho| within 15% at K=1e6, P=100."""
    t0 = time.monotonic()
    rate_inst = None
    ratios = {}
    for rho in (1.0, 0.9, 0.7, 0.5):
        corr = CorrelationParams(rho)
        alpha = optimal_threshold(10**6, 100.0, corr)
        rate = sum_rate(ErgodicConfig(10**6, 100.0, corr, alpha))
        if rho == 1.0:
            rate_inst = rate
            continue
        gap = rate_inst - rate
        predicted = -2.0 * math.log(rho)
        ratios[rho] = gap / predicted
        assert abs(gap - predicted) <= 0.15 * predicted
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    pretty = ", ".join(f"rho={r}: {v:.3f}" for r, v in ratios.items())
    _report(
        capsys,
        f"CRITERION 4: PASS - gap/(-2 log rho) within 15% ({pretty}), "
        f"{elapsed:.0f}s < 60s",
    )


def test_criterion_05_wideband_pins(capsys):
    """Eb/N0_min and S0 pins plus finite-difference derivative checks."""
    wb0 = wideband_metrics(0.0, 1, CorrelationParams(0.0))
    assert abs(wb0.ebn0_min_linear - math.log(2)) <= 1e-12
    assert round(wb0.ebn0_min_db, 2) == -1.59

    big_k = 10**6
    alpha = math.log(big_k) - 2.0
    wb = wideband_metrics(alpha, big_k, CorrelationParams(0.9))
    approx_ebn0 = math.log(2) / (0.81 * math.log(big_k))
    assert abs(wb.ebn0_min_linear - approx_ebn0) <= 0.10 * approx_ebn0
    assert abs(wb.slope_s0 - 2.0) <= 0.05 * 2.0

    # finite differences of the actual rate curve, Richardson-extrapolated
    fd_errs = []
    for k, rho, al, report in (
        (1, 0.0, 0.0, wb0),
        (big_k, 0.9, alpha, wb),
    ):
        corr = CorrelationParams(rho)
        h = 5e-4
        r = lambda p: sum_rate(ErgodicConfig(k, p, corr, al), TIGHT)
        r1, r2, r4 = r(h), r(2 * h), r(4 * h)
        c1 = (4 * r1 - r2) / (2 * h)
        d1 = (r2 - 2 * r1) / (h * h)
        d2 = (r4 - 2 * r2) / (4 * h * h)
        c2 = 2 * d1 - d2
        ebn0_fd = math.log(2) / c1
        s0_fd = 2 * c1 * c1 / (-c2)
        rel_e = abs(ebn0_fd - report.ebn0_min_linear) / report.ebn0_min_linear
        rel_s = abs(s0_fd - report.slope_s0) / report.slope_s0
        fd_errs.append((rel_e, rel_s))
        assert rel_e <= 1e-3
        assert rel_s <= 1e-2
    worst_e = max(e for e, _ in fd_errs)
    worst_s = max(s for _, s in fd_errs)
    _report(
        capsys,
        f"CRITERION 5: PASS - Eb/N0_min pins exact/-1.59 dB, large-K within 10%/5%, "
        f"FD checks rel {worst_e:.1e} <= 1e-3 and {worst_s:.1e} <= 1e-2",
    )


def test_criterion_06_outage_vs_simulator(capsys):
    """Instantaneous and outdated outage within 3 SE of 1e6-trial MC."""
    t0 = time.monotonic()
    worst_z = 0.0
    cells = 0
    skipped = 0
    for k in (1, 8, 16):
        for snr_db in (5.0, 10.0, 15.0):
            power = 10.0 ** (snr_db / 10.0)
            for mode in (PowerMode.short_term(), PowerMode.long_term()):
                alpha = default_threshold(mode, power, RATE_3BITS)
                for rho in (0.5, 0.9, 1.0):
                    corr = CorrelationParams(rho)
                    cfg = OutageConfig(k, power, corr, RATE_3BITS, alpha, mode)
                    closed = (
                        outage_instant(cfg) if rho == 1.0 else outage_outdated(cfg)
                    ).eps
                    if closed < 1e-4:
                        skipped += 1
                        continue
                    est = simulate_outage(
                        SimConfig(
                            k, power, corr, alpha, 10**6, 777,
                            rate_nats=RATE_3BITS, mode=mode,
                        )
                    )
                    z = abs(est.mean - closed) / max(est.stderr, 1e-300)
                    worst_z = max(worst_z, z)
                    cells += 1
                    assert z <= 3.0, f"cell (K={k}, {snr_db} dB, {mode.kind}, rho={rho})"
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0
    _report(
        capsys,
        f"CRITERION 6: PASS - {cells} outage cells within 3 SE "
        f"(worst z {worst_z:.2f}, {skipped} below 1e-4 skipped), {elapsed:.0f}s < 600s",
    )


def test_criterion_07_longterm_pipeline_identity(capsys):
    """Closed form == composed threshold/split/mixture pipeline; golden point."""
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        power = 10.0 ** rng.uniform(0.5, 3.0)
        k = int(rng.integers(1, 9))
        rate = rng.uniform(0.5, 3.0)
        alpha = zero_outage_threshold(power, rate)
        p1, p0 = power_split_longterm(power, alpha, k)
        composed = outage_instant(
            OutageConfig(
                k, power, CorrelationParams(1.0), rate, alpha,
                PowerMode.explicit(p1, p0),
            )
        ).eps
        diff = abs(composed - outage_longterm_closed(power, k, rate))
        worst = max(worst, diff)
        assert diff <= 1e-12

    golden = outage_longterm_closed(100.0, 1, 2.0)
    assert golden == pytest.approx(0.01521, abs=5e-6)
    mode = PowerMode.long_term()
    alpha = zero_outage_threshold(100.0, 2.0)
    est = simulate_outage(
        SimConfig(
            1, 100.0, CorrelationParams(1.0), alpha, 10**6, 31,
            rate_nats=2.0, mode=mode,
        )
    )
    z = abs(est.mean - golden) / max(est.stderr, 1e-300)
    assert z <= 3.0
    _report(
        capsys,
        f"CRITERION 7: PASS - pipeline identity on 100 points (worst {worst:.1e} "
        f"<= 1e-12); golden 0.01521 reproduced, MC z {z:.2f} <= 3",
    )


def test_criterion_08_power_feasibility(capsys):
    """MC average power under the two-level split: <= P and within 3 SE."""
    rng = np.random.default_rng(99)
    worst_z = 0.0
    for i in range(20):
        k = int(rng.integers(1, 5))
        power = 10.0 ** rng.uniform(0.0, 2.0)
        alpha = rng.uniform(1.5, 3.0)
        mode = PowerMode.long_term()
        p1, p0 = mode.resolve(power, alpha, k)
        pr = prob_some_above(alpha, k)
        expected = p1 * pr + p0 * (1 - pr)
        est = simulate_avg_power(
            SimConfig(
                k, power, CorrelationParams(1.0), alpha, 200_000, 1000 + i, mode=mode
            )
        )
        z = abs(est.mean - expected) / max(est.stderr, 1e-300)
        worst_z = max(worst_z, z)
        assert expected <= power + 1e-9
        assert est.mean <= power + 3 * est.stderr
        assert z <= 3.0
    _report(
        capsys,
        f"CRITERION 8: PASS - 20 random two-level configs feasible and within "
        f"3 SE (worst z {worst_z:.2f})",
    )


def test_criterion_09_dmt_slopes(capsys):
    """Secant diversity between P=1e6 and 1e8 at r=0."""
    t0 = time.monotonic()
    slopes = {}
    for k in (1, 2, 4):
        slope = dmt_empirical_slope(
            lambda p, k=k: outage_longterm_closed(p, k, 1.0), 0.0, 1e6, 1e8
        )
        slopes[k] = slope
        assert abs(slope - 2 * k) <= 0.05 * 2 * k

    def eps_outdated(power):
        alpha = zero_outage_threshold(power, 1.0)
        cfg = OutageConfig(
            16, power, CorrelationParams(0.9), 1.0, alpha, PowerMode.long_term()
        )
        return outage_outdated(cfg).eps

    slope_out = dmt_empirical_slope(eps_outdated, 0.0, 1e6, 1e8)
    assert abs(slope_out - 1.0) <= 0.10
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    pretty = ", ".join(f"K={k}: {s:.3f}" for k, s in slopes.items())
    _report(
        capsys,
        f"CRITERION 9: PASS - long-term slopes ({pretty}) within 5% of 2K; "
        f"outdated slope {slope_out:.3f} within 10% of 1; {elapsed:.0f}s < 60s",
    )


def test_criterion_10_limit_reductions(capsys):
    """rho->1 and rho->0 reductions; large-threshold bracket via asymptotics."""
    near_one = CorrelationParams(1.0 - 1e-6)
    sup = 0.0
    for mode in (PowerMode.short_term(), PowerMode.long_term()):
        alpha = default_threshold(mode, 31.6, 1.5)
        for rate in np.linspace(0.3, 3.0, 10):
            cfg_i = OutageConfig(
                4, 31.6, CorrelationParams(1.0), float(rate), alpha, mode
            )
            cfg_o = OutageConfig(4, 31.6, near_one, float(rate), alpha, mode)
            sup = max(sup, abs(outage_outdated(cfg_o).eps - outage_instant(cfg_i).eps))
    assert sup <= 1e-3

    # rho = 0 collapses exactly to the unconditioned Rayleigh outage
    zero = CorrelationParams(0.0)
    for power in (5.0, 50.0):
        want = 1 - math.exp(-(math.exp(2.0) - 1) / power)
        assert eps1_outdated(2.0, power, 0.8, zero) == pytest.approx(want, rel=1e-12)
        assert eps0_outdated(2.0, power, 0.8, zero) == pytest.approx(want, rel=1e-12)

    bracket = rate_bracket(
        math.log(1e8) - 2.0, CorrelationParams(0.5), asymptotic=True
    )
    assert abs(bracket - 1.0) <= 0.05
    _report(
        capsys,
        f"CRITERION 10: PASS - rho->1 sup-norm {sup:.1e} <= 1e-3, rho=0 collapse "
        f"exact, asymptotic bracket {bracket:.3f} within 0.05 of 1",
    )


def test_criterion_11_figure_regeneration(capsys, tmp_path):
    """fig1/fig4/fig5 data files satisfy the documented orderings."""
    t0 = time.monotonic()
    assert cli_main(["figure", "fig1", "--out", str(tmp_path / "f1.csv")]) == 0
    assert (
        cli_main(
            ["figure", "fig4", "--rate-bits", "2", "--out", str(tmp_path / "f4.csv")]
        )
        == 0
    )
    assert cli_main(["figure", "fig5", "--out", str(tmp_path / "f5.csv")]) == 0

    # fig1: 1-bit curves sit between the no-CSI and full-CSI references
    full = _read_series(tmp_path / "f1_full_csi.csv", "rate_nats")
    none = _read_series(tmp_path / "f1_no_csi.csv", "rate_nats")
    for rho in ("1.0", "0.9", "0.5"):
        onebit = _read_series(tmp_path / f"f1_onebit_rho{rho}.csv", "rate_nats")
        assert all(
            lo - 1e-9 <= mid <= hi + 1e-9
            for lo, mid, hi in zip(none, onebit, full)
        ), f"fig1 ordering fails at rho={rho}"

    # fig4: outage decreases pointwise as rho increases
    curves = {
        rho: _read_series(tmp_path / f"f4_rho{rho}.csv", "eps")
        for rho in ("0.0", "0.5", "0.9", "1.0")
    }
    for lo, hi in zip(("0.0", "0.5", "0.9"), ("0.5", "0.9", "1.0")):
        assert all(
            a >= b - 1e-12 for a, b in zip(curves[lo], curves[hi])
        ), f"fig4 ordering fails between rho={lo} and rho={hi}"

    # fig5: diversity intercepts at r = 0
    intercepts = {
        "longterm_1bit": 32.0,
        "shortterm_1bit": 16.0,
        "outdated_1bit": 1.0,
    }
    for scheme, want in intercepts.items():
        d0 = _read_series(tmp_path / f"f5_{scheme}.csv", "d")[0]
        assert d0 == want
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0
    _report(
        capsys,
        f"CRITERION 11: PASS - fig1 between-references ordering, fig4 rho "
        f"ordering, fig5 intercepts 32/16/1 at K=16; {elapsed:.0f}s < 600s",
    )
