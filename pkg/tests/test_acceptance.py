"""Acceptance suite: one test per acceptance criterion.

Each test prints a PASS/FAIL line with the measured quantities before
asserting, so `pytest -v -s tests/test_acceptance.py` reads as a checklist.
Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from curvstab import cli
from curvstab import curvature_algebra as ca
from curvstab import identity_checks as ic
from curvstab import polynomial_lemmas as pl
from curvstab import radial_field as rf
from curvstab import sphere_grid as sg
from curvstab import stability_lab as sl
from curvstab import surface_geometry as sgeo
from curvstab.harmonics import harmonic_field, random_band_limited

Y2 = [{"coeff": 1.0, "exponents": [1, 1, 0, 0]}]
Y1_Y2 = [{"coeff": 0.6, "exponents": [0, 0, 0, 1]},
         {"coeff": 1.0, "exponents": [1, 1, 0, 0]}]


def criterion(ok: bool, name: str, detail: str):
    print(f"{'PASS' if ok else 'FAIL'}: {name} -- {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def main_sweep():
    config = {
        "n": 3,
        "p": [2.0],
        "families": [
            {"name": "Y2", "terms": Y2, "eps": [0.1, 0.05, 0.025, 0.0125]},
            {"name": "Y1+Y2", "terms": Y1_Y2, "eps": [0.1, 0.05, 0.025, 0.0125]},
        ],
        "resolution": [24, 24, 48],
        "seed": 0,
    }
    t0 = time.time()
    records = sl.run_sweep(config)
    return config, records, time.time() - t0


def test_round_sphere_zero_case():
    t0 = time.time()
    worst = {}
    for n in (3, 4):
        grid = sg.build_grid(n, sg.default_resolution(n))
        report = sl.deficits(rf.RadialField(n, []), grid, 2.0)
        worst[n] = max(report.ric0_lp, report.weyl_lp, report.r_minus_avg_lp,
                       abs(report.r_avg - n * (n - 1)))
    elapsed = time.time() - t0
    ok = all(v < 1e-9 for v in worst.values()) and elapsed < 10.0
    criterion(ok, "round-sphere zero case",
              f"worst deficit n=3: {worst[3]:.2e}, n=4: {worst[4]:.2e}, "
              f"runtime {elapsed:.1f}s (limit 10s)")


def test_curvature_pipeline_crosschecks():
    t0 = time.time()
    worst_ric = worst_decomp = worst_trace = worst_weyl3 = 0.0
    cases = [(3, sg.build_grid(3, (10, 10, 20)), 10),
             (4, sg.build_grid(4, (8, 8, 8, 16)), 10)]
    rng = np.random.default_rng(2024)
    for n, grid, count in cases:
        for _ in range(count):
            field = random_band_limited(n, [2, 3, 4], rng, amplitude=0.1)
            geom = sgeo.assemble_grid(field, grid)
            riem = geom.riemann()
            ric_trace = ca.ricci_contraction(riem, geom.g_inv)
            worst_ric = max(worst_ric,
                            float(np.max(np.abs(ric_trace - geom.ric))))
            weyl = geom.weyl()
            lhs = ca.norm4_squared(riem, geom.g_inv)
            kn_gg = ca.kn_components(geom.g, geom.g)
            t1 = (geom.R ** 2 / (4 * n ** 2 * (n - 1) ** 2)) \
                * ca.norm4_squared(kn_gg, geom.g_inv)
            t2 = ca.norm4_squared(ca.kn_components(geom.ric0, geom.g),
                                  geom.g_inv) / (n - 2) ** 2
            t3 = ca.norm4_squared(weyl, geom.g_inv)
            worst_decomp = max(worst_decomp, float(
                np.max(np.abs(lhs - (t1 + t2 + t3)) / np.abs(lhs))))
            trace = ca.ricci_contraction(weyl, geom.g_inv)
            worst_trace = max(worst_trace, float(np.max(np.abs(trace))))
            if n == 3:
                worst_weyl3 = max(worst_weyl3,
                                  float(np.max(geom.weyl_gnorm())))
    elapsed = time.time() - t0
    ok = (worst_ric < 1e-9 and worst_decomp < 1e-8 and worst_trace < 1e-8
          and worst_weyl3 < 1e-8 and elapsed < 120.0)
    criterion(ok, "curvature pipeline cross-checks (20 fields)",
              f"ric two-path {worst_ric:.2e}, decomposition {worst_decomp:.2e},"
              f" weyl trace {worst_trace:.2e}, weyl(n=3) {worst_weyl3:.2e},"
              f" runtime {elapsed:.1f}s (limit 120s)")


def test_bianchi_identity():
    t0 = time.time()
    grid = sg.build_grid(3, sg.default_resolution(3))
    worst = 0.0
    for degree in range(1, 7):
        field = harmonic_field(3, degree, 0, amplitude=0.1)
        full, traceless = ic.bianchi_residual(field, grid, 2.0)
        worst = max(worst, full.pointwise_max, traceless.pointwise_max)
    probe = sg.build_chart_point(np.array([1.1, 0.8, 2.0]))
    fd_field = harmonic_field(3, 3, 0, amplitude=0.1)
    r_h = sgeo.christoffel_fd_check(fd_field, probe, 1e-3)
    r_h2 = sgeo.christoffel_fd_check(fd_field, probe, 5e-4)
    ratio = r_h / r_h2
    elapsed = time.time() - t0
    ok = worst < 1e-6 and 3.6 <= ratio <= 4.4 and elapsed < 120.0
    criterion(ok, "Bianchi identity on the harmonic library",
              f"max residual {worst:.2e} (tol 1e-6), fd ratio {ratio:.3f} in "
              f"[3.6,4.4], runtime {elapsed:.1f}s (limit 120s)")


def test_bochner_identity():
    grid = sg.build_grid(3, (16, 16, 32))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        field = random_band_limited(3, range(1, 7), rng, amplitude=0.3)
        worst = max(worst, ic.bochner_residual(field, grid))
    criterion(worst < 1e-7, "Bochner identity (20 random fields)",
              f"max residual {worst:.2e} (tol 1e-7)")


def test_polynomial_lemmas():
    t0 = time.time()
    details = []
    ok = True
    for n in (3, 4, 5):
        report = pl.certify_zeros(n, 3.0, 0.05)
        ok &= report.passed
        devs = [res.max_deviation for res in report.results.values()]
        details.append(f"n={n} zeros dev {max(devs):.1e}")
    bounds = {n: pl.quotient_bounds(n, 3.0, 10 ** 6, seed=0) for n in (3, 4, 5)}
    for n, b in bounds.items():
        shell = b.near_diagonal[1e-3]
        ok &= (b.q_over_p[0] > 0 and b.p_over_r[0] > 0
               and shell["p_over_r_residual"] < 1e-2
               and shell["q_residual"] < 1e-2)
        details.append(f"n={n} min q/p {b.q_over_p[0]:.3f} min p/r "
                       f"{b.p_over_r[0]:.3f} shell {shell['p_over_r_residual']:.1e}"
                       f"/{shell['q_residual']:.1e}")
    pin = pl.closed_form_pin(3, 10 ** 5, seed=1)
    ok &= pin < 1e-10
    elapsed = time.time() - t0
    ok &= elapsed < 600.0
    criterion(ok, "polynomial lemmas",
              "; ".join(details) + f"; closed-form pin {pin:.1e} (tol 1e-10);"
              f" runtime {elapsed:.0f}s (limit 600s)")


def test_obata_estimate():
    base = sg.build_grid(3, (12, 12, 24))
    doubled = sg.build_grid(3, (24, 24, 48))
    v = np.array([0.4, -0.2, 0.9, 0.3])
    kernel = ic.obata_ratio(rf.linear_field(3, v), doubled, 2.0)
    ok = kernel.lhs < 1e-9 and kernel.rhs < 1e-9
    rng = np.random.default_rng(99)
    p_values = (1.5, 2.0, 3.0)
    maxima = {grid: {p: 0.0 for p in p_values} for grid in (base, doubled)}
    finite = True
    for _ in range(200):
        field = random_band_limited(3, range(2, 7), rng, amplitude=0.1,
                                    k_terms=5)
        for grid in (base, doubled):
            vf, diff, deficit = ic.obata_data(field, grid)
            for p in p_values:
                ratio = sg.sobolev_norm(diff, 2, p, grid) \
                    / sg.lp_norm(deficit, p, grid)
                finite &= math.isfinite(ratio)
                maxima[grid][p] = max(maxima[grid][p], ratio)
    drift = max(abs(maxima[base][p] - maxima[doubled][p]) / maxima[doubled][p]
                for p in p_values)
    ok = ok and finite and drift < 0.05
    criterion(ok, "eigenfunction-gap (Obata-type) estimate",
              f"kernel sides {kernel.lhs:.1e}/{kernel.rhs:.1e} (tol 1e-9); "
              f"max ratios {[round(maxima[doubled][p], 3) for p in p_values]} "
              f"for p={list(p_values)}; grid-doubling drift {drift * 100:.2f}% "
              f"(limit 5%)")


def test_linearization_slopes():
    grid = sg.build_grid(3, (24, 24, 48))
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    table: dict[str, list] = {}
    for eps in eps_list:
        field = sgeo.normalize_volume(eps * harmonic_field(3, 2, 2), grid)
        for name, val in ic.linearization_residuals(field, grid, 2.0,
                                                    eps).items():
            table.setdefault(name, []).append(val)
    slopes = {name: ic.loglog_slope(eps_list, vals)
              for name, vals in table.items()}
    ok = all(1.9 <= s <= 2.1 for s in slopes.values())
    criterion(ok, "linearization slopes",
              ", ".join(f"{k}={v:.3f}" for k, v in slopes.items())
              + " (window [1.9, 2.1])")


def test_recentering(main_sweep):
    config, records, _ = main_sweep
    grid = sg.build_grid(3, tuple(config["resolution"]))
    a = np.array([0.1, -0.05, 0.02, 0.08])
    sol = sl.solve_center(sl.OffsetSphere(3, a), grid)
    offset_err = float(np.max(np.abs(sol["c0"] - a)))

    worst_phi = 0.0
    worst_moment = 0.0
    families = {fam["name"]: fam["terms"] for fam in config["families"]}
    for rec in records:
        if rec.epsilon > 0.05 or rec.status != "ok":
            continue
        worst_phi = max(worst_phi, rec.phi_residual)
        terms = [(t["coeff"], tuple(t["exponents"]))
                 for t in families[rec.family]]
        field = sgeo.normalize_volume(
            rec.epsilon * rf.RadialField(3, terms), grid)
        moment = sl.recenter_moment(field, rec.c0, grid)
        worst_moment = max(worst_moment, float(np.linalg.norm(moment)))

    field = sgeo.normalize_volume(
        0.02 * (harmonic_field(3, 1, 0) + harmonic_field(3, 2, 2)), grid)
    base = sl.solve_center(field, grid)
    theta = 0.9
    q = np.eye(4)
    q[0, 0] = q[2, 2] = math.cos(theta)
    q[0, 2] = -math.sin(theta)
    q[2, 0] = math.sin(theta)
    rotated = sl.solve_center(field.rotate(q), grid)
    equivariance = float(np.max(np.abs(rotated["c0"] - q @ base["c0"])))

    ok = (offset_err < 1e-6 and worst_phi < 1e-9 and worst_moment < 1e-7
          and equivariance < 1e-7)
    criterion(ok, "recentering",
              f"sphere-offset error {offset_err:.1e} (tol 1e-6); "
              f"max |Phi(c0)| {worst_phi:.1e} (tol 1e-9); "
              f"max |v_f_c0| {worst_moment:.1e} (tol 1e-7); "
              f"rotation equivariance {equivariance:.1e} (tol 1e-7)")


def test_main_stability_experiment(main_sweep):
    config, records, sweep_time = main_sweep
    t0 = time.time()
    ok = all(rec.status == "ok" for rec in records)
    ratios = {}
    witness = 0.0
    for rec in records:
        ok &= math.isfinite(rec.ratio_main)
        ratios.setdefault(rec.family, []).append(rec.ratio_main)
        witness = max(witness, rec.report.r_minus_avg_lp / rec.report.ric0_lp)
    spreads = {fam: max(vals) / min(vals) for fam, vals in ratios.items()}
    ok &= all(s < 2.0 for s in spreads.values())
    ok &= witness < 10.0

    config4 = {
        "n": 4,
        "p": [2.0],
        "families": [{"name": "Y2",
                      "terms": [{"coeff": 1.0,
                                 "exponents": [1, 1, 0, 0, 0]}],
                      "eps": [0.1, 0.05, 0.025]}],
        "resolution": [12, 12, 12, 24],
        "seed": 0,
    }
    records4 = sl.run_sweep(config4)
    fitted_k = 0.0
    for rec in records4:
        ok &= rec.status == "ok"
        denom = rec.report.ric0_lp + abs(rec.report.r_avg - 12.0)
        fitted_k = max(fitted_k, rec.report.weyl_lp / denom)
    ok &= math.isfinite(fitted_k) and fitted_k > 0
    elapsed = sweep_time + (time.time() - t0)
    ok &= elapsed < 900.0
    criterion(ok, "main stability experiment",
              f"ratio spreads {dict((k, round(v, 3)) for k, v in spreads.items())}"
              f" (< 2); scalar-average witness {witness:.2f}; n=4 fitted Weyl"
              f" K {fitted_k:.3f}; runtime {elapsed:.0f}s (limit 900s)")


def test_determinism_across_threads(tmp_path):
    import json
    config = {
        "n": 3,
        "p": [2.0],
        "families": [{"name": "Y2", "terms": Y2, "eps": [0.1, 0.05]}],
        "resolution": [10, 10, 20],
        "seed": 5,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out1 = tmp_path / "t1.csv"
    out8 = tmp_path / "t8.csv"
    assert cli.main(["sweep", "--input", str(cfg_path), "--output", str(out1),
                     "--threads", "1"]) == 0
    assert cli.main(["sweep", "--input", str(cfg_path), "--output", str(out8),
                     "--threads", "8"]) == 0
    identical = out1.read_bytes() == out8.read_bytes()
    criterion(identical, "determinism across thread counts",
              "CSV byte-identical for --threads 1 vs 8")
