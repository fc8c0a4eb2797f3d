"""Command-line entry point.

Subcommands:
    verify-identities   Bianchi / Bochner / commutation / linearization suite
    verify-poly         polynomial zero certification + quotient bounds
    deficit             deficit report for one surface spec
    recenter            optimal-center solve for one surface spec
    sweep               batch stability experiment -> CSV
    obata-check         eigenfunction-gap ratio over random fields

Exit codes: 0 all requested checks pass, 1 a check failed, 2 configuration
error, 3 solver or numeric error.  `--threads` falls back to the
CURVSTAB_THREADS environment variable; threads only distribute independent
cases and never change any numeric result.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import harmonics, identity_checks, polynomial_lemmas, stability_lab
from .radial_field import field_from_spec, ricci_commutation_check
from .sphere_grid import build_chart_point, build_grid, default_resolution
from .stability_lab import SolverError
from .surface_geometry import christoffel_fd_check, normalize_volume


@dataclass
class RunConfig:
    command: str
    input_path: str | None
    output_path: str | None
    n: int
    p: float
    resolution: tuple[int, ...]
    raw_resolution: str | None
    lam: float
    eps: float | None
    seed: int
    threads: int
    tolerance: float | None


class ConfigError(ValueError):
    pass


def _parse_resolution(text: str | None, n: int):
    if text is None:
        return default_resolution(n)
    parts = [int(x) for x in text.split(",") if x.strip()]
    if len(parts) == 1:
        r = parts[0]
        return tuple([r] * (n - 1) + [2 * r])
    if len(parts) != n:
        raise ConfigError(f"--resolution needs 1 or {n} integers")
    return tuple(parts)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CURVSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("CURVSTAB_THREADS must be an integer") from exc
    return 1


def _load_json(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def _write_output(path: str | None, payload) -> None:
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigError(f"output directory does not exist: {parent}")
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(payload, str):
            fh.write(payload)
        else:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _status_line(ok: bool, name: str, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return ok


# --------------------------------------------------------------------------
# Subcommand implementations
# --------------------------------------------------------------------------

def _cmd_verify_identities(cfg: RunConfig) -> int:
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-6
    grid = build_grid(cfg.n, cfg.resolution)
    records = []
    all_ok = True

    probe = build_chart_point(np.array([1.1, 0.8] + [0.9] * (cfg.n - 3) + [2.0]))
    for degree in range(1, harmonics.MAX_DEGREE + 1):
        fld = harmonics.harmonic_field(cfg.n, degree, 0, amplitude=0.1)
        full, traceless = identity_checks.bianchi_residual(fld, grid, cfg.p)
        comm = ricci_commutation_check(fld, probe)
        boch = identity_checks.bochner_residual(fld, grid)
        ok = (full.pointwise_max < tol and traceless.pointwise_max < tol
              and comm < 1e-8 and boch < 1e-7)
        all_ok &= _status_line(
            ok, f"identities deg={degree}",
            f"bianchi={full.pointwise_max:.2e} traceless="
            f"{traceless.pointwise_max:.2e} commutation={comm:.2e} "
            f"bochner={boch:.2e}")
        records.extend([full.record(), traceless.record(),
                        {"name": f"commutation_deg{degree}", "value": comm},
                        {"name": f"bochner_deg{degree}", "value": boch}])

    fd_field = harmonics.harmonic_field(cfg.n, 3, 0, amplitude=0.1)
    r_h = christoffel_fd_check(fd_field, probe, 1e-3)
    r_h2 = christoffel_fd_check(fd_field, probe, 5e-4)
    ratio = r_h / r_h2 if r_h2 > 0 else float("nan")
    ok = 3.6 <= ratio <= 4.4
    all_ok &= _status_line(ok, "christoffel fd order",
                           f"residual(h)={r_h:.2e} ratio={ratio:.3f}")
    records.append({"name": "christoffel_fd_ratio", "value": ratio})

    eps_list = [0.1, 0.05, 0.025, 0.0125]
    table: dict[str, list] = {}
    for eps in eps_list:
        fld = normalize_volume(eps * harmonics.harmonic_field(cfg.n, 2, 2), grid)
        res = identity_checks.linearization_residuals(fld, grid, cfg.p, eps)
        for k, v in res.items():
            table.setdefault(k, []).append(v)
    for name, vals in table.items():
        slope = identity_checks.loglog_slope(eps_list, vals)
        ok = 1.9 <= slope <= 2.1
        all_ok &= _status_line(ok, f"linearization slope {name}",
                               f"slope={slope:.3f}")
        records.append({"name": f"slope_{name}", "value": slope,
                        "residuals": vals, "eps": eps_list})

    _write_output(cfg.output_path, records)
    return 0 if all_ok else 1


def _cmd_verify_poly(cfg: RunConfig) -> int:
    zero_report = polynomial_lemmas.certify_zeros(cfg.n, cfg.lam, 0.05)
    bounds = polynomial_lemmas.quotient_bounds(
        cfg.n, cfg.lam, 10 ** 6, seed=cfg.seed)
    records = zero_report.records() + bounds.records()
    all_ok = True
    for name, res in zero_report.results.items():
        all_ok &= _status_line(
            res.passed, f"zeros of {name}",
            f"clusters={len(res.zeros)} max_dev={res.max_deviation:.2e} "
            f"scanned={zero_report.samples}")
    all_ok &= _status_line(bounds.q_over_p[0] > 0, "q/p positive",
                           f"min={bounds.q_over_p[0]:.6f} at "
                           f"{np.round(bounds.q_over_p_argmin, 4).tolist()}")
    all_ok &= _status_line(bounds.p_over_r[0] > 0, "p/r positive",
                           f"min={bounds.p_over_r[0]:.6f}")
    shell = bounds.near_diagonal[min(bounds.near_diagonal)]
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-2
    ok = shell["p_over_r_residual"] < tol and shell["q_residual"] < tol
    all_ok &= _status_line(ok, "near-diagonal expansions",
                           f"p/r residual={shell['p_over_r_residual']:.2e} "
                           f"q residual={shell['q_residual']:.2e}")
    _write_output(cfg.output_path, records)
    return 0 if all_ok else 1


def _load_surface(cfg: RunConfig):
    if cfg.input_path is None:
        raise ConfigError("this command needs --input")
    spec = _load_json(cfg.input_path)
    field, do_normalize = field_from_spec(spec)
    grid = build_grid(field.n, _parse_resolution(cfg.raw_resolution, field.n))
    if do_normalize:
        field = normalize_volume(field, grid)
    return field, grid


def _cmd_deficit(cfg: RunConfig) -> int:
    field, grid = _load_surface(cfg)
    report = stability_lab.deficits(field, grid, cfg.p)
    payload = {
        "n": report.n, "p": report.p, "ric0_lp": report.ric0_lp,
        "weyl_lp": report.weyl_lp, "r_minus_avg_lp": report.r_minus_avg_lp,
        "r_avg": report.r_avg, "a_inf_norm": report.a_inf_norm,
        "volume": report.volume,
        "diameter_estimate": report.diameter_estimate,
        "convexity_ok": report.convexity_ok,
    }
    print(f"deficits: ric0={report.ric0_lp:.6e} weyl={report.weyl_lp:.6e} "
          f"r-avg={report.r_minus_avg_lp:.6e} rbar={report.r_avg:.9f} "
          f"convex={report.convexity_ok}")
    _write_output(cfg.output_path, payload)
    return 0


def _cmd_recenter(cfg: RunConfig) -> int:
    field, grid = _load_surface(cfg)
    sol = stability_lab.solve_center(field, grid)
    payload = {
        "c0": [float(v) for v in sol["c0"]],
        "phi_residual": sol["phi_residual"],
        "iters": sol["iters"],
    }
    print(f"recenter: |c0|={np.linalg.norm(sol['c0']):.6e} "
          f"phi_residual={sol['phi_residual']:.3e} iters={sol['iters']}")
    _write_output(cfg.output_path, payload)
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    if cfg.input_path is None or cfg.output_path is None:
        raise ConfigError("sweep needs --input and --output")
    config = _load_json(cfg.input_path)
    records = stability_lab.run_sweep(config, threads=cfg.threads)
    csv_text = stability_lab.sweep_csv(records)
    _write_output(cfg.output_path, csv_text)
    failures = sum(1 for r in records if r.status == "solver_error")
    for rec in records:
        print(f"{rec.case_id} {rec.family} eps={rec.epsilon:g} p={rec.p:g} "
              f"ric0={rec.report.ric0_lp:.4e} ratio={rec.ratio_main:.4g} "
              f"{rec.status}")
    print(f"sweep: {len(records)} cases, {failures} solver errors "
          f"-> {cfg.output_path}")
    return 0 if failures == 0 else 3


def _cmd_obata_check(cfg: RunConfig, count: int = 50) -> int:
    grid = build_grid(cfg.n, cfg.resolution)
    rng = np.random.default_rng(cfg.seed)
    ratios = []
    for _ in range(count):
        fld = harmonics.random_band_limited(cfg.n, range(2, 7), rng,
                                            amplitude=0.1)
        ratios.append(identity_checks.obata_ratio(fld, grid, cfg.p).ratio)
    ratios = np.asarray(ratios)
    finite = bool(np.all(np.isfinite(ratios)))
    ok = finite
    detail = f"max={np.max(ratios):.4f} median={np.median(ratios):.4f}"
    if cfg.tolerance is not None:
        ok = finite and float(np.max(ratios)) <= cfg.tolerance
        detail += f" (cap {cfg.tolerance})"
    _status_line(ok, f"obata ratio over {count} fields", detail)
    _write_output(cfg.output_path, {"ratios": [float(r) for r in ratios],
                                    "n": cfg.n, "p": cfg.p, "seed": cfg.seed})
    return 0 if ok else 1


# --------------------------------------------------------------------------

_COMMANDS = {
    "verify-identities": _cmd_verify_identities,
    "verify-poly": _cmd_verify_poly,
    "deficit": _cmd_deficit,
    "recenter": _cmd_recenter,
    "sweep": _cmd_sweep,
    "obata-check": _cmd_obata_check,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvstab",
        description="almost-Einstein stability laboratory for convex "
                    "hypersurfaces")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", default=None)
        sp.add_argument("--output", default=None)
        sp.add_argument("--n", type=int, default=3)
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--resolution", default=None)
        sp.add_argument("--lambda", dest="lam", type=float, default=3.0)
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--tolerance", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            input_path=args.input,
            output_path=args.output,
            n=args.n,
            p=args.p,
            resolution=_parse_resolution(args.resolution, args.n),
            raw_resolution=args.resolution,
            lam=args.lam,
            eps=args.eps,
            seed=args.seed,
            threads=_threads(args),
            tolerance=args.tolerance,
        )
        if cfg.n < 3:
            raise ConfigError("n must be >= 3")
        return _COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError,) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver/numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
