"""Quantitative stability experiments: deficit norms, recentering, W^{2,p}
closeness to the round sphere, and parameter sweeps.

Recentering: for an interior point c, the surface translated by -c is again
a radial graph with log-radius f_c.  Given a direction z, the point x_c(z)
on the original parameter sphere that the ray from c in direction z hits is
the fixed point of

    x  <-  unit( rho_c z + c ),    rho_c = |e^{f(x)} x - c|,

a contraction whenever |c| stays well inside the surface.  The degree-1
moment map

    Phi(c) = -(n+1) * avg_{S^n} z f_c(z)

vanishes exactly when the recentred log-radius has no degree-1 component
(Phi(c) = -v_{f_c}); its zero c0 selects the optimal sphere center and is
found by Newton with a finite-difference Jacobian.

Closeness norms follow three routes: W^{2,p} of f_{c0} (recentred log-radius,
chart finite differences with an order-verification gate), W^{2,p} of the
ambient components of psi - id - c0 (exact jets), and W^{1,p} of the metric
pullback minus sigma (exact jets).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .radial_field import RadialField, eval_field_jets
from .sphere_grid import (QuadratureGrid, ScalarJets, embed_positions,
                          integrate, lp_norm, sobolev_norm,
                          unit_sphere_volume)
from .surface_geometry import (GeometryJets, admissibility, assemble_grid,
                               normalize_volume)


class SolverError(RuntimeError):
    """Recentering (or ray tracing) failed to converge."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


# --------------------------------------------------------------------------
# Field-like helpers (anything with values_at(points) works for recentering)
# --------------------------------------------------------------------------

class OffsetSphere:
    """Exact log-radius of a round sphere of given radius centered at `a`.

    Not a polynomial field; used to exercise the recentering solver on a
    case whose answer is known exactly.
    """

    def __init__(self, n: int, center, radius: float = 1.0):
        self.n = n
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if np.linalg.norm(self.center) >= self.radius:
            raise ValueError("center must lie inside the sphere")

    def values_at(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        ax = points @ self.center
        rho = ax + np.sqrt(ax ** 2 + self.radius ** 2 - self.center @ self.center)
        return np.log(rho)


class RecenteredLogRadius:
    """f_c of a surface as an evaluable field (by ray tracing)."""

    def __init__(self, field, c):
        self.base = field
        self.c = np.asarray(c, dtype=float)
        self.n = field.n

    def values_at(self, points: np.ndarray) -> np.ndarray:
        return _ray_trace(self.base, self.c, np.atleast_2d(points))[1]


def _ray_trace(field, c, z, tol: float = 1e-12, max_iter: int = 200):
    """Batched fixed-point solve of x = unit(rho_c z + c).

    Returns (x_c, f_c) for each unit row of z.
    """
    c = np.asarray(c, dtype=float)
    x = np.array(z, dtype=float)
    for _ in range(max_iter):
        surf = np.exp(field.values_at(x))[:, None] * x
        rho_c = np.linalg.norm(surf - c, axis=1)
        target = rho_c[:, None] * z + c
        x_new = target / np.linalg.norm(target, axis=1, keepdims=True)
        step = np.max(np.abs(x_new - x))
        x = x_new
        if step < tol:
            break
    else:
        raise SolverError("ray tracing hit the iteration cap; offset too large")
    surf = np.exp(field.values_at(x))[:, None] * x
    diff = surf - c
    f_c = 0.5 * np.log(np.einsum("ma,ma->m", diff, diff))
    return x, f_c


def ray_trace_recenter(field, c, z) -> dict:
    """x_c(z) and f_c(z) for a single unit direction z."""
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    rho_z = float(np.exp(field.values_at(z[None])[0]))
    if np.linalg.norm(c) >= 0.5 * rho_z:
        raise ValueError("offset |c| must stay below half the surface radius")
    x_c, f_c = _ray_trace(field, c, z[None])
    return {"x_c": x_c[0], "f_c_at_z": float(f_c[0])}


def recenter_moment(field, c, grid: QuadratureGrid) -> np.ndarray:
    """v_{f_c} = (n+1) * avg z f_c(z); Phi(c) is its negative."""
    _, f_c = _ray_trace(field, c, grid.ambient)
    vol = unit_sphere_volume(grid.n)
    return np.array([
        (grid.n + 1) * integrate(grid.ambient[:, a] * f_c, grid) / vol
        for a in range(grid.n + 1)])


def solve_center(field, grid: QuadratureGrid, tol: float = 1e-9,
                 max_newton: int = 50, jac_step: float = 1e-6) -> dict:
    """Newton solve of Phi(c0) = 0 with a finite-difference Jacobian.

    Falls back to the damped fixed point c <- c - Phi(c) when the Jacobian
    is unusable (Phi is a small perturbation of the identity, so this always
    contracts near the solution).  Steps are capped inside a ball of radius
    0.3 * min rho, which keeps every ray trace a contraction.
    """
    nn = grid.n + 1
    r_cap = 0.3 * math.exp(float(np.min(field.values_at(grid.ambient))))

    def phi(c):
        return -recenter_moment(field, c, grid)

    def clip(c):
        norm = np.linalg.norm(c)
        return c if norm <= r_cap else c * (r_cap / norm)

    c = np.zeros(nn)
    res = phi(c)
    history = [float(np.linalg.norm(res))]
    iters = 0
    while history[-1] >= tol:
        if iters >= max_newton:
            raise SolverError(
                f"recentering did not converge in {max_newton} Newton steps",
                trace=history)
        jac = np.empty((nn, nn))
        for a in range(nn):
            e = np.zeros(nn)
            e[a] = jac_step
            jac[:, a] = (phi(c + e) - phi(c - e)) / (2.0 * jac_step)
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            step = res
        c_new = clip(c - step)
        res_new = phi(c_new)
        if np.linalg.norm(res_new) > 0.9 * history[-1]:
            # damped fixed-point fallback
            c_new = clip(c - 0.5 * res)
            res_new = phi(c_new)
        c, res = c_new, res_new
        history.append(float(np.linalg.norm(res)))
        iters += 1
    return {"c0": c, "phi_residual": history[-1], "iters": iters}


# --------------------------------------------------------------------------
# Closeness norms
# --------------------------------------------------------------------------

def _fd_stencil(n: int, h: float):
    """Offsets for value, +-h along axes, and the four corners per axis pair."""
    offsets = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        offsets.append(e.copy())
        offsets.append(-e)
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    e = np.zeros(n)
                    e[i] = si * h
                    e[j] = sj * h
                    offsets.append(e)
                    pairs.append((i, j, si, sj))
    return np.stack(offsets), pairs


def _fd_jets(field, c0, grid: QuadratureGrid, h: float,
             node_idx=None) -> ScalarJets:
    """Chart finite-difference jets of the recentred log-radius f_{c0}."""
    n = grid.n
    angles = grid.angles if node_idx is None else grid.angles[node_idx]
    m = angles.shape[0]
    offsets, pairs = _fd_stencil(n, h)
    k = offsets.shape[0]
    all_angles = (angles[:, None, :] + offsets[None, :, :]).reshape(m * k, n)
    directions = embed_positions(all_angles)
    _, f_all = _ray_trace(field, c0, directions)
    f_all = f_all.reshape(m, k)
    f0 = f_all[:, 0]
    grad = np.empty((m, n))
    d2 = np.empty((m, n, n))
    for i in range(n):
        fp = f_all[:, 1 + 2 * i]
        fm = f_all[:, 2 + 2 * i]
        grad[:, i] = (fp - fm) / (2.0 * h)
        d2[:, i, i] = (fp - 2.0 * f0 + fm) / h ** 2
    col = 1 + 2 * n
    acc = {}
    for idx, (i, j, si, sj) in enumerate(pairs):
        acc.setdefault((i, j), 0.0)
        acc[(i, j)] += si * sj * f_all[:, col + idx]
    for (i, j), val in acc.items():
        d2[:, i, j] = val / (4.0 * h ** 2)
        d2[:, j, i] = d2[:, i, j]
    christoffel = grid.christoffel if node_idx is None else \
        grid.christoffel[node_idx]
    hess = d2 - np.einsum("mkij,mk->mij", christoffel, grad)
    return ScalarJets(values=f0, grad=grad, hess=hess)


def closeness_norms(field: RadialField, c0, grid: QuadratureGrid, p: float,
                    fd_step: float = 1e-3) -> dict:
    """The three closeness measurements of one surface against the sphere.

    f_c0_w2p uses finite differences of the ray-traced recentred log-radius
    (step `fd_step`, with an O(h^2) order gate on a node subsample); the
    other two use exact polynomial jets.
    """
    n = grid.n
    c0 = np.asarray(c0, dtype=float)
    polar = grid.angles[:, :n - 1]
    margin = min(float(np.min(polar)), float(math.pi - np.max(polar)))
    if margin <= 2.0 * fd_step:
        raise ValueError("fd step conflicts with the grid's polar spacing")

    jets_c0 = _fd_jets(field, c0, grid, fd_step)
    f_c0_w2p = sobolev_norm(jets_c0, 2, p, grid)

    # O(h^2) gate: successive halvings on a subsample must shrink ~4x
    sub = np.unique(np.linspace(0, grid.size - 1, 32).astype(int))
    d_h = _fd_jets(field, c0, grid, fd_step, node_idx=sub)
    d_h2 = _fd_jets(field, c0, grid, fd_step / 2.0, node_idx=sub)
    d_h4 = _fd_jets(field, c0, grid, fd_step / 4.0, node_idx=sub)
    num = max(np.max(np.abs(d_h.grad - d_h2.grad)),
              np.max(np.abs(d_h.hess - d_h2.hess)))
    den = max(np.max(np.abs(d_h2.grad - d_h4.grad)),
              np.max(np.abs(d_h2.hess - d_h4.hess)))
    signal = max(np.max(np.abs(d_h.grad)), np.max(np.abs(d_h.hess)))
    if den < 1e-13 or num < 1e-7 * max(signal, 1.0):
        fd_order_ratio = float("nan")  # signal below the FD noise floor
    else:
        fd_order_ratio = float(num / den)

    # ambient components of psi - id - c0, with exact jets
    jets = eval_field_jets(field, grid, order=2)
    e_f = np.exp(jets.f)
    u = jets.grad
    uu_plus_hess = jets.hess + np.einsum("mi,mj->mij", u, u)
    total_sq = 0.0
    for a in range(n + 1):
        ell = grid.ambient[:, a]
        ell_grad = grid.jacobian[:, a, :]
        ell_hess = -ell[:, None, None] * grid.sigma
        comp = e_f * ell - ell - c0[a]
        comp_grad = e_f[:, None] * (u * ell[:, None] + ell_grad) - ell_grad
        comp_hess = (e_f[:, None, None] * (
            uu_plus_hess * ell[:, None, None]
            + np.einsum("mi,mj->mij", u, ell_grad)
            + np.einsum("mi,mj->mij", ell_grad, u)
            + ell_hess) - ell_hess)
        norm_a = sobolev_norm(ScalarJets(comp, comp_grad, comp_hess), 2, p, grid)
        total_sq += norm_a ** 2
    psi_minus_id_w2p = math.sqrt(total_sq)

    # pullback metric: W^{1,p} of g - sigma (c = 0 frame)
    from .surface_geometry import _assemble_core
    core = _assemble_core(jets, grid.ambient, grid.jacobian, grid.sigma,
                          grid.sigma_inv, grid.dsigma, n)
    t = core["g"] - grid.sigma
    cov_dg = (core["dg"] - grid.dsigma
              - np.einsum("mlki,mlj->mkij", grid.christoffel, t)
              - np.einsum("mlkj,mil->mkij", grid.christoffel, t))
    sinv = grid.sigma_inv
    t_norm = np.sqrt(np.maximum(
        np.einsum("mij,mik,mjl,mkl->m", t, sinv, sinv, t), 0.0))
    dt_norm = np.sqrt(np.maximum(
        np.einsum("mkij,mkp,mia,mjb,mpab->m", cov_dg, sinv, sinv, sinv, cov_dg),
        0.0))
    pullback = (integrate(t_norm ** p, grid)
                + integrate(dt_norm ** p, grid)) ** (1.0 / p)

    return {
        "f_c0_w2p": float(f_c0_w2p),
        "psi_minus_id_w2p": float(psi_minus_id_w2p),
        "pullback_metric_w1p": float(pullback),
        "fd_order_ratio": fd_order_ratio,
    }


# --------------------------------------------------------------------------
# Deficit reports and sweeps
# --------------------------------------------------------------------------

@dataclass
class DeficitReport:
    n: int
    p: float
    ric0_lp: float
    weyl_lp: float
    r_minus_avg_lp: float
    r_avg: float
    a_inf_norm: float
    volume: float
    diameter_estimate: float
    convexity_ok: bool


def deficits(field: RadialField, grid: QuadratureGrid, p: float,
             geom: GeometryJets | None = None) -> DeficitReport:
    """All global deficit norms of one (volume-normalized) surface.

    Norms are L^p with the surface measure and g-raised tensor norms.  A
    non-convex surface still gets a full report, flagged convexity_ok=False.
    """
    if geom is None:
        geom = assemble_grid(field, grid)
    density = geom.vol_density
    vol = integrate(density, grid)
    r_avg = integrate(geom.R * density, grid) / vol
    adm = admissibility(geom, field, grid)
    return DeficitReport(
        n=field.n,
        p=p,
        ric0_lp=float(lp_norm(geom.ric0_gnorm(), p, grid, density=density)),
        weyl_lp=float(lp_norm(geom.weyl_gnorm(), p, grid, density=density)),
        r_minus_avg_lp=float(lp_norm(geom.R - r_avg, p, grid, density=density)),
        r_avg=float(r_avg),
        a_inf_norm=adm["a_inf_norm"],
        volume=adm["volume"],
        diameter_estimate=adm["diameter_estimate"],
        convexity_ok=adm["convexity_ok"],
    )


@dataclass
class SweepRecord:
    case_id: str
    n: int
    p: float
    epsilon: float
    family: str
    report: DeficitReport
    c0: np.ndarray
    phi_residual: float
    f_c0_w2p: float
    psi_minus_id_w2p: float
    pullback_metric_w1p: float
    ratio_main: float
    ratio_cor: float
    newton_iters: int
    status: str


CSV_HEADER = ("case_id,n,p,eps,family,ric0_lp,weyl_lp,r_minus_avg_lp,r_avg,"
              "a_inf_norm,volume,diameter_est,convex,c0_norm,phi_residual,"
              "f_c0_w2p,psi_minus_id_w2p,pullback_w1p,ratio_main,ratio_cor,"
              "newton_iters,status")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def record_row(rec: SweepRecord) -> str:
    r = rec.report
    fields = [
        rec.case_id, str(rec.n), _fmt(rec.p), _fmt(rec.epsilon), rec.family,
        _fmt(r.ric0_lp), _fmt(r.weyl_lp), _fmt(r.r_minus_avg_lp),
        _fmt(r.r_avg), _fmt(r.a_inf_norm), _fmt(r.volume),
        _fmt(r.diameter_estimate), "true" if r.convexity_ok else "false",
        _fmt(float(np.linalg.norm(rec.c0))), _fmt(rec.phi_residual),
        _fmt(rec.f_c0_w2p), _fmt(rec.psi_minus_id_w2p),
        _fmt(rec.pullback_metric_w1p), _fmt(rec.ratio_main),
        _fmt(rec.ratio_cor), str(rec.newton_iters), rec.status,
    ]
    return ",".join(fields)


def sweep_csv(records) -> str:
    return "\n".join([CSV_HEADER] + [record_row(r) for r in records]) + "\n"


_SWEEP_KEYS = {"n", "p", "families", "resolution", "seed"}
_FAMILY_KEYS = {"name", "terms", "eps"}


def validate_sweep_config(config: dict) -> dict:
    unknown = set(config) - _SWEEP_KEYS
    if unknown:
        raise ValueError(f"unknown keys in sweep config: {sorted(unknown)}")
    missing = _SWEEP_KEYS - set(config)
    if missing:
        raise ValueError(f"sweep config is missing keys: {sorted(missing)}")
    for fam in config["families"]:
        bad = set(fam) - _FAMILY_KEYS
        if bad:
            raise ValueError(f"unknown keys in family spec: {sorted(bad)}")
        if _FAMILY_KEYS - set(fam):
            raise ValueError("family spec needs 'name', 'terms' and 'eps'")
    return config


def _sweep_case(args):
    (case_id, n, p, eps, fam_name, terms, grid) = args
    base = RadialField(n, terms)
    nan = float("nan")
    try:
        field = normalize_volume(eps * base, grid)
        geom = assemble_grid(field, grid)
        report = deficits(field, grid, p, geom)
        sol = solve_center(field, grid)
        close = closeness_norms(field, sol["c0"], grid, p)
        ric0 = report.ric0_lp
        ratio_main = close["f_c0_w2p"] / ric0 if ric0 > 1e-14 else nan
        ratio_cor = close["pullback_metric_w1p"] / ric0 if ric0 > 1e-14 else nan
        status = "ok" if report.convexity_ok else "nonconvex"
        return SweepRecord(case_id, n, p, eps, fam_name, report,
                           sol["c0"], sol["phi_residual"],
                           close["f_c0_w2p"], close["psi_minus_id_w2p"],
                           close["pullback_metric_w1p"], ratio_main,
                           ratio_cor, sol["iters"], status)
    except (SolverError, ArithmeticError) as exc:
        empty = DeficitReport(n, p, nan, nan, nan, nan, nan, nan, nan, False)
        try:
            field = normalize_volume(eps * base, grid)
            geom = assemble_grid(field, grid)
            empty = deficits(field, grid, p, geom)
        except (SolverError, ArithmeticError):
            pass
        return SweepRecord(case_id, n, p, eps, fam_name, empty,
                           np.full(n + 1, nan), nan, nan, nan, nan, nan, nan,
                           0, "solver_error")


def run_sweep(config: dict, threads: int = 1) -> list[SweepRecord]:
    """Run every (family, eps, p) case of the config, in deterministic order.

    Cases never abort the sweep: failures are recorded in their row.  The
    seed is part of the config schema for randomized family generators and
    never influences quadrature.  Results are ordered by case_id regardless
    of the executor's completion order, so thread count cannot change the
    output.
    """
    from .sphere_grid import build_grid
    config = validate_sweep_config(config)
    n = int(config["n"])
    grid = build_grid(n, tuple(config["resolution"]))
    p_values = [float(p) for p in config["p"]]
    cases = []
    idx = 0
    for fam in config["families"]:
        terms = [(float(t["coeff"]), tuple(t["exponents"])) for t in fam["terms"]]
        for eps in fam["eps"]:
            for p in p_values:
                cases.append((f"{idx:04d}", n, float(p), float(eps),
                              str(fam["name"]), terms, grid))
                idx += 1
    if threads <= 1:
        return [_sweep_case(c) for c in cases]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_sweep_case, cases))
