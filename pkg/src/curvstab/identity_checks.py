"""Numerical verification of the differential and integral identities the
stability argument leans on: contracted Bianchi, Bochner on the sphere,
second-order accuracy of the small-field linearizations, and the
eigenfunction-gap estimate controlling W^{2,p} by the Laplacian deficit.

All residuals here measure pure floating-point/quadrature error: the
quantities entering each identity are assembled analytically from exact
polynomial jets, so a residual above roughly 1e-8 signals a real bug, not
discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial_field import RadialField, eval_field_jets
from .sphere_grid import (QuadratureGrid, ScalarJets, integrate, lp_norm,
                          sobolev_norm, unit_sphere_volume)
from .surface_geometry import assemble_grid, curvature_derivatives


@dataclass
class IdentityResidual:
    name: str
    pointwise_max: float
    lp_value: float
    grid: str
    field: str

    def record(self) -> dict:
        return {
            "name": self.name,
            "pointwise_max": self.pointwise_max,
            "lp_value": self.lp_value,
            "grid": self.grid,
            "field": self.field,
        }


def _grid_label(grid: QuadratureGrid) -> str:
    return f"S^{grid.n} res={'x'.join(str(r) for r in grid.resolution)}"


def _field_label(field: RadialField) -> str:
    return f"poly(deg={field.degree}, terms={len(field.coeffs)})"


def bianchi_residual(field: RadialField, grid: QuadratureGrid, p: float):
    """Residuals of div Ric = (1/2) grad R and its traceless form.

    Returns (full, traceless) IdentityResidual pairs.  The traceless form
    checks grad R = 2n/(n-2) div ric0, assembled from the same data via
    div ric0 = div Ric - (1/n) grad R.
    """
    if field.n < 3:
        raise ValueError("need n >= 3")
    data = curvature_derivatives(field, grid)
    n = field.n

    def one_form_norm(res):
        sq = np.einsum("mij,mi,mj->m", data.g_inv, res, res)
        return np.sqrt(np.maximum(sq, 0.0))

    res_full = data.div_ric - 0.5 * data.dscalar
    div_ric0 = data.div_ric - data.dscalar / n
    res_traceless = data.dscalar - (2.0 * n / (n - 2.0)) * div_ric0

    out = []
    for name, res in (("bianchi_div_ric", res_full),
                      ("bianchi_traceless", res_traceless)):
        norms = one_form_norm(res)
        out.append(IdentityResidual(
            name=name,
            pointwise_max=float(np.max(norms)),
            lp_value=float(lp_norm(norms, p, grid, density=data.vol_density)),
            grid=_grid_label(grid),
            field=_field_label(field)))
    return tuple(out)


def bochner_residual(field: RadialField, grid: QuadratureGrid) -> float:
    """|integral of (Lap f)^2 - |Hess f|^2 - (n-1) |grad f|^2 over S^n|."""
    jets = eval_field_jets(field, grid, order=2).scalar_jets()
    lap = jets.laplacian(grid)
    integrand = (lap ** 2
                 - jets.hessian_norm(grid) ** 2
                 - (field.n - 1) * jets.gradient_norm(grid) ** 2)
    return abs(integrate(integrand, grid))


def linearization_residuals(field: RadialField, grid: QuadratureGrid,
                            p: float, eps: float) -> dict[str, float]:
    """L^p_sigma residuals of the small-field expansions of A, g, R, R-bar
    and the trace deficit; each scales quadratically in the family parameter.

    `field` is the already-scaled (and volume-normalized) member of the
    family; `eps` is its nominal size and is validated against (0, 0.2].
    """
    if not 0.0 < eps <= 0.2:
        raise ValueError("eps must lie in (0, 0.2]")
    n = field.n
    jets = eval_field_jets(field, grid, order=2)
    geom = assemble_grid(field, grid, jets)
    sigma, sinv = grid.sigma, grid.sigma_inv
    f = jets.f
    lap = np.einsum("mij,mij->m", sinv, jets.hess)
    hess_sq = np.einsum("mij,mik,mjl,mkl->m", jets.hess, sinv, sinv, jets.hess)

    def tensor_norm(t):
        sq = np.einsum("mij,mik,mjl,mkl->m", t, sinv, sinv, t)
        return np.sqrt(np.maximum(sq, 0.0))

    a_lin = sigma - jets.hess + f[:, None, None] * sigma
    g_lin = (1.0 + 2.0 * f)[:, None, None] * sigma
    r_lin = (n * (n - 1)
             - 2.0 * (n - 1) * lap
             + lap ** 2 - hess_sq
             - 2.0 * n * (n - 1) * f)
    r_avg = integrate(geom.R * geom.vol_density, grid) / \
        integrate(geom.vol_density, grid)
    trace_deficit = np.einsum("mij,mij->m", sinv, geom.g - geom.A)

    return {
        "second_fundamental": lp_norm(tensor_norm(geom.A - a_lin), p, grid),
        "metric": lp_norm(tensor_norm(geom.g - g_lin), p, grid),
        "scalar_curvature": lp_norm(geom.R - r_lin, p, grid),
        "mean_scalar": abs(r_avg - n * (n - 1)),
        "trace_deficit": lp_norm(trace_deficit - (lap + n * f), p, grid),
    }


def loglog_slope(eps_values, residuals) -> float:
    """Least-squares slope of log(residual) against log(eps)."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.asarray(residuals, dtype=float))
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


@dataclass
class ObataRatio:
    vf: np.ndarray
    lhs: float
    rhs: float
    ratio: float


def obata_data(field: RadialField, grid: QuadratureGrid):
    """One jet evaluation shared by obata_ratio across p values.

    Returns (v_f, jets of f - phi_{v_f}, Lap f + n f).  The jets of the
    eigenfunction part are analytic: grad phi_v from the chart jacobian and
    Hess phi_v = -phi_v sigma.
    """
    n = field.n
    jets = eval_field_jets(field, grid, order=2)
    vol = unit_sphere_volume(n)
    vf = np.array([
        (n + 1) * integrate(grid.ambient[:, a] * jets.f, grid) / vol
        for a in range(n + 1)])
    phi = grid.ambient @ vf
    phi_grad = np.einsum("mai,a->mi", grid.jacobian, vf)
    phi_hess = -phi[:, None, None] * grid.sigma
    diff = ScalarJets(values=jets.f - phi, grad=jets.grad - phi_grad,
                      hess=jets.hess - phi_hess)
    lap = np.einsum("mij,mij->m", grid.sigma_inv, jets.hess)
    return vf, diff, lap + n * jets.f


def obata_ratio(field: RadialField, grid: QuadratureGrid, p: float) -> ObataRatio:
    """Both sides of the eigenfunction-gap estimate
    ||f - phi_{v_f}||_{W^{2,p}} <= C ||Lap f + n f||_{L^p} and their ratio.

    v_f is the degree-1 moment (n+1) * avg of z f(z); the difference
    f - phi_{v_f} is again a polynomial field, so the left side uses exact
    jets.
    """
    vf, diff, deficit = obata_data(field, grid)
    lhs = sobolev_norm(diff, 2, p, grid)
    rhs = lp_norm(deficit, p, grid)
    if rhs < 1e-14:
        ratio = math.inf if lhs > 1e-10 else 0.0
    else:
        ratio = lhs / rhs
    return ObataRatio(vf=vf, lhs=float(lhs), rhs=float(rhs), ratio=float(ratio))
