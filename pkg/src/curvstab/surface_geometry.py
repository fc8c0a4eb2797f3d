"""Pointwise geometry of the radial graph psi(x) = e^{f(x)} x over S^n.

Closed forms used here (W = sqrt(1 + |grad f|^2), all chart components):

    g_ij    = e^{2f} (sigma_ij + f_i f_j)
    g^ij    = e^{-2f} (sigma^ij - f^i f^j / W^2)
    nu      = (x - grad_sigma f) / W
    A_ij    = (e^f / W) (sigma_ij + f_i f_j - Hess_ij f)
    dV_g    = e^{nf} W dV_sigma
    Riem_ijkl = A_ik A_jl - A_il A_jk          (Gauss equation)
    Ric_ij  = H A_ij - A_i^k A_kj
    Ric0    = Ric - (R/n) g

Sign conventions: Ric_ij = g^{pq} Riem_ipjq and R = g^{ij} Ric_ij, so the
unit sphere has A = g = sigma, H = n, R = n(n-1).

Christoffel symbols of g come from analytic partial derivatives of g (which
need only f and its first two plain chart partials), not from any displayed
shortcut formula; `christoffel_fd_check` validates them against central
finite differences of g at O(h^2).

For the Bianchi machinery every pointwise scalar is propagated together with
its plain chart gradient (a hand-rolled forward-mode pass), which makes
d(Ric)/d(theta) and grad R exact up to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature_algebra import weyl_components
from .radial_field import (FieldJet, FieldJets, RadialField, eval_field_jets,
                           shift_constant)
from .sphere_grid import (ChartPoint, QuadratureGrid, integrate,
                          unit_sphere_volume)


@dataclass
class GeometryJet:
    """All surface quantities at a single chart point."""

    g: np.ndarray
    g_inv: np.ndarray
    normal: np.ndarray
    A: np.ndarray
    shape: np.ndarray          # A with one index raised, g^{-1} A
    H: float
    vol_density: float         # dV_g / dV_sigma
    christoffel_g: np.ndarray  # Gamma^k_{ij} of g, index order [k, i, j]
    riem: np.ndarray
    ric: np.ndarray
    R: float
    ric0: np.ndarray
    weyl: np.ndarray


class GeometryJets:
    """Batched surface quantities on a grid (leading axis = node).

    The n^4 tensors (Riemann, Weyl) are exposed as methods rather than
    stored, to keep the footprint linear in grid size for big sweeps.
    """

    def __init__(self, n, g, g_inv, normal, a_tensor, shape, mean_curvature,
                 vol_density, christoffel_g, ric, scalar, ric0, jets, grid):
        self.n = n
        self.g = g
        self.g_inv = g_inv
        self.normal = normal
        self.A = a_tensor
        self.shape = shape
        self.H = mean_curvature
        self.vol_density = vol_density
        self.christoffel_g = christoffel_g
        self.ric = ric
        self.R = scalar
        self.ric0 = ric0
        self.jets = jets
        self.grid = grid

    @property
    def size(self) -> int:
        return self.R.shape[0]

    def riemann(self) -> np.ndarray:
        return (np.einsum("mik,mjl->mijkl", self.A, self.A)
                - np.einsum("mil,mjk->mijkl", self.A, self.A))

    def weyl(self) -> np.ndarray:
        return weyl_components(self.riemann(), self.g, self.R, self.ric0, self.n)

    def ric0_gnorm(self) -> np.ndarray:
        sq = np.einsum("mij,mik,mjl,mkl->m", self.ric0, self.g_inv,
                       self.g_inv, self.ric0)
        return np.sqrt(np.maximum(sq, 0.0))

    def weyl_gnorm(self) -> np.ndarray:
        from .curvature_algebra import norm4_squared
        sq = norm4_squared(self.weyl(), self.g_inv)
        return np.sqrt(np.maximum(sq, 0.0))


def _dsigma_inv(sigma_inv, dsigma):
    return -np.einsum("mab,mkbc,mcd->mkad", sigma_inv, dsigma, sigma_inv)


def _metric_bracket(dg):
    # bracket[m, i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    return dg + dg.swapaxes(1, 2) - dg.transpose(0, 2, 3, 1)


def _assemble_core(jets: FieldJets, ambient, jacobian, sigma, sigma_inv,
                   dsigma, n):
    f, u, d2, hess = jets.f, jets.grad, jets.d2, jets.hess
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(u))):
        raise ValueError("field values or gradients are not finite")
    with np.errstate(over="ignore"):
        e_f = np.exp(f)
        e2f = e_f * e_f
    up = np.einsum("mij,mj->mi", sigma_inv, u)
    s = np.einsum("mi,mi->m", u, up)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e2f))):
        raise ValueError("field magnitude overflowed the metric assembly")
    w = np.sqrt(1.0 + s)
    uu = np.einsum("mi,mj->mij", u, u)
    b = sigma + uu - hess
    a_tensor = (e_f / w)[:, None, None] * b
    g = e2f[:, None, None] * (sigma + uu)
    g_inv = (sigma_inv - np.einsum("mi,mj->mij", up, up) / (1.0 + s)[:, None, None]) \
        / e2f[:, None, None]
    ident = np.eye(n)
    gauge = np.max(np.abs(np.einsum("mij,mjk->mik", g, g_inv) - ident))
    if not gauge < 1e-8:
        raise ArithmeticError(f"metric inverse cross-check failed: {gauge:.3e}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("induced metric is not positive definite") from exc
    normal = (ambient - np.einsum("mai,mi->ma", jacobian, up)) / w[:, None]
    shape = np.einsum("mik,mkj->mij", g_inv, a_tensor)
    mean_curvature = np.einsum("mii->m", shape)
    vol_density = e_f ** n * w
    # plain partials of g, then Gamma^k_{ij} of g
    dg = e2f[:, None, None, None] * (
        2.0 * np.einsum("mk,mij->mkij", u, sigma + uu)
        + dsigma
        + np.einsum("mki,mj->mkij", d2, u)
        + np.einsum("mi,mkj->mkij", u, d2))
    christoffel_g = 0.5 * np.einsum("mkl,mijl->mkij", g_inv, _metric_bracket(dg))
    a_mixed = np.einsum("mik,mkl,mlj->mij", a_tensor, g_inv, a_tensor)
    ric = mean_curvature[:, None, None] * a_tensor - a_mixed
    scalar = np.einsum("mij,mij->m", g_inv, ric)
    ric0 = ric - (scalar / n)[:, None, None] * g
    return {
        "e_f": e_f, "w": w, "s": s, "up": up, "b": b, "dg": dg,
        "g": g, "g_inv": g_inv, "normal": normal, "A": a_tensor,
        "shape": shape, "H": mean_curvature, "vol_density": vol_density,
        "christoffel_g": christoffel_g, "ric": ric, "R": scalar, "ric0": ric0,
    }


def assemble_grid(field: RadialField, grid: QuadratureGrid,
                  jets: FieldJets | None = None) -> GeometryJets:
    """Geometry of the surface at every grid node."""
    if jets is None:
        jets = eval_field_jets(field, grid, order=2)
    core = _assemble_core(jets, grid.ambient, grid.jacobian, grid.sigma,
                          grid.sigma_inv, grid.dsigma, field.n)
    return GeometryJets(field.n, core["g"], core["g_inv"], core["normal"],
                        core["A"], core["shape"], core["H"],
                        core["vol_density"], core["christoffel_g"],
                        core["ric"], core["R"], core["ric0"], jets, grid)


def assemble(jet: FieldJet) -> GeometryJet:
    """Geometry at a single chart point, from a third-order field jet."""
    pt = jet.at
    n = pt.dim
    dsigma = np.einsum("aki,aj->kij", pt.d2_embed, pt.jacobian)
    dsigma = dsigma + dsigma.swapaxes(1, 2)
    d2_plain = jet.hess + np.einsum("kij,k->ij", pt.sigma_christoffel, jet.grad)
    jets = FieldJets(f=np.array([jet.f]), grad=jet.grad[None],
                     d2=d2_plain[None], hess=jet.hess[None])
    core = _assemble_core(jets, pt.ambient[None], pt.jacobian[None],
                          pt.sigma[None], pt.sigma_inv[None], dsigma[None], n)
    a_tensor = core["A"][0]
    riem = (np.einsum("ik,jl->ijkl", a_tensor, a_tensor)
            - np.einsum("il,jk->ijkl", a_tensor, a_tensor))
    weyl = weyl_components(riem, core["g"][0], core["R"][0], core["ric0"][0], n)
    return GeometryJet(
        g=core["g"][0], g_inv=core["g_inv"][0], normal=core["normal"][0],
        A=a_tensor, shape=core["shape"][0], H=float(core["H"][0]),
        vol_density=float(core["vol_density"][0]),
        christoffel_g=core["christoffel_g"][0], riem=riem, ric=core["ric"][0],
        R=float(core["R"][0]), ric0=core["ric0"][0], weyl=weyl)


def shape_closed_form_residual(field: RadialField, grid: QuadratureGrid) -> float:
    """Cross-check of the closed-form mixed second fundamental form.

    Compares g^{-1} A against
        (e^{-f}/W) (delta - f^i_j + f^i (Hess f [grad f])_j / W^2)
    and returns the max componentwise difference; the two agree identically.
    """
    jets = eval_field_jets(field, grid, order=2)
    geom = assemble_grid(field, grid, jets)
    sinv = grid.sigma_inv
    up = np.einsum("mij,mj->mi", sinv, jets.grad)
    s = np.einsum("mi,mi->m", jets.grad, up)
    w = np.sqrt(1.0 + s)
    hess_up = np.einsum("mik,mkj->mij", sinv, jets.hess)
    hess_of_grad = np.einsum("mij,mj->mi", jets.hess, up)
    closed = (np.exp(-jets.f) / w)[:, None, None] * (
        np.eye(field.n)[None]
        - hess_up
        + np.einsum("mi,mj->mij", up, hess_of_grad) / (1.0 + s)[:, None, None])
    return float(np.max(np.abs(closed - geom.shape)))


def mean_curvature_divergence_form(field: RadialField,
                                   grid: QuadratureGrid) -> np.ndarray:
    """H from the divergence closed form, as an independent cross-check:
    e^{-f} (n/W - div_sigma(grad f / W))."""
    jets = eval_field_jets(field, grid, order=2)
    sinv = grid.sigma_inv
    up = np.einsum("mij,mj->mi", sinv, jets.grad)
    s = np.einsum("mi,mi->m", jets.grad, up)
    w = np.sqrt(1.0 + s)
    lap = np.einsum("mij,mij->m", sinv, jets.hess)
    hess_uu = np.einsum("mij,mi,mj->m", jets.hess, up, up)
    div_term = lap / w - hess_uu / w ** 3
    return np.exp(-jets.f) * (field.n / w - div_term)


# -- global diagnostics ------------------------------------------------------

def surface_volume(field: RadialField, grid: QuadratureGrid) -> float:
    jets = eval_field_jets(field, grid, order=2)
    up = np.einsum("mij,mj->mi", grid.sigma_inv, jets.grad)
    s = np.einsum("mi,mi->m", jets.grad, up)
    density = np.exp(field.n * jets.f) * np.sqrt(1.0 + s)
    return integrate(density, grid)


def min_generalized_eigenvalue(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Per-node smallest eigenvalue of A v = lambda g v (g SPD), batched."""
    chol = np.linalg.cholesky(g)
    y = np.linalg.solve(chol, a)
    reduced = np.linalg.solve(chol, y.swapaxes(-1, -2)).swapaxes(-1, -2)
    reduced = 0.5 * (reduced + reduced.swapaxes(-1, -2))
    return np.linalg.eigvalsh(reduced)[..., 0]


def admissibility(geom: GeometryJets, field: RadialField,
                  grid: QuadratureGrid, pair_sample: int = 256) -> dict:
    """Admissibility diagnostics: sup |A|_g, convexity, volume, diameter.

    The diameter is a lower bound from a deterministic node sample and is
    reported as an estimate only.
    """
    a_sq = np.einsum("mij,mji->m", geom.shape, geom.shape)
    a_inf = float(np.sqrt(np.max(a_sq)))
    min_eig = min_generalized_eigenvalue(geom.A, geom.g)
    convex = bool(np.min(min_eig) >= -1e-10)
    volume = integrate(geom.vol_density, grid)
    idx = np.unique(np.linspace(0, grid.size - 1, pair_sample).astype(int))
    points = np.exp(field.values_at(grid.ambient[idx]))[:, None] * grid.ambient[idx]
    diff = points[:, None, :] - points[None, :, :]
    diameter = float(np.sqrt(np.max(np.einsum("pqa,pqa->pq", diff, diff))))
    return {
        "a_inf_norm": a_inf,
        "convexity_ok": convex,
        "volume": float(volume),
        "diameter_estimate": diameter,
    }


def normalize_volume(field: RadialField, grid: QuadratureGrid,
                     max_iter: int = 50) -> RadialField:
    """Shift the field by the constant that restores Vol(Sigma) = Vol(S^n).

    Vol is smooth and strictly increasing in the shift, so scalar Newton
    converges immediately; the 50-iteration cap is a hard error guard.
    """
    target = unit_sphere_volume(field.n)
    base = surface_volume(field, grid)
    if not math.isfinite(base) or base <= 0:
        raise ArithmeticError("surface volume is not finite and positive")
    c = 0.0
    for _ in range(max_iter):
        vol = base * math.exp(field.n * c)
        if abs(vol - target) <= 1e-13 * target:
            shifted = shift_constant(field, c)
            return shifted
        c -= (vol - target) / (field.n * vol)
    raise ArithmeticError("volume normalization did not converge in 50 steps")


# -- finite-difference validation ---------------------------------------------

def metric_at_angles(field: RadialField, angles: np.ndarray) -> np.ndarray:
    """Induced metric g at arbitrary chart angles (single point)."""
    from .sphere_grid import embedding_derivatives
    x, jac, d2e, _ = embedding_derivatives(angles[None], order=2)
    derivs = field.ambient_derivatives(x, order=1)
    f = derivs[0][0]
    grad = np.einsum("ma,mai->mi", derivs[1], jac)[0]
    sigma = np.einsum("ai,aj->ij", jac[0], jac[0])
    return math.exp(2.0 * f) * (sigma + np.outer(grad, grad))


def christoffel_fd_check(field: RadialField, pt: ChartPoint, h: float) -> float:
    """Max-norm gap between analytic Gamma_g and the central-difference
    Christoffel formula; O(h^2) in the field-dependent part.

    The chart contribution d sigma is closed-form (it is part of the chart
    data), so the finite differences target d(g - sigma); on the round
    sphere the two Christoffel computations then agree to roundoff.
    """
    angles = pt.angles
    n = pt.dim
    polar = angles[:-1]
    if np.min(polar) <= 2 * h or np.max(polar) >= math.pi - 2 * h:
        raise ValueError("point too close to a chart singularity for step h")
    from .radial_field import eval_jet
    from .sphere_grid import embedding_derivatives
    geom = assemble(eval_jet(field, pt))
    dsigma = np.einsum("aki,aj->kij", pt.d2_embed, pt.jacobian)
    dsigma = dsigma + dsigma.swapaxes(1, 2)

    def sigma_at(a):
        _, jac, _, _ = embedding_derivatives(a[None], order=2)
        return np.einsum("mai,maj->ij", jac, jac)

    dg = np.zeros((n, n, n))
    for k in range(n):
        up = angles.copy()
        dn = angles.copy()
        up[k] += h
        dn[k] -= h
        diff_up = metric_at_angles(field, up) - sigma_at(up)
        diff_dn = metric_at_angles(field, dn) - sigma_at(dn)
        dg[k] = (diff_up - diff_dn) / (2 * h) + dsigma[k]
    bracket = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for l in range(n):
                bracket[i, j, l] = dg[i, j, l] + dg[j, i, l] - dg[l, i, j]
    gamma_fd = 0.5 * np.einsum("kl,ijl->kij", geom.g_inv, bracket)
    return float(np.max(np.abs(gamma_fd - geom.christoffel_g)))


# -- exact first derivatives of curvature (forward-mode chain rule) -----------

@dataclass
class CurvatureDerivatives:
    """Ric, R and their exact plain chart gradients plus divergence data."""

    ric: np.ndarray        # (M, n, n)
    dric: np.ndarray       # (M, n, n, n) plain d_k Ric_ij
    scalar: np.ndarray     # (M,)
    dscalar: np.ndarray    # (M, n) plain grad of R
    div_ric: np.ndarray    # (M, n) covariant divergence of Ric
    g_inv: np.ndarray
    vol_density: np.ndarray


def curvature_derivatives(field: RadialField,
                          grid: QuadratureGrid) -> CurvatureDerivatives:
    """Assemble Ric, R, their exact chart derivatives and div_g Ric.

    Every scalar input carries its plain chart gradient and the product /
    quotient / chain rules are applied term by term, so no finite
    differences enter; third-order field jets supply d(Hess f).
    """
    jets = eval_field_jets(field, grid, order=3)
    n = field.n
    sigma, sinv, dsigma = grid.sigma, grid.sigma_inv, grid.dsigma
    gamma_s = grid.christoffel
    core = _assemble_core(jets, grid.ambient, grid.jacobian, sigma, sinv,
                          dsigma, n)
    f, u, d2, d3, hess = jets.f, jets.grad, jets.d2, jets.d3, jets.hess
    e2f = core["e_f"] ** 2
    s, up, w = core["s"], core["up"], core["w"]
    g, g_inv, a_tensor = core["g"], core["g_inv"], core["A"]
    h_mean, ric, scalar = core["H"], core["ric"], core["R"]
    dg, b = core["dg"], core["b"]

    dsinv = _dsigma_inv(sinv, dsigma)
    ds = (np.einsum("mkij,mi,mj->mk", dsinv, u, u)
          + 2.0 * np.einsum("mij,mki,mj->mk", sinv, d2, u))
    # plain d of the covariant Hessian components
    dhess = (jets.third
             + np.einsum("mlki,mlj->mkij", gamma_s, hess)
             + np.einsum("mlkj,mil->mkij", gamma_s, hess))
    db = (dsigma
          + np.einsum("mki,mj->mkij", d2, u)
          + np.einsum("mi,mkj->mkij", u, d2)
          - dhess)
    c_fac = core["e_f"] / w
    dc = c_fac[:, None] * (u - ds / (2.0 * (1.0 + s))[:, None])
    da = np.einsum("mk,mij->mkij", dc, b) + c_fac[:, None, None, None] * db
    dginv = -np.einsum("mia,mkab,mbj->mkij", g_inv, dg, g_inv)
    dh_mean = (np.einsum("mkij,mij->mk", dginv, a_tensor)
               + np.einsum("mij,mkij->mk", g_inv, da))
    ga = np.einsum("mkl,mlj->mkj", g_inv, a_tensor)
    da2 = (np.einsum("mkil,mlj->mkij", da, ga)
           + np.einsum("mil,mklp,mpj->mkij", a_tensor, dginv, a_tensor)
           + np.einsum("mil,mklj->mkij",
                       np.einsum("mip,mpl->mil", a_tensor, g_inv), da))
    dric = (np.einsum("mk,mij->mkij", dh_mean, a_tensor)
            + h_mean[:, None, None, None] * da
            - da2)
    dscalar = (np.einsum("mkij,mij->mk", dginv, ric)
               + np.einsum("mij,mkij->mk", g_inv, dric))
    gamma_g = core["christoffel_g"]
    cov_dric = (dric
                - np.einsum("mlki,mlj->mkij", gamma_g, ric)
                - np.einsum("mlkj,mil->mkij", gamma_g, ric))
    div_ric = np.einsum("mki,mkij->mj", g_inv, cov_dric)
    return CurvatureDerivatives(ric=ric, dric=dric, scalar=scalar,
                                dscalar=dscalar, div_ric=div_ric,
                                g_inv=g_inv, vol_density=core["vol_density"])
