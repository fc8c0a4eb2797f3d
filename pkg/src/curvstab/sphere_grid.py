"""Charts, embeddings and product quadrature on the unit sphere S^n in R^{n+1}.

Chart convention (nested spherical coordinates): for angles
theta_1..theta_{n-1} in (0, pi) and theta_n in [0, 2*pi),

    x_a     = cos(theta_a) * prod_{k<a} sin(theta_k),   a = 1..n
    x_{n+1} =                prod_{k<=n} sin(theta_k)

which makes the round metric sigma = diag(1, sin^2 t1, sin^2 t1 sin^2 t2, ...).
All embedding derivatives up to third order are closed-form products of sines
and cosines; no finite differences are used anywhere in the chart machinery.

Index conventions used throughout the package:
    sigma[i, j]                 components of the round metric
    christoffel[k, i, j]        Gamma^k_{ij} of sigma
    d_christoffel[l, k, i, j]   partial_l Gamma^k_{ij}

Quadrature is a tensor product: Gauss nodes in each polar angle and a uniform
periodic (trapezoid) rule in the last angle.  Polar nodes are placed at the
roots of Jacobi polynomials in u = cos(theta) with weight
(1 - u^2)^((n-i-1)/2), which is plain Gauss-Legendre for the last polar angle
and absorbs the sin^{n-i} chart volume factor algebraically: sphere moments of
ambient polynomials of per-angle degree <= 2*res - 1 are integrated exactly.
Nodes are interior, so chart singularities are never touched.  Node weights
include the chart volume factor sqrt(det sigma).  All reductions go through a
fixed pairwise summation tree so results are bit-identical regardless of how
per-node values were produced (serial or parallel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

# Polar angles closer than this to {0, pi} are rejected as chart singularities.
_POLAR_MARGIN = 1e-9


def unit_sphere_volume(n: int) -> float:
    """Volume (n-dimensional Hausdorff measure) of S^n in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with a fixed balanced pairwise tree.

    The pairing depends only on the length of the input, never on thread
    count or chunking, which is what makes grid reductions reproducible.
    """
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.concatenate([a, [0.0]])
        a = a[0::2] + a[1::2]
    return float(a[0])


# --------------------------------------------------------------------------
# Embedding derivatives
# --------------------------------------------------------------------------

# Factor tables: coordinate a of the embedding is a product over angles k of
# sin, cos or the constant 1.  Derivatives cycle through the trig table.
_SIN, _COS, _ONE = 0, 1, 2


def _factor_kind(a: int, k: int, n: int) -> int:
    # a in 0..n (coordinate index), k in 0..n-1 (angle index)
    if a == n:
        return _SIN
    if k < a:
        return _SIN
    if k == a:
        return _COS
    return _ONE


def _factor_value(kind: int, order: int, s: np.ndarray, c: np.ndarray):
    """d^order/dtheta^order of the factor; s, c are sin/cos arrays."""
    if kind == _ONE:
        return None if order > 0 else 1.0
    if kind == _SIN:
        return (s, c, -s, -c)[order % 4]
    return (c, -s, -c, s)[order % 4]


def embedding_derivatives(angles: np.ndarray, order: int = 3):
    """Ambient position and derivatives of the chart embedding.

    angles: (M, n) array.  Returns (x, jac, d2, d3) with shapes
    (M, n+1), (M, n+1, n), (M, n+1, n, n), (M, n+1, n, n, n); d3 is None
    when order < 3.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    m, n = angles.shape
    nn = n + 1
    s = np.sin(angles)
    c = np.cos(angles)

    def partial(a: int, diff: tuple[int, ...]) -> np.ndarray:
        counts = [0] * n
        for k in diff:
            counts[k] += 1
        out = np.ones(m)
        for k in range(n):
            fk = _factor_value(_factor_kind(a, k, n), counts[k], s[:, k], c[:, k])
            if fk is None:
                return np.zeros(m)
            if isinstance(fk, float):
                continue
            out = out * fk
        return out

    x = np.empty((m, nn))
    jac = np.empty((m, nn, n))
    d2 = np.empty((m, nn, n, n))
    d3 = np.empty((m, nn, n, n, n)) if order >= 3 else None
    for a in range(nn):
        x[:, a] = partial(a, ())
        for i in range(n):
            jac[:, a, i] = partial(a, (i,))
        for i, j in combinations_with_replacement(range(n), 2):
            v = partial(a, (i, j))
            d2[:, a, i, j] = v
            d2[:, a, j, i] = v
        if order >= 3:
            for i, j, k in combinations_with_replacement(range(n), 3):
                v = partial(a, (i, j, k))
                for p, q, r in {(i, j, k), (i, k, j), (j, i, k),
                                (j, k, i), (k, i, j), (k, j, i)}:
                    d3[:, a, p, q, r] = v
    return x, jac, d2, d3


def embed_positions(angles: np.ndarray) -> np.ndarray:
    """Ambient positions only (no derivatives); cheap for large batches."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    m, n = angles.shape
    s = np.sin(angles)
    c = np.cos(angles)
    x = np.empty((m, n + 1))
    running = np.ones(m)
    for a in range(n):
        x[:, a] = running * c[:, a]
        running = running * s[:, a]
    x[:, n] = running
    return x


def _metric_arrays(jac: np.ndarray, d2: np.ndarray):
    """sigma, sigma^{-1}, d sigma and Christoffels from embedding derivatives."""
    sigma = np.einsum("mai,maj->mij", jac, jac)
    sigma_inv = np.linalg.inv(sigma)
    dsigma = np.einsum("maki,maj->mkij", d2, jac)
    dsigma = dsigma + np.swapaxes(dsigma, 2, 3)
    # Gamma^k_{ij} = 1/2 sigma^{kl} (d_i sigma_{jl} + d_j sigma_{il} - d_l sigma_{ij})
    # bracket[m, i, j, l] = d_i s_jl + d_j s_il - d_l s_ij
    bracket = dsigma + dsigma.swapaxes(1, 2) - dsigma.transpose(0, 2, 3, 1)
    christoffel = 0.5 * np.einsum("mkl,mijl->mkij", sigma_inv, bracket)
    return sigma, sigma_inv, dsigma, christoffel


def _christoffel_derivative(jac, d2, d3, sigma_inv, dsigma):
    """partial_l Gamma^k_{ij} of sigma, shape (M, n, n, n, n) = [l, k, i, j]."""
    # second partials of sigma: dd[m, l, k, i, j] = d_l d_k sigma_{ij}
    dd = (np.einsum("malki,maj->mlkij", d3, jac)
          + np.einsum("maki,malj->mlkij", d2, d2))
    dd = dd + np.swapaxes(dd, 3, 4)
    dsigma_inv = -np.einsum("mab,mlbc,mcd->mlad", sigma_inv, dsigma, sigma_inv)
    bracket = dsigma + dsigma.swapaxes(1, 2) - dsigma.transpose(0, 2, 3, 1)
    # dbracket[m, l, i, j, c] = d_l (d_i s_jc + d_j s_ic - d_c s_ij)
    dbracket = dd + dd.swapaxes(2, 3) - dd.transpose(0, 1, 3, 4, 2)
    return (0.5 * np.einsum("mlkc,mijc->mlkij", dsigma_inv, bracket)
            + 0.5 * np.einsum("mkc,mlijc->mlkij", sigma_inv, dbracket))


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------

@dataclass
class ChartPoint:
    """One chart point with all derivative data needed for third-order jets."""

    angles: np.ndarray            # (n,)
    ambient: np.ndarray           # (n+1,) unit vector
    jacobian: np.ndarray          # (n+1, n) d x / d theta
    d2_embed: np.ndarray          # (n+1, n, n)
    d3_embed: np.ndarray          # (n+1, n, n, n)
    sigma: np.ndarray             # (n, n)
    sigma_inv: np.ndarray         # (n, n)
    sigma_christoffel: np.ndarray     # (n, n, n)  Gamma^k_{ij}
    d_sigma_christoffel: np.ndarray   # (n, n, n, n)  d_l Gamma^k_{ij}

    @property
    def dim(self) -> int:
        return self.angles.size


def _validate_angles(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1 or angles.size < 3:
        raise ValueError("need at least 3 angles (sphere dimension n >= 3)")
    polar = angles[:-1]
    if np.any(polar <= _POLAR_MARGIN) or np.any(polar >= math.pi - _POLAR_MARGIN):
        raise ValueError("polar angle at or beyond a chart singularity")
    return angles


def build_chart_point(angles) -> ChartPoint:
    """Build a single chart point with analytic derivative data to third order."""
    angles = _validate_angles(angles)
    batch = angles[None, :]
    x, jac, d2, d3 = embedding_derivatives(batch, order=3)
    sigma, sigma_inv, dsigma, gamma = _metric_arrays(jac, d2)
    dgamma = _christoffel_derivative(jac, d2, d3, sigma_inv, dsigma)
    return ChartPoint(
        angles=angles,
        ambient=x[0],
        jacobian=jac[0],
        d2_embed=d2[0],
        d3_embed=d3[0],
        sigma=sigma[0],
        sigma_inv=sigma_inv[0],
        sigma_christoffel=gamma[0],
        d_sigma_christoffel=dgamma[0],
    )


class QuadratureGrid:
    """Product quadrature grid on S^n with batched chart data.

    Chart data for all nodes is stored as stacked arrays (leading axis =
    node index).  Third-order arrays (d3_embed, d_christoffel) are built
    lazily because only third-order jets need them.
    """

    def __init__(self, n: int, resolution: tuple[int, ...], angles: np.ndarray,
                 weights: np.ndarray):
        self.n = n
        self.resolution = tuple(int(r) for r in resolution)
        self.angles = angles
        self.weights = weights
        x, jac, d2, _ = embedding_derivatives(angles, order=2)
        self.ambient = x
        self.jacobian = jac
        self.d2_embed = d2
        sigma, sigma_inv, dsigma, gamma = _metric_arrays(jac, d2)
        self.sigma = sigma
        self.sigma_inv = sigma_inv
        self.dsigma = dsigma
        self.christoffel = gamma
        self._d3_embed: np.ndarray | None = None
        self._d_christoffel: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.angles.shape[0]

    def ensure_third_order(self) -> None:
        if self._d3_embed is None:
            _, jac, d2, d3 = embedding_derivatives(self.angles, order=3)
            self._d3_embed = d3
            self._d_christoffel = _christoffel_derivative(
                jac, d2, d3, self.sigma_inv, self.dsigma)

    @property
    def d3_embed(self) -> np.ndarray:
        self.ensure_third_order()
        return self._d3_embed

    @property
    def d_christoffel(self) -> np.ndarray:
        self.ensure_third_order()
        return self._d_christoffel

    @property
    def nodes(self):
        """List of (ChartPoint, weight) pairs.  Convenience for small grids."""
        return [(build_chart_point(self.angles[m]), float(self.weights[m]))
                for m in range(self.size)]


def default_resolution(n: int) -> tuple[int, ...]:
    """Per-angle node counts used when none are requested."""
    if n == 3:
        return (24, 24, 48)
    if n == 4:
        return (12, 12, 12, 24)
    return tuple([8] * (n - 1) + [16])


def build_grid(n: int, resolution) -> QuadratureGrid:
    """Tensor-product quadrature grid on S^n.

    Gauss nodes in each polar angle (Jacobi in cos(theta), matching the
    sin-power of the chart volume factor, so polynomial sphere moments are
    exact); uniform periodic nodes in the last angle.  The stored per-node
    weights carry sqrt(det sigma).
    """
    if n < 3:
        raise ValueError("unsupported dimension: the construction needs n >= 3")
    if isinstance(resolution, int):
        resolution = default_resolution(n) if resolution <= 0 else \
            tuple([resolution] * (n - 1) + [2 * resolution])
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != n:
        raise ValueError(f"resolution must have {n} entries, got {len(resolution)}")
    if any(r < 4 for r in resolution):
        raise ValueError("resolutions must be >= 4")

    from scipy.special import roots_jacobi

    axes = []
    wts = []
    for i in range(n - 1):
        alpha = 0.5 * (n - i - 2)  # sine power is n-i-1 with i zero-based
        u, w = roots_jacobi(resolution[i], alpha, alpha)
        theta = np.arccos(u[::-1])
        # bare angular weight; the sin^{n-i-1} volume power is restored by
        # the sqrt(det sigma) factor below
        wts.append(w[::-1] / (1.0 - u[::-1] ** 2) ** (0.5 * (n - i - 1)))
        axes.append(theta)
    naz = resolution[-1]
    axes.append(np.arange(naz) * (2.0 * math.pi / naz))
    wts.append(np.full(naz, 2.0 * math.pi / naz))

    mesh = np.meshgrid(*axes, indexing="ij")
    angles = np.stack([a.ravel() for a in mesh], axis=1)
    wmesh = np.meshgrid(*wts, indexing="ij")
    wprod = np.ones(angles.shape[0])
    for w in wmesh:
        wprod = wprod * w.ravel()

    grid = QuadratureGrid(n, resolution, angles, wprod)
    det = np.linalg.det(grid.sigma)
    grid.weights = wprod * np.sqrt(det)
    return grid


# --------------------------------------------------------------------------
# Integration and norms
# --------------------------------------------------------------------------

def integrate(values, grid: QuadratureGrid) -> float:
    """Integral over S^n of a per-node sampled function (sigma measure)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} per-node values, got shape {values.shape}")
    return pairwise_sum(values * grid.weights)


def lp_norm(values, p: float, grid: QuadratureGrid, density=None) -> float:
    """(integral |v|^p dmu)^(1/p); dmu = density * dV_sigma when supplied.

    With density = dV_g/dV_sigma this is the L^p norm on the surface.
    """
    if not p > 1.0 or not math.isfinite(p):
        raise ValueError("p must lie in (1, inf)")
    values = np.asarray(values, dtype=float)
    integrand = np.abs(values) ** p
    if density is not None:
        density = np.asarray(density, dtype=float)
        if density.shape != integrand.shape:
            raise ValueError("density must be one value per node")
        integrand = integrand * density
    return integrate(integrand, grid) ** (1.0 / p)


@dataclass
class ScalarJets:
    """Per-node covariant jets of a scalar on S^n (chart components)."""

    values: np.ndarray           # (M,)
    grad: np.ndarray | None = None    # (M, n)
    hess: np.ndarray | None = None    # (M, n, n), sigma-covariant

    def gradient_norm(self, grid: QuadratureGrid) -> np.ndarray:
        return np.sqrt(np.einsum("mi,mij,mj->m", self.grad, grid.sigma_inv, self.grad))

    def hessian_norm(self, grid: QuadratureGrid) -> np.ndarray:
        sq = np.einsum("mij,mik,mjl,mkl->m", self.hess, grid.sigma_inv,
                       grid.sigma_inv, self.hess)
        return np.sqrt(np.maximum(sq, 0.0))

    def laplacian(self, grid: QuadratureGrid) -> np.ndarray:
        return np.einsum("mij,mij->m", grid.sigma_inv, self.hess)


def sobolev_norm(jets: ScalarJets, k: int, p: float, grid: QuadratureGrid) -> float:
    """W^{k,p} norm w.r.t. sigma: (sum_{j<=k} int |grad^j f|^p dV_sigma)^(1/p)."""
    if k not in (1, 2):
        raise ValueError("order k must be 1 or 2")
    if not p > 1.0 or not math.isfinite(p):
        raise ValueError("p must lie in (1, inf)")
    if jets.grad is None:
        raise ValueError("jets are missing first derivatives")
    if k == 2 and jets.hess is None:
        raise ValueError("jets are missing second derivatives")
    total = integrate(np.abs(jets.values) ** p, grid)
    total += integrate(jets.gradient_norm(grid) ** p, grid)
    if k == 2:
        total += integrate(jets.hessian_norm(grid) ** p, grid)
    return total ** (1.0 / p)


def closed_form_sigma(angles: np.ndarray) -> np.ndarray:
    """diag(1, sin^2 t1, sin^2 t1 sin^2 t2, ...) for cross-checks."""
    angles = np.atleast_2d(angles)
    m, n = angles.shape
    diag = np.ones((m, n))
    for i in range(1, n):
        diag[:, i] = diag[:, i - 1] * np.sin(angles[:, i - 1]) ** 2
    out = np.zeros((m, n, n))
    idx = np.arange(n)
    out[:, idx, idx] = diag
    return out
