"""Dense 4-tensor algebra: Kulkarni-Nomizu products, metric-raised norms,
and the orthogonal decomposition of the Riemann tensor.

Index order is always (i, j, k, l) with the Riemann symmetries
    T_ijkl = -T_jikl = -T_ijlk = T_klij.
Batched helpers (leading axes allowed) do the work; the Tensor4 wrapper is
the single-tensor public surface.  Dense n^4 storage is deliberate: the
package never goes past n = 6 and compressed symmetry storage would buy
nothing but bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tensor4:
    """A dense 4-covariant tensor on an n-dimensional space."""

    dim: int
    components: np.ndarray

    def __post_init__(self):
        expected = (self.dim,) * 4
        if self.components.shape != expected:
            raise ValueError(f"components must have shape {expected}")

    def riemann_symmetry_residual(self) -> float:
        t = self.components
        res = max(
            np.max(np.abs(t + t.transpose(1, 0, 2, 3))),
            np.max(np.abs(t + t.transpose(0, 1, 3, 2))),
            np.max(np.abs(t - t.transpose(2, 3, 0, 1))),
        )
        return float(res)

    def bianchi_cyclic_residual(self) -> float:
        t = self.components
        cyc = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
        return float(np.max(np.abs(cyc)))


# -- batched kernels ---------------------------------------------------------

def kn_components(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kulkarni-Nomizu product of symmetric 2-tensors, batched."""
    t = (np.einsum("...ik,...jl->...ijkl", a, b)
         + np.einsum("...jl,...ik->...ijkl", a, b)
         - np.einsum("...il,...jk->...ijkl", a, b)
         - np.einsum("...jk,...il->...ijkl", a, b))
    return t


def raise_all(t: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """All four indices raised with g_inv, batched."""
    t = np.einsum("...ijkl,...ip->...pjkl", t, g_inv)
    t = np.einsum("...ijkl,...jp->...ipkl", t, g_inv)
    t = np.einsum("...ijkl,...kp->...ijpl", t, g_inv)
    t = np.einsum("...ijkl,...lp->...ijkp", t, g_inv)
    return t


def norm4_squared(t: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """|T|_g^2 = T_ijkl T^ijkl, batched over leading axes."""
    return np.einsum("...ijkl,...ijkl->...", t, raise_all(t, g_inv))


def inner4(t: np.ndarray, s: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """Full g-contraction <T, S>, batched."""
    return np.einsum("...ijkl,...ijkl->...", t, raise_all(s, g_inv))


def ricci_contraction(t: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """(1,3)-trace g^{pq} T_ipjq, batched."""
    return np.einsum("...pq,...ipjq->...ij", g_inv, t)


def weyl_components(riem: np.ndarray, g: np.ndarray, r_scalar, ric0: np.ndarray,
                    n: int) -> np.ndarray:
    """Weyl part of the Riemann tensor, batched.

    W = Riem - R/(2n(n-1)) g KN g - 1/(n-2) ric0 KN g.
    """
    scal = np.asarray(r_scalar)[..., None, None, None, None]
    return (riem
            - (scal / (2.0 * n * (n - 1))) * kn_components(g, g)
            - kn_components(ric0, g) / (n - 2))


# -- public single-tensor operations ----------------------------------------

def _check_symmetric(a: np.ndarray, name: str):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * (1.0 + np.max(np.abs(a)))):
        raise ValueError(f"{name} must be symmetric")


def kn_product(a: np.ndarray, b: np.ndarray) -> Tensor4:
    """Kulkarni-Nomizu product of two symmetric 2-tensors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_symmetric(a, "A")
    _check_symmetric(b, "B")
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return Tensor4(a.shape[0], kn_components(a, b))


def norm4(t: Tensor4, g_inv: np.ndarray) -> float:
    """Fully raised norm sqrt(T_ijkl T_pqrs g^ip g^jq g^kr g^ls)."""
    g_inv = np.asarray(g_inv, dtype=float)
    _check_symmetric(g_inv, "g_inv")
    if g_inv.shape[0] != t.dim:
        raise ValueError("dimension mismatch between tensor and metric")
    return float(np.sqrt(max(norm4_squared(t.components, g_inv), 0.0)))


def weyl_from_decomposition(riem: Tensor4, g: np.ndarray, g_inv: np.ndarray,
                            r_scalar: float, ric0: np.ndarray) -> Tensor4:
    """Extract the Weyl tensor from Riem, the metric, R and traceless Ricci."""
    n = riem.dim
    if n < 3:
        raise ValueError("unsupported dimension: need n >= 3")
    g = np.asarray(g, dtype=float)
    g_inv = np.asarray(g_inv, dtype=float)
    ric0 = np.asarray(ric0, dtype=float)
    trace = float(np.einsum("ij,ij->", g_inv, ric0))
    scale = 1.0 + float(np.max(np.abs(ric0)))
    if abs(trace) > 1e-9 * scale:
        raise ValueError("ric0 is not trace-free with respect to g")
    return Tensor4(n, weyl_components(riem.components, g, r_scalar, ric0, n))
