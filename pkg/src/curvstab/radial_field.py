"""Log-radius fields on S^n represented by ambient polynomials.

A field is P(x) + const restricted to the unit sphere, with P a polynomial in
the n+1 ambient coordinates.  This representation gives exact chart
derivatives to any order through the chain rule, which is what the
differential-identity checks need: no discretization error enters the jets.

Covariant derivatives are taken with respect to the round metric sigma.
`third[k, i, j]` stores nabla_k nabla_i nabla_j f; it is exactly symmetric in
(i, j) and symmetric in (k, i) only up to the curvature commutation term,
which `ricci_commutation_check` verifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

from .sphere_grid import ChartPoint, QuadratureGrid, ScalarJets


def _compress(coeffs: np.ndarray, exps: np.ndarray):
    """Merge duplicate exponent rows and drop zero coefficients."""
    if coeffs.size == 0:
        return coeffs.reshape(0), exps.reshape(0, exps.shape[1] if exps.ndim == 2 else 0)
    order = np.lexsort(exps.T)
    exps = exps[order]
    coeffs = coeffs[order]
    keep_rows = []
    keep_coeffs = []
    i = 0
    while i < len(coeffs):
        j = i
        total = 0.0
        while j < len(coeffs) and np.array_equal(exps[j], exps[i]):
            total += coeffs[j]
            j += 1
        if total != 0.0:
            keep_rows.append(exps[i])
            keep_coeffs.append(total)
        i = j
    if not keep_rows:
        return np.zeros(0), np.zeros((0, exps.shape[1]), dtype=np.int64)
    return np.array(keep_coeffs, dtype=float), np.array(keep_rows, dtype=np.int64)


class RadialField:
    """Ambient polynomial restricted to S^n, plus a constant shift.

    Immutable after construction; all evaluation methods are pure, so fields
    are safe to share across threads.
    """

    def __init__(self, n: int, terms, const_shift: float = 0.0):
        if n < 3:
            raise ValueError("fields live on S^n with n >= 3")
        self.n = int(n)
        coeffs = []
        exps = []
        for coeff, exponents in terms:
            exponents = tuple(int(e) for e in exponents)
            if len(exponents) != n + 1:
                raise ValueError(f"exponent tuple must have {n + 1} entries")
            if any(e < 0 for e in exponents):
                raise ValueError("exponents must be non-negative")
            coeffs.append(float(coeff))
            exps.append(exponents)
        coeffs = np.asarray(coeffs, dtype=float)
        exps = (np.asarray(exps, dtype=np.int64) if exps
                else np.zeros((0, n + 1), dtype=np.int64))
        self.coeffs, self.exps = _compress(coeffs, exps)
        self.const_shift = float(const_shift)

    # -- basic structure ---------------------------------------------------

    @property
    def terms(self):
        return [(float(c), tuple(int(e) for e in row))
                for c, row in zip(self.coeffs, self.exps)]

    @property
    def degree(self) -> int:
        return 0 if self.coeffs.size == 0 else int(self.exps.sum(axis=1).max())

    def __add__(self, other: "RadialField") -> "RadialField":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return RadialField(self.n, self.terms + other.terms,
                           self.const_shift + other.const_shift)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "RadialField":
        return RadialField(self.n, [(scalar * c, e) for c, e in self.terms],
                           scalar * self.const_shift)

    __rmul__ = __mul__

    def rotate(self, q: np.ndarray) -> "RadialField":
        """Field of the rotated surface Q.Sigma, i.e. P composed with Q^T."""
        q = np.asarray(q, dtype=float)
        nn = self.n + 1
        if q.shape != (nn, nn):
            raise ValueError("rotation must be (n+1)x(n+1)")
        zero = tuple([0] * nn)
        out: dict[tuple, float] = {}
        for coeff, exponents in self.terms:
            acc = {zero: coeff}
            for a, e in enumerate(exponents):
                # linear factor (Q^T x)_a = sum_b Q[b, a] x_b, applied e times
                for _ in range(e):
                    nxt: dict[tuple, float] = {}
                    for mono, c in acc.items():
                        for b in range(nn):
                            if q[b, a] == 0.0:
                                continue
                            key = list(mono)
                            key[b] += 1
                            key = tuple(key)
                            nxt[key] = nxt.get(key, 0.0) + c * q[b, a]
                    acc = nxt
            for mono, c in acc.items():
                out[mono] = out.get(mono, 0.0) + c
        return RadialField(self.n, [(c, e) for e, c in out.items()],
                           self.const_shift)

    # -- evaluation ----------------------------------------------------------

    def values_at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate f at ambient points (M, n+1)."""
        return self.ambient_derivatives(points, order=0)[0] + 0.0

    def ambient_derivatives(self, points: np.ndarray, order: int):
        """Value and ambient partial derivatives of P + const up to `order`.

        Returns [P0, P1, P2, P3][: order + 1] with shapes (M,), (M, N),
        (M, N, N), (M, N, N, N); all derivative tensors are symmetric.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m, nn = points.shape
        if nn != self.n + 1:
            raise ValueError("points must have n+1 ambient coordinates")
        max_e = int(self.exps.max()) if self.coeffs.size else 0
        pows = np.ones((nn, max_e + 1, m))
        for a in range(nn):
            for e in range(1, max_e + 1):
                pows[a, e] = pows[a, e - 1] * points[:, a]

        out = [np.full(m, self.const_shift)]
        for k in range(1, order + 1):
            out.append(np.zeros((m,) + (nn,) * k))

        def monomial(exponents):
            val = None
            for a, e in enumerate(exponents):
                if e == 0:
                    continue
                val = pows[a, e] if val is None else val * pows[a, e]
            return val if val is not None else np.ones(m)

        for coeff, exponents in zip(self.coeffs, self.exps):
            out[0] += coeff * monomial(exponents)
            for k in range(1, order + 1):
                for axes in combinations_with_replacement(range(nn), k):
                    e = list(exponents)
                    c = coeff
                    ok = True
                    for a in axes:
                        if e[a] == 0:
                            ok = False
                            break
                        c *= e[a]
                        e[a] -= 1
                    if not ok or c == 0.0:
                        continue
                    val = c * monomial(e)
                    for perm in set(permutations(axes)):
                        out[k][(slice(None),) + perm] += val
        return out


# --------------------------------------------------------------------------
# Jets
# --------------------------------------------------------------------------

@dataclass
class FieldJet:
    """Covariant jet of a field at a single chart point."""

    f: float
    grad: np.ndarray          # (n,)
    hess: np.ndarray          # (n, n), sigma-covariant
    third: np.ndarray         # (n, n, n), nabla_k nabla_i nabla_j f
    at: ChartPoint


@dataclass
class FieldJets:
    """Batched jets of a field on a grid (leading axis = node index).

    Carries both plain chart partials (d2, d3) and sigma-covariant tensors
    (hess, third); the geometry assembly needs the former, Sobolev norms the
    latter.
    """

    f: np.ndarray                    # (M,)
    grad: np.ndarray                 # (M, n)
    d2: np.ndarray                   # (M, n, n) plain second partials
    hess: np.ndarray                 # (M, n, n) covariant
    d3: np.ndarray | None = None     # (M, n, n, n) plain third partials
    third: np.ndarray | None = None  # (M, n, n, n) covariant

    def scalar_jets(self) -> ScalarJets:
        return ScalarJets(values=self.f, grad=self.grad, hess=self.hess)


def _jets_from_arrays(field: RadialField, ambient, jacobian, d2_embed,
                      christoffel, order, d3_embed=None, d_christoffel=None):
    derivs = field.ambient_derivatives(ambient, order=min(order, 3))
    p0, p1, p2 = derivs[0], derivs[1], derivs[2]
    grad = np.einsum("ma,mai->mi", p1, jacobian)
    d2 = (np.einsum("mab,mai,mbj->mij", p2, jacobian, jacobian)
          + np.einsum("ma,maij->mij", p1, d2_embed))
    hess = d2 - np.einsum("mkij,mk->mij", christoffel, grad)
    d3 = third = None
    if order >= 3:
        p3 = derivs[3]
        d3 = np.einsum("mabc,mai,mbj,mck->mijk", p3, jacobian, jacobian, jacobian)
        mixed = np.einsum("mab,maij,mbk->mijk", p2, d2_embed, jacobian)
        d3 = d3 + mixed + mixed.transpose(0, 1, 3, 2) + mixed.transpose(0, 3, 1, 2)
        d3 = d3 + np.einsum("ma,maijk->mijk", p1, d3_embed)
        # dhess[k, i, j] = plain d_k of hess_ij
        dhess = (d3
                 - np.einsum("mklij,ml->mkij", d_christoffel, grad)
                 - np.einsum("mlij,mkl->mkij", christoffel, d2))
        third = (dhess
                 - np.einsum("mlki,mlj->mkij", christoffel, hess)
                 - np.einsum("mlkj,mil->mkij", christoffel, hess))
    return p0, grad, d2, hess, d3, third


def eval_field_jets(field: RadialField, grid: QuadratureGrid,
                    order: int = 2) -> FieldJets:
    """Jets of the field at every grid node."""
    if order >= 3:
        grid.ensure_third_order()
    f, grad, d2, hess, d3, third = _jets_from_arrays(
        field, grid.ambient, grid.jacobian, grid.d2_embed, grid.christoffel,
        order,
        d3_embed=grid.d3_embed if order >= 3 else None,
        d_christoffel=grid.d_christoffel if order >= 3 else None)
    return FieldJets(f=f, grad=grad, d2=d2, hess=hess, d3=d3, third=third)


def eval_jet(field: RadialField, pt: ChartPoint) -> FieldJet:
    """Third-order covariant jet at a single chart point."""
    f, grad, d2, hess, d3, third = _jets_from_arrays(
        field, pt.ambient[None, :], pt.jacobian[None], pt.d2_embed[None],
        pt.sigma_christoffel[None], order=3,
        d3_embed=pt.d3_embed[None], d_christoffel=pt.d_sigma_christoffel[None])
    return FieldJet(f=float(f[0]), grad=grad[0], hess=hess[0], third=third[0],
                    at=pt)


def ricci_commutation_check(field: RadialField, pt: ChartPoint) -> float:
    """Residual of the curvature commutation identity for third derivatives.

    On the round sphere (Riem_sigma = 1/2 sigma KN sigma) the identity reads
        third[i,j,k] - third[j,i,k] = (sigma_ik sigma_jl - sigma_il sigma_jk)
                                      sigma^{lm} grad_m
    Returns the max-norm residual; machine-zero for exact jets.
    """
    jet = eval_jet(field, pt)
    sig = pt.sigma
    up = pt.sigma_inv @ jet.grad
    riem = (np.einsum("ik,jl->ijkl", sig, sig)
            - np.einsum("il,jk->ijkl", sig, sig))
    commutator = jet.third - jet.third.transpose(1, 0, 2)
    expected = np.einsum("ijkl,l->ijk", riem, up)
    return float(np.max(np.abs(commutator - expected)))


def shift_constant(field: RadialField, c: float) -> RadialField:
    """f -> f + c; rescales the surface by e^c, derivatives untouched."""
    return RadialField(field.n, field.terms, field.const_shift + float(c))


def linear_field(n: int, v) -> RadialField:
    """The first-eigenfunction field x -> (v, x)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (n + 1,):
        raise ValueError("v must be an (n+1)-vector")
    terms = []
    for a, va in enumerate(v):
        if va != 0.0:
            e = [0] * (n + 1)
            e[a] = 1
            terms.append((float(va), tuple(e)))
    return RadialField(n, terms)


def coordinate_moment(field: RadialField, grid: QuadratureGrid) -> np.ndarray:
    """v_f = (n+1) * average of z f(z) over S^n (degree-1 moment)."""
    from .sphere_grid import integrate, unit_sphere_volume
    f = field.values_at(grid.ambient)
    vol = unit_sphere_volume(field.n)
    return np.array([
        (field.n + 1) * integrate(grid.ambient[:, a] * f, grid) / vol
        for a in range(field.n + 1)])


# --------------------------------------------------------------------------
# JSON surface spec
# --------------------------------------------------------------------------

def field_from_spec(spec: dict) -> tuple[RadialField, bool]:
    """Parse {"n", "terms", "normalize_volume"} into a field and a flag."""
    allowed = {"n", "terms", "normalize_volume"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown keys in surface spec: {sorted(unknown)}")
    if "n" not in spec or "terms" not in spec:
        raise ValueError("surface spec needs 'n' and 'terms'")
    n = int(spec["n"])
    terms = [(float(t["coeff"]), tuple(t["exponents"])) for t in spec["terms"]]
    return RadialField(n, terms), bool(spec.get("normalize_volume", False))


def field_to_spec(field: RadialField, normalize_volume: bool = False) -> dict:
    return {
        "n": field.n,
        "terms": [{"coeff": c, "exponents": list(e)} for c, e in field.terms],
        "normalize_volume": normalize_volume,
    }
