"""Library of explicit harmonic polynomials restricted to S^n.

Each entry is the harmonic projection of a seed monomial, computed in exact
rational arithmetic and cleared to integer coefficients.  Harmonicity of
every entry is asserted with an exact integer Laplacian at build time, so a
wrong projection constant can never reach the numerical code.

Restricted to S^n, a degree-l entry is an eigenfunction of the sphere
Laplacian with eigenvalue -l(l + n - 1); this is what all eigenfunction and
band-limited tests in the package lean on.

Entries are normalized to unit mean-square over the sphere via exact
monomial moments, so `amplitude` always means the root-mean-square size of
the resulting log-radius.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .radial_field import RadialField

MAX_DEGREE = 6

Poly = dict[tuple, Fraction]  # exponent tuple -> coefficient


def _laplacian(poly: Poly, nn: int) -> Poly:
    out: Poly = {}
    for exps, coeff in poly.items():
        for a in range(nn):
            e = exps[a]
            if e >= 2:
                key = list(exps)
                key[a] -= 2
                key = tuple(key)
                out[key] = out.get(key, Fraction(0)) + coeff * e * (e - 1)
    return {k: v for k, v in out.items() if v != 0}


def _times_r2(poly: Poly, nn: int) -> Poly:
    out: Poly = {}
    for exps, coeff in poly.items():
        for a in range(nn):
            key = list(exps)
            key[a] += 2
            key = tuple(key)
            out[key] = out.get(key, Fraction(0)) + coeff
    return out


def _add(p: Poly, q: Poly, scale: Fraction) -> Poly:
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, Fraction(0)) + scale * v
    return {k: v for k, v in out.items() if v != 0}


def harmonic_projection(seed: tuple, nn: int) -> Poly:
    """Harmonic component of a seed monomial in nn ambient variables.

    Uses H = sum_k a_k r^{2k} Lap^k P with a_0 = 1 and
    a_{k+1} = -a_k / (2 (k+1) (nn + 2 deg - 2k - 4)); the recursion follows
    from Lap(r^{2k} S) = 2k (2k + nn - 2 + 2 deg S) r^{2k-2} S + r^{2k} Lap S.
    """
    degree = sum(seed)
    base: Poly = {tuple(seed): Fraction(1)}
    result = dict(base)
    coeff = Fraction(1)
    power: Poly = dict(base)
    for k in range(degree // 2):
        power = _laplacian(power, nn)
        if not power:
            break
        coeff = -coeff / (2 * (k + 1) * (nn + 2 * degree - 2 * k - 4))
        term = dict(power)
        for _ in range(k + 1):
            term = _times_r2(term, nn)
        result = _add(result, term, coeff)
    return result


def _to_integer(poly: Poly) -> dict[tuple, int]:
    denoms = [c.denominator for c in poly.values()]
    lcm = 1
    for d in denoms:
        lcm = lcm * d // math.gcd(lcm, d)
    ints = {k: int(c * lcm) for k, c in poly.items()}
    g = 0
    for v in ints.values():
        g = math.gcd(g, abs(v))
    return {k: v // g for k, v in ints.items()}


def _assert_harmonic(poly: dict[tuple, int], nn: int):
    frac = {k: Fraction(v) for k, v in poly.items()}
    if _laplacian(frac, nn):
        raise AssertionError("harmonic projection failed the exact Laplacian check")


def _monomial_moment(exps, nn: int) -> float:
    """Integral over S^{nn-1} of prod x_a^{e_a} (zero for odd exponents)."""
    if any(e % 2 for e in exps):
        return 0.0
    num = 2.0
    for e in exps:
        num *= math.gamma((e + 1) / 2.0)
    return num / math.gamma((sum(exps) + nn) / 2.0)


def mean_square(poly: dict[tuple, float], nn: int) -> float:
    """Average of the squared polynomial over the sphere."""
    keys = list(poly.items())
    total = 0.0
    for i, (e1, c1) in enumerate(keys):
        for e2, c2 in keys:
            exps = tuple(a + b for a, b in zip(e1, e2))
            total += c1 * c2 * _monomial_moment(exps, nn)
    vol = 2.0 * math.pi ** (nn / 2.0) / math.gamma(nn / 2.0)
    return total / vol


def _seed_exponents(degree: int, nn: int):
    """Deterministic seed monomials: partitions of the degree laid out on
    the leading coordinates, plus one shifted variant for variety."""
    if degree == 1:
        seeds = []
        for a in range(nn):
            e = [0] * nn
            e[a] = 1
            seeds.append(tuple(e))
        return seeds

    def partitions(total, max_part, max_len):
        if total == 0:
            yield ()
            return
        if max_len == 0:
            return
        for first in range(min(total, max_part), 0, -1):
            for rest in partitions(total - first, first, max_len - 1):
                yield (first,) + rest

    seeds = []
    for part in partitions(degree, degree, min(nn, 4)):
        e = [0] * nn
        for i, p in enumerate(part):
            e[i] = p
        seeds.append(tuple(e))
        if len(part) < nn:
            # same shape on the trailing coordinates
            e2 = [0] * nn
            for i, p in enumerate(part):
                e2[nn - 1 - i] = p
            seeds.append(tuple(e2))
    return seeds


@lru_cache(maxsize=None)
def harmonic_catalog(n: int) -> dict[int, list[dict[tuple, int]]]:
    """Integer-coefficient harmonic polynomials for S^n, degrees 1..6."""
    if n < 3:
        raise ValueError("catalog covers n >= 3")
    nn = n + 1
    catalog: dict[int, list[dict[tuple, int]]] = {}
    for degree in range(1, MAX_DEGREE + 1):
        entries = []
        seen = set()
        for seed in _seed_exponents(degree, nn):
            poly = _to_integer(harmonic_projection(seed, nn))
            _assert_harmonic(poly, nn)
            key = tuple(sorted(poly.items()))
            if key in seen:
                continue
            seen.add(key)
            entries.append(poly)
        catalog[degree] = entries
    return catalog


def num_harmonics(n: int, degree: int) -> int:
    return len(harmonic_catalog(n)[degree])


def harmonic_field(n: int, degree: int, index: int = 0,
                   amplitude: float = 1.0) -> RadialField:
    """Library entry as a RadialField with the requested mean-square size."""
    entries = harmonic_catalog(n)[degree]
    poly = entries[index % len(entries)]
    floats = {k: float(v) for k, v in poly.items()}
    scale = amplitude / math.sqrt(mean_square(floats, n + 1))
    return RadialField(n, [(scale * c, e) for e, c in floats.items()])


def random_band_limited(n: int, degrees, rng: np.random.Generator,
                        amplitude: float = 0.1, k_terms: int = 6) -> RadialField:
    """Random sparse combination of library entries, rms-normalized.

    Components of different degree (and different seed support) are close to
    orthogonal, so the rms of the sum is computed exactly from the combined
    term list rather than assumed.
    """
    degrees = list(degrees)
    field = RadialField(n, [])
    for _ in range(k_terms):
        degree = int(rng.choice(degrees))
        index = int(rng.integers(0, num_harmonics(n, degree)))
        coeff = float(rng.normal())
        field = field + coeff * harmonic_field(n, degree, index)
    poly = {e: c for c, e in field.terms}
    ms = mean_square(poly, n + 1)
    if ms <= 0:
        return random_band_limited(n, degrees, rng, amplitude, k_terms)
    return (amplitude / math.sqrt(ms)) * field
