import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from curvstab import polynomial_lemmas as pl


def test_umbilic_zeros():
    for n in (3, 4, 5):
        assert pl.eval_pqr(np.ones(n)) == (0.0, 0.0, 0.0)
        assert pl.eval_pqr(-np.ones(n)) == (0.0, 0.0, 0.0)


def test_hand_checked_point():
    p, q, r = pl.eval_pqr(np.array([2.0, 1.0, 1.0]))
    assert (p, q, r) == (32.0, 6.0, 17.0)


def test_eigenvector_validation():
    vec = pl.EigenVector(np.array([1.0, -2.0, 0.5]), lambda_bound=2.0)
    assert pl.eval_pqr(vec)[0] > 0
    with pytest.raises(ValueError):
        pl.EigenVector(np.array([3.0, 0.0, 0.0]), lambda_bound=2.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10 ** 6),
       n=st.integers(min_value=3, max_value=5))
def test_permutation_invariance(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, n)
    perm = rng.permutation(n)
    assert pl.p_closed(x) == pl.p_closed(x[perm])
    assert pl.q_closed(x) == pl.q_closed(x[perm])
    assert pl.r_closed(x) == pl.r_closed(x[perm])


def test_closed_form_matches_bruteforce():
    assert pl.closed_form_pin(3, 2000, seed=5) < 1e-12
    assert pl.closed_form_pin(4, 1000, seed=6) < 1e-12


def test_gradient_critical_points():
    # origin: critical but not a minimum
    for n in (3, 4):
        zero = np.zeros(n)
        assert np.max(np.abs(pl.grad_p(zero))) == 0.0
        assert pl.p_closed(zero) == 8 * n * (n - 1)
        assert np.max(np.abs(pl.grad_p(np.ones(n)))) == 0.0


def test_gradient_matches_finite_differences():
    # along coordinate axes the third directional derivative of p vanishes
    # identically, so the O(h^2) order test needs a generic direction
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, 4)
    d = rng.normal(size=4)
    d /= np.linalg.norm(d)

    def fd(h):
        est = (pl.p_closed(x + h * d) - pl.p_closed(x - h * d)) / (2 * h)
        return abs(est - pl.grad_p(x) @ d)

    assert fd(1e-4) < 1e-5
    e1, e2 = fd(1e-3), fd(5e-4)
    assert 3.5 < e1 / e2 < 4.5


@pytest.mark.parametrize("name", ["p", "q", "r"])
def test_hessians_match_finite_differences(name):
    rng = np.random.default_rng(2)
    x = rng.uniform(-2, 2, 3)
    _, grad, hess = pl._POLYS[name]
    h = 1e-5
    fd = np.stack([(grad(x + h * e) - grad(x - h * e)) / (2 * h)
                   for e in np.eye(3)])
    assert np.max(np.abs(fd - hess(x))) < 1e-6


def test_certify_zeros_quick():
    report = pl.certify_zeros(3, 2.0, 0.1)
    assert report.passed
    for name in ("p", "q"):
        res = report.results[name]
        assert len(res.zeros) == 2
        assert res.max_deviation < 1e-8
        assert res.unresolved == 0
    recs = report.records()
    assert {r["lemma"] for r in recs} == {"zeros_p", "zeros_q"}
    assert all(r["pass"] for r in recs)


def test_certify_zeros_for_r():
    report = pl.certify_zeros(3, 2.0, 0.1, polynomials=("r",))
    res = report.results["r"]
    assert res.passed
    signs = sorted(np.sign(z.sum()) for z in res.zeros)
    assert signs == [-1.0, 1.0]


def test_certify_zeros_preconditions():
    with pytest.raises(ValueError):
        pl.certify_zeros(3, 1.0, 0.05)
    with pytest.raises(ValueError):
        pl.certify_zeros(3, 2.0, 0.2)


def test_quotient_bounds_small():
    bounds = pl.quotient_bounds(3, 3.0, 2 ** 14, seed=3,
                                shell_directions=256)
    assert bounds.passed
    assert bounds.q_over_p[0] > 0
    assert bounds.p_over_r[0] > 0
    assert bounds.q_over_p[0] <= bounds.q_over_p[1]
    # shell residuals shrink with the radius
    res = [bounds.near_diagonal[r]["p_over_r_residual"]
           for r in sorted(bounds.near_diagonal, reverse=True)]
    assert res[0] > res[1] > res[2]
    recs = bounds.records()
    assert {r["lemma"] for r in recs} == {
        "quotient_q_over_p", "quotient_p_over_r", "near_diagonal_expansion"}
    hist = recs[0]["histogram"]
    assert sum(hist["counts"]) > 0
    assert len(hist["edges"]) == len(hist["counts"]) + 1


def test_quotient_bounds_requires_exclusion():
    with pytest.raises(ValueError):
        pl.quotient_bounds(3, 3.0, 64, exclusion_radius=0.0)


def test_shell_directional_limits():
    # corrected leading term of p/r: 4((n-2)|y|^2 + H^2) / (n |y|^2)
    n = 3
    y_flat = 1e-3 * np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    y_diag = 1e-3 * np.ones(n) / np.sqrt(n)
    for y, expected in ((y_flat, 4.0 / 3.0), (y_diag, 16.0 / 3.0)):
        x = 1.0 + y
        val = float(pl.p_closed(x) / pl.r_closed(x))
        assert abs(val - expected) < 1e-2
        assert_allclose(pl.pr_limit(y, n), expected, rtol=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_critical_points_have_equal_coordinates(n):
    # plain Newton on grad p from random starts: every critical point found
    # inside the box has all coordinates equal (0 or +-(1,..,1))
    rng = np.random.default_rng(n)
    found = 0
    for _ in range(100):
        x = rng.uniform(-3, 3, n)
        for _ in range(200):
            g = pl.grad_p(x)
            if np.linalg.norm(g) < 1e-11:
                break
            try:
                step = np.linalg.solve(pl.hess_p(x), g)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 10:
                break
            x = x - step
        if np.linalg.norm(pl.grad_p(x)) < 1e-10 and np.max(np.abs(x)) < 4:
            found += 1
            assert np.max(x) - np.min(x) < 1e-8
    assert found > 50


def test_ricci_diag_matches_matrix_form():
    rng = np.random.default_rng(9)
    x = rng.uniform(-2, 2, 4)
    d = np.diag(x)
    ric = np.trace(d) * d - d @ d
    assert_allclose(pl.ricci_diag(x), np.diag(ric), rtol=1e-13)
