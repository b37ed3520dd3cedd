"""Shared numerical kernels, checked against independent references."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from curvesmith.errors import RootNotBracketed
from curvesmith.numerics import (CachedAntiderivative, SampleBank,
                                 adaptive_panel_breaks, bisect_scalar,
                                 dyadic_shell_edges, fit_rank_exponent,
                                 geometric_grid, gl_integral, gl_panels,
                                 invert_monotone, piecewise_linear,
                                 ppoly_extrema, shell_tail)

rng = np.random.default_rng(0)


def test_gl_integral_cosine():
    # frozen: integral of cos over [0, 1] = sin(1)
    val = gl_integral(lambda t: np.cos(t), 0.0, 1.0)
    assert val == pytest.approx(0.8414709848078965, abs=1e-14)


def test_gl_panels_vector_integrand():
    lefts = np.array([0.0, 0.5])
    rights = np.array([0.5, 1.0])
    out = gl_panels(lambda t: np.stack([t, t ** 2], axis=1), lefts, rights)
    assert out.shape == (2, 2)
    # frozen: per-panel integrals of t and t^2
    assert out[:, 0] == pytest.approx([0.125, 0.375], abs=1e-15)
    assert out[:, 1] == pytest.approx([1.0 / 24.0, 7.0 / 24.0], abs=1e-15)


def test_adaptive_breaks_against_quad():
    fn = lambda t: np.sqrt(np.abs(t - 0.3)) + np.cos(5 * t)
    breaks, integrals = adaptive_panel_breaks(fn, 0.0, 1.0, knots=(0.3,),
                                              tol=1e-12)
    ref, _ = quad(lambda t: fn(np.array([t]))[0], 0.0, 1.0,
                  points=[0.3], limit=200)
    assert integrals.sum() == pytest.approx(ref, abs=5e-12)
    assert 0.3 in set(breaks.tolist())


def test_cached_antiderivative_matches_quad():
    fn = lambda t: np.exp(-t) * np.sin(3 * t)
    anti = CachedAntiderivative(fn, 0.0, 2.0, tol=1e-13)
    for x in (0.0, 0.17, 0.9, 1.3333, 2.0):
        ref, _ = quad(lambda t: fn(np.array([t]))[0], 0.0, x, limit=200)
        assert anti.value(x) == pytest.approx(ref, abs=1e-11)
    xs = np.linspace(0.0, 2.0, 37)
    refs = np.array([quad(lambda t: fn(np.array([t]))[0], 0, x)[0] for x in xs])
    assert np.allclose(anti.value(xs), refs, atol=1e-10)


def test_shell_tail_convergent_power():
    # integrand t^(-1/2) toward 0: shell mass ratio 2^(-1/2), tail known
    lefts, rights = dyadic_shell_edges(0.0, 1.0, toward="left", n_shells=40)
    masses = gl_panels(lambda t: t ** -0.5, lefts, rights)[:, 0]
    tail, ratio, status = shell_tail(masses)
    assert status == "converged"
    assert ratio == pytest.approx(2 ** -0.5, rel=1e-6)
    inner = lefts[-1]
    assert tail == pytest.approx(2 * np.sqrt(inner), rel=1e-5)


def test_shell_tail_divergent_log():
    lefts, rights = dyadic_shell_edges(0.0, 1.0, toward="left", n_shells=40)
    masses = gl_panels(lambda t: 1.0 / t, lefts, rights)[:, 0]
    _, _, status = shell_tail(masses)
    assert status == "diverging"


def test_invert_monotone_cubic():
    fn = lambda t: t ** 3
    got = invert_monotone(fn, 0.0, 1.0, np.array([0.0, 0.125, 0.729, 1.0]))
    assert got == pytest.approx([0.0, 0.5, 0.9, 1.0], abs=1e-12)


def test_invert_monotone_flat_is_left_continuous():
    # plateau at level 0.5 over [0.25, 0.75]: inverse of 0.5 is the left edge
    def fn(t):
        t = np.asarray(t)
        return np.clip(t, None, 0.25) + np.clip(t - 0.75, 0.0, None)

    got = invert_monotone(fn, 0.0, 1.0, np.array([0.25]))
    assert got[0] == pytest.approx(0.25, abs=1e-12)


def test_bisect_scalar_requires_bracket():
    with pytest.raises(RootNotBracketed):
        bisect_scalar(lambda t: t + 2.0, 0.0, 1.0)
    root = bisect_scalar(lambda t: t ** 2 - 2.0, 0.0, 2.0)
    assert root == pytest.approx(np.sqrt(2.0), abs=1e-13)


def test_sample_bank_matches_bruteforce():
    ts = np.sort(rng.uniform(0, 1, 500))
    vals = rng.uniform(0, 10, 500)
    bank = SampleBank(ts, vals)
    for _ in range(200):
        lo, hi = np.sort(rng.uniform(0, 1, 2))
        mask = (ts > lo) & (ts < hi)
        want = vals[mask].max() if mask.any() else -np.inf
        assert bank.max_between(lo, hi) == want


def test_fit_rank_exponent_recovers_power():
    n = np.arange(1, 4001, dtype=float)
    q, _ = fit_rank_exponent(n ** -1.5)
    assert q == pytest.approx(1.5, abs=0.01)
    q2, _ = fit_rank_exponent(n ** -0.75)
    assert q2 == pytest.approx(0.75, abs=0.01)


def test_piecewise_linear_and_extrema():
    p = piecewise_linear([0.0, 1.0, 2.0], [0.0, 3.0, -1.0])
    assert p(0.5) == pytest.approx(1.5)
    pts = ppoly_extrema(p, 0.0, 2.0)
    vals = p(pts)
    assert vals.max() == pytest.approx(3.0)
    assert pts[np.argmax(vals)] == pytest.approx(1.0)
    assert vals.min() == pytest.approx(-1.0)
    # antiderivative of PL is quadratic with interior extrema
    q = p.antiderivative()
    # frozen: integral of the hat up to 1 is 1.5; up to 2 is 1.5 + 1 = 2.5
    assert q(1.0) == pytest.approx(1.5)
    assert q(2.0) == pytest.approx(2.5)


def test_geometric_grid_endpoints_and_order():
    g = geometric_grid(0.0, 1.0, n_uniform=16, n_geo=10)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)
    # refinement accumulates toward both endpoints
    assert g[1] - g[0] < 1e-4
    assert g[-1] - g[-2] < 1e-4


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10 ** 9))
def test_normalized_difference_inequality(dim, seed):
    # for nonzero u, v: || u/|u| - v/|v| || <= (2/|u|) * |u - v|
    r = np.random.default_rng(seed)
    u = r.normal(size=dim)
    v = r.normal(size=dim)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        return
    lhs = np.linalg.norm(u / nu - v / nv)
    rhs = 2.0 / nu * np.linalg.norm(u - v)
    assert lhs <= rhs + 1e-12
