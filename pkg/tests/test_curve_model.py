"""Curve generators against closed-form references."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvesmith.curve_model import (DEFAULT_CORPUS, CurveSource, IntervalSet,
                                    ODM_C, bounded_derivative_function,
                                    build_curve, cantor_like_set,
                                    cantor_phase_curve, circle_arc,
                                    constant_phase_curve, derivative,
                                    harmonic_complement_intervals,
                                    harmonic_phase_curve, line_curve,
                                    odm_admissible_sqrt_sums,
                                    odm_curvature_profile, odm_curve,
                                    precompose, prescribed_curvature_curve,
                                    spiral_curve)
from curvesmith.errors import (InvalidDescriptor, InvalidParameter,
                               OutOfDomain)

rng = np.random.default_rng(7)


# --- spiral ------------------------------------------------------------------

def test_spiral_point_values_frozen():
    c = spiral_curve(3.0)
    # frozen: f(0.5) = 0.125 * (cos 2, sin 2)
    assert c.eval(0.5) == pytest.approx(
        [0.125 * math.cos(2.0), 0.125 * math.sin(2.0)], abs=1e-15)
    assert c.eval(0.0) == pytest.approx([0.0, 0.0], abs=0.0)
    # frozen: f(1) = (cos 1, sin 1)
    assert c.eval(1.0) == pytest.approx(
        [0.5403023058681398, 0.8414709848078965], abs=1e-15)


@pytest.mark.parametrize("s", [1.2, 1.9, 2.5, 3.0, 4.0])
def test_spiral_derivatives_match_finite_differences(s):
    c = spiral_curve(s)
    ts = np.linspace(0.05, 0.99, 23)
    fd1 = np.empty((len(ts), 2))
    fd2 = np.empty((len(ts), 2))
    h = 1e-6
    for i, t in enumerate(ts):
        fd1[i] = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
        fd2[i] = (c.eval(t + h) - 2 * c.eval(t) + c.eval(t - h)) / h ** 2
    a1 = c.d1(ts)
    a2 = c.d2(ts)
    assert np.max(np.abs(a1 - fd1) / (1 + np.abs(a1))) < 1e-5
    assert np.max(np.abs(a2 - fd2) / (1 + np.abs(a2))) < 1e-3


def test_spiral_speed_and_curvature_closed_forms():
    s = 2.5
    c = spiral_curve(s)
    ts = np.linspace(0.02, 1.0, 41)
    spd = c.metadata["speed"](ts)
    assert np.allclose(spd, np.linalg.norm(c.d1(ts), axis=1), rtol=1e-12)
    kap = c.metadata["kappa"](ts)
    d1, d2 = c.d1(ts), c.d2(ts)
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    assert np.allclose(kap, np.abs(det) / spd ** 3, rtol=1e-10)
    # decay exponent: kappa ~ t^-s as t -> 0
    t_small = np.array([1e-4, 1e-5])
    ratio = c.metadata["kappa"](t_small)
    assert ratio[1] / ratio[0] == pytest.approx(10.0 ** s, rel=1e-3)


def test_spiral_domain_guard():
    c = spiral_curve(3.0)
    with pytest.raises(OutOfDomain):
        c.eval(1.5)
    with pytest.raises(InvalidParameter):
        spiral_curve(-1.0)


# --- circle arc --------------------------------------------------------------

def test_circle_arc_chord_lengths():
    cv, L = 2.0, 7.0
    c = circle_arc(cv, L)
    for t1, t2 in [(0.0, 0.3), (0.1, 0.9), (0.45, 0.55)]:
        chord = np.linalg.norm(c.eval(t2) - c.eval(t1))
        want = (2.0 / cv) * abs(math.sin(cv * L * (t2 - t1) / 2.0))
        assert chord == pytest.approx(want, abs=1e-12)
    ts = np.linspace(0, 1, 17)
    assert np.allclose(np.linalg.norm(c.d1(ts), axis=1), L, rtol=1e-12)
    assert np.allclose(np.linalg.norm(c.d2(ts), axis=1), cv * L * L,
                       rtol=1e-12)


# --- prescribed curvature ----------------------------------------------------

def test_constant_curvature_is_circle():
    k = 2.0
    c = build_curve({"kind": "prescribed_curvature", "profile": "constant",
                     "value": k})
    ts = np.linspace(0.0, 1.0, 101)
    got = c.eval(ts)
    want = np.stack([np.sin(k * ts) / k, (1 - np.cos(k * ts)) / k], axis=1)
    assert np.max(np.abs(got - want)) < 1e-8
    assert np.allclose(np.linalg.norm(c.d1(ts), axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(c.d2(ts), axis=1), k, rtol=1e-10)


def test_prescribed_curvature_fd_consistency():
    kappa = lambda ts: 1.0 + 0.5 * np.sin(6 * np.asarray(ts))
    c = prescribed_curvature_curve(kappa)
    for t in (0.2, 0.5, 0.8):
        h = 1e-6
        fd = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
        assert np.linalg.norm(fd - c.d1(t)) < 1e-7


# --- phase integral curves ---------------------------------------------------

def test_linear_phase_is_unit_circle_arc():
    c = constant_phase_curve(1.0)
    ts = np.linspace(0, 1, 29)
    want = np.stack([np.sin(ts), 1.0 - np.cos(ts)], axis=1)
    assert np.max(np.abs(c.eval(ts) - want)) < 1e-11
    assert np.allclose(np.linalg.norm(c.d1(ts), axis=1), 1.0, atol=0.0)


def test_phase_curve_eval_matches_d1_by_fd():
    c = harmonic_phase_curve(12)
    ts = np.array([0.11, 0.307, 0.52, 0.9])
    h = 1e-7
    for t in ts:
        fd = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
        assert np.linalg.norm(fd - c.d1(t)) < 1e-5


# --- bounded-derivative phase ------------------------------------------------

def test_phase_zero_on_complement_and_bounded():
    regular = harmonic_complement_intervals(20)
    phi = bounded_derivative_function(regular)
    pts = np.array([1.0 / n for n in range(1, 21)])
    assert np.all(phi.eval(pts) == 0.0)
    assert np.all(phi.d1(pts) == 0.0)
    ts = rng.uniform(0, 1, 20000)
    assert np.max(np.abs(phi.d1(ts))) <= 2.0 / 3.0 + 1e-12


def test_phase_derivative_is_fd_limit_inside_components():
    regular = harmonic_complement_intervals(8)
    phi = bounded_derivative_function(regular)
    for (a, b) in list(regular)[:4]:
        ts = np.linspace(a + 0.3 * (b - a), a + 0.45 * (b - a), 5)
        h = 1e-9 * (b - a)
        fd = (phi.eval(ts + h) - phi.eval(ts - h)) / (2 * h)
        assert np.max(np.abs(fd - phi.d1(ts))) < 1e-4


def test_phase_oscillation_at_boundary_points():
    regular = harmonic_complement_intervals(20)
    phi = bounded_derivative_function(regular)
    # at each set point 1/n the derivative oscillates with amplitude >= 0.5
    for n in (2, 5, 11):
        p = 1.0 / n
        for eps in (1e-3, 1e-5):
            ts = np.linspace(p + eps * 1e-3, p + eps, 40001)
            vals = phi.d1(ts)
            assert vals.max() - vals.min() >= 0.5
    amp = phi.metadata["oscillation_amplitude"]
    assert amp == pytest.approx(2.0 / 3.0)


def test_phase_continuous_at_component_seams():
    regular = cantor_like_set(0.6, 4)
    phi = bounded_derivative_function(regular)
    for (a, b) in list(regular)[:6]:
        eps = 1e-12 * (b - a)
        assert abs(phi.eval(a + eps)) < 1e-20
        assert abs(phi.eval(b - eps)) < 1e-20
        # C^1 across the plateau fold
        mid = 0.5 * (a + b)
        assert abs(phi.d1(mid)) == 0.0


# --- interval sets -----------------------------------------------------------

def test_cantor_set_counts_and_measure():
    s = cantor_like_set(0.6, 12)
    assert len(s) == 2 ** 12 - 1
    # frozen: removed measure 1 - 0.4^12, residual 0.4^12 = 1.6777216e-5
    assert s.measure() == pytest.approx(1.0 - 0.4 ** 12, abs=1e-12)
    assert s.truncation_tail == pytest.approx(1.6777216e-5, rel=1e-12)
    # first-generation gap is the centred 0.6
    gaps = sorted(s, key=lambda iv: iv[1] - iv[0])
    l, r = gaps[-1]
    assert (l, r) == pytest.approx((0.2, 0.8), abs=1e-15)


def test_cantor_sqrt_length_series_frozen():
    # sum over generations: 2^(n-1) * sqrt(0.6 * 0.2^(n-1)), limit
    # sqrt(0.6)/(1 - 2 sqrt(0.2)) = 7.33676...
    s = cantor_like_set(0.6, 12)
    total = sum(math.sqrt(r - l) for l, r in s)
    assert total == pytest.approx(5.413712161238, rel=1e-9)
    limit = math.sqrt(0.6) / (1.0 - 2.0 * math.sqrt(0.2))
    assert limit == pytest.approx(7.337084961345, rel=1e-9)
    assert total < limit


def test_harmonic_intervals_enumeration():
    s = harmonic_complement_intervals(65)
    assert len(s) == 65
    ivs = list(s)
    assert ivs[0] == pytest.approx((0.0, 1.0 / 65))
    assert ivs[-1] == pytest.approx((0.5, 1.0))
    assert s.measure() == pytest.approx(1.0, abs=1e-14)
    gaps = s.complement_within(0.0, 1.0)
    assert gaps == ()


def test_interval_set_validation_and_complement():
    with pytest.raises(InvalidParameter):
        IntervalSet(((0.0, 0.5), (0.4, 0.8)))
    s = IntervalSet(((0.1, 0.2), (0.4, 0.5)))
    assert s.complement_within(0.0, 1.0) == ((0.0, 0.1), (0.2, 0.4),
                                             (0.5, 1.0))
    assert s.boundary_points() == (0.1, 0.2, 0.4, 0.5)


# --- spiked curvature profile ------------------------------------------------

def test_odm_profile_geometry():
    kappa, knots, cells = odm_curvature_profile(12)
    # interval lengths c/n^2, abutting from the right end of [0, 1]
    assert cells[0][1] == pytest.approx(1.0)
    for n, (l, r, h) in enumerate(cells, start=1):
        assert r - l == pytest.approx(ODM_C / n ** 2, rel=1e-12)
        assert h == n ** 4
    # peaks hit n^4 exactly at slot centres
    for n, (l, r, _) in enumerate(cells[:5], start=1):
        mid = 0.5 * (l + r)
        assert kappa(np.array([mid]))[0] == pytest.approx(n ** 4, rel=1e-12)
    # base level outside all slots
    assert kappa(np.array([cells[0][0]]))[0] == pytest.approx(0.5, abs=1e-12)


def test_odm_admissible_sums_growth():
    sums = odm_admissible_sqrt_sums(10 ** 6)
    # frozen: sqrt(6)/pi * harmonic(10^6) = 0.7797 * 14.3927 = 11.222
    assert sums[-1] == pytest.approx(11.2216, rel=1e-4)
    assert sums[9] == pytest.approx(math.sqrt(ODM_C) * sum(1.0 / k for k in
                                                           range(1, 11)),
                                    rel=1e-12)
    assert sums[-1] > 10.0


def test_odm_curve_is_unit_speed_with_spiky_kappa():
    c = odm_curve(5)
    ts = np.linspace(0.05, 1.0, 61)
    assert np.allclose(np.linalg.norm(c.d1(ts), axis=1), 1.0, atol=1e-12)
    cells = c.metadata["odm_cells"]
    l, r, h = cells[2]  # n = 3 spike: height 81
    mid = 0.5 * (l + r)
    assert np.linalg.norm(c.d2(mid)) == pytest.approx(81.0, rel=1e-10)


# --- derivative fallback -----------------------------------------------------

def test_fd_derivative_fallback_matches_analytic():
    base = spiral_curve(3.0)
    bare = CurveSource(base.domain, 2, base.evaluator)
    ts = np.linspace(0.1, 0.9, 9)
    d1 = derivative(bare, ts, order=1)
    d2 = derivative(bare, ts, order=2)
    assert np.max(np.abs(d1 - base.d1(ts)) / (1 + np.abs(base.d1(ts)))) < 1e-4
    assert np.max(np.abs(d2 - base.d2(ts)) / (1 + np.abs(base.d2(ts)))) < 1e-2


def test_fd_one_sided_at_endpoints():
    line = line_curve((0.0, 0.0), (2.0, 1.0))
    bare = CurveSource(line.domain, 2, line.evaluator)
    for t in (0.0, 1.0):
        assert derivative(bare, t, order=1) == pytest.approx([2.0, 1.0],
                                                             abs=1e-9)
        # second differences divide float cancellation by h^2
        assert derivative(bare, t, order=2) == pytest.approx([0.0, 0.0],
                                                             abs=1e-4)


# --- precompose --------------------------------------------------------------

def test_precompose_chain_rule_and_kappa_transport():
    c = spiral_curve(3.0)
    omega = lambda ts: np.asarray(ts) ** 2
    od1 = lambda ts: 2.0 * np.asarray(ts)
    od2 = lambda ts: np.full(len(np.atleast_1d(ts)), 2.0)
    oinv = lambda ts: np.sqrt(np.asarray(ts))
    g = precompose(c, omega, od1, od2, omega_inv=oinv)
    ts = np.linspace(0.3, 0.95, 11)
    assert np.allclose(g.eval(ts), c.eval(ts ** 2), atol=1e-14)
    assert np.allclose(g.d1(ts), c.d1(ts ** 2) * (2 * ts)[:, None],
                       rtol=1e-12)
    h = 1e-6
    for t in (0.4, 0.7):
        fd2 = (g.eval(t + h) - 2 * g.eval(t) + g.eval(t - h)) / h ** 2
        assert np.linalg.norm(fd2 - g.d2(t)) / np.linalg.norm(g.d2(t)) < 1e-4
    # curvature is geometric: transported values agree with the source
    assert np.allclose(g.metadata["kappa"](ts), c.metadata["kappa"](ts ** 2),
                       rtol=1e-12)


# --- descriptors -------------------------------------------------------------

def test_build_curve_descriptor_roundtrip():
    for desc in DEFAULT_CORPUS:
        c = build_curve(dict(desc))
        assert isinstance(c, CurveSource)
        assert c.metadata["kind"] in desc["kind"] or \
            c.metadata["kind"] == desc["kind"]
    with pytest.raises(InvalidDescriptor):
        build_curve({"kind": "moebius"})
    with pytest.raises(InvalidDescriptor):
        build_curve({"s": 3.0})


@settings(max_examples=25, deadline=None)
@given(st.floats(1.1, 4.0))
def test_spiral_speed_positive_on_interior(s):
    c = spiral_curve(s)
    ts = np.linspace(1e-3, 1.0, 50)
    assert np.all(c.metadata["speed"](ts) > 0)
