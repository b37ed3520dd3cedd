"""Verdict pipeline: singular sets, decide, curvature integral, scalar routes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from curvesmith.config import Config
from curvesmith.curve_model import (CurveSource, IntervalSet, ODM_C,
                                    ScalarFunction, cantor_phase_curve,
                                    circle_arc, derivative,
                                    harmonic_phase_curve, line_curve,
                                    odm_curve, precompose,
                                    prescribed_curvature_curve, spiral_curve)
from curvesmith.decision import (AnalysisReport, SingularSetEstimate, decide,
                                 detect_singular_set, lebedev_check,
                                 lp_half_variation, monotone_tail_decide,
                                 sqrt_curvature_integral)
from curvesmith.errors import InvalidParameter

FULL = IntervalSet(((0.0, 1.0),))


# --- shared decide runs (expensive; frozen by everything below) -----------------


@pytest.fixture(scope="module")
def spiral_reports():
    return {s: decide(spiral_curve(s), "c2") for s in
            (1.2, 1.5, 1.9, 2.5, 3.0, 4.0)}


@pytest.fixture(scope="module")
def harmonic_reports():
    curve = harmonic_phase_curve(64)
    return {mode: decide(curve, mode) for mode in ("c2", "d2inf")}


@pytest.fixture(scope="module")
def cantor_reports():
    return {depth: decide(cantor_phase_curve(0.6, depth), "c2")
            for depth in (9, 12)}


def strip_metadata(curve, drop=("regular_open",)):
    md = {k: v for k, v in (curve.metadata or {}).items() if k not in drop}
    return CurveSource(curve.domain, curve.dim, curve.evaluator,
                       d1_fn=curve.d1_fn, d2_fn=curve.d2_fn, metadata=md)


def bumps(alpha_max, power):
    """Stacked monotone tents: bump alpha has width ~1/alpha^2, height
    1/alpha^power."""
    widths = 1.0 / np.arange(1, alpha_max + 1) ** 2
    widths = widths / widths.sum()
    cums = np.cumsum(widths)
    lefts = np.concatenate([[0.0], cums[:-1]])
    heights = 1.0 / np.arange(1, alpha_max + 1) ** power

    def ev(ts):
        ts = np.asarray(ts, float)
        idx = np.clip(np.searchsorted(cums, ts, side="right"), 0,
                      alpha_max - 1)
        u = (ts - lefts[idx]) / widths[idx]
        return heights[idx] * (1.0 - np.abs(2.0 * u - 1.0))

    return ScalarFunction((0.0, 1.0), ev)


def assert_report_invariants(rep):
    series = [rep.evidence[k]["verdict"]
              for k in ("sqrt_sum", "component_series") if k in rep.evidence]
    null = rep.evidence.get("null_test", {}).get("verdict")
    if rep.verdict == "reparametrizable":
        assert null == "null"
        assert all(v == "converges" for v in series)
    if rep.verdict == "not_reparametrizable":
        assert null == "not_null" or "diverges" in series


# --- decide: spiral threshold ---------------------------------------------------


def test_spiral_threshold_c2(spiral_reports):
    for s, rep in spiral_reports.items():
        want = "reparametrizable" if s > 2 else "not_reparametrizable"
        assert rep.verdict == want, (s, rep.verdict)
        assert rep.mode == "c2"
        assert rep.route == "partition"


def test_spiral_null_and_route(spiral_reports):
    for rep in spiral_reports.values():
        assert rep.evidence["null_test"]["verdict"] == "null"
        assert rep.evidence["singular_source"] == "analytic"
        assert_report_invariants(rep)


def test_spiral_fitted_exponents_frozen(spiral_reports):
    frozen = {1.2: 0.578, 1.5: 0.699, 1.9: 0.871,
              2.5: 1.147, 3.0: 1.391, 4.0: 1.901}
    for s, rep in spiral_reports.items():
        q = rep.evidence["sqrt_sum"]["fitted_exponent"]
        assert q == pytest.approx(frozen[s], abs=0.02), s
    qs = [spiral_reports[s].evidence["sqrt_sum"]["fitted_exponent"]
          for s in sorted(spiral_reports)]
    assert qs == sorted(qs)


def test_spiral_exponent_band_separates(spiral_reports):
    for s, rep in spiral_reports.items():
        q = rep.evidence["sqrt_sum"]["fitted_exponent"]
        if s < 2:
            assert q <= 0.98
        else:
            assert q >= 1.02


def test_spiral_25_convergence_uses_tail_consistency(spiral_reports):
    # the budgeted sweep cannot push sqrt(residual) under 1e-3 of the sum
    # for s barely above 2; the verdict must come from the fitted tail
    ss = spiral_reports[2.5].evidence["sqrt_sum"]
    assert ss["verdict"] == "converges"
    assert ss["residual_sqrt"] > 1e-3 * ss["total"]
    assert ss["residual_sqrt"] <= 2.0 * ss["tail_estimate"]
    assert not ss["exhausted"]


def test_spiral_d2inf_matches_c2_side(spiral_reports):
    for s in (1.5, 3.0):
        rep = decide(spiral_curve(s), "d2inf")
        assert rep.verdict == spiral_reports[s].verdict
        assert rep.mode == "d2inf"


# --- decide: trivially regular curves -------------------------------------------


def test_circle_reparametrizable():
    rep = decide(circle_arc(2.0, 5.0), "c2")
    assert rep.verdict == "reparametrizable"
    # constant curvature: every ranked cell carries the same mass
    assert rep.evidence["sqrt_sum"]["fitted_exponent"] == pytest.approx(0.0,
                                                                        abs=1e-9)
    assert rep.evidence["sqrt_sum"]["verdict"] == "converges"
    assert_report_invariants(rep)


def test_line_reparametrizable():
    rep = decide(line_curve((0, 0), (3, 4)), "c2")
    assert rep.verdict == "reparametrizable"
    assert_report_invariants(rep)


# --- decide: harmonic gaps separate the modes -----------------------------------


def test_harmonic_mode_split(harmonic_reports):
    assert harmonic_reports["c2"].verdict == "not_reparametrizable"
    assert harmonic_reports["d2inf"].verdict == "reparametrizable"
    for rep in harmonic_reports.values():
        assert rep.evidence["null_test"]["verdict"] == "null"
        assert_report_invariants(rep)


def test_harmonic_c2_fails_via_component_series(harmonic_reports):
    ev = harmonic_reports["c2"].evidence
    assert ev["sqrt_sum"]["verdict"] == "converges"
    cs = ev["component_series"]
    assert cs["verdict"] == "diverges"
    # sum of sqrt(1/(n(n+1))) sits in the critical band: the growth signal
    # carries the call, not the rank fit
    assert 0.98 < cs["fitted_exponent"] < 1.02
    assert all(g > 0.05 for g in cs["growth"])


def test_harmonic_d2inf_single_component(harmonic_reports):
    cs = harmonic_reports["d2inf"].evidence["component_series"]
    assert cs["verdict"] == "converges"
    assert cs["n_terms"] == 1


# --- decide: cantor phase curves ------------------------------------------------


def test_cantor12_reparametrizable(cantor_reports):
    rep = cantor_reports[12]
    assert rep.verdict == "reparametrizable"
    cs = rep.evidence["component_series"]
    assert cs["verdict"] == "converges"
    assert cs["fitted_exponent"] == pytest.approx(1.0595, abs=0.01)
    assert cs["residual_sqrt"] == pytest.approx(math.sqrt(0.4 ** 12),
                                                rel=1e-9)
    assert_report_invariants(rep)


def test_cantor12_component_budget_recorded(cantor_reports):
    tr = cantor_reports[12].truncation
    assert tr["skipped_components"] == 4095 - 512
    assert tr["skipped_mass"] == pytest.approx(2.4506e-4, rel=1e-3)
    assert tr["truncated_family"] is True
    assert tr["regular_tail"] == pytest.approx(0.4 ** 12, rel=1e-9)


def test_cantor9_inconclusive_null_band(cantor_reports):
    rep = cantor_reports[9]
    assert rep.verdict == "inconclusive"
    nt = rep.evidence["null_test"]
    assert nt["verdict"] == "inconclusive"
    assert nt["defect"] == pytest.approx(0.4 ** 9, rel=1e-6)


# --- decide: odm stays divergent at the partition budget ------------------------


def test_odm_partition_budget_diverges():
    rep = decide(odm_curve(128), "c2")
    assert rep.verdict == "not_reparametrizable"
    ss = rep.evidence["sqrt_sum"]
    assert ss["verdict"] == "diverges"
    # steep prefix fit inconsistent with the unexplored spike mass: the
    # convergence clause must refuse exactly this shape
    assert ss["fitted_exponent"] > 1.02
    assert ss["residual_sqrt"] > 2.0 * ss["tail_estimate"]
    assert_report_invariants(rep)


# --- decide: null gate and failure absorption -----------------------------------


def test_not_null_forces_negative_verdict():
    curve = spiral_curve(3.0)
    md = dict(curve.metadata or {})
    md["regular_open"] = {"c2": IntervalSet(((0.0, 0.5),)),
                          "d2inf": IntervalSet(((0.0, 0.5),))}
    half = CurveSource(curve.domain, curve.dim, curve.evaluator,
                       d1_fn=curve.d1_fn, d2_fn=curve.d2_fn, metadata=md)
    rep = decide(half, "c2")
    assert rep.verdict == "not_reparametrizable"
    assert rep.evidence["null_test"]["verdict"] == "not_null"


def test_numeric_failure_absorbed_as_inconclusive():
    bad = CurveSource((0.0, 1.0), 2,
                      lambda ts: np.full((np.atleast_1d(ts).size, 2), np.nan))
    rep = decide(bad, "c2")
    assert rep.verdict == "inconclusive"
    assert "error" in rep.evidence


def test_nonpositive_delta_rejected():
    with pytest.raises(InvalidParameter):
        decide(spiral_curve(3.0), "c2", delta=-1.0)


def test_unknown_mode_rejected():
    with pytest.raises(InvalidParameter):
        decide(circle_arc(1.0, 1.0), "c3")


# --- decide: invariance under parameter warps -----------------------------------


def test_verdict_invariant_under_warp():
    gamma = 1.3
    denom = math.expm1(gamma)

    def om(ts):
        return np.expm1(gamma * np.asarray(ts, float)) / denom

    def om_d1(ts):
        return gamma * np.exp(gamma * np.asarray(ts, float)) / denom

    def om_d2(ts):
        return gamma ** 2 * np.exp(gamma * np.asarray(ts, float)) / denom

    warped = precompose(spiral_curve(3.0), om, om_d1, om_d2)
    rep = decide(warped, "c2")
    assert rep.verdict == "reparametrizable"


# --- singular set detection ------------------------------------------------------


def test_detect_pole_both_modes():
    def kappa(ts):
        with np.errstate(divide="ignore"):
            return 0.1 + 1.0 / np.abs(np.asarray(ts, float) - 0.5) ** 2

    bare = strip_metadata(prescribed_curvature_curve(kappa, knots=(0.5,)))
    for mode in ("c2", "d2inf"):
        est = detect_singular_set(bare, mode)
        assert est.source == "detected"
        assert 0.0 in est.points and 1.0 in est.points
        inner = [p for p in est.points if 0 < p < 1]
        assert len(inner) == 2
        assert all(abs(p - 0.5) < 0.01 for p in inner)
        assert len(est.regular) == 2


def test_detect_curvature_jump_only_in_c2_mode():
    def kappa(ts):
        ts = np.asarray(ts, float)
        return np.where(ts < 0.3, 1.0, 3.0)

    src = prescribed_curvature_curve(kappa, knots=(0.3,))
    bare = strip_metadata(src, drop=("regular_open", "knots"))
    est_c2 = detect_singular_set(bare, "c2")
    est_d2 = detect_singular_set(bare, "d2inf")
    inner = [p for p in est_c2.points if 0 < p < 1]
    assert len(inner) == 2 and all(abs(p - 0.3) < 0.01 for p in inner)
    assert est_d2.points == (0.0, 1.0)
    # second-derivative jumps break C2 but not bounded-second-derivative
    assert set(est_d2.points) <= set(est_c2.points)


def test_detect_smooth_curve_trivial():
    est = detect_singular_set(strip_metadata(circle_arc(2.0, 5.0)), "c2")
    assert est.points == (0.0, 1.0)
    assert len(est.regular) == 1


def test_detect_scalar_parabola():
    sq = CurveSource((0.0, 1.0), 1,
                     lambda ts: (np.asarray(ts, float) ** 2)[:, None])
    est = detect_singular_set(sq, "c2")
    assert est.points == (0.0, 1.0)
    assert len(est.regular) == 1


def test_detect_analytic_override():
    est = detect_singular_set(spiral_curve(3.0), "c2")
    assert est.source == "analytic"
    assert est.points == (0.0, 1.0)


def test_singular_estimate_validates_source():
    with pytest.raises(InvalidParameter):
        SingularSetEstimate((0.0, 1.0), FULL, "c2", "guessed")


# --- sqrt curvature integral ------------------------------------------------------


def test_integral_spiral_exponent_law():
    for s in (1.5, 2.5, 3.0):
        ci = sqrt_curvature_integral(spiral_curve(s), FULL)
        assert ci.exponent == pytest.approx(s / 2 - 2, abs=1e-6)
        assert ci.verdict == ("converges" if s > 2 else "diverges")
    assert sqrt_curvature_integral(spiral_curve(1.5), FULL).value == math.inf


def test_integral_spiral_values_match_quadrature():
    for s, frozen in ((2.5, 4.16395), (3.0, 2.24298)):
        curve = spiral_curve(s)

        def integrand(t):
            d1 = np.ravel(derivative(curve, t, 1))
            d2 = np.ravel(derivative(curve, t, 2))
            speed = float(np.hypot(*d1))
            kappa = abs(d1[0] * d2[1] - d1[1] * d2[0]) / speed ** 3
            return math.sqrt(kappa) * speed

        oracle, err = quad(integrand, 0.0, 1.0, points=[0.0], limit=300)
        ci = sqrt_curvature_integral(curve, FULL)
        assert ci.value == pytest.approx(oracle, rel=1e-6)
        assert ci.value == pytest.approx(frozen, rel=1e-3)


def test_integral_circle_exact():
    ci = sqrt_curvature_integral(circle_arc(2.0, 5.0), FULL)
    assert ci.verdict == "converges"
    assert ci.value == pytest.approx(5.0 * math.sqrt(2.0), rel=1e-9)


def test_integral_odm_bounded_and_stable():
    ci = sqrt_curvature_integral(odm_curve(128), FULL)
    ci24 = sqrt_curvature_integral(odm_curve(128), FULL, order=24)
    assert ci.verdict == "converges"
    assert abs(ci24.value - ci.value) <= 1e-4 * ci24.value
    bound = 1.0 + ODM_C * sum(1.0 / n ** 2 for n in range(1, 129))
    assert ci.value <= bound + 0.05
    assert ci.value == pytest.approx(1.061398, rel=1e-5)


# --- monotone end-window route ----------------------------------------------------


def test_monotone_tail_circle():
    rep = monotone_tail_decide(circle_arc(2.0, 5.0))
    assert rep.verdict == "reparametrizable"
    assert rep.route == "monotone_tail"


def test_monotone_tail_spiral_windows():
    rep = monotone_tail_decide(spiral_curve(3.0))
    assert rep.verdict == "reparametrizable"
    assert rep.route == "monotone_tail"
    win = rep.evidence["monotone_windows"]
    assert win["left"] > 0 and win["right"] > 0


def test_monotone_tail_divergent_spiral():
    rep = monotone_tail_decide(spiral_curve(1.5))
    assert rep.verdict == "not_reparametrizable"
    assert rep.route == "monotone_tail"


def test_monotone_tail_fallback():
    rep = monotone_tail_decide(harmonic_phase_curve(64))
    assert rep.route == "partition_fallback"
    assert rep.verdict == "not_reparametrizable"
    assert "monotone_fallback" in rep.evidence


# --- scalar oscillation route ------------------------------------------------------


def test_lebedev_monotone_trivial():
    f = ScalarFunction((0.0, 1.0), lambda ts: np.asarray(ts, float) ** 2)
    rep = lebedev_check(f)
    assert rep.verdict == "reparametrizable"
    assert rep.evidence["n_pieces"] == 1
    assert rep.evidence["oscillation_series"]["total"] == pytest.approx(1.0)
    assert rep.singular.points == (0.0, 1.0)


def test_lebedev_constant():
    f = ScalarFunction((0.0, 1.0),
                       lambda ts: np.full_like(np.asarray(ts, float), 2.5))
    rep = lebedev_check(f)
    assert rep.verdict == "reparametrizable"


def test_lebedev_harmonic_oscillations_diverge():
    # heights 1/alpha^2 make sqrt-oscillations the harmonic series; the
    # family accumulates below any grid, so only audited pieces count
    rep = lebedev_check(bumps(1_000_000, 2))
    assert rep.verdict == "not_reparametrizable"
    ev = rep.evidence
    assert ev["stable"] is False
    series = ev["oscillation_series"]
    assert series["verdict"] == "diverges"
    assert 0.95 < series["fitted_exponent"] < 1.02
    assert all(g > 0.05 for g in series["growth"])
    assert ev["n_unconfirmed"] > 0


def test_lebedev_quartic_heights_converge():
    rep = lebedev_check(bumps(40, 4))
    assert rep.verdict == "reparametrizable"
    ev = rep.evidence
    assert ev["n_pieces"] == 80
    series = ev["oscillation_series"]
    assert series["verdict"] == "converges"
    assert series["fitted_exponent"] == pytest.approx(1.97, abs=0.05)
    assert rep.evidence["null_test"]["verdict"] == "null"


def test_lebedev_agrees_with_decide_on_scalar():
    f = ScalarFunction((0.0, 1.0), lambda ts: np.asarray(ts, float) ** 2)
    as_curve = CurveSource((0.0, 1.0), 1,
                           lambda ts: (np.asarray(ts, float) ** 2)[:, None])
    assert lebedev_check(f).verdict == decide(as_curve, "c2").verdict


# --- half-variation lower bound -----------------------------------------------------


def alt_steps(N):
    ks = np.arange(1, N + 1)
    pts = 1.0 / ks[::-1]
    vals = ((-1.0) ** ks / ks ** 2)[::-1]

    def ev(ts):
        ts = np.asarray(ts, float)
        idx = np.clip(np.searchsorted(pts, ts), 0, N - 1)
        return vals[idx]

    return ScalarFunction((0.0, 1.0), ev), pts


def brute_half_variation(vals):
    n = len(vals)
    best = 0.0

    def rec(start, acc):
        nonlocal best
        best = max(best, acc)
        for i in range(start, n):
            for j in range(i + 1, n):
                rec(j, acc + math.sqrt(abs(vals[j] - vals[i])))

    rec(0, 0.0)
    return best


def test_lp_monotone_exact():
    f = ScalarFunction((0.0, 1.0), lambda ts: np.asarray(ts, float) ** 2)
    assert lp_half_variation(f) == pytest.approx(1.0, rel=1e-9)


def test_lp_two_piece_peak():
    f = ScalarFunction(
        (0.0, 1.0),
        lambda ts: 1.0 - np.abs(2.0 * np.asarray(ts, float) - 1.0))
    assert lp_half_variation(f) == pytest.approx(2.0, rel=1e-9)


def test_lp_alternating_growth():
    f, pts = alt_steps(64)
    lo = lp_half_variation(f, points=[0.0, *pts, 1.0])
    oracle = sum(np.sqrt(np.abs(np.diff(
        [(-1.0) ** k / k ** 2 for k in range(1, 65)]))))
    assert lo == pytest.approx(float(oracle), rel=1e-12)
    shorter = lp_half_variation(alt_steps(16)[0],
                                points=[0.0, *alt_steps(16)[1], 1.0])
    assert lo > shorter  # partial sums keep growing with depth


def test_lp_matches_bruteforce_on_small_sets():
    f, pts = alt_steps(6)
    points = [0.0, *pts, 1.0]
    lo = lp_half_variation(f, points=points)
    vals = [float(f.eval(np.array([p]))[0]) for p in points]
    assert lo == pytest.approx(brute_half_variation(vals), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
def test_lp_monotone_steps_property(increments):
    # sqrt is superadditive under splitting, so over the full knot set the
    # optimum takes every consecutive pair; over the detected structure a
    # monotone function is one piece and the bound is sqrt of its range
    inc = np.array(increments)
    total = float(inc.sum())
    knots = np.linspace(0.0, 1.0, len(inc) + 1)
    cums = np.concatenate([[0.0], np.cumsum(inc)])

    def ev(ts):
        ts = np.asarray(ts, float)
        return np.interp(ts, knots, cums)

    f = ScalarFunction((0.0, 1.0), ev)
    assert lp_half_variation(f, points=list(knots)) == \
        pytest.approx(float(np.sqrt(inc).sum()), rel=1e-9)
    assert lp_half_variation(f) == pytest.approx(math.sqrt(total), rel=1e-6)


# --- cross-operation invariants ------------------------------------------------------


def test_necessity_chain_for_positive_verdicts(spiral_reports):
    # a positive verdict must be backed by convergent component sums and a
    # convergent sqrt-curvature integral
    for s in (2.5, 3.0, 4.0):
        rep = spiral_reports[s]
        assert rep.evidence["component_series"]["verdict"] == "converges"
        ci = sqrt_curvature_integral(spiral_curve(s), FULL)
        assert ci.verdict == "converges"


def test_mode_consistency_c2_implies_d2inf(harmonic_reports):
    # C2-reparametrizable must imply D2inf-reparametrizable, never reversed
    rep_c2 = decide(spiral_curve(3.0), "c2")
    rep_d2 = decide(spiral_curve(3.0), "d2inf")
    if rep_c2.verdict == "reparametrizable":
        assert rep_d2.verdict == "reparametrizable"
    assert not (harmonic_reports["c2"].verdict == "reparametrizable"
                and harmonic_reports["d2inf"].verdict != "reparametrizable")


def test_detected_set_shrinks_with_weaker_mode():
    def kappa(ts):
        ts = np.asarray(ts, float)
        return np.where(ts < 0.3, 1.0, 3.0)

    src = prescribed_curvature_curve(kappa, knots=(0.3,))
    bare = strip_metadata(src, drop=("regular_open", "knots"))
    c2 = set(detect_singular_set(bare, "c2").points)
    d2 = set(detect_singular_set(bare, "d2inf").points)
    assert d2 <= c2


def test_report_tolerances_recorded(spiral_reports):
    for rep in spiral_reports.values():
        assert rep.tolerances["null_tol"] == Config().null_tol
        assert "exponent_band" in rep.tolerances
        assert rep.truncation is not None
