"""Construction of the smoothing reparametrization.

Given a curve, the open set where it is locally nice, and a certified
partition of that set, this module builds an increasing homeomorphism h of
[0,1] such that f o h has a bounded second derivative (continuous in c2
mode), together with numerical verification of that claim.

The construction runs in three stages, composed as h = xi o phi o pi:

  * xi undoes the variation profile (plus a correction that sweeps out
    intervals of constancy), so f o xi is the unit-speed representative;
  * phi is a piecewise map that crosses each partition cell through an
    explicit polynomial "ramp" whose derivative dies at the cell ends, and
    transports the leftover mass by a piecewise-affine density map;
  * pi is the affine rescale of [0,1] onto the new parameter interval.

All piecewise polynomials (the ramp shape and the C2 bridge correcting
endpoint slopes) are integrated in closed form; no quadrature enters the
construction itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .config import Config, DEFAULT
from .curve_model import CurveSource, IntervalSet
from .errors import (CertificateFailure, CurvesmithError, HypothesisViolated,
                     InvalidParameter, PreconditionFailure)
from .numerics import bisect_scalar, invert_monotone, piecewise_linear
from .partition import (CurvatureField, Cell, GeneralizedPartition,
                        greedy_partition, suggest_delta, verify_partition)
from .variation import VariationProfile, image_null_test

_EPS = np.finfo(float).eps


def _as_array(x):
    scalar = np.isscalar(x) or np.ndim(x) == 0
    return np.atleast_1d(np.asarray(x, dtype=float)), scalar


def _ret(out, scalar):
    return float(out[0]) if scalar else out


# --- density homeomorphism (interval mass transport) ---------------------------


@dataclass(frozen=True, eq=False)
class WeightedHomeo:
    """Increasing map [0, d_prime] -> [0, d] with prescribed interval masses.

    The inverse has derivative weights[i]/length(intervals[i]) on the i-th
    interval and 1 elsewhere, so the preimage of intervals[i] has length
    exactly weights[i]. ``interval_images`` are those preimages.
    """

    d: float
    d_prime: float
    intervals: tuple
    weights: tuple
    density: np.ndarray
    interval_images: tuple
    _xs: np.ndarray = dc_field(repr=False, default=None)
    _ys: np.ndarray = dc_field(repr=False, default=None)

    def psi(self, u):
        """Map new coordinates [0, d_prime] onto old [0, d]."""
        uu, scalar = _as_array(u)
        return _ret(np.interp(uu, self._ys, self._xs), scalar)

    def omega(self, x):
        """Inverse map [0, d] -> [0, d_prime] (absolutely continuous)."""
        xx, scalar = _as_array(x)
        return _ret(np.interp(xx, self._xs, self._ys), scalar)


def density_homeomorphism(intervals, weights, d=None) -> WeightedHomeo:
    """Transport map assigning each interval a prescribed preimage length.

    ``intervals`` must be pairwise non-overlapping subintervals of [0, d]
    (touching endpoints allowed); ``weights`` positive. Outside the
    intervals the map keeps unit density, so the new total length is
    d - sum(lengths) + sum(weights).
    """
    iv = [(float(l), float(r)) for l, r in intervals]
    w = [float(x) for x in weights]
    if len(iv) != len(w):
        raise InvalidParameter("one weight per interval required")
    order = sorted(range(len(iv)), key=lambda k: iv[k])
    iv = [iv[k] for k in order]
    w = [w[k] for k in order]
    for (l, r) in iv:
        if not (np.isfinite(l) and np.isfinite(r) and r > l):
            raise InvalidParameter(f"degenerate interval ({l}, {r})")
    for (l1, r1), (l2, r2) in zip(iv, iv[1:]):
        if l2 < r1 - 1e-15 * max(abs(r1), 1.0):
            raise InvalidParameter("intervals overlap")
    for x in w:
        if not (np.isfinite(x) and x > 0):
            raise InvalidParameter("weights must be positive")
    if d is None:
        if not iv:
            raise InvalidParameter("need an explicit length with no intervals")
        d = iv[-1][1]
    d = float(d)
    if not (np.isfinite(d) and d > 0):
        raise InvalidParameter("containing length must be positive")
    if iv and (iv[0][0] < -1e-12 * d or iv[-1][1] > d * (1 + 1e-12)):
        raise InvalidParameter("intervals must lie inside [0, d]")

    # breakpoints of the inverse map: exact cumulative masses, with the
    # prescribed weight (not density * length) used on each interval
    xs = [0.0]
    ys = [0.0]
    images = []
    dens = []
    cursor = 0.0
    for (l, r), mu in zip(iv, w):
        l = min(max(l, 0.0), d)
        r = min(max(r, 0.0), d)
        if l > cursor:
            xs.append(l)
            ys.append(ys[-1] + (l - cursor))
        lo_img = ys[-1]
        xs.append(r)
        ys.append(lo_img + mu)
        images.append((lo_img, lo_img + mu))
        dens.append(mu / (r - l))
        cursor = r
    if cursor < d:
        xs.append(d)
        ys.append(ys[-1] + (d - cursor))
    xs_a = np.asarray(xs)
    ys_a = np.asarray(ys)
    keep = np.concatenate([[True], np.diff(xs_a) > 0]) \
        | np.concatenate([[True], np.diff(ys_a) > 0])
    xs_a, ys_a = xs_a[keep], ys_a[keep]
    return WeightedHomeo(d, float(ys_a[-1]), tuple(iv), tuple(w),
                         np.asarray(dens), tuple(images), xs_a, ys_a)


# --- bridge: C2 correction with prescribed plateau slopes -----------------------


def _bridge_knots(d, xi, c_lo, c_hi, s):
    """Knot layout of the bridge's second derivative, slopes c_lo <= c_hi.

    Two triangles of height -xi and +xi; the first removes the left plateau
    slope and overshoots to -9*c_hi, the second restores the right plateau.
    The widths make the net slope change exactly c_hi - c_lo.
    """
    dip = 2.0 * (9.0 * c_hi + c_lo) / xi
    rise = 20.0 * c_hi / xi
    x1 = d / 3.0
    xs = np.array([0.0, x1, x1 + dip / 2.0, x1 + dip, x1 + dip + s,
                   x1 + dip + s + rise / 2.0, x1 + dip + s + rise, d])
    ms = np.array([0.0, 0.0, -xi, 0.0, 0.0, xi, 0.0, 0.0])
    return xs, ms


def _net_displacement(xs, ms, c_lo):
    """Exact integral over [0, d] of c_lo + int(ms), ms piecewise linear."""
    w = np.diff(xs)
    gain = 0.5 * (ms[:-1] + ms[1:]) * w
    nu = c_lo + np.concatenate([[0.0], np.cumsum(gain)[:-1]])
    return float(np.sum(nu * w + ms[:-1] * w * w / 2.0
                        + (ms[1:] - ms[:-1]) * w * w / 6.0))


@dataclass(frozen=True, eq=False)
class BridgeMap:
    """C2 function on [u, v], zero at both ends, with plateau derivatives.

    The derivative equals ``c_l`` on the left third and ``c_r`` on the right
    third, and both |derivative| and |second derivative| stay below ``xi``.
    Realized by integrating a continuous piecewise-linear second derivative
    twice in closed form; when c_l > c_r the construction for the swapped
    pair is reflected.
    """

    interval: tuple
    xi: float
    c_l: float
    c_r: float
    reflected: bool
    zero: bool
    knots: tuple
    plateau_len: float
    _omega: object = dc_field(repr=False, default=None)
    _slope: object = dc_field(repr=False, default=None)
    _curv: object = dc_field(repr=False, default=None)

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def _local(self, x):
        xx, scalar = _as_array(x)
        y = np.clip(xx - self.interval[0], 0.0, self.length)
        if self.reflected:
            y = self.length - y
        return y, scalar

    def omega(self, x):
        y, scalar = self._local(x)
        if self.zero:
            return _ret(np.zeros_like(y), scalar)
        out = self._omega(y)
        return _ret(-out if self.reflected else out, scalar)

    def d1(self, x):
        y, scalar = self._local(x)
        if self.zero:
            return _ret(np.zeros_like(y), scalar)
        return _ret(self._slope(y), scalar)

    def d2(self, x):
        y, scalar = self._local(x)
        if self.zero:
            return _ret(np.zeros_like(y), scalar)
        out = self._curv(y)
        return _ret(-out if self.reflected else out, scalar)


def bridge(I, xi, c_l, c_r) -> BridgeMap:
    """Zero-mean C2 connector with prescribed one-third plateau slopes.

    Needs 0 < length < 1 and max(c_l, c_r) <= 1e-9 * xi * length; the pair
    c_l = c_r = 0 returns the zero map. The free knot (the length of the
    negative plateau) is solved by bisection so the two integrations close
    at zero.
    """
    u, v = float(I[0]), float(I[1])
    d = v - u
    if not (np.isfinite(d) and 0.0 < d < 1.0):
        raise HypothesisViolated(f"interval length {d} outside (0, 1)")
    if not (np.isfinite(xi) and xi > 0):
        raise HypothesisViolated("slope budget must be positive")
    c_l, c_r = float(c_l), float(c_r)
    if c_l < 0 or c_r < 0:
        raise HypothesisViolated("plateau slopes must be nonnegative")
    top = max(c_l, c_r)
    if top == 0.0:
        return BridgeMap((u, v), float(xi), 0.0, 0.0, False, True, (), 0.0)
    if top > 1e-9 * xi * d:
        raise HypothesisViolated(
            f"max plateau slope {top:.3e} exceeds 1e-9 * xi * d = "
            f"{1e-9 * xi * d:.3e}")

    reflected = c_l > c_r
    c_lo, c_hi = (c_r, c_l) if reflected else (c_l, c_r)
    dip = 2.0 * (9.0 * c_hi + c_lo) / xi
    rise = 20.0 * c_hi / xi
    s_max = d / 3.0 - dip - rise

    def g(s):
        return _net_displacement(*_bridge_knots(d, xi, c_lo, c_hi, s), c_lo)

    s0 = bisect_scalar(g, 0.0, s_max, iters=100)
    xs, ms = _bridge_knots(d, xi, c_lo, c_hi, s0)
    keep = np.concatenate([[True], np.diff(xs) > 0])
    curv = piecewise_linear(xs[keep], ms[keep])
    slope = curv.antiderivative()
    slope.c[-1, :] += c_lo  # the left plateau value rides the whole map
    omega = slope.antiderivative()
    return BridgeMap((u, v), float(xi), c_l, c_r, reflected, False,
                     tuple(float(x) for x in xs), float(s0),
                     omega, slope, curv)


# --- ramp: cell homeomorphism with prescribed endpoint slopes -------------------

# the base shape is one template integrated twice: a piecewise-linear second
# derivative with a positive and a negative triangle, giving a sigmoid whose
# first derivative vanishes at both ends and plateaus in the middle third
_T_X = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) / 6.0
_T_M = np.array([0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0])
_CURV_T = piecewise_linear(_T_X, _T_M)
_SLOPE_T = _CURV_T.antiderivative()
_SHAPE_T = _SLOPE_T.antiderivative()
_SHAPE_END = float(_SHAPE_T(1.0))          # exactly 1/9
_RAMP_GAIN = 1.0 / _SHAPE_END              # base map rescale, exactly 9


@dataclass(frozen=True, eq=False)
class RampMap:
    """Increasing C2 bijection of [u, v] onto [0, V] with soft ends.

    The base shape is the doubly integrated template above, rescaled to hit
    V at the right end; its derivative vanishes at both ends and its second
    derivative is bounded by 9 * eta. Nonzero endpoint slopes are grafted on
    with a BridgeMap at slope budget eta * d / 7, which keeps the interior
    derivative positive and the stated bounds 19*sqrt(eta*V) and 19*eta.
    """

    interval: tuple
    target_length: float
    eta: float
    d: float
    c_l: float
    c_r: float
    corrector: BridgeMap | None

    def _local(self, x):
        xx, scalar = _as_array(x)
        y = np.clip((xx - self.interval[0]) / self.d, 0.0, 1.0)
        return y, scalar

    def phi(self, x):
        y, scalar = self._local(x)
        out = _RAMP_GAIN * self.target_length * _SHAPE_T(y)
        if self.corrector is not None:
            out = out + np.atleast_1d(self.corrector.omega(y * self.d))
        return _ret(out, scalar)

    def d1(self, x):
        y, scalar = self._local(x)
        out = _RAMP_GAIN * self.eta * self.d * _SLOPE_T(y)
        if self.corrector is not None:
            out = out + np.atleast_1d(self.corrector.d1(y * self.d))
        return _ret(out, scalar)

    def d2(self, x):
        y, scalar = self._local(x)
        out = _RAMP_GAIN * self.eta * _CURV_T(y)
        if self.corrector is not None:
            out = out + np.atleast_1d(self.corrector.d2(y * self.d))
        return _ret(out, scalar)


def ramp(V, I, eta, c_l, c_r) -> RampMap:
    """Cell homeomorphism [u, v] -> [0, V] with prescribed endpoint slopes.

    Requires d := sqrt(V/eta) < 1, the interval to have length d, and
    max(c_l, c_r) <= 1e-10 * d^2 * eta (zero allowed).
    """
    V, eta = float(V), float(eta)
    if not (np.isfinite(V) and V > 0 and np.isfinite(eta) and eta > 0):
        raise HypothesisViolated("target length and eta must be positive")
    d = math.sqrt(V / eta)
    if not d < 1.0:
        raise HypothesisViolated(f"sqrt(V/eta) = {d} must be below 1")
    u, v = float(I[0]), float(I[1])
    if abs((v - u) - d) > 1e-9 * max(d, 1e-300):
        raise HypothesisViolated(
            f"interval length {v - u} must equal sqrt(V/eta) = {d}")
    c_l, c_r = float(c_l), float(c_r)
    if c_l < 0 or c_r < 0:
        raise HypothesisViolated("endpoint slopes must be nonnegative")
    if max(c_l, c_r) > 1e-10 * d * d * eta:
        raise HypothesisViolated(
            f"max endpoint slope {max(c_l, c_r):.3e} exceeds "
            f"1e-10 * d^2 * eta = {1e-10 * d * d * eta:.3e}")
    corrector = None
    if max(c_l, c_r) > 0.0:
        corrector = bridge((0.0, d), d * eta / 7.0, c_l, c_r)
    out = RampMap((u, v), V, eta, d, c_l, c_r, corrector)
    probe = u + d * np.linspace(1.0 / 256.0, 1.0 - 1.0 / 256.0, 127)
    if np.min(out.d1(probe)) <= 0.0:
        raise CurvesmithError("ramp interior derivative check failed")
    return out


# --- composite homeomorphism ----------------------------------------------------


@dataclass(frozen=True)
class CellStage:
    """One partition cell carried through every stage of the construction."""

    t_lo: float
    t_hi: float
    j_lo: float
    j_hi: float
    lam: float
    eta: float
    d_cell: float
    c_left: float
    c_right: float
    kind: str                 # "ramp" | "residual"
    x_lo: float = 0.0
    x_hi: float = 0.0
    ramp: RampMap | None = None


class CompositeHomeomorphism:
    """The assembled increasing bijection h of [0,1] onto the curve domain.

    Stages: the affine stretch pi(x) = d2*x, the piecewise cell map phi on
    [0, d2], and the variation-profile inverse xi on [0, d1]. Evaluation is
    vectorized; the inverse chains the stages backwards.
    """

    def __init__(self, curve, regular, cells, psi, profile, constant_set,
                 d1, d2, mode, config, extra):
        self.curve = curve
        self.regular = regular
        self.cells = tuple(cells)
        self.psi = psi
        self.profile = profile
        self.constant_set = tuple(constant_set)
        self.d1 = float(d1)
        self.d2 = float(d2)
        self.mode = mode
        self.config = config
        self.metadata = dict(extra)
        a, b = curve.domain
        self._a, self._b = float(a), float(b)
        # piecewise-linear correction sweeping out intervals of constancy
        if self.constant_set:
            xs, acc = [self._a], [0.0]
            for (l, r) in self.constant_set:
                xs.extend([l, r])
                acc.extend([acc[-1], acc[-1] + (r - l)])
            xs.append(self._b)
            acc.append(acc[-1])
            self._u_xs = np.asarray(xs)
            self._u_ys = np.asarray(acc)
        else:
            self._u_xs = self._u_ys = None
        self._plain = bool(curve.metadata.get("unit_speed")) \
            and not self.constant_set
        rc = [c for c in self.cells if c.kind == "ramp"]
        self._ramp_cells = rc
        self._rx_lo = np.asarray([c.x_lo for c in rc])
        self._rx_hi = np.asarray([c.x_hi for c in rc])
        self._rj_lo = np.asarray([c.j_lo for c in rc])
        self._rj_hi = np.asarray([c.j_hi for c in rc])

    # -- stage maps --

    def vstar(self, t):
        tt, scalar = _as_array(t)
        out = np.atleast_1d(np.asarray(self.profile.value(tt), dtype=float))
        if self._u_xs is not None:
            out = out + np.interp(tt, self._u_xs, self._u_ys)
        return _ret(out, scalar)

    def xi(self, w):
        """Inverse of vstar: [0, d1] -> the curve domain."""
        ww, scalar = _as_array(w)
        ww = np.clip(ww, 0.0, self.d1)
        if self._plain:
            return _ret(self._a + ww, scalar)
        out = invert_monotone(
            lambda ts: np.atleast_1d(np.asarray(self.vstar(ts), dtype=float)),
            self._a, self._b, ww)
        return _ret(np.atleast_1d(out), scalar)

    def phi(self, u):
        uu, scalar = _as_array(u)
        uu = np.clip(uu, 0.0, self.d2)
        out = np.atleast_1d(np.asarray(self.psi.psi(uu), dtype=float)).copy()
        if self._rx_lo.size:
            idx = np.clip(np.searchsorted(self._rx_lo, uu, side="right") - 1,
                          0, len(self._rx_lo) - 1)
            inside = (uu >= self._rx_lo[idx]) & (uu <= self._rx_hi[idx])
            for k in np.unique(idx[inside]):
                m = inside & (idx == k)
                cell = self._ramp_cells[k]
                out[m] = cell.j_lo + np.atleast_1d(cell.ramp.phi(uu[m]))
        return _ret(out, scalar)

    def phi_inverse(self, w):
        ww, scalar = _as_array(w)
        ww = np.clip(ww, 0.0, self.d1)
        out = np.atleast_1d(np.asarray(self.psi.omega(ww), dtype=float)).copy()
        if self._rj_lo.size:
            idx = np.clip(np.searchsorted(self._rj_lo, ww, side="right") - 1,
                          0, len(self._rj_lo) - 1)
            inside = (ww >= self._rj_lo[idx]) & (ww <= self._rj_hi[idx])
            for k in np.unique(idx[inside]):
                m = inside & (idx == k)
                cell = self._ramp_cells[k]
                out[m] = invert_monotone(
                    lambda us, c=cell: np.atleast_1d(c.ramp.phi(us)) + c.j_lo,
                    cell.x_lo, cell.x_hi, ww[m])
        return _ret(out, scalar)

    # -- the homeomorphism --

    def __call__(self, x):
        xx, scalar = _as_array(x)
        ts = np.atleast_1d(
            np.asarray(self.xi(self.phi(np.clip(xx, 0.0, 1.0) * self.d2)),
                       dtype=float)).copy()
        ts[xx <= 0.0] = self._a
        ts[xx >= 1.0] = self._b
        return _ret(ts, scalar)

    def inverse(self, t):
        tt, scalar = _as_array(t)
        xs = np.atleast_1d(np.asarray(
            self.phi_inverse(self.vstar(np.clip(tt, self._a, self._b))),
            dtype=float)) / self.d2
        xs = np.clip(xs, 0.0, 1.0)
        xs[tt <= self._a] = 0.0
        xs[tt >= self._b] = 1.0
        return _ret(xs, scalar)

    def manifest(self) -> dict:
        ramp_mass = sum(c.d_cell for c in self.cells if c.kind == "ramp")
        return {
            "schema": "curvesmith/1",
            "kind": "homeomorphism_stages",
            "mode": self.mode,
            "domain": [self._a, self._b],
            "d1": self.d1,
            "d2": self.d2,
            "n_cells": len(self.cells),
            "n_ramp": sum(1 for c in self.cells if c.kind == "ramp"),
            "n_residual": sum(1 for c in self.cells if c.kind == "residual"),
            "gap_measure_new": (self.d2 - sum(c.d_cell for c in self.cells))
                               / self.d2,
            "ramp_cover_new": ramp_mass / self.d2,
            "constant_set": [[l, r] for (l, r) in self.constant_set],
            "regular": [[l, r] for (l, r) in self.regular],
            "config_digest": self.config.digest(),
            "cells": [{
                "t": [c.t_lo, c.t_hi],
                "j": [c.j_lo, c.j_hi],
                "lam": c.lam,
                "eta": c.eta,
                "d_cell": c.d_cell,
                "c_left": c.c_left,
                "c_right": c.c_right,
                "kind": c.kind,
            } for c in self.cells],
            **{k: v for k, v in self.metadata.items()},
        }


def _constancy_components(curve, regular, profile, config):
    """Open gaps of the regular set on which the curve never moves."""
    a, b = curve.domain
    total = max(profile.total, 1e-300)
    out = []
    for (lo, hi) in regular.complement_within(a, b):
        if hi - lo <= 0:
            continue
        v = float(np.atleast_1d(profile.variation_between(lo, hi))[0])
        if v <= 1e-14 * total:
            out.append((lo, hi))
    return tuple(out)


def assemble(curve: CurveSource, regular: IntervalSet, partitions, kk: float,
             mode: str = "c2", config: Config = DEFAULT,
             null_result=None, field: CurvatureField | None = None
             ) -> CompositeHomeomorphism:
    """Build the composite homeomorphism from certified partition data.

    ``partitions`` must supply one GeneralizedPartition per component of the
    regular set, in order. Every cell must satisfy sup * variation <= kk
    (re-verified here). Truncated partitions are allowed: the unpartitioned
    mass next to a component end is transported by the density map instead
    of a ramp, keeping h a bijection.
    """
    if not (np.isfinite(kk) and kk > 0):
        raise InvalidParameter("kk must be a positive real")
    if len(partitions) != len(regular):
        raise InvalidParameter("need exactly one partition per component")
    null = null_result if null_result is not None \
        else image_null_test(curve, regular, config)
    if null.verdict != "null":
        raise PreconditionFailure(
            f"image of the complement is not certified null "
            f"(verdict {null.verdict}, defect {null.defect:.3e})")
    if field is None:
        field = CurvatureField(curve, config=config)
    profile = field.profile
    a, b = curve.domain
    snap = 1e-9 * (b - a)
    for (lo, hi), part in zip(regular, partitions):
        plo, phi_ = part.component
        if abs(plo - lo) > snap or abs(phi_ - hi) > snap:
            raise InvalidParameter(
                f"partition component ({plo}, {phi_}) does not match the "
                f"regular component ({lo}, {hi})")
        verify_partition(part, "round", 0.0, kk, field, config)

    constant_set = _constancy_components(curve, regular, profile, config)
    h_probe = CompositeHomeomorphism.__new__(CompositeHomeomorphism)
    # vstar needs only profile + constant set; reuse the real method via a
    # tiny stand-in before the full object exists
    corr_xs = corr_ys = None
    if constant_set:
        xs, acc = [a], [0.0]
        for (l, r) in constant_set:
            xs.extend([l, r])
            acc.extend([acc[-1], acc[-1] + (r - l)])
        xs.append(b)
        acc.append(acc[-1])
        corr_xs, corr_ys = np.asarray(xs), np.asarray(acc)

    def vstar(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.atleast_1d(np.asarray(profile.value(ts), dtype=float))
        if corr_xs is not None:
            out = out + np.interp(ts, corr_xs, corr_ys)
        return out

    d1 = float(vstar(np.array([b]))[0])

    # walk the components, recording each cell's image under vstar plus the
    # residual stubs of truncated sweeps
    recs = []  # (t_lo, t_hi, j_lo, j_hi, kind, comp_index)
    for ci, ((lo, hi), part) in enumerate(zip(regular, partitions)):
        pts = [lo] + [c.left for c in part.cells] \
            + [part.cells[-1].right, hi]
        js = vstar(np.asarray(pts, dtype=float))
        js = np.maximum.accumulate(js)
        if js[1] - js[0] > 1e-300:
            recs.append((pts[0], pts[1], js[0], js[1], "residual", ci))
        for k in range(len(part.cells)):
            j_lo, j_hi = js[k + 1], js[k + 2]
            if j_hi - j_lo > 1e-300:
                recs.append((pts[k + 1], pts[k + 2], j_lo, j_hi, "ramp", ci))
        if js[-1] - js[-2] > 1e-300:
            recs.append((pts[-2], pts[-1], js[-2], js[-1], "residual", ci))

    if not recs:
        raise CertificateFailure("no cells with positive variation mass")

    lam = np.asarray([r[3] - r[2] for r in recs])
    # second-derivative budgets: rank by decreasing cell mass, give each
    # cell the tail sum of sqrt masses at or after its rank (floored by
    # twice its own mass, which keeps the stretched length below 1)
    order = np.argsort(-lam, kind="stable")
    roots = np.sqrt(lam[order])
    tails = np.cumsum(roots[::-1])[::-1]
    eta = np.empty(len(recs))
    eta[order] = np.maximum(tails, 2.0 * lam[order])
    d_cell = np.sqrt(lam / eta)

    # endpoint slopes: positive only where two cells of one component share
    # an endpoint (interior junction of the regular set); the shared value
    # respects both incident cells' budgets
    c_left = np.zeros(len(recs))
    c_right = np.zeros(len(recs))
    for i in range(len(recs) - 1):
        if recs[i][5] != recs[i + 1][5]:
            continue
        if abs(recs[i][1] - recs[i + 1][0]) > snap:
            continue
        # an order below each incident cell's own slope cap 1e-10 * d^2 * eta
        c = 1e-11 * min(d_cell[i] ** 2 * eta[i],
                        d_cell[i + 1] ** 2 * eta[i + 1])
        c_right[i] = c
        c_left[i + 1] = c

    psi = density_homeomorphism([(r[2], r[3]) for r in recs], d_cell, d=d1)
    cells = []
    for i, (t_lo, t_hi, j_lo, j_hi, kind, _ci) in enumerate(recs):
        x_lo, x_hi = psi.interval_images[i]
        rmp = None
        if kind == "ramp":
            rmp = ramp(lam[i], (x_lo, x_hi), eta[i], c_left[i], c_right[i])
        cells.append(CellStage(t_lo, t_hi, j_lo, j_hi, float(lam[i]),
                               float(eta[i]), float(d_cell[i]),
                               float(c_left[i]), float(c_right[i]),
                               kind, x_lo, x_hi, rmp))

    extra = {
        "kk": float(kk),
        "null_defect": float(null.defect),
        "total_variation": float(null.total),
        "truncated_components": int(sum(
            1 for p in partitions if not p.exhausted)),
        "residual_mass": float(sum(c.lam for c in cells
                                   if c.kind == "residual")),
    }
    return CompositeHomeomorphism(curve, regular, cells, psi, profile,
                                  constant_set, d1, psi.d_prime, mode,
                                  config, extra)


# --- partition planning ---------------------------------------------------------


def build_partitions(curve: CurveSource, regular: IntervalSet,
                     kk: float | None = None, config: Config = DEFAULT,
                     budget: int | None = None,
                     field: CurvatureField | None = None):
    """One bounded-product partition per component of the regular set.

    Components whose whole-span product already meets the target become a
    single cell; the rest are swept greedily at that target, possibly
    leaving residual mass near a blow-up end. Returns (partitions, kk,
    field) with kk resolved when not supplied.
    """
    if field is None:
        field = CurvatureField(curve, config=config)
    if budget is None:
        budget = config.cell_budget
    prof = field.profile
    spans = []
    for (lo, hi) in regular:
        V = float(np.atleast_1d(prof.variation_between(lo, hi))[0])
        ws = field.workspace(lo, hi) if len(regular) == 1 else None
        sup = field.sup_refined(lo, hi, ws=ws)
        spans.append((lo, hi, V, sup))
    if kk is None:
        cands = []
        for lo, hi, V, sup in spans:
            if np.isfinite(sup) and sup * V > 0:
                cands.append(sup * V)
            else:
                cands.append(64.0 * suggest_delta(field, (lo, hi), config))
        kk = max([c for c in cands if np.isfinite(c) and c > 0] or [1.0])
    kk = float(kk)
    if not (np.isfinite(kk) and kk > 0):
        raise InvalidParameter("kk must be a positive real")

    parts = []
    for lo, hi, V, sup in spans:
        if np.isfinite(sup) and sup * V <= kk:
            cell = Cell(lo, hi, V, sup, 0, True, False)
            parts.append(GeneralizedPartition((lo, hi), (cell,), 0.0))
            continue
        part, cert = greedy_partition(curve, (lo, hi), kk, field=field,
                                      config=config, max_cells=budget)
        kk = max(kk, cert.kk)
        parts.append(part)
    return parts, kk, field


# --- verification ---------------------------------------------------------------


def _generic_inverse(h, n=16384):
    xs = np.linspace(0.0, 1.0, n + 1)
    ts = np.atleast_1d(np.asarray(h(xs), dtype=float))
    ts = np.maximum.accumulate(ts)
    return lambda t: np.interp(np.atleast_1d(np.asarray(t, float)), ts, xs)


def _singular_points(curve, h, mode):
    if isinstance(h, CompositeHomeomorphism):
        return h.regular.boundary_points()
    reg = curve.metadata.get("regular_open", {})
    key = "d2inf" if str(mode).lower() in ("d2inf", "dmd", "d2") else "c2"
    r = reg.get(key)
    return r.boundary_points() if r is not None else ()


def verify_smoothness(curve: CurveSource, h, grid: int | None = None,
                      mode: str = "c2", config: Config = DEFAULT,
                      windows=(256, 64, 16), osc_slack: float = 1.05) -> dict:
    """Finite-difference check that f o h has a stable second derivative.

    Central second differences on three nested grids must have stable sup
    norms (ratio within the configured band). In c2 mode the oscillation of
    the second differences over shrinking windows around sampled singular
    points must not grow as the windows shrink.
    """
    base = int(grid if grid is not None else config.smooth_grids[0])
    if base < 1000:
        raise InvalidParameter("grid must be at least 1e3")
    a, b = curve.domain
    grids = (base, 2 * base, 4 * base)
    sups = []
    finest = None
    v_est = 0.0
    for n in grids:
        xs = np.linspace(0.0, 1.0, n + 1)
        ts = np.clip(np.atleast_1d(np.asarray(h(xs), dtype=float)), a, b)
        ys = curve.eval(ts)
        d2 = (ys[2:] - 2.0 * ys[1:-1] + ys[:-2]) * float(n) ** 2
        norms = np.linalg.norm(d2, axis=1)
        sups.append(float(np.max(norms)))
        v_est = max(v_est, float(np.sum(
            np.linalg.norm(np.diff(ys, axis=0), axis=1))))
        finest = (xs, norms)
    floor = 1e-6 * max(1.0, v_est)
    ratios = [sups[i + 1] / max(sups[i], 1e-300) for i in range(2)]
    lo_band, hi_band = config.smooth_band_lo, config.smooth_band_hi
    stable = all(lo_band <= r <= hi_band for r in ratios)
    ok = sups[-1] <= floor or stable

    profile = []
    if str(mode).lower() == "c2" and ok:
        pts = _singular_points(curve, h, mode)
        if len(pts) > 24:
            pick = np.unique(np.linspace(0, len(pts) - 1, 24).astype(int))
            pts = tuple(pts[i] for i in pick)
        if pts:
            inv = h.inverse if isinstance(h, CompositeHomeomorphism) \
                else _generic_inverse(h)
            zs = np.atleast_1d(np.asarray(
                inv(np.asarray(pts, dtype=float)), dtype=float))
            xs_f, norms_f = finest
            n_f = grids[-1]
            for z_t, z_x in zip(pts, zs):
                oscs = []
                for w in windows:
                    lo_i = np.searchsorted(xs_f[1:-1], z_x - w / n_f)
                    hi_i = np.searchsorted(xs_f[1:-1], z_x + w / n_f)
                    seg = norms_f[max(lo_i, 0):hi_i]
                    if len(seg) < 2:
                        oscs.append(0.0)
                        continue
                    oscs.append(float(np.max(seg) - np.min(seg)))
                shrinks = all(oscs[k + 1] <= oscs[k] * osc_slack
                              for k in range(len(oscs) - 1))
                point_ok = shrinks or oscs[-1] <= floor
                profile.append({"t": float(z_t), "x": float(z_x),
                                "osc": [float(o) for o in oscs],
                                "ok": bool(point_ok)})
                ok = ok and point_ok

    return {
        "mode": mode,
        "grids": [int(n) for n in grids],
        "sup_second_diff": [float(s) for s in sups],
        "ratios": [float(r) for r in ratios],
        "band": [float(lo_band), float(hi_band)],
        "floor": float(floor),
        "continuity_modulus_profile": profile,
        "pass": bool(ok),
    }


def zero_derivative_at_boundary(curve: CurveSource, h, points=None,
                                n_points: int = 20, tol: float = 1e-3,
                                eps0: float = 1e-2, levels: int = 6,
                                config: Config = DEFAULT) -> dict:
    """Check that the derivative of f o h dies at the singular set.

    At sampled preimages of singular points the one-sided difference
    quotients of f o h must fall below ``tol`` at the finest probed scale.
    For points next to a truncation residual the probe floor and the
    tolerance are raised to the recorded truncation slope: below it the
    quotient measures the cut-off tail, not the construction. Ramp-cell
    midpoints must show a strictly positive derivative.
    """
    a, b = curve.domain
    if points is None:
        points = _singular_points(curve, h, getattr(h, "mode", "c2"))
    points = tuple(float(p) for p in points)
    if len(points) > n_points:
        pick = np.unique(np.linspace(0, len(points) - 1, n_points).astype(int))
        points = tuple(points[i] for i in pick)
    inv = h.inverse if isinstance(h, CompositeHomeomorphism) \
        else _generic_inverse(h)

    residuals = []
    if isinstance(h, CompositeHomeomorphism):
        residuals = [(c.x_lo / h.d2, c.x_hi / h.d2, c.d_cell / h.d2,
                      math.sqrt(c.lam * c.eta))
                     for c in h.cells if c.kind == "residual"]
    trunc_slope = max([s for (_, _, _, s) in residuals], default=0.0)
    ladder = np.array([eps0 * 4.0 ** (-k) for k in range(levels)])

    out_pts = []
    all_ok = True
    for z_t in points:
        z_x = float(np.atleast_1d(inv(z_t))[0])
        near = [(w, s) for (lo, hi, w, s) in residuals
                if max(lo - z_x, z_x - hi, 0.0) < eps0]
        eff_tol = max(tol, *(2.0 * s for (_, s) in near)) if near else tol
        floor = max([ladder[-1]] + [4.0 * w for (w, _) in near])
        eps = ladder[ladder >= floor * (1 - 1e-12)]
        if eps.size == 0:
            eps = np.array([floor])
        f0 = curve.eval(np.array([float(np.atleast_1d(h(z_x))[0])]))[0]
        sides = {}
        worst = 0.0
        for label, sgn in (("right", 1.0), ("left", -1.0)):
            ee = eps[(z_x + sgn * eps >= 0.0) & (z_x + sgn * eps <= 1.0)]
            if ee.size == 0:
                continue
            ts = np.clip(np.atleast_1d(
                np.asarray(h(z_x + sgn * ee), dtype=float)), a, b)
            ys = curve.eval(ts)
            q = np.linalg.norm(ys - f0[None, :], axis=1) / ee
            sides[label] = [float(x) for x in q]
            worst = max(worst, float(q[-1]))
        point_ok = worst <= eff_tol
        all_ok = all_ok and point_ok
        out_pts.append({"t": z_t, "x": z_x, "quotients": sides,
                        "finest": worst, "tol": float(eff_tol),
                        "scales": [float(e) for e in eps],
                        "ok": bool(point_ok)})

    interior = []
    if isinstance(h, CompositeHomeomorphism):
        rc = sorted((c for c in h.cells if c.kind == "ramp"),
                    key=lambda c: -c.lam)[:n_points]
        for c in rc:
            x_mid = 0.5 * (c.x_lo + c.x_hi) / h.d2
            e = 0.05 * (c.x_hi - c.x_lo) / h.d2
            ts = np.clip(np.atleast_1d(np.asarray(
                h(np.array([x_mid - e, x_mid + e])), dtype=float)), a, b)
            ys = curve.eval(ts)
            deriv = float(np.linalg.norm(ys[1] - ys[0]) / (2.0 * e))
            ok = deriv > 0.0
            all_ok = all_ok and ok
            interior.append({"x": float(x_mid), "derivative": deriv,
                             "ok": bool(ok)})

    return {
        "tol": float(tol),
        "truncation_slope": float(trunc_slope),
        "probe_ladder": [float(e) for e in ladder],
        "points": out_pts,
        "ramp_interior": interior,
        "pass": bool(all_ok),
    }


# --- orchestration and exports --------------------------------------------------


@dataclass(frozen=True)
class ReparamResult:
    h: CompositeHomeomorphism
    verify: dict
    boundary: dict
    manifest: dict
    kk: float
    partitions: tuple


def reparametrize_curve(curve: CurveSource, mode: str = "c2",
                        kk: float | None = None, config: Config = DEFAULT,
                        regular: IntervalSet | None = None,
                        budget: int | None = None) -> ReparamResult:
    """Partition, assemble, and verify in one call.

    The regular set defaults to the curve's own classification (falling
    back to the singular-set detector), matching what the analysis verdict
    used. No verdict gating happens here; callers decide whether a
    non-reparametrizable curve is worth forcing through.
    """
    if regular is None:
        from .decision import detect_singular_set
        est = detect_singular_set(curve, mode, config.singular_grid, config)
        regular = est.regular
    parts, kk_eff, field = build_partitions(curve, regular, kk=kk,
                                            config=config, budget=budget)
    h = assemble(curve, regular, parts, kk_eff, mode=mode, config=config,
                 field=field)
    verify = verify_smoothness(curve, h, mode=mode, config=config)
    boundary = zero_derivative_at_boundary(curve, h, config=config)
    return ReparamResult(h, verify, boundary, h.manifest(), float(kk_eff),
                         tuple(parts))


def h_table_csv(h, n: int = 2048) -> str:
    """CSV sample of the homeomorphism with a numeric derivative column."""
    xs = np.linspace(0.0, 1.0, int(n) + 1)
    ts = np.atleast_1d(np.asarray(h(xs), dtype=float))
    dh = np.gradient(ts, xs)
    lines = ["x,h,dh"]
    lines += [f"{x:.12g},{t:.12g},{d:.12g}" for x, t, d in zip(xs, ts, dh)]
    return "\n".join(lines) + "\n"


def stage_manifest(h: CompositeHomeomorphism) -> dict:
    return h.manifest()
