"""Curve sources and the generator corpus.

A ``CurveSource`` bundles a vectorized evaluator over a closed parameter
interval with optional analytic first/second derivatives and a metadata dict.
Metadata keys understood elsewhere in the package:

``unit_speed``      bool, ||f'|| = 1 a.e. (exact fast paths downstream)
``speed``           vectorized t -> ||f'(t)|| when known in closed form
``kappa``           vectorized t -> norm of the arc-length second derivative
                    at v_f(t), when known in closed form
``knots``           tuple of t-values where smoothness degrades (quadrature
                    breakpoints)
``regular_open``    dict mode -> IntervalSet: analytic open set of regular
                    points, carried by corpus curves (overrides detection)
``classification``  dict with expected analysis outcomes, advisory only
``kind``/``params`` descriptor echo for reports

Downstream code treats analytic metadata as an accelerator: every quantity it
feeds is cross-checked against the generic finite-difference / polygonal
routes in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (IntegrationFailure, InvalidDescriptor, InvalidParameter,
                     OutOfDomain)
from .numerics import CachedAntiderivative, bisect_scalar

_EDGE_SLACK = 1e-9


def _norm_times(domain, t):
    a, b = domain
    scalar = np.isscalar(t) or np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    slack = _EDGE_SLACK * (b - a)
    if ts.size and (ts.min() < a - slack or ts.max() > b + slack):
        raise OutOfDomain(
            f"parameter outside [{a}, {b}]: range [{ts.min()}, {ts.max()}]")
    return np.clip(ts, a, b), scalar


@dataclass(frozen=True, eq=False)
class CurveSource:
    """Immutable curve over a closed interval.

    ``evaluator`` (and the optional derivative callables) map a 1-d float
    array of shape (m,) to an (m, dim) array. Scalars in give (dim,) out.
    """

    domain: tuple
    dim: int
    evaluator: object
    d1_fn: object = None
    d2_fn: object = None
    fd_step: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise InvalidParameter(f"bad domain {self.domain}")
        if self.dim < 1:
            raise InvalidParameter("dim must be >= 1")
        if self.fd_step <= 0.0:
            object.__setattr__(self, "fd_step", 1e-5 * (b - a))

    def _call(self, fn, t):
        ts, scalar = _norm_times(self.domain, t)
        out = np.asarray(fn(ts), dtype=float)
        if out.ndim == 1:
            out = out.reshape(-1, 1)
        return out[0] if scalar else out

    def eval(self, t):
        return self._call(self.evaluator, t)

    @property
    def has_d1(self):
        return self.d1_fn is not None

    @property
    def has_d2(self):
        return self.d2_fn is not None

    def d1(self, t):
        if self.d1_fn is None:
            return derivative(self, t, order=1)
        return self._call(self.d1_fn, t)

    def d2(self, t):
        if self.d2_fn is None:
            return derivative(self, t, order=2)
        return self._call(self.d2_fn, t)

    def speed(self, t):
        """||f'(t)||, using metadata closed form, then d1, then FD."""
        fn = self.metadata.get("speed")
        if fn is not None:
            ts, scalar = _norm_times(self.domain, t)
            out = np.asarray(fn(ts), dtype=float)
            return float(out[0]) if scalar else out
        d = self.d1(t)
        return float(np.linalg.norm(d)) if d.ndim == 1 else np.linalg.norm(d, axis=1)

    @property
    def knots(self):
        return tuple(self.metadata.get("knots", ()))


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """Real-valued function on an interval, with optional derivative."""

    domain: tuple
    evaluator: object
    d1_fn: object = None
    metadata: dict = field(default_factory=dict)

    def eval(self, t):
        ts, scalar = _norm_times(self.domain, t)
        out = np.asarray(self.evaluator(ts), dtype=float)
        return float(out[0]) if scalar else out

    def d1(self, t):
        if self.d1_fn is None:
            raise InvalidParameter("scalar function has no derivative callable")
        ts, scalar = _norm_times(self.domain, t)
        out = np.asarray(self.d1_fn(ts), dtype=float)
        return float(out[0]) if scalar else out

    @property
    def knots(self):
        return tuple(self.metadata.get("knots", ()))


@dataclass(frozen=True)
class IntervalSet:
    """Finite ordered system of disjoint open intervals.

    ``truncation_tail`` records the mass (length) of any un-enumerated deeper
    structure the generator cut off; reports carry it alongside verdicts.
    """

    intervals: tuple
    truncation_tail: float = 0.0

    def __post_init__(self):
        iv = tuple((float(l), float(r)) for l, r in self.intervals)
        for l, r in iv:
            if not r > l:
                raise InvalidParameter(f"degenerate interval ({l}, {r})")
        for (l1, r1), (l2, r2) in zip(iv, iv[1:]):
            if l2 < r1:
                raise InvalidParameter("intervals must be disjoint and sorted")
        object.__setattr__(self, "intervals", iv)

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def measure(self) -> float:
        return float(sum(r - l for l, r in self.intervals))

    def boundary_points(self):
        pts = set()
        for l, r in self.intervals:
            pts.add(l)
            pts.add(r)
        return tuple(sorted(pts))

    def complement_within(self, lo: float, hi: float):
        """Closed gaps of [lo, hi] not covered by the open intervals."""
        gaps = []
        cursor = lo
        for l, r in self.intervals:
            if l > cursor:
                gaps.append((cursor, l))
            cursor = max(cursor, r)
        if cursor < hi:
            gaps.append((cursor, hi))
        return tuple(gaps)


def derivative(curve: CurveSource, t, order: int = 1):
    """First or second derivative, analytic when available, else central
    finite differences with the curve's fd_step (one-sided at the edges)."""
    if order == 1 and curve.d1_fn is not None:
        return curve._call(curve.d1_fn, t)
    if order == 2 and curve.d2_fn is not None:
        return curve._call(curve.d2_fn, t)
    if order not in (1, 2):
        raise InvalidParameter(f"order must be 1 or 2, got {order}")

    a, b = curve.domain
    h = curve.fd_step
    ts, scalar = _norm_times(curve.domain, t)

    if order == 2 and curve.d1_fn is not None:
        # central difference of the analytic first derivative
        lo = np.clip(ts - h, a, b)
        hi = np.clip(ts + h, a, b)
        num = curve._call(curve.d1_fn, hi) - curve._call(curve.d1_fn, lo)
        out = num / (hi - lo)[:, None]
        return out[0] if scalar else out

    f = lambda x: curve._call(curve.evaluator, x)
    left = ts < a + h
    right = ts > b - h
    mid = ~(left | right)
    out = np.empty((len(ts), curve.dim))
    if order == 1:
        if mid.any():
            tm = ts[mid]
            out[mid] = (f(tm + h) - f(tm - h)) / (2 * h)
        if left.any():
            tl = ts[left]
            out[left] = (-3 * f(tl) + 4 * f(tl + h) - f(tl + 2 * h)) / (2 * h)
        if right.any():
            tr = ts[right]
            out[right] = (3 * f(tr) - 4 * f(tr - h) + f(tr - 2 * h)) / (2 * h)
    else:
        if mid.any():
            tm = ts[mid]
            out[mid] = (f(tm + h) - 2 * f(tm) + f(tm - h)) / h ** 2
        if left.any():
            tl = ts[left]
            out[left] = (2 * f(tl) - 5 * f(tl + h) + 4 * f(tl + 2 * h)
                         - f(tl + 3 * h)) / h ** 2
        if right.any():
            tr = ts[right]
            out[right] = (2 * f(tr) - 5 * f(tr - h) + 4 * f(tr - 2 * h)
                          - f(tr - 3 * h)) / h ** 2
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# generators


def spiral_curve(s: float) -> CurveSource:
    """Planar spiral t -> t^s * (cos(1/t), sin(1/t)) on [0, 1], f(0) = 0.

    Rectifiable iff s > 1; admits a twice-differentiable arc-length
    reparametrization iff s > 2. Carries closed-form speed and curvature.
    """
    if s <= 0:
        raise InvalidParameter("spiral exponent must be positive")

    def _z(parts, ts, fill):
        out = np.empty((len(ts), 2))
        pos = ts > 0.0
        tp = ts[pos]
        z = parts(tp)
        out[pos, 0] = np.real(z)
        out[pos, 1] = np.imag(z)
        out[~pos] = fill
        return out

    def ev(ts):
        return _z(lambda tp: tp ** s * np.exp(1j / tp), ts, 0.0)

    def d1(ts):
        fill = 0.0 if s > 2 else np.inf
        return _z(lambda tp: np.exp(1j / tp) * tp ** (s - 2) * (s * tp - 1j),
                  ts, fill)

    def d2(ts):
        fill = 0.0 if s > 4 else np.inf
        return _z(lambda tp: np.exp(1j / tp) * tp ** (s - 4)
                  * (s * (s - 1) * tp ** 2 - 1 - 1j * (2 * s - 2) * tp),
                  ts, fill)

    def speed(ts):
        out = np.full(len(ts), 0.0 if s > 2 else np.inf)
        pos = ts > 0.0
        tp = ts[pos]
        out[pos] = tp ** (s - 2) * np.sqrt(1.0 + (s * tp) ** 2)
        return out

    def kappa(ts):
        # |det(f', f'')| / ||f'||^3 in closed form; blows up at 0 like t^-s
        out = np.full(len(ts), np.inf)
        pos = ts > 0.0
        tp = ts[pos]
        out[pos] = np.abs(1.0 + s * (s - 1) * tp ** 2) / (
            tp ** s * (1.0 + (s * tp) ** 2) ** 1.5)
        return out

    md = {
        "kind": "spiral",
        "params": {"s": float(s)},
        "speed": speed,
        "kappa": kappa,
        "regular_open": {
            "c2": IntervalSet(((0.0, 1.0),)),
            "d2inf": IntervalSet(((0.0, 1.0),)),
        },
        "classification": {"bv": s > 1, "c2": s > 2, "d2inf": s > 2},
    }
    return CurveSource((0.0, 1.0), 2, ev, d1_fn=d1, d2_fn=d2, metadata=md)


def line_curve(p0=(0.0, 0.0), p1=(1.0, 0.0)) -> CurveSource:
    """Affine segment on [0, 1]."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if p0.shape != p1.shape or p0.ndim != 1:
        raise InvalidParameter("endpoints must be same-shape vectors")
    vel = p1 - p0
    spd = float(np.linalg.norm(vel))

    def ev(ts):
        return p0[None, :] + ts[:, None] * vel[None, :]

    md = {
        "kind": "line",
        "params": {"p0": tuple(p0), "p1": tuple(p1)},
        "speed": lambda ts: np.full(len(ts), spd),
        "kappa": lambda ts: np.zeros(len(ts)),
        "regular_open": {
            "c2": IntervalSet(((0.0, 1.0),)),
            "d2inf": IntervalSet(((0.0, 1.0),)),
        },
        "classification": {"bv": True, "c2": True, "d2inf": True},
    }
    return CurveSource((0.0, 1.0), len(p0), ev,
                       d1_fn=lambda ts: np.tile(vel, (len(ts), 1)),
                       d2_fn=lambda ts: np.zeros((len(ts), len(p0))),
                       metadata=md)


def circle_arc(curvature: float, length: float) -> CurveSource:
    """Constant-speed arc of a circle: speed = length, ||F''|| = curvature."""
    if curvature <= 0 or length <= 0:
        raise InvalidParameter("curvature and length must be positive")
    c, L = float(curvature), float(length)
    w = c * L  # phase rate

    def ev(ts):
        return np.stack([np.sin(w * ts) / c, (1.0 - np.cos(w * ts)) / c], axis=1)

    md = {
        "kind": "circle_arc",
        "params": {"curvature": c, "length": L},
        "speed": lambda ts: np.full(len(ts), L),
        "kappa": lambda ts: np.full(len(ts), c),
        "regular_open": {
            "c2": IntervalSet(((0.0, 1.0),)),
            "d2inf": IntervalSet(((0.0, 1.0),)),
        },
        "classification": {"bv": True, "c2": True, "d2inf": True},
    }
    return CurveSource((0.0, 1.0), 2, ev,
                       d1_fn=lambda ts: L * np.stack(
                           [np.cos(w * ts), np.sin(w * ts)], axis=1),
                       d2_fn=lambda ts: c * L * L * np.stack(
                           [-np.sin(w * ts), np.cos(w * ts)], axis=1),
                       metadata=md)


def prescribed_curvature_curve(kappa_fn, knots=(), domain=(0.0, 1.0),
                               metadata=None, atol=1e-10) -> CurveSource:
    """Unit-speed planar curve with curvature profile kappa_fn > 0.

    Integrates theta' = kappa, (x, y)' = (cos theta, sin theta) with an
    adaptive embedded RK pair (abs tol 1e-10), segment by segment between the
    supplied knots so narrow curvature features are never stepped over.
    The returned curve has exact analytic d1 = (cos theta, sin theta).
    """
    a, b = float(domain[0]), float(domain[1])
    edges = np.unique(np.concatenate([[a, b],
                                      [k for k in knots if a < k < b]]))
    kv = lambda ts: np.asarray(kappa_fn(np.atleast_1d(np.asarray(ts, float))),
                               dtype=float)

    def rhs(t, y):
        k = float(kv(t)[0])
        return [k, math.cos(y[0]), math.sin(y[0])]

    # solved lazily: curvature-side analyses (variation profile, partition
    # sweeps) read only the kappa metadata and never pay for the ODE
    sols_box = []

    def _sols():
        if not sols_box:
            sols = []
            state = [0.0, 0.0, 0.0]
            for lo, hi in zip(edges[:-1], edges[1:]):
                max_step = max((hi - lo) / 16.0, 1e-9)
                res = solve_ivp(rhs, (lo, hi), state, method="RK45", atol=atol,
                                rtol=1e-10, dense_output=True,
                                max_step=max_step)
                if not res.success:
                    raise IntegrationFailure(
                        f"curvature ODE failed on [{lo}, {hi}]: {res.message}")
                sols.append(res.sol)
                state = [float(v) for v in res.y[:, -1]]
            sols_box.append(sols)
        return sols_box[0]

    def _states(ts):
        sols = _sols()
        out = np.empty((len(ts), 3))
        idx = np.clip(np.searchsorted(edges, ts, side="right") - 1,
                      0, len(sols) - 1)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = sols[i](ts[sel]).T
        return out

    def ev(ts):
        return _states(ts)[:, 1:]

    def d1(ts):
        th = _states(ts)[:, 0]
        return np.stack([np.cos(th), np.sin(th)], axis=1)

    def d2(ts):
        th = _states(ts)[:, 0]
        k = kv(ts)
        return k[:, None] * np.stack([-np.sin(th), np.cos(th)], axis=1)

    md = {
        "kind": "prescribed_curvature",
        "unit_speed": True,
        "speed": lambda ts: np.ones(len(ts)),
        "kappa": lambda ts: np.abs(kv(ts)),
        "knots": tuple(float(k) for k in edges[1:-1]),
        "regular_open": {
            "c2": IntervalSet(((a, b),)),
            "d2inf": IntervalSet(((a, b),)),
        },
        "classification": {"bv": True},
    }
    if metadata:
        md.update(metadata)
    return CurveSource((a, b), 2, ev, d1_fn=d1, d2_fn=d2, metadata=md)


def phase_integral_curve(phase: ScalarFunction, metadata=None) -> CurveSource:
    """f(x) = integral_0^x (cos phi, sin phi): unit-speed by construction."""
    a, b = phase.domain
    knots = phase.knots

    def direction(ts):
        ph = phase.eval(ts)
        return np.stack([np.cos(ph), np.sin(ph)], axis=1)

    # coarse tolerance floor: the direction field may carry bounded
    # micro-oscillations whose unresolved panel error scales like width^5
    anti = CachedAntiderivative(direction, a, b, knots=knots, tol=1e-10,
                                share_floor=1e-2)

    def ev(ts):
        return anti.value(ts)

    md = {
        "kind": "phase_integral",
        "unit_speed": True,
        "speed": lambda ts: np.ones(len(ts)),
        "knots": tuple(knots),
    }
    if phase.d1_fn is not None:
        def d2(ts):
            ph = phase.eval(ts)
            dph = phase.d1(ts)
            return dph[:, None] * np.stack([-np.sin(ph), np.cos(ph)], axis=1)

        md["kappa"] = lambda ts: np.abs(phase.d1(ts))
    else:
        d2 = None
    if metadata:
        md.update(metadata)
    return CurveSource((a, b), 2, ev, d1_fn=direction, d2_fn=d2, metadata=md)


# --- bounded-derivative phases with a prescribed discontinuity set ----------


def _w(u):
    """u^2 sin(1/u), the classic differentiable-everywhere oscillator."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = u[pos] ** 2 * np.sin(1.0 / u[pos])
    return out


def _w_prime(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    out[pos] = 2.0 * up * np.sin(1.0 / up) - np.cos(1.0 / up)
    return out


def _fold_points(half_widths):
    """Per component, the largest zero of w' at or below the half width.

    Vectorized bracket search over shrinking windows, then vectorized
    bisection. Every half width has a zero below it since the zeros of w'
    accumulate at 0.
    """
    r = np.asarray(half_widths, dtype=float)
    lo = np.full_like(r, np.nan)
    hi = np.full_like(r, np.nan)
    need = np.ones(len(r), dtype=bool)
    for frac in (0.875, 0.25, 0.02, 5e-4, 1e-5):
        if not need.any():
            break
        ri = r[need]
        n_s = 4096
        grid = ri[:, None] * np.linspace(frac, 1.0, n_s)[None, :]
        sgn = np.sign(_w_prime(grid.ravel()).reshape(grid.shape))
        flips = sgn[:, :-1] * sgn[:, 1:] < 0
        has = flips.any(axis=1)
        # last flip = largest bracketed zero in the window
        last = n_s - 2 - np.argmax(flips[:, ::-1], axis=1)
        rows = np.flatnonzero(need)[has]
        lo[rows] = grid[has, last[has]]
        hi[rows] = grid[has, last[has] + 1]
        need[rows] = False
    if need.any():
        raise IntegrationFailure("no derivative zero bracketed for some "
                                 "component half-widths")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        flip = _w_prime(lo) * _w_prime(mid) <= 0
        hi = np.where(flip, mid, hi)
        lo = np.where(flip, lo, mid)
    return 0.5 * (lo + hi)


def bounded_derivative_function(regular: IntervalSet, scale: float = 1.0 / 3.0,
                                domain=(0.0, 1.0)) -> ScalarFunction:
    """Differentiable phi with |phi'| <= 1 whose derivative is discontinuous
    exactly at the endpoints of the given open intervals.

    On each component (a, b) the phase is a scaled x^2 sin(1/x) bump entering
    from both ends, folded to a plateau at the largest interior zero of the
    bump derivative so phi is C^1 inside the component. phi == 0 on the
    complement, and phi'(c) = 0 exists at complement points while oscillating
    with amplitude 2*scale on every one-sided window.
    """
    if not 0 < scale <= 1.0 / 3.0:
        raise InvalidParameter("scale must lie in (0, 1/3] to keep |phi'| <= 1")
    comps = np.asarray(regular.intervals, dtype=float)
    if len(comps) == 0:
        raise InvalidParameter("need at least one regular component")
    lefts, rights = comps[:, 0], comps[:, 1]
    half = 0.5 * (rights - lefts)
    folds = _fold_points(half)
    plateau = _w(folds)
    edges = comps.ravel()  # sorted since intervals are

    def _locate(ts):
        idx = np.searchsorted(edges, ts, side="right")
        inside = idx % 2 == 1
        comp = np.clip((idx - 1) // 2, 0, len(comps) - 1)
        return inside, comp

    def ev(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros_like(ts)
        inside, comp = _locate(ts)
        if inside.any():
            ci = comp[inside]
            u = np.minimum(ts[inside] - lefts[ci], rights[ci] - ts[inside])
            capped = u >= folds[ci]
            val = np.where(capped, plateau[ci], _w(np.minimum(u, folds[ci])))
            out[inside] = scale * val
        return out

    def d1(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros_like(ts)
        inside, comp = _locate(ts)
        if inside.any():
            ci = comp[inside]
            dl = ts[inside] - lefts[ci]
            dr = rights[ci] - ts[inside]
            from_left = dl <= dr
            u = np.where(from_left, dl, dr)
            sgn = np.where(from_left, 1.0, -1.0)
            live = u < folds[ci]
            val = np.where(live, _w_prime(np.minimum(u, folds[ci])), 0.0)
            out[inside] = scale * sgn * val
        return out

    # component edges always guide quadrature; fold and midpoint knots only
    # help where the oscillation is wide enough to resolve
    wide = (rights - lefts) > 1e-3
    knots = sorted(set(
        list(edges) + list((lefts + folds)[wide]) + list((rights - folds)[wide])
        + list(0.5 * (lefts + rights)[wide])))
    md = {"knots": tuple(k for k in knots if domain[0] < k < domain[1]),
          "oscillation_amplitude": 2.0 * scale,
          "regular": regular}
    return ScalarFunction(tuple(domain), ev, d1_fn=d1, metadata=md)


# --- interval-set generators -------------------------------------------------


def cantor_like_set(delete_ratio: float = 0.6, depth: int = 12) -> IntervalSet:
    """Open middle intervals removed from [0, 1] through ``depth`` generations.

    Generation n contributes 2^(n-1) components of length
    ratio * ((1 - ratio)/2)^(n-1); the un-enumerated residual closed set has
    measure (1 - ratio)^depth, recorded as the truncation tail.
    """
    if not 0 < delete_ratio < 1:
        raise InvalidParameter("delete_ratio must lie in (0, 1)")
    if not 1 <= depth <= 20:
        raise InvalidParameter("depth must lie in [1, 20]")
    keep = 0.5 * (1.0 - delete_ratio)
    closed = [(0.0, 1.0)]
    gaps = []
    for _ in range(depth):
        nxt = []
        for lo, hi in closed:
            w = hi - lo
            l1 = lo + keep * w
            r1 = hi - keep * w
            gaps.append((l1, r1))
            nxt.append((lo, l1))
            nxt.append((r1, hi))
        closed = nxt
    gaps.sort()
    return IntervalSet(tuple(gaps),
                       truncation_tail=(1.0 - delete_ratio) ** depth)


def harmonic_complement_intervals(n_max: int = 65) -> IntervalSet:
    """Components of (0,1) minus {1/n : n <= n_max}; deeper points are cut off.

    The un-enumerated structure lives inside (0, 1/n_max); its length mass is
    zero (the set is countable), so the truncation tail is 0.
    """
    if n_max < 2:
        raise InvalidParameter("n_max must be >= 2")
    pts = [1.0 / n for n in range(n_max, 0, -1)]
    intervals = [(0.0, pts[0])]
    intervals += [(l, r) for l, r in zip(pts[:-1], pts[1:])]
    return IntervalSet(tuple(intervals), truncation_tail=0.0)


# --- corpus curves -----------------------------------------------------------


def harmonic_phase_curve(n_max: int = 65) -> CurveSource:
    """Unit-speed curve whose second derivative oscillates at every 1/n.

    Admits a reparametrization with bounded second derivative but no twice
    continuously differentiable one: the per-component sqrt-variation series
    sum_n (n(n+1))^-1/2 diverges.
    """
    regular = harmonic_complement_intervals(n_max)
    phi = bounded_derivative_function(regular)
    pts = IntervalSet(((0.0, 1.0),))
    md = {
        "kind": "harmonic_phase",
        "params": {"n_max": int(n_max)},
        "regular_open": {"c2": regular, "d2inf": pts},
        "classification": {"bv": True, "c2": False, "d2inf": True,
                           "truncated": True},
    }
    return phase_integral_curve(phi, metadata=md)


def cantor_phase_curve(delete_ratio: float = 0.6, depth: int = 12) -> CurveSource:
    """Unit-speed curve with second derivative discontinuous on a Cantor set.

    The removed-interval sqrt-length series converges and the Cantor set is
    null, so the curve admits a twice continuously differentiable
    reparametrization even though its singular set is uncountable.
    """
    regular = cantor_like_set(delete_ratio, depth)
    phi = bounded_derivative_function(regular)
    keep = 0.5 * (1 - delete_ratio)
    limit = math.sqrt(delete_ratio) / (1.0 - 2.0 * math.sqrt(keep)) \
        if 2.0 * math.sqrt(keep) < 1 else float("inf")
    md = {
        "kind": "cantor_phase",
        "params": {"ratio": float(delete_ratio), "depth": int(depth)},
        "regular_open": {"c2": regular, "d2inf": IntervalSet(((0.0, 1.0),))},
        "classification": {"bv": True, "c2": 2.0 * math.sqrt(keep) < 1,
                           "d2inf": True, "truncated": True,
                           "sqrt_sum_limit": limit},
    }
    return phase_integral_curve(phi, metadata=md)


def _bump(u):
    """Standard C^inf bump on (-1, 1), peak 1 at 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inner = np.abs(u) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inner] = np.exp(1.0 - 1.0 / (1.0 - u[inner] ** 2))
    return out


ODM_C = 6.0 / math.pi ** 2  # lengths c/n^2 must tile (0, 1)


def odm_curvature_profile(n_max: int = 12, base: float = 0.5):
    """Curvature profile with spikes of height n^4 on centred slots J_n.

    Interval I_n has length c/n^2 (accumulating at 0), J_n c/n^4; the
    curvature is ``base`` outside the spikes. Returns (kappa_fn, knots,
    cells) where cells is the list of (left, right, spike_height) triples for
    the enumerated I_n.
    """
    if n_max < 1 or n_max > 8192:
        raise InvalidParameter("n_max must lie in [1, 8192]")
    if not 0 < base <= 1:
        raise InvalidParameter("base curvature must lie in (0, 1]")
    c = ODM_C
    rights = 1.0 - c * np.cumsum(1.0 / np.arange(1, n_max + 1) ** 2)
    lefts = rights.copy()
    rights = np.concatenate([[1.0], rights[:-1]])
    mids = 0.5 * (lefts + rights)
    widths = c / np.arange(1, n_max + 1) ** 4.0
    heights = np.arange(1, n_max + 1) ** 4.0

    # position-sorted views: each t lands in at most one slot, so a single
    # searchsorted pass replaces the per-slot scan
    order = np.argsort(lefts)
    la, ma = lefts[order], mids[order]
    wa, ha = widths[order], heights[order]

    def kappa(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.full(ts.shape, float(base))
        idx = np.searchsorted(la, ts, side="right") - 1
        hit = idx >= 0
        if hit.any():
            i = idx[hit]
            u = (ts[hit] - ma[i]) * (2.0 / wa[i])
            out[hit] = base + (ha[i] - base) * _bump(u)
        return out

    knots = []
    for m, w, lf, rt in zip(mids, widths, lefts, rights):
        knots.extend([lf, m - 0.5 * w, m, m + 0.5 * w, rt])
    cells = [(float(l), float(r), float(h))
             for l, r, h in zip(lefts, rights, heights)]
    return kappa, sorted(set(knots)), cells


def odm_curve(n_max: int = 12, base: float = 0.5) -> CurveSource:
    """Smooth unit-speed curve realizing the spiked-curvature profile.

    The infinite construction has sum sqrt(lambda(I_n)) = inf while
    integral sqrt(kappa) stays finite; the truncation keeps the first n_max
    spikes and continues at the base curvature below them.
    """
    kappa, knots, cells = odm_curvature_profile(n_max, base)
    md = {
        "kind": "prescribed_curvature",
        "params": {"profile": "odm", "n_max": int(n_max), "base": float(base)},
        "odm_cells": tuple(cells),
        "odm_constant": ODM_C,
        # family-limit flags: the truncation itself is smooth, but the
        # construction it stands for has a divergent admissible sqrt-sum
        "classification": {"bv": True, "c2": False, "d2inf": False,
                           "truncated": True},
    }
    return prescribed_curvature_curve(kappa, knots=knots, metadata=md)


def odm_admissible_sqrt_sums(budget: int):
    """Partial sums of sum_n sqrt(c/n^2) for the analytic admissible system.

    Termwise admissibility is structural: the spike height on I_n is n^4, so
    S_n * lambda(I_n) = c * n^2 >= c for every n.
    """
    n = np.arange(1, budget + 1, dtype=float)
    return np.cumsum(np.sqrt(ODM_C) / n)


def constant_phase_curve(rate: float = 1.0) -> CurveSource:
    """Phase integral with phi(t) = rate * t: a circle arc, unit speed."""
    phi = ScalarFunction((0.0, 1.0), lambda ts: rate * ts,
                         d1_fn=lambda ts: np.full(len(ts), float(rate)))
    md = {
        "kind": "phase_linear",
        "params": {"rate": float(rate)},
        "regular_open": {"c2": IntervalSet(((0.0, 1.0),)),
                         "d2inf": IntervalSet(((0.0, 1.0),))},
        "classification": {"bv": True, "c2": True, "d2inf": True},
    }
    return phase_integral_curve(phi, metadata=md)


def precompose(curve: CurveSource, omega, omega_d1, omega_d2,
               omega_inv=None) -> CurveSource:
    """Curve t -> f(omega(t)) for an increasing C^1 onto reparametrization.

    Analytic derivatives chain through; geometric metadata (curvature as a
    function of the *image* parameter, regular sets) transports via
    omega_inv when supplied.
    """
    a, b = curve.domain

    def ev(ts):
        return curve.eval(np.clip(omega(ts), a, b))

    def d1(ts):
        x = np.clip(omega(ts), a, b)
        return curve.d1(x) * np.asarray(omega_d1(ts), float)[:, None]

    def d2(ts):
        x = np.clip(omega(ts), a, b)
        w1 = np.asarray(omega_d1(ts), float)[:, None]
        w2 = np.asarray(omega_d2(ts), float)[:, None]
        return curve.d2(x) * w1 ** 2 + curve.d1(x) * w2

    md = {"kind": "precomposed",
          "params": {"inner": curve.metadata.get("kind", "?")}}
    kap = curve.metadata.get("kappa")
    spd = curve.metadata.get("speed")
    if kap is not None:
        md["kappa"] = lambda ts: kap(np.clip(omega(ts), a, b))
    if spd is not None:
        md["speed"] = lambda ts: (spd(np.clip(omega(ts), a, b))
                                  * np.abs(np.asarray(omega_d1(ts), float)))
    if omega_inv is not None:
        if curve.knots:
            md["knots"] = tuple(sorted(float(omega_inv(np.array([k]))[0])
                                       for k in curve.knots))
        reg = curve.metadata.get("regular_open")
        if reg:
            moved = {}
            for mode, iset in reg.items():
                ivs = []
                for l, r in iset:
                    il = float(omega_inv(np.array([l]))[0])
                    ir = float(omega_inv(np.array([r]))[0])
                    ivs.append((min(il, ir), max(il, ir)))
                moved[mode] = IntervalSet(tuple(sorted(ivs)),
                                          truncation_tail=iset.truncation_tail)
            md["regular_open"] = moved
        if "classification" in curve.metadata:
            md["classification"] = dict(curve.metadata["classification"])
    return CurveSource(curve.domain, curve.dim, ev, d1_fn=d1, d2_fn=d2,
                       metadata=md)


# --- descriptor registry -----------------------------------------------------


def build_curve(descriptor: dict) -> CurveSource:
    """Construct a corpus curve from a JSON-style descriptor."""
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise InvalidDescriptor(f"descriptor needs a 'kind': {descriptor!r}")
    kind = descriptor["kind"]
    d = {k: v for k, v in descriptor.items() if k != "kind"}
    try:
        if kind == "spiral":
            return spiral_curve(float(d["s"]))
        if kind == "circle_arc":
            return circle_arc(float(d["curvature"]), float(d["length"]))
        if kind == "harmonic_phase":
            return harmonic_phase_curve(int(d.get("n_max", 65)))
        if kind == "cantor_phase":
            return cantor_phase_curve(float(d.get("ratio", 0.6)),
                                      int(d.get("depth", 12)))
        if kind == "phase_linear":
            return constant_phase_curve(float(d.get("rate", 1.0)))
        if kind == "line":
            return line_curve(tuple(d.get("p0", (0.0, 0.0))),
                              tuple(d.get("p1", (1.0, 0.0))))
        if kind == "prescribed_curvature":
            profile = d.get("profile", "odm")
            if profile == "odm":
                return odm_curve(int(d.get("n_max", 12)),
                                 float(d.get("base", 0.5)))
            if profile == "constant":
                k = float(d.get("value", 1.0))
                prof = lambda ts: np.full(len(np.atleast_1d(ts)), k)
                return prescribed_curvature_curve(
                    prof, metadata={"params": {"profile": "constant",
                                               "value": k}})
            raise InvalidDescriptor(f"unknown curvature profile {profile!r}")
    except KeyError as exc:
        raise InvalidDescriptor(f"descriptor {descriptor!r} missing {exc}") from exc
    raise InvalidDescriptor(f"unknown curve kind {kind!r}")


DEFAULT_CORPUS = (
    {"kind": "spiral", "s": 1.2},
    {"kind": "spiral", "s": 1.5},
    {"kind": "spiral", "s": 1.9},
    {"kind": "spiral", "s": 2.5},
    {"kind": "spiral", "s": 3.0},
    {"kind": "spiral", "s": 4.0},
    {"kind": "harmonic_phase", "n_max": 65},
    {"kind": "cantor_phase", "ratio": 0.6, "depth": 12},
    {"kind": "prescribed_curvature", "profile": "odm", "n_max": 12},
    {"kind": "circle_arc", "curvature": 1.0, "length": 40.0},
)
