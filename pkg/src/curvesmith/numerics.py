"""Shared numerical machinery.

Everything here is deliberately generic: Gauss-Legendre panel quadrature with
adaptive refinement, cached antiderivatives, dyadic shells toward singular
endpoints, vectorized monotone inversion, a sample bank with O(1) range-max
queries, and rank/power-law fitting. The mathematical content of the package
lives in the modules that use these tools, not in the tools.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import PPoly

from .errors import InvalidParameter, NonConvergent, RootNotBracketed


@lru_cache(maxsize=32)
def gl_rule(order: int):
    """Gauss-Legendre nodes and weights on [-1, 1], cached per order."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _as_2d(vals, m):
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 1:
        return vals.reshape(m, 1)
    return vals


def gl_panels(fn, lefts, rights, order: int = 20):
    """Integrate ``fn`` over each panel [lefts[i], rights[i]].

    ``fn`` must accept a 1-d array and return either a matching 1-d array or
    an (m, k) array for vector-valued integrands. Returns (n_panels, k).
    """
    lefts = np.atleast_1d(np.asarray(lefts, dtype=float))
    rights = np.atleast_1d(np.asarray(rights, dtype=float))
    x, w = gl_rule(order)
    mid = 0.5 * (lefts + rights)
    half = 0.5 * (rights - lefts)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    m = nodes.size
    vals = _as_2d(fn(nodes.ravel()), m)
    k = vals.shape[1]
    vals = vals.reshape(len(lefts), order, k)
    out = (vals * w[None, :, None]).sum(axis=1) * half[:, None]
    return out


def gl_integral(fn, a: float, b: float, order: int = 20) -> float:
    """Single-panel Gauss-Legendre integral of a scalar integrand."""
    return float(gl_panels(fn, [a], [b], order=order)[0, 0])


def adaptive_panel_breaks(fn, a, b, knots=(), tol=1e-12, order=20,
                          max_depth=42, max_panels=200000, share_floor=1e-6):
    """Subdivide [a, b] until each panel's GL value is split-stable.

    Returns (breaks, integrals) where integrals[i] is the (k,)-vector integral
    over [breaks[i], breaks[i+1]]. ``knots`` are forced breakpoints (where the
    integrand may lose smoothness). The tolerance is applied per panel,
    scaled by panel share of the total width but never below
    tol * share_floor; a coarser floor keeps bounded micro-oscillations from
    forcing endless refinement.
    """
    if not b > a:
        raise InvalidParameter(f"empty panel range [{a}, {b}]")
    pts = [a, b] + [float(k) for k in knots if a < k < b]
    pts = np.unique(np.asarray(pts, dtype=float))
    stack = [(pts[i], pts[i + 1], 0) for i in range(len(pts) - 1)][::-1]
    breaks, integrals = [], []
    width = b - a
    while stack:
        lo, hi, depth = stack.pop()
        whole = gl_panels(fn, [lo], [hi], order=order)[0]
        mid = 0.5 * (lo + hi)
        halves = gl_panels(fn, [lo, mid], [mid, hi], order=order)
        err = np.abs(halves.sum(axis=0) - whole).max()
        local_tol = tol * max((hi - lo) / width, share_floor)
        if err <= local_tol or depth >= max_depth:
            breaks.append(lo)
            integrals.append(halves.sum(axis=0))
        else:
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
        if len(breaks) + len(stack) > max_panels:
            raise NonConvergent("panel refinement exceeded panel budget",
                                depth=depth)
    breaks.append(b)
    return np.asarray(breaks), np.asarray(integrals)


class CachedAntiderivative:
    """F(t) = integral of ``fn`` from ``a`` to t, with cached panels.

    Evaluation is vectorized: prefix sums over stored panels plus a fresh
    partial Gauss-Legendre panel from the nearest stored breakpoint. Supports
    scalar or vector-valued integrands.
    """

    def __init__(self, fn, a, b, knots=(), tol=1e-12, order=20, max_depth=42,
                 share_floor=1e-6):
        self.fn = fn
        self.a = float(a)
        self.b = float(b)
        self.order = order
        self.breaks, panel_ints = adaptive_panel_breaks(
            fn, a, b, knots=knots, tol=tol, order=order, max_depth=max_depth,
            share_floor=share_floor)
        k = panel_ints.shape[1]
        self.prefix = np.vstack([np.zeros((1, k)), np.cumsum(panel_ints, axis=0)])
        self.total = self.prefix[-1].copy()

    def value(self, t):
        """Vectorized F(t); scalar in, scalar (or (k,)) out."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.breaks, ts, side="right") - 1,
                      0, len(self.breaks) - 2)
        lefts = self.breaks[idx]
        # degenerate tail panels would sample the integrand on a zero-width
        # interval, where an endpoint singularity turns 0 * inf into nan
        live = ts != lefts
        out = self.prefix[idx].copy()
        if live.any():
            out[live] += gl_panels(self.fn, lefts[live], ts[live],
                                   order=self.order)
        if out.shape[1] == 1:
            out = out[:, 0]
        return out[0] if scalar else out


def dyadic_shell_edges(a: float, b: float, toward: str, n_shells: int):
    """Shell boundaries marching geometrically toward one endpoint.

    Shell j (j = 0 outermost) spans offsets L*2^-(j+1) .. L*2^-j from the
    endpoint, L = b - a. Returns (lefts, rights) ordered outermost first.
    """
    L = b - a
    offs = L * np.exp2(-np.arange(n_shells + 1, dtype=float))
    if toward == "left":
        lefts, rights = a + offs[1:], a + offs[:-1]
    elif toward == "right":
        lefts, rights = b - offs[:-1], b - offs[1:]
    else:
        raise InvalidParameter(f"toward must be 'left' or 'right', got {toward!r}")
    return lefts, rights


def shell_tail(shells, rel_floor=1e-300):
    """Geometric tail estimate from a sequence of shell integrals.

    ``shells`` ordered outermost-to-innermost (toward the endpoint). Returns
    (tail, ratio, status) with status in {"converged", "diverging", "flat"}.
    A ratio safely below 1 gives tail = last * r / (1 - r); ratios at or
    above ~1 mean the integral is not settling toward that endpoint.
    """
    s = np.asarray(shells, dtype=float)
    s = s[s > rel_floor]
    if len(s) < 4:
        return 0.0, 0.0, "converged"
    ratios = s[1:] / s[:-1]
    r = float(np.median(ratios[-5:]))
    if r >= 0.999:
        status = "diverging" if s[-1] > 1e-9 * s.sum() else "flat"
        return float("inf") if status == "diverging" else 0.0, r, status
    tail = float(s[-1] * r / (1.0 - r))
    return tail, r, "converged"


def invert_monotone(fn, lo: float, hi: float, targets, iters: int = 60):
    """Left-continuous inverse of a nondecreasing vectorized function.

    Returns inf{t in [lo, hi] : fn(t) >= target} per target (clipped to the
    bracket). ``fn`` must accept and return 1-d arrays.
    """
    scalar = np.isscalar(targets) or np.ndim(targets) == 0
    tg = np.atleast_1d(np.asarray(targets, dtype=float))
    lo_a = np.full(tg.shape, float(lo))
    hi_a = np.full(tg.shape, float(hi))
    for _ in range(iters):
        mid = 0.5 * (lo_a + hi_a)
        ge = fn(mid) >= tg
        hi_a = np.where(ge, mid, hi_a)
        lo_a = np.where(ge, lo_a, mid)
    out = hi_a
    return float(out[0]) if scalar else out


def bisect_scalar(fn, lo: float, hi: float, iters: int = 60):
    """Plain bisection for fn(lo) and fn(hi) of opposite sign."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RootNotBracketed(f"no sign change on [{lo}, {hi}]")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


class SampleBank:
    """Dense samples of a scalar field with O(1) range-max queries.

    Built once per curve component; the greedy partition sweep and the
    curvature sup estimator share it so that construction and verification
    see the same values.
    """

    def __init__(self, ts, vals):
        ts = np.asarray(ts, dtype=float)
        vals = np.asarray(vals, dtype=float)
        if ts.ndim != 1 or ts.shape != vals.shape or len(ts) < 2:
            raise InvalidParameter("bank needs matching 1-d ts/vals, len >= 2")
        if np.any(np.diff(ts) <= 0):
            order = np.argsort(ts, kind="stable")
            ts, vals = ts[order], vals[order]
            keep = np.concatenate([[True], np.diff(ts) > 0])
            ts, vals = ts[keep], vals[keep]
        self.ts = ts
        self.vals = vals
        n = len(vals)
        self._table = [vals]
        j = 1
        while (1 << j) <= n:
            prev = self._table[-1]
            half = 1 << (j - 1)
            self._table.append(np.maximum(prev[:-half], prev[half:]))
            j += 1

    def _max_idx(self, i: int, j: int) -> float:
        # inclusive index range, i <= j
        k = (j - i + 1).bit_length() - 1
        tbl = self._table[k]
        return max(tbl[i], tbl[j - (1 << k) + 1])

    def max_between(self, lo: float, hi: float) -> float:
        """Max of stored samples with lo < t < hi (-inf if none)."""
        i = int(np.searchsorted(self.ts, lo, side="right"))
        j = int(np.searchsorted(self.ts, hi, side="left")) - 1
        if j < i:
            return float("-inf")
        return float(self._max_idx(i, j))


def fit_rank_exponent(values_sorted_desc, lo_frac=0.1):
    """Fit q in value_r ~ r^(-q) over the last decade of ranks.

    ``values_sorted_desc`` must be positive and sorted descending. Returns
    (q, amplitude) from a log-log least squares fit over ranks in
    [lo_frac * N, N].
    """
    v = np.asarray(values_sorted_desc, dtype=float)
    n = len(v)
    if n < 8:
        return float("nan"), float("nan")
    start = max(int(np.floor(lo_frac * n)), 1)
    ranks = np.arange(start, n + 1, dtype=float)
    vals = v[start - 1:]
    good = vals > 0
    if good.sum() < 4:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(ranks[good]), np.log(vals[good]), 1)
    return -float(slope), float(np.exp(intercept))


def piecewise_linear(xs, ys) -> PPoly:
    """Exact piecewise-linear interpolant as a PPoly (for exact calculus)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(np.diff(xs) <= 0):
        raise InvalidParameter("knots must be strictly increasing, len >= 2")
    slopes = np.diff(ys) / np.diff(xs)
    coeffs = np.vstack([slopes, ys[:-1]])
    return PPoly(coeffs, xs)


def ppoly_extrema(p: PPoly, lo: float, hi: float):
    """Candidate argmax/argmin points of a PPoly on [lo, hi].

    Returns piece breakpoints, interval endpoints and interior critical
    points (exact roots of the derivative), clipped to the interval.
    """
    pts = [lo, hi]
    pts.extend(float(x) for x in p.x if lo < x < hi)
    dp = p.derivative()
    for r in np.atleast_1d(dp.roots(extrapolate=False)):
        r = float(np.real(r))
        if np.isfinite(r) and lo < r < hi:
            pts.append(r)
    return np.unique(np.asarray(pts, dtype=float))


def geometric_grid(a: float, b: float, n_uniform: int, n_geo: int,
                   min_offset_frac: float = 1e-10):
    """Grid on [a, b]: uniform base plus geometric refinement at both ends.

    The geometric points march from half-width down to
    min_offset_frac * (b - a) off each endpoint, which resolves
    endpoint singularities over ~10 decades.
    """
    L = b - a
    base = np.linspace(a, b, max(n_uniform, 2))
    if n_geo > 0:
        offs = L * np.exp(np.linspace(np.log(0.5), np.log(min_offset_frac), n_geo))
        base = np.concatenate([base, a + offs, b - offs])
    grid = np.unique(base)
    return np.clip(grid, a, b)
