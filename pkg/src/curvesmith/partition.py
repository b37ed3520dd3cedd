"""Generalized partitions of regular components and admissible systems.

Everything the reparametrizability verdicts consume lives here: the field
t -> ||F''(v(t))|| of the arc-length associate, greedy cell construction
pinning sup * variation at a target product, certificates for the two
bracket conditions, sqrt-variation series with a convergence verdict, and
certified lower bounds for the half-variation supremum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Config
from .curve_model import CurveSource, IntervalSet
from .errors import (CertificateFailure, DegenerateComponent, InvalidParameter,
                     StallDetected)
from .numerics import SampleBank, fit_rank_exponent, geometric_grid
from .variation import VariationProfile

__all__ = [
    "Cell", "GeneralizedPartition", "PartitionCertificate", "SqrtSumResult",
    "HalfVariationBound", "CurvatureField", "curvature_sup",
    "greedy_partition", "sqrt_variation_sum", "half_variation_lower_bound",
    "verify_partition", "wfin2_bound", "suggest_delta", "partition_to_json",
    "partition_json", "partial_sums_csv",
]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Cell:
    """One compact interval of a generalized partition, with its metadata.

    ``exempt`` marks cells whose closure touches the component boundary: the
    product condition never applies to them. ``met_target`` records whether
    the construction pinned sup * variation at the target within tolerance.
    """

    left: float
    right: float
    variation: float
    sup_second: float
    emitted: int = 0
    exempt: bool = False
    met_target: bool = False

    @property
    def product(self) -> float:
        return self.sup_second * self.variation


@dataclass(frozen=True)
class GeneralizedPartition:
    """Ordered cells tiling a single open component, with explicit tails.

    Cells are ascending and consecutive ones share exactly an endpoint. When
    the sweep was truncated, ``left_residual``/``right_residual`` carry the
    un-partitioned variation mass between the outermost cells and the
    component ends.
    """

    component: tuple
    cells: tuple
    delta: float
    left_residual: float = 0.0
    right_residual: float = 0.0
    exhausted_left: bool = True
    exhausted_right: bool = True

    @property
    def exhausted(self) -> bool:
        return self.exhausted_left and self.exhausted_right

    @property
    def residual_variation(self) -> float:
        return self.left_residual + self.right_residual

    def covered_variation(self) -> float:
        return float(sum(c.variation for c in self.cells))

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)


@dataclass(frozen=True)
class PartitionCertificate:
    """Outcome of checking the bracket conditions on a partition.

    kind "round" demands the target product from every interior cell on its
    own; kind "square" only from the union of each interior cell with one of
    its neighbors. ``drift`` is the largest relative disagreement between
    stored cell metadata and re-evaluated values (0 when nothing was
    re-evaluated).
    """

    kind: str
    delta: float
    kk: float
    checks_a: tuple
    checks_b: tuple
    drift: float = 0.0

    @property
    def valid(self) -> bool:
        return all(self.checks_a) and all(self.checks_b)


@dataclass(frozen=True)
class SqrtSumResult:
    partial_sums: np.ndarray
    emission_sums: np.ndarray
    total: float
    tail_estimate: float
    fitted_exponent: float
    growth: tuple
    residual_sqrt: float
    exhausted: bool
    verdict: str


class HalfVariationBound(float):
    """A certified lower bound carrying the admissible system that attains it."""

    def __new__(cls, value, system=(), detail=None):
        obj = super().__new__(cls, float(value))
        obj.system = tuple(system)
        obj.detail = dict(detail or {})
        return obj


# --- the curvature field ------------------------------------------------------


class _ComponentWorkspace:
    """Shared dense samples of the field over one component.

    The greedy sweep and sup queries read the same bank so construction and
    verification cannot disagree about what was sampled. Per-gap upper
    estimates max(v_k, v_k+1) + |v_k+1 - v_k| / 2 make range queries
    conservative and, at a fixed bank state, monotone under inclusion.
    """

    __slots__ = ("lo", "hi", "grid", "vals", "U", "v_grid", "s_grid", "_bank",
                 "clamp")

    def __init__(self, field: "CurvatureField", lo: float, hi: float):
        cfg = field.config
        a, b = field.curve.domain
        self.lo, self.hi = lo, hi
        span = hi - lo
        frac = span / max(b - a, 1e-300)
        n_uni = int(np.clip(cfg.bank_size * frac, 64, cfg.bank_size))
        n_geo = 80 if frac > 1e-3 else 32
        pts = [geometric_grid(lo, hi, n_uni, n_geo)]
        ks = np.array([k for k in field.curve.knots if lo < k < hi])
        if len(ks):
            edges = np.concatenate([[lo], ks, [hi]])
            pts += [ks, 0.5 * (edges[:-1] + edges[1:])]
        grid = np.unique(np.concatenate(pts))
        self.grid = grid
        self.clamp = 1e3 * cfg.sup_blowup
        # endpoint samples are nudged inward so integrable blow-ups at the
        # component ends stay out of the arithmetic
        ev = grid.copy()
        nudge = 1e-12 * span
        ev[0] = min(ev[0] + nudge, ev[1] if len(ev) > 1 else hi)
        ev[-1] = max(ev[-1] - nudge, ev[0])
        vals = field.values(ev)
        vals = np.where(np.isfinite(vals), vals, self.clamp)
        self.vals = np.clip(vals, 0.0, self.clamp)
        diffs = np.abs(np.diff(self.vals))
        self.U = np.maximum(self.vals[:-1], self.vals[1:]) + 0.5 * diffs
        self._bank = SampleBank(np.arange(len(self.U), dtype=float), self.U) \
            if len(self.U) > 1 else None
        self.v_grid = np.atleast_1d(np.asarray(field.profile.value(grid),
                                               dtype=float))
        sp = field.curve.speed(grid)
        self.s_grid = np.atleast_1d(np.asarray(sp, dtype=float))

    def _gap_max(self, g0: int, g1: int) -> float:
        if self._bank is None:
            return float(self.U[0])
        return float(self._bank._max_idx(g0, g1))

    def sup_between(self, lo: float, hi: float) -> float:
        """Upper estimate of the field sup over (lo, hi) from the bank."""
        g = self.grid
        i = int(np.searchsorted(g, lo, side="right"))
        j = int(np.searchsorted(g, hi, side="left"))
        g0 = min(max(i - 1, 0), len(self.U) - 1)
        g1 = min(max(j - 1, g0), len(self.U) - 1)
        return self._gap_max(g0, g1)


class CurvatureField:
    """t -> ||F''(v(t))|| for the arc-length associate F of a curve.

    Uses the generator's analytic curvature when the metadata carries one;
    otherwise the normal component of f'' scaled by 1/||f'||^2, which is the
    same quantity expressed in the original parameter.
    """

    def __init__(self, curve: CurveSource, config: Config = DEFAULT,
                 profile: VariationProfile | None = None):
        self.curve = curve
        self.config = config
        self.profile = profile if profile is not None \
            else VariationProfile(curve, config=config)
        self._analytic = curve.metadata.get("kappa")
        self._workspaces = {}

    def values(self, ts) -> np.ndarray:
        tt = np.atleast_1d(np.asarray(ts, dtype=float))
        if self._analytic is not None:
            out = np.abs(np.asarray(self._analytic(tt), dtype=float))
        else:
            d1 = np.asarray(self.curve.d1(tt), dtype=float).reshape(len(tt), -1)
            d2 = np.asarray(self.curve.d2(tt), dtype=float).reshape(len(tt), -1)
            n2 = np.maximum(np.einsum("ij,ij->i", d1, d1), 1e-300)
            coef = np.einsum("ij,ij->i", d1, d2) / n2
            perp = d2 - d1 * coef[:, None]
            out = np.sqrt(np.einsum("ij,ij->i", perp, perp)) / n2
        return np.where(np.isnan(out), np.inf, out)

    def point(self, t: float) -> float:
        return float(self.values(t)[0])

    def second_deriv_norm(self, s):
        """Field value at arc-length position(s) s."""
        return self.values(self.profile.inverse(s))

    def workspace(self, lo: float, hi: float) -> _ComponentWorkspace:
        key = (float(lo), float(hi))
        ws = self._workspaces.get(key)
        if ws is None:
            ws = _ComponentWorkspace(self, *key)
            self._workspaces[key] = ws
        return ws

    def _covering_workspace(self, t_lo, t_hi):
        for ws in self._workspaces.values():
            if ws.lo <= t_lo and t_hi <= ws.hi:
                return ws
        return self.workspace(*self.curve.domain)

    def sup_query(self, s_lo: float, s_hi: float) -> float:
        """Bank upper estimate over an open arc-length interval.

        Monotone under inclusion at a fixed bank state; +inf marker past the
        blow-up threshold. The sharp per-cell estimator is sup_refined.
        """
        if not s_hi > s_lo:
            return 0.0
        t_lo = float(self.profile.inverse(s_lo))
        t_hi = float(self.profile.inverse(s_hi))
        ws = self._covering_workspace(t_lo, t_hi)
        s = ws.sup_between(t_lo, t_hi)
        return math.inf if s >= self.config.sup_blowup else float(s)

    def sup_refined(self, lo: float, hi: float,
                    ws: _ComponentWorkspace | None = None) -> float:
        """Dense per-interval sup estimate with argmax-local inflation."""
        cfg = self.config
        if not hi > lo:
            return 0.0
        span = hi - lo
        n_lin = max(cfg.sup_min_samples, 16)
        offs = span * np.float_power(10.0, -np.arange(1.0, 10.0))
        parts = [np.linspace(lo, hi, n_lin + 2)[1:-1], lo + offs, hi - offs]
        ks = [k for k in self.curve.knots if lo < k < hi]
        if ks:
            parts.append(np.asarray(ks[:512], dtype=float))
        pts = np.unique(np.concatenate(parts))
        pts = pts[(pts > lo) & (pts < hi)]
        if pts.size == 0:
            pts = np.array([0.5 * (lo + hi)])
        vals = self.values(pts)
        clamp = 1e3 * cfg.sup_blowup
        vals = np.clip(np.where(np.isfinite(vals), vals, clamp), 0.0, clamp)
        if ws is not None and ws.lo <= lo and hi <= ws.hi:
            i = np.searchsorted(ws.grid, lo, side="right")
            j = np.searchsorted(ws.grid, hi, side="left")
            if j > i:
                pts = np.concatenate([pts, ws.grid[i:j]])
                vals = np.concatenate([vals, ws.vals[i:j]])
                order = np.argsort(pts, kind="stable")
                pts, vals = pts[order], vals[order]
        k = int(np.argmax(vals))
        infl = 0.0
        if k > 0:
            infl = max(infl, 0.5 * abs(vals[k] - vals[k - 1]))
        if k + 1 < len(vals):
            infl = max(infl, 0.5 * abs(vals[k + 1] - vals[k]))
        s = float(vals[k] + infl)
        return math.inf if s >= cfg.sup_blowup else s


def curvature_sup(field: CurvatureField, interval) -> float:
    """Sharp sup estimate of ||F''|| over the interior of a t-interval."""
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise InvalidParameter("interval must have positive length")
    ws = field._covering_workspace(lo, hi) if field._workspaces else None
    return field.sup_refined(lo, hi, ws=ws)


# --- greedy construction ------------------------------------------------------


def _hermite(v0, v1, s0, s1, h, u):
    # cubic with prescribed values/slopes at the gap ends
    u2, u3 = u * u, u * u * u
    return (v0 * (2 * u3 - 3 * u2 + 1) + s0 * h * (u3 - 2 * u2 + u)
            + v1 * (-2 * u3 + 3 * u2) + s1 * h * (u3 - u2))


class _Sweep:
    """State of one directional march; +1 sweeps right, -1 sweeps left."""

    __slots__ = ("sign", "x", "v_x", "end", "v_end", "done", "stalled")

    def __init__(self, sign, x, v_x, end, v_end):
        self.sign = sign
        self.x = x
        self.v_x = v_x
        self.end = end
        self.v_end = v_end
        self.done = False
        self.stalled = False


def _bracket_right(ws, x, v_x, delta):
    """First grid node where variation * running sup estimate crosses delta.

    Returns (tA, tB, gap_index, prior_sup) with the crossing inside
    (tA, tB], or None when the product stays below delta through the last
    node.
    """
    g, vg, U = ws.grid, ws.v_grid, ws.U
    n = len(g)
    i0 = int(np.searchsorted(g, x, side="right"))
    if i0 >= n:
        return None
    lead = max(i0 - 1, 0)
    run = np.maximum.accumulate(U[lead:])
    prod = (vg[i0:] - v_x) * run[:n - i0]
    idx = int(np.searchsorted(prod, delta, side="left"))
    if idx >= n - i0:
        return None
    j = i0 + idx
    tA = g[j - 1] if idx > 0 else x
    prior = run[idx - 1] if idx > 0 else U[lead]
    return tA, g[j], j - 1, float(max(prior, U[j - 1]))


def _bracket_left(ws, x, v_x, delta):
    g, vg, U = ws.grid, ws.v_grid, ws.U
    i0 = int(np.searchsorted(g, x, side="left")) - 1
    if i0 < 0:
        return None
    lead = min(i0, len(U) - 1)
    run = np.maximum.accumulate(U[:lead + 1][::-1])
    prod = (v_x - vg[i0::-1]) * run[:i0 + 1]
    idx = int(np.searchsorted(prod, delta, side="left"))
    if idx > i0:
        return None
    j = i0 - idx
    tB = g[j + 1] if idx > 0 else x
    prior = run[idx - 1] if idx > 0 else U[lead]
    return g[j], tB, j, float(max(prior, U[j]))


def _surrogate_solve(ws, gap, x, v_x, sup_est, delta, sign, tA, tB):
    """60-step bisection on the hermite surrogate of v within one gap."""
    g0, g1 = ws.grid[gap], ws.grid[gap + 1]
    h = g1 - g0
    if h <= 0 or sup_est <= 0:
        return tB if sign > 0 else tA
    v0, v1 = ws.v_grid[gap], ws.v_grid[gap + 1]
    s0, s1 = ws.s_grid[gap], ws.s_grid[gap + 1]
    vx_sur = _hermite(v0, v1, s0, s1, h, np.clip((x - g0) / h, 0.0, 1.0)) \
        if g0 <= x <= g1 else (v_x if sign > 0 else v_x)
    lo_t, hi_t = tA, tB
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        u = np.clip((mid - g0) / h, 0.0, 1.0)
        vm = _hermite(v0, v1, s0, s1, h, u)
        adv = (vm - vx_sur) if sign > 0 else (vx_sur - vm)
        if adv * sup_est >= delta:
            if sign > 0:
                hi_t = mid
            else:
                lo_t = mid
        else:
            if sign > 0:
                lo_t = mid
            else:
                hi_t = mid
    return hi_t if sign > 0 else lo_t


def _polish(field, ws, sweep, t0, delta, cfg):
    """Drive |sup * variation - delta| to tolerance on the true profile.

    Secant iteration on the signed residual sup * advance - delta; when no
    secant pair is available yet, a Newton step on the profile toward the
    advance the current sup dictates. A residual that will not contract
    signals the product jumping across delta faster than float positions
    resolve; the infimum then sits on the >= delta side of the jump, so the
    tightest overshooting iterate is returned unmet.
    """
    prof = field.profile
    sign, x, v_x = sweep.sign, sweep.x, sweep.v_x
    lo_lim = x if sign > 0 else sweep.end
    hi_lim = sweep.end if sign > 0 else x
    t = float(np.clip(t0, lo_lim, hi_lim))
    best = None
    prev = None
    r_under = r_over = None        # tightest iterates on each side of delta
    for _ in range(48):
        cell_lo, cell_hi = (x, t) if sign > 0 else (t, x)
        if not cell_hi > cell_lo:
            t = 0.5 * (x + (hi_lim if sign > 0 else lo_lim))
            continue
        s_ref = field.sup_refined(cell_lo, cell_hi, ws=ws)
        v_t = float(prof.value(t))
        adv = abs(v_t - v_x)
        prod = s_ref * adv if np.isfinite(s_ref) else math.inf
        err = prod / delta - 1.0
        if best is None or abs(err) < abs(best[3]):
            best = (t, v_t, s_ref, err)
        if abs(err) <= cfg.cell_match_rtol:
            return t, v_t, s_ref, True
        if err < 0.0:
            if r_under is None or (t - r_under[0]) * sign > 0:
                r_under = (t, v_t, s_ref, err)
        elif np.isfinite(err):
            if r_over is None or (r_over[0] - t) * sign > 0:
                r_over = (t, v_t, s_ref, err)
        if not np.isfinite(s_ref):
            t = x + sign * 0.5 * abs(t - x)
            prev = None
            continue
        if r_under is not None and r_over is not None:
            width = abs(r_over[0] - r_under[0])
            if width <= 4 * _EPS * max(abs(r_under[0]), abs(r_over[0])):
                # bracket at float resolution: the product jumps across
                # delta, and the infimum sits on the >= delta side
                tt, vv, ss, ee = r_over
                return tt, vv, ss, abs(ee) <= cfg.cell_match_rtol
        target = v_x + sign * delta / s_ref
        escaped = target >= sweep.v_end if sign > 0 else target <= sweep.v_end
        if escaped and r_over is None:
            # the current sup says the mass runs out first; the sup of the
            # full remaining stretch has the final word
            full_lo, full_hi = (x, sweep.end) if sign > 0 else (sweep.end, x)
            s_full = field.sup_refined(full_lo, full_hi, ws=ws)
            if s_full * abs(sweep.v_end - v_x) < delta:
                return None
        t_next = None
        if prev is not None and err != prev[1]:
            t_sec = t - err * (t - prev[0]) / (err - prev[1])
            ok = lo_lim < t_sec < hi_lim
            if ok and r_under is not None and r_over is not None:
                b0 = min(r_under[0], r_over[0])
                b1 = max(r_under[0], r_over[0])
                ok = b0 < t_sec < b1
            if ok:
                t_next = t_sec
        if t_next is None:
            if r_under is not None and r_over is not None:
                t_next = 0.5 * (r_under[0] + r_over[0])
            else:
                sp = float(np.atleast_1d(field.curve.speed(t))[0])
                if sp > 0:
                    t_next = t - (v_t - target) / sp
                else:
                    t_next = 0.5 * (t + (hi_lim if err < 0 else lo_lim))
        prev = (t, err)
        t = float(np.clip(t_next, lo_lim + _EPS, hi_lim - _EPS))
    # iterations exhausted short of tolerance; a cell stopping short of the
    # product threshold would break the infimum semantics, so an overshoot
    # beats a clear undershoot
    if r_over is not None and best[3] < -cfg.cell_match_rtol:
        t, v_t, s_ref, err = r_over
    else:
        t, v_t, s_ref, err = best
    return t, v_t, s_ref, abs(err) <= cfg.cell_match_rtol


def greedy_partition(curve: CurveSource, component, delta: float,
                     field: CurvatureField | None = None,
                     config: Config | None = None, max_cells: int | None = None):
    """Bidirectional greedy sweep from the component midpoint.

    Each step takes the cell out to the first point where variation times
    the running sup of ||F''|| reaches delta (the component end when that
    never happens). Returns (partition, certificate).
    """
    lo, hi = float(component[0]), float(component[1])
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    if field is None:
        field = CurvatureField(curve, config=config or DEFAULT)
    cfg = config or field.config
    a, b = curve.domain
    if not (a <= lo < hi <= b):
        raise InvalidParameter(f"component ({lo}, {hi}) outside domain")
    span = hi - lo
    if span <= 64 * _EPS * max(abs(lo), abs(hi), 1.0):
        raise DegenerateComponent(f"component ({lo}, {hi}) below resolution")
    prof = field.profile
    v_lo = float(prof.value(lo))
    v_hi = float(prof.value(hi))
    if not v_hi - v_lo > 0:
        raise DegenerateComponent("no variation mass on component")
    ws = field.workspace(lo, hi)
    budget = int(min(max_cells if max_cells is not None else cfg.cell_budget,
                     cfg.cell_budget_max))
    snap = cfg.endpoint_snap * span

    # the condition may be unreachable on the whole span: single cell, the
    # infimum of the empty set being the far end
    if ws.sup_between(lo, hi) * (v_hi - v_lo) < delta:
        s_whole = field.sup_refined(lo, hi, ws=ws)
        cell = Cell(lo, hi, v_hi - v_lo, s_whole, 0, True, False)
        part = GeneralizedPartition((lo, hi), (cell,), delta)
        return part, _certify_cells(part, "round", delta, delta, cfg)

    mid = 0.5 * (lo + hi)
    v_mid = float(prof.value(mid))
    sweeps = [_Sweep(+1, mid, v_mid, hi, v_hi),
              _Sweep(-1, mid, v_mid, lo, v_lo)]
    cells = []
    emit = 0
    while not all(s.done for s in sweeps) and len(cells) < budget:
        for sw in sweeps:
            if sw.done or len(cells) >= budget:
                continue
            cells.append(_advance(field, ws, sw, delta, cfg, snap, emit))
            emit += 1
    cells.sort(key=lambda c: c.left)

    right, left = sweeps[0], sweeps[1]
    part = GeneralizedPartition(
        (lo, hi), tuple(cells), delta,
        left_residual=0.0 if left.done else max(left.v_x - v_lo, 0.0),
        right_residual=0.0 if right.done else max(v_hi - right.v_x, 0.0),
        exhausted_left=left.done, exhausted_right=right.done)
    interior = [c for c in cells if not c.exempt]
    matched = all(c.met_target or
                  abs(c.product - delta) <= delta * cfg.cell_match_rtol
                  for c in interior)
    if matched:
        kind, kk = "round", delta
    else:
        # the product jumped past delta somewhere; the certificate carries
        # the cap the cells actually satisfy
        kind = "square"
        kk = max([delta] + [c.product for c in interior
                            if np.isfinite(c.product)])
    cert = _certify_cells(part, kind, delta, kk, cfg, field=field, ws=ws)
    return part, cert


def _advance(field, ws, sw, delta, cfg, snap, emit) -> Cell:
    """Produce the next cell of one directional sweep and move its cursor."""
    prof = field.profile
    sign, x, v_x = sw.sign, sw.x, sw.v_x
    bracket = _bracket_right(ws, x, v_x, delta) if sign > 0 \
        else _bracket_left(ws, x, v_x, delta)
    t = None
    if bracket is not None:
        tA, tB, gap, prior = bracket
        t0 = _surrogate_solve(ws, gap, x, v_x, prior, delta, sign, tA, tB)
        polished = _polish(field, ws, sw, t0, delta, cfg)
        if polished is not None:
            t, v_t, s_ref, met = polished
    if bracket is None or t is None:
        # remaining stretch never reaches the product: close out the sweep
        t, v_t = sw.end, sw.v_end
        cell_lo, cell_hi = (x, t) if sign > 0 else (t, x)
        s_ref = field.sup_refined(cell_lo, cell_hi, ws=ws)
        met = False
    if sign > 0 and sw.end - t <= snap:
        t, v_t = sw.end, sw.v_end
    if sign < 0 and t - sw.end <= snap:
        t, v_t = sw.end, sw.v_end
    if (t - x) * sign <= 0 or not np.isfinite(s_ref):
        # the sweep ran into a stretch where the product cannot be realized
        # by any finite cell (blow-up past the representable sup, or no
        # progress at float resolution); stop here and leave the rest of
        # the span as residual mass
        sw.stalled = True
        return None
    cell_lo, cell_hi = (x, t) if sign > 0 else (t, x)
    exempt = cell_lo == ws.lo or cell_hi == ws.hi
    cell = Cell(cell_lo, cell_hi, abs(v_t - v_x), s_ref, emit, exempt, met)
    sw.x, sw.v_x = t, v_t
    if t == sw.end:
        sw.done = True
    return cell


# --- certificates -------------------------------------------------------------


def _neighbor_union_ok(part, i, delta, rtol, field, ws):
    """Condition (b): some adjoining neighbor makes the union product >= delta."""
    cells = part.cells
    for j in (i - 1, i + 1):
        if 0 <= j < len(cells):
            lo = min(cells[i].left, cells[j].left)
            hi = max(cells[i].right, cells[j].right)
            v_un = cells[i].variation + cells[j].variation
            if field is not None:
                s_un = field.sup_refined(lo, hi, ws=ws)
            else:
                s_un = max(cells[i].sup_second, cells[j].sup_second)
            if s_un * v_un >= delta * (1 - rtol):
                return True
    return False


def _certify_cells(part, kind, delta, kk, cfg, field=None, ws=None,
                   sups=None, variations=None, drift=0.0):
    rtol = cfg.cell_match_rtol
    checks_a, checks_b = [], []
    for i, c in enumerate(part.cells):
        S = sups[i] if sups is not None else c.sup_second
        V = variations[i] if variations is not None else c.variation
        checks_a.append(bool(np.isfinite(S) and S * V <= kk * (1 + rtol)))
        if c.exempt:
            checks_b.append(True)
        elif kind == "round":
            checks_b.append(bool(S * V >= delta * (1 - rtol)))
        else:
            ok = S * V >= delta * (1 - rtol) or \
                _neighbor_union_ok(part, i, delta, rtol, field, ws)
            checks_b.append(bool(ok))
    return PartitionCertificate(kind, delta, kk, tuple(checks_a),
                                tuple(checks_b), drift)


def verify_partition(partition: GeneralizedPartition, kind: str, delta: float,
                     kk: float, field: CurvatureField,
                     config: Config | None = None) -> PartitionCertificate:
    """Re-evaluate every cell and check the bracket conditions from scratch.

    Raises CertificateFailure listing offending cells; on success returns
    the certificate with the re-evaluation drift recorded.
    """
    if kind not in ("round", "square"):
        raise InvalidParameter("kind must be 'round' or 'square'")
    cfg = config or field.config
    prof = field.profile
    cells = partition.cells
    lo, hi = partition.component
    for i in range(len(cells) - 1):
        if cells[i + 1].left != cells[i].right:
            raise CertificateFailure(
                f"cells {i} and {i + 1} do not share an endpoint",
                offenders=((i, "chain", 0.0),))
    ws = field.workspace(lo, hi)
    lefts = np.array([c.left for c in cells])
    rights = np.array([c.right for c in cells])
    v_l = np.atleast_1d(np.asarray(prof.value(lefts), dtype=float))
    v_r = np.atleast_1d(np.asarray(prof.value(rights), dtype=float))
    variations = np.maximum(v_r - v_l, 0.0)
    sups = np.array([field.sup_refined(c.left, c.right, ws=ws) for c in cells])
    drift = 0.0
    for c, S, V in zip(cells, sups, variations):
        if np.isfinite(S) and np.isfinite(c.sup_second):
            drift = max(drift, abs(S - c.sup_second) / max(S, c.sup_second, 1e-300))
        drift = max(drift, abs(V - c.variation) / max(V, c.variation, 1e-300))
    cert = _certify_cells(partition, kind, delta, kk, cfg, field=field, ws=ws,
                          sups=sups, variations=variations, drift=drift)
    if not cert.valid:
        offenders = []
        for i, (ok_a, ok_b) in enumerate(zip(cert.checks_a, cert.checks_b)):
            if not (ok_a and ok_b):
                reason = "a" if not ok_a else "b"
                offenders.append((i, reason, float(sups[i] * variations[i])))
        raise CertificateFailure(
            f"{len(offenders)} cell(s) violate the ({kind}) conditions",
            offenders=tuple(offenders))
    return cert


# --- sqrt-variation series ----------------------------------------------------


def sqrt_variation_sum(partition, config: Config = DEFAULT) -> SqrtSumResult:
    """Partial sums of sqrt(V) over cells, with a convergence verdict.

    Accepts one partition or an iterable of them (one per component).
    Partial sums are reported over cells sorted by decreasing variation; the
    emission order drives the budget-doubling growth signal; a power law
    fitted to the last decade of ranked cells supplies the tail estimate.
    """
    parts = [partition] if isinstance(partition, GeneralizedPartition) \
        else list(partition)
    if not parts:
        raise InvalidParameter("no partitions given")
    cells = [c for p in parts for c in p.cells]
    if not cells:
        raise InvalidParameter("partitions carry no cells")
    V = np.array([c.variation for c in cells], dtype=float)
    order_emit = np.argsort([c.emitted for c in cells], kind="stable")
    emission_sums = np.cumsum(np.sqrt(V[order_emit]))
    order_v = np.argsort(-V, kind="stable")
    sq = np.sqrt(V[order_v])
    partial = np.cumsum(sq)
    total = float(partial[-1])
    residual = float(sum(p.residual_variation for p in parts))
    residual_sqrt = math.sqrt(max(residual, 0.0))
    exhausted = all(p.exhausted for p in parts)

    pos = sq[sq > 0]
    q, amp = fit_rank_exponent(pos) if len(pos) >= 8 else (float("nan"), 0.0)

    n = len(emission_sums)
    if n >= 16:
        s4, s2, s1 = emission_sums[n // 4 - 1], emission_sums[n // 2 - 1], \
            emission_sums[-1]
        growth = (float(s2 / s4 - 1.0) if s4 > 0 else math.inf,
                  float(s1 / s2 - 1.0) if s2 > 0 else math.inf)
    else:
        growth = (0.0, 0.0)

    tail = math.inf
    if exhausted:
        tail = 0.0
    elif np.isfinite(q) and q > 1.0:
        tail = float(amp * len(pos) ** (1.0 - q) / (q - 1.0))

    # the fitted decay decides when it is decisive; the growth signal only
    # arbitrates the near-critical band, where slow convergent tails and
    # logarithmic divergence are otherwise indistinguishable.  A decisive
    # exponent carries the verdict when the leftover mass is small outright,
    # or when it is consistent with the fitted continuation: sqrt(residual)
    # never exceeds the sqrt-sum of any refinement of the leftover, so a
    # fitted tail far below it means the fit stopped describing the data.
    if exhausted and residual_sqrt <= 1e-12 * max(total, 1.0):
        verdict = "converges"
    elif not np.isfinite(q):
        verdict = "inconclusive"
    elif q <= config.sum_exponent_diverge:
        verdict = "diverges"
    elif q >= config.sum_exponent_converge and (
            residual_sqrt <= config.convergence_tail_frac * total
            or residual_sqrt <= 2.0 * tail):
        verdict = "converges"
    elif growth[0] > config.sum_growth_tol and growth[1] > config.sum_growth_tol:
        verdict = "diverges"
    else:
        verdict = "inconclusive"

    return SqrtSumResult(partial, emission_sums, total,
                         tail, float(q), growth, residual_sqrt, exhausted,
                         verdict)


# --- half-variation lower bounds ----------------------------------------------


def _system_value(system):
    return float(sum(math.sqrt(c.variation) for c in system))


def _admissible(field, ws, cell, delta, rtol):
    if cell.exempt:
        return True
    return cell.product >= delta * (1 - rtol)


def _greedy_system(part, field, ws, delta, rtol):
    """Admissible intervals harvested from one greedy partition.

    Interior cells that met the product target stand alone; runs of cells
    that fell short merge with neighbors until the union product clears
    delta, or are absorbed into an adjacent boundary interval.
    """
    out = []
    run = []

    def flush(run):
        if not run:
            return
        lo, hi = run[0].left, run[-1].right
        V = sum(c.variation for c in run)
        s_un = field.sup_refined(lo, hi, ws=ws)
        if np.isfinite(s_un) and s_un * V >= delta * (1 - rtol):
            out.append(Cell(lo, hi, V, s_un, len(out), False, False))
        elif out and out[-1].exempt and out[-1].right == lo:
            prev = out[-1]
            out[-1] = Cell(prev.left, hi, prev.variation + V,
                           max(prev.sup_second, s_un), prev.emitted, True,
                           False)

    for c in part.cells:
        if c.exempt or c.met_target or c.product >= delta * (1 - rtol):
            flush(run)
            run = []
            out.append(Cell(c.left, c.right, c.variation, c.sup_second,
                            len(out), c.exempt, c.met_target))
        else:
            run.append(c)
    flush(run)
    return out


def half_variation_lower_bound(curve: CurveSource, regular, delta: float,
                               search_budget: int,
                               config: Config = DEFAULT,
                               field: CurvatureField | None = None,
                               rng=None, candidate_systems=None
                               ) -> HalfVariationBound:
    """Best verified admissible-system sum found within the search budget.

    Candidates per component: the closure itself and its half split (both
    boundary-touching, hence unconstrained), greedy-partition cells with
    neighbor merges, randomized subdivisions, and any caller-supplied
    systems. Interior intervals failing the product test are dropped, so
    every reported value is a certified lower bound for the supremum.
    """
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    comps = list(regular.intervals) if isinstance(regular, IntervalSet) \
        else [(float(l), float(r)) for l, r in regular]
    if field is None:
        field = CurvatureField(curve, config=config)
    cfg = config
    prof = field.profile
    rtol = 10 * cfg.cell_match_rtol
    if rng is None:
        rng = np.random.default_rng(
            [cfg.seed, int(abs(delta) * 1e9) % (2 ** 31), int(search_budget)])

    v_edges = [(float(prof.value(l)), float(prof.value(r))) for l, r in comps]
    V_comp = [max(vr - vl, 0.0) for vl, vr in v_edges]
    V_total = sum(V_comp) or 1.0

    candidates = {}

    closures, splits = [], []
    for (l, r), (vl, vr), Vc in zip(comps, v_edges, V_comp):
        if Vc <= 0:
            continue
        closures.append(Cell(l, r, Vc, math.nan, len(closures), True, False))
        tm = float(prof.inverse(vl + 0.5 * Vc))
        if l < tm < r:
            splits.append(Cell(l, tm, 0.5 * Vc, math.nan, len(splits), True,
                               False))
            splits.append(Cell(tm, r, 0.5 * Vc, math.nan, len(splits), True,
                               False))
        else:
            splits.append(Cell(l, r, Vc, math.nan, len(splits), True, False))
    candidates["component_closures"] = closures
    candidates["boundary_splits"] = splits

    greedy_cells = []
    rand_cells = []
    n_rand = 3
    for (l, r), (vl, vr), Vc in zip(comps, v_edges, V_comp):
        if Vc <= 0:
            continue
        budget_c = max(8, int(search_budget * Vc / V_total))
        ws = field.workspace(l, r)
        if ws.sup_between(l, r) * Vc < delta:
            base = [Cell(l, r, Vc, math.nan, 0, True, False)]
            greedy_cells.extend(base)
            rand_cells.extend(base)
            continue
        part, _ = greedy_partition(curve, (l, r), delta, field=field,
                                   config=cfg, max_cells=budget_c)
        greedy_cells.extend(_greedy_system(part, field, ws, delta, rtol))
        # randomized subdivisions: cheap independent systems, best kept
        k = int(min(16, max(2, round(math.sqrt(budget_c)))))
        best_r = None
        for _ in range(n_rand):
            cuts = np.sort(rng.uniform(l, r, size=k))
            pts = np.unique(np.concatenate([[l], cuts, [r]]))
            vv = np.atleast_1d(np.asarray(prof.value(pts), dtype=float))
            sys_r = []
            for i in range(len(pts) - 1):
                V_i = float(max(vv[i + 1] - vv[i], 0.0))
                if V_i <= 0:
                    continue
                exempt = i == 0 or i == len(pts) - 2
                if exempt:
                    sys_r.append(Cell(float(pts[i]), float(pts[i + 1]), V_i,
                                      math.nan, i, True, False))
                    continue
                s_i = field.sup_refined(float(pts[i]), float(pts[i + 1]), ws=ws)
                if np.isfinite(s_i) and s_i * V_i >= delta * (1 - rtol):
                    sys_r.append(Cell(float(pts[i]), float(pts[i + 1]), V_i,
                                      s_i, i, False, False))
            if best_r is None or _system_value(sys_r) > _system_value(best_r):
                best_r = sys_r
        rand_cells.extend(best_r or [])
    candidates["greedy_merged"] = greedy_cells
    candidates["randomized"] = rand_cells

    if candidate_systems:
        for idx, system in enumerate(candidate_systems):
            kept = []
            for pair in system:
                lo_i, hi_i = float(pair[0]), float(pair[1])
                home = next(((l, r) for l, r in comps
                             if l <= lo_i < hi_i <= r), None)
                if home is None:
                    continue
                if kept and lo_i < kept[-1].right:
                    continue
                V_i = float(prof.variation_between(lo_i, hi_i))
                if V_i <= 0:
                    continue
                exempt = lo_i == home[0] or hi_i == home[1]
                if exempt:
                    kept.append(Cell(lo_i, hi_i, V_i, math.nan, len(kept),
                                     True, False))
                    continue
                s_i = field.sup_refined(lo_i, hi_i,
                                        ws=field.workspace(*home))
                if np.isfinite(s_i) and s_i * V_i >= delta * (1 - rtol):
                    kept.append(Cell(lo_i, hi_i, V_i, s_i, len(kept), False,
                                     False))
            candidates[f"supplied_{idx}"] = kept

    values = {name: _system_value(sys) for name, sys in candidates.items()}
    best_name = max(values, key=values.get)
    detail = {"values": values, "delta": float(delta),
              "search_budget": int(search_budget), "best": best_name}
    return HalfVariationBound(values[best_name], candidates[best_name], detail)


# --- a priori bound and helpers -------------------------------------------------


def wfin2_bound(sup_second: float, delta: float, total_variation: float) -> float:
    """A priori cap on admissible sqrt-variation sums for C2 curves whose
    derivative vanishes at the component endpoints."""
    M, V = float(sup_second), float(total_variation)
    if M < 0 or V < 0 or not delta > 0:
        raise InvalidParameter("needs M >= 0, V >= 0, delta > 0")
    return math.sqrt(M) + math.sqrt(2.0 * (M / delta + M)) + 2.0 * math.sqrt(V)


def suggest_delta(field: CurvatureField, component,
                  config: Config | None = None) -> float:
    """Target product putting roughly 256 cells on the component."""
    cfg = config or field.config
    lo, hi = float(component[0]), float(component[1])
    V = float(field.profile.variation_between(lo, hi))
    if V <= 0:
        return 0.0
    s_mid = field.point(0.5 * (lo + hi))
    if not np.isfinite(s_mid) or s_mid <= 0:
        ws = field.workspace(lo, hi)
        s_mid = ws.sup_between(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo))
        if not np.isfinite(s_mid) or s_mid <= 0:
            return 0.0
    return float(s_mid) * V / 256.0


# --- exports --------------------------------------------------------------------


def partition_to_json(partition: GeneralizedPartition) -> list:
    rtol = 1e-6
    out = []
    for c in partition.cells:
        adm = c.exempt or c.product >= partition.delta * (1 - rtol)
        out.append({"left": float(c.left), "right": float(c.right),
                    "V": float(c.variation),
                    "S": float(c.sup_second) if np.isfinite(c.sup_second)
                    else "inf",
                    "admissible": bool(adm)})
    return out


def partition_json(partition: GeneralizedPartition) -> str:
    return json.dumps(partition_to_json(partition))


def partial_sums_csv(result: SqrtSumResult) -> str:
    lines = ["cell_index,partial_sum"]
    lines += [f"{i},{float(s)!r}" for i, s in enumerate(result.partial_sums)]
    return "\n".join(lines) + "\n"
