"""Inversion of the trajectory field: state -> (s, tau, phase), value, feedback.

The disk splits into four quadrants, one per usable half-arc. The solver
works in the native formulas of the quadrant's arc:

* primary family: eliminating ``tau`` from the straight-line closed form
  leaves ``A sin s + C cos s = D``, solved exactly;
* rotation family: a 2-D Newton iteration in ``(s, tau - tau_s)``, seeded
  from a precomputed table of the canonical (first-quadrant) rotation paths.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .core import (TWO_PI, EvaderControls, GameParams, PursuerControls,
                   RealisticState, ReducedState, WorldPursuerControls,
                   to_reduced)
from .synthesis import (Costate, TrajectoryPhase, _primary_xy,
                        _rotation_jacobian, _rotation_xy, rotation_ends)

# states with |y| below this fraction of r_d are on the Dispersal Surface
AXIS_TOL = 1e-12
_RES_TOL = 1e-9  # accepted position residual, relative to r_d
_TAU_TOL = 1e-9  # slack on phase ranges, relative to the phase length


class OutsideDiskError(ValueError):
    """The reduced state is outside the detection disk (game already over)."""


class NoConvergenceError(RuntimeError):
    """No trajectory of either family reproduces the state."""


class Branch(enum.Enum):
    UNIQUE = "unique"
    DISPERSAL_UPPER = "dispersal_upper"
    DISPERSAL_LOWER = "dispersal_lower"


@dataclass(frozen=True)
class SynthesisResult:
    """Coordinates of a state on the optimal field.

    ``tau`` is the time-to-escape. ``switch_gap`` is the retro-time distance
    to the Transition Surface: ``tau_s - tau`` on a primary path (``inf``
    when the path never switches), ``tau - tau_s`` on a rotation path.
    """

    s: float
    tau: float
    phase: TrajectoryPhase
    branch: Branch
    evader: EvaderControls
    pursuer: PursuerControls
    costate: Costate
    switch_gap: float
    residual: float = 0.0

    @property
    def controls(self) -> tuple[EvaderControls, PursuerControls]:
        return self.evader, self.pursuer


# ----------------------------------------------------------------------------
# quadrant arcs


@dataclass(frozen=True)
class _Arc:
    sigma: int  # +1 backward escape (upper half), -1 forward (lower half)
    eps: int  # +1 right of the body y-axis, -1 left
    offset: float  # native s = offset + mult * canonical s
    mult: int


_ARCS = {
    (1, 1): _Arc(1, 1, 0.0, 1),
    (1, -1): _Arc(1, -1, TWO_PI, -1),
    (-1, 1): _Arc(-1, 1, math.pi, -1),
    (-1, -1): _Arc(-1, -1, math.pi, 1),
}


def _native(arc: _Arc, sc: float) -> float:
    return arc.offset + arc.mult * sc


def _canonical(arc: _Arc, s: float) -> float:
    """Canonical angle in ``(-pi, pi]`` of a native angle."""
    sc = arc.mult * (s - arc.offset)
    return math.remainder(sc, TWO_PI)


# ----------------------------------------------------------------------------
# per-parameter tables


class _Field:
    """Precomputed canonical rotation paths and seed lookup for one parameter set."""

    def __init__(self, params: GameParams, n_s: int = 400, n_frac: int = 40,
                 n_lookup: int = 160):
        self.params = params
        vr, vd, b, rd = params.v_r_max, params.v_d_max, params.b, params.r_d
        self.s_b = params.s_bup

        def g(s):
            # tau_s(s) - tau_i(s) sign, multiplied through by positive factors
            return vr * math.sin(s) * rd - b * (vr - vd * math.cos(s))

        self.s_t = brentq(g, 0.0, self.s_b, xtol=1e-15)
        s = np.linspace(self.s_t, self.s_b, n_s)
        d_axis, d_exit = rotation_ends(s, 1, 1, params)
        self.s_grid = s
        self.d_end = np.minimum(d_axis, d_exit)
        self.d_end[~np.isfinite(self.d_end)] = 0.0

        frac = np.linspace(0.0, 1.0, n_frac)
        ss = np.repeat(s, n_frac)
        dd = (self.d_end[:, None] * frac[None, :]).ravel()
        keep = np.repeat(self.d_end > 0.0, n_frac)
        ss, dd = ss[keep], dd[keep]
        x, y = _rotation_xy(ss, dd, 1, 1, params, np)
        self.table_sd = np.column_stack([ss, dd])
        self.tree = cKDTree(np.column_stack([x, y]))

        self.n_lookup = n_lookup
        self.h_lookup = rd / n_lookup
        c = (np.arange(n_lookup) + 0.5) * self.h_lookup
        cx, cy = np.meshgrid(c, c, indexing="ij")
        _, idx = self.tree.query(np.column_stack([cx.ravel(), cy.ravel()]))
        self.lookup = self.table_sd[idx].reshape(n_lookup, n_lookup, 2)

    def seed(self, qx: float, qy: float) -> tuple[float, float]:
        n = self.n_lookup
        i = min(int(qx / self.h_lookup), n - 1)
        j = min(int(qy / self.h_lookup), n - 1)
        sd = self.lookup[i, j]
        return float(sd[0]), float(sd[1])

    def seeds_array(self, qx: np.ndarray, qy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_lookup
        i = np.minimum((qx / self.h_lookup).astype(int), n - 1)
        j = np.minimum((qy / self.h_lookup).astype(int), n - 1)
        sd = self.lookup[i, j]
        return sd[..., 0].copy(), sd[..., 1].copy()

    def nearest_seeds(self, qx: float, qy: float, k: int = 24):
        _, idx = self.tree.query([qx, qy], k=min(k, len(self.table_sd)))
        return [tuple(self.table_sd[i]) for i in np.atleast_1d(idx)]

    def d_end_at(self, sc):
        return np.interp(sc, self.s_grid, self.d_end)

    def d_end_exact(self, sc: float) -> float:
        d_axis, d_exit = rotation_ends(np.array([sc]), 1, 1, self.params)
        return float(min(d_axis[0], d_exit[0]))


@lru_cache(maxsize=32)
def _field(params: GameParams) -> _Field:
    return _Field(params)


# ----------------------------------------------------------------------------
# per-family solvers (scalar)


def _primary_candidates(qx: float, qy: float, arc: _Arc, params: GameParams):
    """Valid ``(s, tau, gap)`` primary solutions through ``(qx, qy)`` on ``arc``."""
    vr, vd, rd, b = params.v_r_max, params.v_d_max, params.r_d, params.b
    sig = arc.sigma
    a = sig * vr * rd - vd * qy
    c = vd * qx
    d = sig * vr * qx
    r = math.hypot(a, c)
    ratio = d / r
    if abs(ratio) > 1.0 + 1e-12:
        return []
    ratio = max(-1.0, min(1.0, ratio))
    base = math.asin(ratio)
    phi = math.atan2(c, a)
    s_b = params.s_bup
    out = []
    for s in (base - phi, math.pi - base - phi):
        sc = _canonical(arc, s)
        if sc < -1e-12 or sc > s_b + 1e-12:
            continue
        sc = min(max(sc, 0.0), s_b)
        s = _native(arc, sc)
        sn, cs = math.sin(s), math.cos(s)
        wx, wy = vd * sn, vd * cs - sig * vr
        px, py = rd * sn, rd * cs
        tau = ((qx - px) * wx + (qy - py) * wy) / (wx * wx + wy * wy)
        tau_i = abs(rd * cs / wy)
        tau_s = abs(b * cs / (vr * sn)) if sn != 0.0 else math.inf
        end = min(tau_i, tau_s)
        slack = _TAU_TOL * (1.0 + end)
        if tau < -slack or tau > end + slack:
            continue
        tau = min(max(tau, 0.0), end)
        x, y = _primary_xy(s, tau, sig, params)
        res = math.hypot(x - qx, y - qy)
        if res > _RES_TOL * rd:
            continue
        out.append((s, tau, tau_s - tau, res))
    return out


def _newton_rotation(qx, qy, arc: _Arc, sc, d, params: GameParams,
                     fld: _Field, max_iter: int = 40):
    """Damped Newton on the canonical angle and post-switch retro-time."""
    sig, eps, m = arc.sigma, arc.eps, arc.mult
    lo, hi = fld.s_t, fld.s_b
    dmax = 0.5 / params.turn_rate
    tol = 1e-13 * (1.0 + params.r_d)
    res = math.inf
    for _ in range(max_iter):
        s = _native(arc, sc)
        x, y, xs, ys, xd, yd = _rotation_jacobian(s, d, sig, eps, params)
        fx, fy = x - qx, y - qy
        res = math.hypot(fx, fy)
        if res <= tol:
            break
        xs, ys = m * xs, m * ys
        det = xs * yd - xd * ys
        if det == 0.0:
            break
        ds = (fx * yd - xd * fy) / det
        dd = (xs * fy - fx * ys) / det
        scale = max(abs(ds) / 0.1, abs(dd) / dmax, 1.0)
        sc = min(max(sc - ds / scale, lo), hi)
        d = max(d - dd / scale, 0.0)
    return sc, d, res


def _rotation_candidate(qx, qy, arc: _Arc, params: GameParams, fld: _Field,
                        hint=None):
    seeds = [fld.seed(abs(qx), abs(qy))]
    if hint is not None:
        seeds.insert(0, hint)
    tried_tree = False
    while True:
        for sc0, d0 in seeds:
            sc, d, res = _newton_rotation(qx, qy, arc, sc0, d0, params, fld)
            if res > _RES_TOL * params.r_d:
                continue
            if sc < fld.s_t - 1e-12 or sc > fld.s_b + 1e-12:
                continue
            d_end = float(fld.d_end_at(sc))
            if d > 0.98 * d_end - 1e-9:
                d_end = fld.d_end_exact(sc)
            if d > d_end * (1.0 + _TAU_TOL) + 1e-9:
                continue
            return _native(arc, sc), d, res
        if tried_tree:
            return None
        tried_tree = True
        seeds = fld.nearest_seeds(abs(qx), abs(qy))


def _switch_tau_native(s: float, params: GameParams) -> float:
    return abs(params.b * math.cos(s) / (params.v_r_max * math.sin(s)))


def _result(s, tau, phase, branch, gap, res, arc: _Arc, params: GameParams):
    vr, vd = params.v_r_max, params.v_d_max
    sig, eps = arc.sigma, arc.eps
    if phase is TrajectoryPhase.PRIMARY:
        u = EvaderControls(-sig * vr, -sig * vr)
        phi = s
    else:
        u = EvaderControls(sig * eps * vr, -sig * eps * vr)
        phi = s + sig * eps * params.turn_rate * gap
    den = vr * abs(math.cos(s)) - vd
    k = 1.0 / den if den > 0.0 else 1.0
    lam = Costate(-k * math.sin(phi), -k * math.cos(phi))
    return SynthesisResult(s=s % TWO_PI, tau=tau, phase=phase, branch=branch,
                           evader=u, pursuer=PursuerControls(vd, phi + math.pi),
                           costate=lam, switch_gap=gap, residual=res)


def _solve_on_arc(qx: float, qy: float, arc: _Arc, params: GameParams,
                  branch: Branch, hint: SynthesisResult | None = None) -> SynthesisResult:
    best = None
    prim = _primary_candidates(qx, qy, arc, params)
    if prim:
        s, tau, gap, res = min(prim, key=lambda c: c[1])
        best = (tau, TrajectoryPhase.PRIMARY, s, gap, res)
        # near the Transition Surface a rotation path may also reach the state
        if gap > 1e-6 * (1.0 + tau):
            return _result(s, tau, TrajectoryPhase.PRIMARY, branch, gap, res, arc, params)
    seed = None
    if hint is not None and hint.phase is TrajectoryPhase.ROTATION:
        seed = (_canonical(arc, hint.s), hint.switch_gap)
    rot = _rotation_candidate(qx, qy, arc, params, _field(params), seed)
    if rot is not None:
        s, d, res = rot
        tau = _switch_tau_native(s, params) + d
        if best is None or tau < best[0]:
            best = (tau, TrajectoryPhase.ROTATION, s, d, res)
    if best is None:
        raise NoConvergenceError(
            f"no optimal path found through ({qx:.17g}, {qy:.17g}) for {params}")
    tau, phase, s, gap, res = best
    return _result(s, tau, phase, branch, gap, res, arc, params)


# ----------------------------------------------------------------------------
# public API


def synthesize(xr: ReducedState, params: GameParams, branch: str | None = None,
               hint: SynthesisResult | None = None) -> SynthesisResult:
    """Locate ``xr`` on the optimal trajectory field.

    Parameters
    ----------
    xr : ReducedState
        Query state, inside or on the detection circle.
    params : GameParams
    branch : {None, 'upper', 'lower'}
        Only used on the Dispersal Surface (the x-axis). ``None`` picks the
        upper branch, except at the origin where the forward escape
        ``s = pi`` is chosen.
    hint : SynthesisResult, optional
        Solution at a nearby state, used only to warm-start the iteration.

    Raises
    ------
    OutsideDiskError
        If ``xr`` lies outside the detection disk.
    NoConvergenceError
        If neither family reproduces ``xr``.
    """
    qx, qy = xr.x, xr.y
    rd = params.r_d
    if qx * qx + qy * qy > rd * rd * (1.0 + 1e-12):
        raise OutsideDiskError(f"state ({qx}, {qy}) is outside r_d={rd}")
    if branch not in (None, "upper", "lower"):
        raise ValueError(f"branch must be None, 'upper' or 'lower', got {branch!r}")

    eps = 1 if qx >= 0.0 else -1
    if abs(qy) <= AXIS_TOL * rd:
        if qx == 0.0 and branch is None:
            branch = "lower"
        sig = -1 if branch == "lower" else 1
        br = Branch.DISPERSAL_LOWER if sig < 0 else Branch.DISPERSAL_UPPER
        qy = 0.0
    else:
        sig = 1 if qy > 0.0 else -1
        br = Branch.UNIQUE
    return _solve_on_arc(qx, qy, _ARCS[(sig, eps)], params, br, hint)


def value(xr: ReducedState, params: GameParams) -> float:
    """Time-to-escape under optimal play."""
    return synthesize(xr, params).tau


def feedback(rs: RealisticState, params: GameParams,
             branch: str | None = None) -> tuple[EvaderControls, WorldPursuerControls]:
    """Optimal controls for a world-frame state."""
    res = synthesize(to_reduced(rs), params, branch=branch)
    return res.evader, res.pursuer.to_world(rs.theta_e)


# ----------------------------------------------------------------------------
# vectorised canonical solve and partition maps


def _synthesize_canonical(qx: np.ndarray, qy: np.ndarray, params: GameParams):
    """Vectorised solve for first-quadrant points.

    Returns ``(s, tau, phase, gap)`` with phase codes 1 primary, 2 rotation.
    Every element is iterated independently, so results do not depend on how
    the input is batched.
    """
    vr, vd, rd, b = params.v_r_max, params.v_d_max, params.r_d, params.b
    fld = _field(params)
    n = qx.size
    s_out = np.full(n, np.nan)
    tau_out = np.full(n, np.inf)
    gap_out = np.full(n, np.nan)
    phase = np.zeros(n, dtype=np.int8)

    a = vr * rd - vd * qy
    c = vd * qx
    d = vr * qx
    ratio = np.clip(d / np.hypot(a, c), -1.0, 1.0)
    base = np.arcsin(ratio)
    phi = np.arctan2(c, a)
    for s in (base - phi, math.pi - base - phi):
        s = np.remainder(s + math.pi, TWO_PI) - math.pi
        ok = (s >= -1e-12) & (s <= fld.s_b + 1e-12)
        s = np.clip(s, 0.0, fld.s_b)
        sn, cs = np.sin(s), np.cos(s)
        wx, wy = vd * sn, vd * cs - vr
        tau = ((qx - rd * sn) * wx + (qy - rd * cs) * wy) / (wx * wx + wy * wy)
        tau_i = rd * cs / (vr - vd * cs)
        with np.errstate(divide="ignore"):
            tau_s = np.where(sn > 0.0, b * cs / (vr * np.where(sn > 0, sn, 1.0)), np.inf)
        end = np.minimum(tau_i, tau_s)
        slack = _TAU_TOL * (1.0 + end)
        ok &= (tau >= -slack) & (tau <= end + slack)
        tau = np.clip(tau, 0.0, end)
        x, y = _primary_xy(s, tau, 1, params, np)
        ok &= np.hypot(x - qx, y - qy) <= _RES_TOL * rd
        better = ok & (tau < tau_out)
        s_out[better] = s[better]
        tau_out[better] = tau[better]
        gap_out[better] = (tau_s - tau)[better]
        phase[better] = 1

    need = (phase == 0) | ((phase == 1) & (gap_out <= 1e-6 * (1.0 + tau_out)))
    idx = np.nonzero(need)[0]
    if idx.size:
        px, py = qx[idx], qy[idx]
        sc, dd = fld.seeds_array(px, py)
        active = np.ones(idx.size, dtype=bool)
        res = np.full(idx.size, np.inf)
        dmax = 0.5 / params.turn_rate
        tol = 1e-13 * (1.0 + rd)
        for _ in range(40):
            if not active.any():
                break
            k = np.nonzero(active)[0]
            x, y, xs, ys, xd, yd = _rotation_jacobian(sc[k], dd[k], 1, 1, params, np)
            fx, fy = x - px[k], y - py[k]
            r = np.hypot(fx, fy)
            res[k] = r
            done = r <= tol
            det = xs * yd - xd * ys
            done |= det == 0.0
            det = np.where(det == 0.0, 1.0, det)
            ds = (fx * yd - xd * fy) / det
            dq = (xs * fy - fx * ys) / det
            scale = np.maximum(np.maximum(np.abs(ds) / 0.1, np.abs(dq) / dmax), 1.0)
            new_s = np.clip(sc[k] - ds / scale, fld.s_t, fld.s_b)
            new_d = np.maximum(dd[k] - dq / scale, 0.0)
            upd = k[~done]
            sc[upd] = new_s[~done]
            dd[upd] = new_d[~done]
            active[k[done]] = False
        ok = res <= _RES_TOL * rd
        ok &= (sc >= fld.s_t - 1e-12) & (sc <= fld.s_b + 1e-12)
        d_end = fld.d_end_at(sc)
        close = ok & (dd > 0.98 * d_end - 1e-9)
        if close.any():
            d_axis, d_exit = rotation_ends(sc[close], 1, 1, params)
            d_end[close] = np.minimum(d_axis, d_exit)
        ok &= dd <= d_end * (1.0 + _TAU_TOL) + 1e-9
        ts = b * np.cos(sc) / (vr * np.sin(sc))
        tau_r = ts + dd
        better = ok & (tau_r < tau_out[idx])
        sel = idx[better]
        s_out[sel] = sc[better]
        tau_out[sel] = tau_r[better]
        gap_out[sel] = dd[better]
        phase[sel] = 2
        # fall back to the scalar solver (tree-seeded) for the rare misses
        for j in idx[~better & (phase[idx] == 0)]:
            r = _solve_on_arc(float(qx[j]), float(qy[j]), _ARCS[(1, 1)], params, Branch.UNIQUE)
            s_out[j] = r.s
            tau_out[j] = r.tau
            gap_out[j] = r.switch_gap
            phase[j] = 1 if r.phase is TrajectoryPhase.PRIMARY else 2
    return s_out, tau_out, phase, gap_out


class PartitionClass(enum.IntEnum):
    OUTSIDE = 0
    PRIMARY = 1
    ROTATION = 2
    TRANSITION = 3
    DISPERSAL = 4


@dataclass(frozen=True)
class PartitionMap:
    """Cell classes over ``[-r_d, r_d]^2``; row 0 is the top (max y) row."""

    codes: np.ndarray
    resolution: int
    params: GameParams
    tau: np.ndarray = field(repr=False, compare=False)

    @property
    def cell_width(self) -> float:
        return 2.0 * self.params.r_d / self.resolution

    def count(self, cls: PartitionClass) -> int:
        return int(np.count_nonzero(self.codes == cls))

    def fractions(self) -> dict[PartitionClass, float]:
        n = self.codes.size
        return {c: self.count(c) / n for c in PartitionClass}

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        h = self.cell_width
        c = -self.params.r_d + (np.arange(self.resolution) + 0.5) * h
        return c, c[::-1]


def _classify_rows(y_rows: np.ndarray, xc: np.ndarray, h: float,
                   params: GameParams) -> tuple[np.ndarray, np.ndarray]:
    rd = params.r_d
    X, Y = np.meshgrid(xc, y_rows)
    codes = np.zeros(X.shape, dtype=np.int8)
    taus = np.full(X.shape, np.nan)
    inside = X * X + Y * Y <= rd * rd
    qx, qy = np.abs(X[inside]), np.abs(Y[inside])
    s, tau, phase, gap = _synthesize_canonical(qx, qy, params)
    vr, vd = params.v_r_max, params.v_d_max
    sn, cs = np.sin(s), np.cos(s)
    # path speed at the switch, converts the retro-time gap to a distance
    speed_p = np.hypot(vd * sn, vd * cs - vr)
    _, _, _, _, xd, yd = _rotation_jacobian(np.where(phase == 2, s, 0.5), 0.0, 1, 1, params, np)
    speed_r = np.hypot(xd, yd)
    dist = np.where(phase == 1, gap * speed_p, gap * speed_r)
    cls = np.where(phase == 1, PartitionClass.PRIMARY, PartitionClass.ROTATION).astype(np.int8)
    cls[dist < 0.5 * h] = PartitionClass.TRANSITION
    y_in = Y[inside]
    cls[(y_in - 0.5 * h <= 0.0) & (y_in + 0.5 * h > 0.0)] = PartitionClass.DISPERSAL
    codes[inside] = cls
    taus[inside] = tau
    return codes, taus


def rasterize_partition(params: GameParams, resolution: int,
                        workers: int = 1) -> PartitionMap:
    """Classify every cell of the square ``[-r_d, r_d]^2`` by its cell centre.

    Rows are processed in independent chunks; the map is bit-identical for any
    ``workers``.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    h = 2.0 * params.r_d / resolution
    c = -params.r_d + (np.arange(resolution) + 0.5) * h
    yc = c[::-1]
    xc = c
    _field(params)  # build tables once, outside the workers
    chunks = np.array_split(np.arange(resolution), max(1, min(workers * 4, resolution)))

    def job(rows):
        return _classify_rows(yc[rows], xc, h, params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, chunks))
    else:
        parts = [job(r) for r in chunks]
    codes = np.vstack([p[0] for p in parts])
    taus = np.vstack([p[1] for p in parts])
    return PartitionMap(codes=codes, resolution=resolution, params=params, tau=taus)
