"""Numerical oracles for the closed-form solution.

Nothing here evaluates the closed-form trajectory formulas while integrating.
The retro-time integrator advances state and costate together and derives the
controls from the running costate at every RK4 stage, exactly as the min-max
conditions prescribe. Closed forms only enter as the thing being compared.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from types import SimpleNamespace

import numpy as np

from .core import (EvaderControls, GameParams, PursuerControls, ReducedState,
                   TWO_PI)
from .inverse import synthesize
from .synthesis import (Costate, DispersalTieError,
                        _primary_xy, _rotation_xy, hamiltonian,
                        optimal_controls, trajectory)
from .terminal import NotUsableError, bup_angles, classify_boundary

SWEEP_RHO_V = (0.0, 0.2, 0.4, 0.6, 0.8)
SWEEP_RHO_L = (2.0, 4.0, 6.0, 8.0)
TOL_POSITION = 1e-6
TOL_HAMILTONIAN = 1e-9
TOL_SADDLE = 1e-9
_TIE = 1e-13  # below this the previous control is kept (hysteresis)


# ----------------------------------------------------------------------------
# batched retro-time integration of state + costate


def _controls(st, vr, b, prev1, prev2):
    x, y, lx, ly = st
    a = (-y * lx + x * ly) / b
    s1 = a - ly
    s2 = -a - ly
    u1 = np.where(np.abs(s1) <= _TIE, prev1, -np.sign(s1) * vr)
    u2 = np.where(np.abs(s2) <= _TIE, prev2, -np.sign(s2) * vr)
    return u1, u2, s1, s2


def _rhs(st, u1, u2, vd, b):
    x, y, lx, ly = st
    w = (u2 - u1) / (2.0 * b)
    g = np.hypot(lx, ly)
    out = np.empty_like(st)
    out[0] = -(w * y + vd * lx / g)
    out[1] = w * x + 0.5 * (u1 + u2) - vd * ly / g
    out[2] = -w * ly
    out[3] = w * lx
    return out


def _rk4(st, h, vr, vd, b, prev, frozen=None):
    """One RK4 step of the stacked ``(x, y, lx, ly)`` array.

    Controls come from the costate at every stage unless ``frozen``.
    """
    def f(z):
        if frozen is None:
            u1, u2 = _controls(z, vr, b, prev[0], prev[1])[:2]
        else:
            u1, u2 = frozen
        return _rhs(z, u1, u2, vd, b)

    k1 = f(st)
    k2 = f(st + 0.5 * h * k1)
    k3 = f(st + 0.5 * h * k2)
    k4 = f(st + h * k3)
    return st + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _RetroBatch:
    """Vectorised retro integrator over many (params, s) pairs.

    A step in which a switching function changes sign is split at the
    crossing (found by bisection with the pre-switch controls frozen), so
    each RK4 stage sees smooth dynamics. An exact tie at the start of a step
    is resolved by the sign the switching function takes just after it.
    """

    def __init__(self, x, y, lx, ly, u1, u2, vr, vd, b):
        self.st = np.array([x, y, lx, ly], dtype=float)
        n = self.st.shape[1]
        self.u = (np.array(u1, dtype=float).reshape(n), np.array(u2, dtype=float).reshape(n))
        self.vr, self.vd, self.b = (np.broadcast_to(np.asarray(a, dtype=float), (n,)).copy()
                                    for a in (vr, vd, b))

    @property
    def x(self):
        return self.st[0]

    @property
    def y(self):
        return self.st[1]

    def _resolve_ties(self, h, s1, s2):
        tie = (np.abs(s1) <= _TIE) | (np.abs(s2) <= _TIE)
        if not tie.any():
            return
        idx = np.nonzero(tie)[0]
        sub = self.st[:, idx]
        p1, p2 = self.u[0][idx], self.u[1][idx]
        probe = sub + 1e-6 * h * _rhs(sub, p1, p2, self.vd[idx], self.b[idx])
        u1, u2, _, _ = _controls(probe, self.vr[idx], self.b[idx], p1, p2)
        self.u[0][idx], self.u[1][idx] = u1, u2

    def step(self, h: float):
        vr, vd, b = self.vr, self.vd, self.b
        _, _, s1a, s2a = _controls(self.st, vr, b, *self.u)
        self._resolve_ties(h, s1a, s2a)
        st, (p1, p2) = self.st, self.u
        new = _rk4(st, h, vr, vd, b, (p1, p2))
        u1n, u2n, s1b, s2b = _controls(new, vr, b, p1, p2)
        flip = ((np.abs(s1a) > _TIE) & (s1a * s1b < 0.0)) | \
               ((np.abs(s2a) > _TIE) & (s2a * s2b < 0.0))
        if flip.any():
            idx = np.nonzero(flip)[0]
            sub = st[:, idx]
            pars = (vr[idx], vd[idx], b[idx])
            fro = (p1[idx], p2[idx])
            sa = (s1a[idx], s2a[idx])
            lo = np.zeros(idx.size)
            hi = np.full(idx.size, h)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                mst = _rk4(sub, mid, *pars, fro, frozen=fro)
                _, _, m1, m2 = _controls(mst, pars[0], pars[2], *fro)
                crossed = (sa[0] * m1 < 0.0) | (sa[1] * m2 < 0.0)
                hi = np.where(crossed, mid, hi)
                lo = np.where(crossed, lo, mid)
            mid_st = _rk4(sub, hi, *pars, fro, frozen=fro)
            # post-switch controls: pre-switch values with the crossed wheel flipped
            n1 = np.where(sa[0] * s1b[idx] < 0.0, -fro[0], fro[0])
            n2 = np.where(sa[1] * s2b[idx] < 0.0, -fro[1], fro[1])
            rest = _rk4(mid_st, h - hi, *pars, (n1, n2))
            new[:, idx] = rest
            u1n[idx], u2n[idx] = _controls(rest, pars[0], pars[2], n1, n2)[:2]
        self.st = new
        self.u = (u1n, u2n)


@dataclass(frozen=True)
class NumericTrajectory:
    """Retro-integrated reduced state and costate on a uniform ``tau`` grid."""

    s: float
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    u1: np.ndarray
    u2: np.ndarray


def _terminal_batch(s, vr, vd, rd, scaled=True):
    s = np.asarray(s, dtype=float)
    c = np.cos(s)
    k = 1.0 / (vr * np.abs(c) - vd) if scaled else np.ones_like(s)
    u = -np.sign(c) * vr
    return rd * np.sin(s), rd * c, -k * np.sin(s), -k * c, u, u


def retro_integrate_numeric(s: float, tau_total: float, params: GameParams,
                            dt: float = 1e-4) -> NumericTrajectory:
    """RK4 retro-integration of state and costate from the usable part at ``s``.

    Starts from the terminal data (position on the target circle, costate
    along the inward normal) and never uses the closed-form paths.
    """
    if not classify_boundary(s, params).usable:
        raise NotUsableError(f"s={s} is not in the usable part")
    vr, vd, b, rd = params.v_r_max, params.v_d_max, params.b, params.r_d
    x, y, lx, ly, u1, u2 = _terminal_batch(np.array([s]), vr, vd, rd)
    bat = _RetroBatch(x, y, lx, ly, u1, u2, vr, vd, b)
    n = int(math.floor(tau_total / dt + 1e-9))
    out = np.empty((n + 1, 6))
    out[0, :4], out[0, 4], out[0, 5] = bat.st[:, 0], bat.u[0][0], bat.u[1][0]
    for k in range(1, n + 1):
        bat.step(dt)
        out[k, :4], out[k, 4], out[k, 5] = bat.st[:, 0], bat.u[0][0], bat.u[1][0]
    return NumericTrajectory(float(s), np.arange(n + 1) * dt, *out.T)


# ----------------------------------------------------------------------------
# sweep


def sweep_angles(params: GameParams, n_per_arc: int = 16) -> np.ndarray:
    """``n_per_arc`` interior angles on each usable arc, away from the BUP."""
    sb = params.s_bup
    frac = (np.arange(n_per_arc) + 0.5) / n_per_arc * 2.0 - 1.0
    back = np.mod(frac * sb, TWO_PI)
    fwd = math.pi + frac * sb
    return np.concatenate([back, fwd])


def sweep_params(rho_v=SWEEP_RHO_V, rho_l=SWEEP_RHO_L) -> list[GameParams]:
    return [GameParams.from_ratios(rv, rl) for rv in rho_v for rl in rho_l]


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: dict = field(default_factory=dict)


def closed_form_deviation(cases: list[tuple[GameParams, float]], tau_max: float = 5.0,
                          dt: float = 1e-4) -> tuple[float, np.ndarray]:
    """Max distance between integrated and closed-form paths, per case.

    Each case is compared on ``[0, min(tau_max, end)]`` where ``end`` is the
    retro-time at which its closed-form path stops (x-axis or disk exit).
    """
    n = len(cases)
    s = np.array([c[1] for c in cases])
    vr = np.array([c[0].v_r_max for c in cases])
    vd = np.array([c[0].v_d_max for c in cases])
    b = np.array([c[0].b for c in cases])
    rd = np.array([c[0].r_d for c in cases])
    ends = np.array([trajectory(sv, tau_max, p, dt=tau_max).end_tau for p, sv in cases])

    sig = np.where(np.cos(s) > 0.0, 1.0, -1.0)
    eps = np.where(np.sin(s) >= 0.0, 1.0, -1.0)
    sn = np.sin(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        ts = np.where(sn != 0.0, np.abs(b * np.cos(s) / (vr * np.where(sn != 0.0, sn, 1.0))), np.inf)
    cf = SimpleNamespace(v_r_max=vr, v_d_max=vd, b=b, r_d=rd, turn_rate=vr / b)

    bat = _RetroBatch(*_terminal_batch(s, vr, vd, rd), vr, vd, b)
    dev = np.zeros(n)
    n_steps = int(math.ceil(tau_max / dt - 1e-9))
    for k in range(1, n_steps + 1):
        bat.step(dt)
        tau = k * dt
        live = tau <= ends + 1e-12
        if not live.any():
            break
        px, py = _primary_xy(s, tau, sig, cf, np)
        rot = live & (tau > ts)
        if rot.any():
            d = np.where(rot, tau - np.where(np.isfinite(ts), ts, 0.0), 0.0)
            rx, ry = _rotation_xy(np.where(rot, s, 0.5), d, sig, eps, cf, np)
            px = np.where(rot, rx, px)
            py = np.where(rot, ry, py)
        err = np.hypot(bat.x - px, bat.y - py)
        dev = np.where(live, np.maximum(dev, err), dev)
    return float(dev.max()), dev


def hamiltonian_residual(cases: list[tuple[GameParams, float]], tau_max: float = 5.0,
                         dt: float = 1e-3) -> tuple[float, int]:
    """Max ``|H|`` over every sample of the closed-form trajectories."""
    worst, count = 0.0, 0
    for p, s in cases:
        tr = trajectory(s, tau_max, p, dt=dt)
        w = (tr.u2 - tr.u1) / (2.0 * p.b)
        fx = w * tr.y + tr.v1 * np.sin(tr.v2)
        fy = -w * tr.x - 0.5 * (tr.u1 + tr.u2) + tr.v1 * np.cos(tr.v2)
        h = tr.lambda_x * fx + tr.lambda_y * fy + 1.0
        worst = max(worst, float(np.max(np.abs(h))))
        count += len(tr)
    return worst, count


# ----------------------------------------------------------------------------
# pointwise saddle check


@dataclass
class SaddleReport:
    h_star: float
    min_evader_h: float
    max_pursuer_h: float
    controls_match: bool | None
    tol: float

    @property
    def passed(self) -> bool:
        return (abs(self.h_star) <= self.tol and self.min_evader_h >= -self.tol
                and self.max_pursuer_h <= self.tol and self.controls_match is not False)


def local_saddle_check(xr: ReducedState, params: GameParams, n_dirs: int = 16,
                       costate: Costate | None = None, tol: float = TOL_SADDLE) -> SaddleReport:
    """Grid test of ``min_u max_v H = 0`` at a state of the optimal field.

    The controls are the synthesized ones. ``costate`` overrides the
    synthesized costate (a wrong one should make the report fail).
    """
    res = synthesize(xr, params)
    lam = res.costate if costate is None else costate
    u_star, v_star = res.evader, res.pursuer
    try:
        ue, ve = optimal_controls(xr, lam, params)
        match = (ue == u_star) and math.isclose(
            math.cos(ve.v2 - v_star.v2), 1.0, abs_tol=1e-12)
    except DispersalTieError:
        match = None
    h_star = hamiltonian(xr, lam, u_star, v_star, params)
    vr, vd = params.v_r_max, params.v_d_max
    grid = np.linspace(-vr, vr, n_dirs)
    h_ev = min(hamiltonian(xr, lam, EvaderControls(a, c), v_star, params)
               for a in grid for c in grid)
    angles = np.linspace(0.0, TWO_PI, n_dirs, endpoint=False)
    speeds = np.linspace(0.0, vd, max(2, n_dirs // 4))
    h_pu = max(hamiltonian(xr, lam, u_star, PursuerControls(sp, a), params)
               for sp in speeds for a in angles)
    return SaddleReport(h_star, h_ev, h_pu, match, tol)


# ----------------------------------------------------------------------------
# barrier probe


@dataclass
class BarrierReport:
    params: GameParams
    angles: tuple[float, ...]
    initial_growth: tuple[float, ...]
    exit_step: tuple[int | None, ...]
    max_steps: int
    max_radius_change: tuple[float, ...]  # max |r - r_d| over the probe window

    @property
    def passed(self) -> bool:
        return all(g > 0.0 for g in self.initial_growth) and all(
            e is not None and e <= self.max_steps for e in self.exit_step)


def barrier_probe(params: GameParams, dt: float = 1e-4, max_steps: int = 10) -> BarrierReport:
    """Retro-integrate from the four BUP angles and watch the radius.

    The costate starts as the unit inward normal (the Hamiltonian-zeroing
    scale is unbounded at the BUP). Where the switching functions tie at
    ``tau = 0`` (only when ``rho_v = 0``) the control is the one they select
    just after; the translation of the adjacent usable arc is the fallback.
    """
    angles = bup_angles(params)
    sides = np.array([1.0, -1.0, -1.0, 1.0])  # backward, forward, forward, backward
    s = np.array(angles)
    vr, vd, b, rd = params.v_r_max, params.v_d_max, params.b, params.r_d
    x, y, lx, ly = rd * np.sin(s), rd * np.cos(s), -np.sin(s), -np.cos(s)
    u0 = -sides * vr
    # terminal control from the switching functions, tie broken by arc side
    u1, u2, _, _ = _controls(np.array([x, y, lx, ly]), vr, b, u0, u0)
    bat = _RetroBatch(x, y, lx, ly, u1, u2, vr, vd, b)
    r0 = x * x + y * y
    growth = None
    exit_step = [None] * 4
    dr = np.zeros(4)
    for k in range(1, max_steps + 1):
        bat.step(dt)
        r2 = bat.x ** 2 + bat.y ** 2
        dr = np.maximum(dr, np.abs(np.sqrt(r2) - rd))
        if growth is None:
            growth = (r2 - r0) / dt
        for i in range(4):
            if exit_step[i] is None and r2[i] > rd * rd:
                exit_step[i] = k
    return BarrierReport(params, tuple(float(a) for a in angles),
                         tuple(float(g) for g in growth), tuple(exit_step), max_steps,
                         tuple(float(d) for d in dr))


# ----------------------------------------------------------------------------
# full report


@dataclass
class VerificationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str)


def run_verification(rho_v=SWEEP_RHO_V, rho_l=SWEEP_RHO_L, s_values=None,
                     n_per_arc: int = 16, tol: float | None = None,
                     dt: float = 1e-4, tau_max: float = 5.0,
                     n_saddle: int = 8) -> VerificationReport:
    """Run every oracle over a parameter sweep.

    ``tol`` replaces all default tolerances (useful to force failures).
    ``s_values`` restricts the usable angles; unusable ones are skipped.
    """
    tol_pos = TOL_POSITION if tol is None else tol
    tol_h = TOL_HAMILTONIAN if tol is None else tol
    tol_sad = TOL_SADDLE if tol is None else tol
    plist = sweep_params(rho_v, rho_l)
    cases = []
    for p in plist:
        angs = sweep_angles(p, n_per_arc) if s_values is None else \
            [sv for sv in s_values if classify_boundary(sv, p).usable]
        cases += [(p, float(sv)) for sv in angs]
    checks = []

    dev, per = closed_form_deviation(cases, tau_max, dt)
    checks.append(CheckResult("closed_form_vs_numeric", dev, tol_pos, dev < tol_pos,
                              {"cases": len(cases), "dt": dt, "tau_max": tau_max}))

    hres, nsamp = hamiltonian_residual(cases, tau_max)
    checks.append(CheckResult("hamiltonian_residual", hres, tol_h, hres < tol_h,
                              {"samples": nsamp}))

    worst, fails = 0.0, 0
    rng = np.random.default_rng(0)
    for p in plist:
        for _ in range(n_saddle):
            r = p.r_d * math.sqrt(rng.uniform(0.01, 0.95))
            a = rng.uniform(0.0, TWO_PI)
            rep = local_saddle_check(ReducedState(r * math.sin(a), r * math.cos(a)), p,
                                     tol=tol_sad)
            worst = max(worst, abs(rep.h_star), -rep.min_evader_h, rep.max_pursuer_h)
            fails += not rep.passed
    checks.append(CheckResult("local_saddle", worst, tol_sad, fails == 0,
                              {"states": n_saddle * len(plist), "failures": fails}))

    bad = []
    for p in plist:
        rep = barrier_probe(p)
        if not rep.passed:
            bad.append({"rho_v": p.rho_v, "rho_l": p.rho_l, "exit_step": rep.exit_step,
                        "max_radius_change": rep.max_radius_change})
    checks.append(CheckResult("barrier_probe", float(len(bad)), 0.0, not bad,
                              {"params": len(plist), "failures": bad}))
    return VerificationReport(checks)
