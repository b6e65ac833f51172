"""Closed-form retro-time trajectory field.

Trajectories are built backward from the usable part. While the costate is
frozen both players translate at full speed (the primary family); once an
evader switching function changes sign the evader spins in place while the
pursuer keeps a straight world-frame course (the rotation family).

Geometry of one usable arc is governed by two signs, ``sigma = sgn(cos s)``
(+1 backward escape, -1 forward) and ``eps = sgn(sin s)`` (side of the body
y-axis). Several helpers take an ``xp`` argument which is either :mod:`math`
or :mod:`numpy`, so the same formulas serve scalar and vectorised callers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (EvaderControls, GameParams, PursuerControls, ReducedState,
                   wrap_angle)
from .terminal import (NotUsableError, classify_boundary, costate_scale,
                       escape_direction)

# absolute tie band on the switching functions
TIE_TOL = 1e-10


@dataclass(frozen=True)
class Costate:
    lambda_x: float
    lambda_y: float

    @property
    def gamma(self) -> float:
        return math.hypot(self.lambda_x, self.lambda_y)


class TrajectoryPhase(enum.Enum):
    PRIMARY = "primary"
    ROTATION = "rotation"


class TrajectoryEnd(enum.Enum):
    HORIZON = "horizon"
    DISPERSAL = "dispersal"  # reached the x-axis
    EXIT = "exit"  # left the detection disk


class DispersalTieError(ArithmeticError):
    """A switching function is within the tie band; the evader control is two-valued."""

    def __init__(self, sigma1: float, sigma2: float):
        super().__init__(f"switching functions tied: sigma1={sigma1:.3e}, sigma2={sigma2:.3e}")
        self.sigma1 = sigma1
        self.sigma2 = sigma2


def arc_signs(s: float) -> tuple[int, int]:
    """``(sigma, eps)`` for a usable angle."""
    return (1 if math.cos(s) > 0.0 else -1), (1 if math.sin(s) >= 0.0 else -1)


# ----------------------------------------------------------------------------
# Hamiltonian and control law


def hamiltonian(xr: ReducedState, c: Costate, u: EvaderControls,
                v: PursuerControls, params: GameParams) -> float:
    w = (u.u2 - u.u1) / (2.0 * params.b)
    return (c.lambda_x * w * xr.y
            + c.lambda_x * v.v1 * math.sin(v.v2)
            - c.lambda_y * w * xr.x
            - c.lambda_y * 0.5 * (u.u1 + u.u2)
            + c.lambda_y * v.v1 * math.cos(v.v2)
            + 1.0)


def switching_functions(xr: ReducedState, c: Costate,
                        params: GameParams) -> tuple[float, float]:
    """Arguments of the two ``sgn`` in the evader control law."""
    b = params.b
    a = (-xr.y * c.lambda_x + xr.x * c.lambda_y) / b
    return a - c.lambda_y, -a - c.lambda_y


def optimal_controls(xr: ReducedState, c: Costate, params: GameParams,
                     tie_tol: float = TIE_TOL) -> tuple[EvaderControls, PursuerControls]:
    """Min-max controls of the Hamiltonian for a given costate.

    Raises
    ------
    DispersalTieError
        If either switching function is within ``tie_tol`` of zero.
    """
    g = c.gamma
    if not g > 0.0:
        raise ValueError("costate must be nonzero")
    s1, s2 = switching_functions(xr, c, params)
    if abs(s1) <= tie_tol or abs(s2) <= tie_tol:
        raise DispersalTieError(s1, s2)
    vr = params.v_r_max
    u = EvaderControls(-math.copysign(vr, s1), -math.copysign(vr, s2))
    v2 = math.atan2(c.lambda_x / g, c.lambda_y / g)
    return u, PursuerControls(params.v_d_max, v2)


# ----------------------------------------------------------------------------
# switch schedule


@dataclass(frozen=True)
class SwitchSchedule:
    """Retro-times to the x-axis and to the evader control switch.

    ``tau_s is None`` means the switching functions never vanish (``sin s = 0``).
    ``retro_from``/``retro_to`` give the switched wheel speed before and after
    ``tau_s`` in retro-time.
    """

    tau_i: float
    tau_s: float | None
    which_control: str | None
    retro_from: float | None
    retro_to: float | None

    @property
    def switches(self) -> bool:
        """True when the switch happens before the primary path meets the x-axis."""
        return self.tau_s is not None and self.tau_s < self.tau_i

    @property
    def primary_end(self) -> float:
        return self.tau_s if self.switches else self.tau_i


def _require_usable(s: float, params: GameParams) -> None:
    cls = classify_boundary(s, params)
    if not cls.usable:
        raise NotUsableError(f"s={s} is {cls.value}; only usable-part angles start trajectories")


def switch_schedule(s: float, params: GameParams) -> SwitchSchedule:
    _require_usable(s, params)
    sig = escape_direction(s)
    vr, vd = params.v_r_max, params.v_d_max
    cs, sn = math.cos(s), math.sin(s)
    tau_i = abs(params.r_d * cs / (vd * cs - sig * vr))
    if abs(sn) < 1e-12:  # s = 0 or pi: the path never turns
        return SwitchSchedule(tau_i, None, None, None, None)
    tau_s = abs(params.b * cs / (vr * sn))
    eps = 1 if sn > 0.0 else -1
    return SwitchSchedule(tau_i, tau_s, "u1" if eps > 0 else "u2",
                          -sig * vr, sig * vr)


def rotation_rate(s: float, params: GameParams) -> float:
    """Signed turn rate ``(u2 - u1) / 2b`` after the switch."""
    sig, eps = arc_signs(s)
    return -sig * eps * params.turn_rate


def rotation_controls(s: float, params: GameParams) -> EvaderControls:
    sig, eps = arc_signs(s)
    vr = params.v_r_max
    return EvaderControls(sig * eps * vr, -sig * eps * vr)


def translation_controls(s: float, params: GameParams) -> EvaderControls:
    u = -escape_direction(s) * params.v_r_max
    return EvaderControls(u, u)


# ----------------------------------------------------------------------------
# closed forms, shared by scalar and array callers


def _primary_xy(s, tau, sig, params: GameParams, xp=math):
    sn, cs = xp.sin(s), xp.cos(s)
    vd = params.v_d_max
    x = (params.r_d + tau * vd) * sn
    y = params.r_d * cs + tau * (vd * cs - sig * params.v_r_max)
    return x, y


def _switch_tau(s, sig, eps, params: GameParams, xp=math):
    return sig * eps * params.b * xp.cos(s) / (params.v_r_max * xp.sin(s))


def _rotation_xy(s, dtau, sig, eps, params: GameParams, xp=math):
    """Position ``dtau`` retro-seconds after the switch."""
    sn, cs = xp.sin(s), xp.cos(s)
    vd = params.v_d_max
    ts = _switch_tau(s, sig, eps, params, xp)
    xs = (params.r_d + ts * vd) * sn
    ys = params.r_d * cs + ts * (vd * cs - sig * params.v_r_max)
    ang = -sig * eps * params.turn_rate * dtau
    ca, sa = xp.cos(ang), xp.sin(ang)
    phi = s - ang
    x = xs * ca - ys * sa + dtau * vd * xp.sin(phi)
    y = xs * sa + ys * ca + dtau * vd * xp.cos(phi)
    return x, y


def _rotation_jacobian(s, dtau, sig, eps, params: GameParams, xp=math):
    """Position and its partial derivatives in ``s`` and ``dtau``."""
    sn, cs = xp.sin(s), xp.cos(s)
    vr, vd, rd = params.v_r_max, params.v_d_max, params.r_d
    ts = sig * eps * params.b * cs / (vr * sn)
    dts = -sig * eps * params.b / (vr * sn * sn)
    wx, wy = vd * sn, vd * cs - sig * vr
    xs, ys = rd * sn + ts * wx, rd * cs + ts * wy
    dxs = rd * cs + dts * wx + ts * vd * cs
    dys = -rd * sn + dts * wy - ts * vd * sn
    om = -sig * eps * params.turn_rate
    ang = om * dtau
    ca, sa = xp.cos(ang), xp.sin(ang)
    mx, my = xs + dtau * vd * sn, ys + dtau * vd * cs
    x = ca * mx - sa * my
    y = sa * mx + ca * my
    # d/dtau: rotation of m plus rotated drift
    px_d = -om * y + vd * (ca * sn - sa * cs)
    py_d = om * x + vd * (sa * sn + ca * cs)
    dmx, dmy = dxs + dtau * vd * cs, dys - dtau * vd * sn
    px_s = ca * dmx - sa * dmy
    py_s = sa * dmx + ca * dmy
    return x, y, px_s, py_s, px_d, py_d


def rotation_ends(s, sig, eps, params: GameParams, n_scan: int = 2048,
                  n_bisect: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Retro-time after the switch at which rotation paths meet the x-axis / leave the disk.

    Vectorised over ``s``. A path whose switch point is already outside the
    disk has exit time 0. ``inf`` marks an event not found within two turns.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    horizon = 4.0 * math.pi / params.turn_rate
    grid = np.linspace(0.0, horizon, n_scan)
    rd2 = params.r_d ** 2

    def axis_fn(ss, d):
        return sig * _rotation_xy(ss, d, sig, eps, params, np)[1]

    def exit_fn(ss, d):
        x, y = _rotation_xy(ss, d, sig, eps, params, np)
        return rd2 - (x * x + y * y)

    out = []
    for fn in (axis_fn, exit_fn):
        vals = fn(s[:, None], grid[None, :])
        neg = vals <= 0.0
        found = neg.any(axis=1)
        first = np.argmax(neg, axis=1)
        hi = grid[first]
        lo = grid[np.maximum(first - 1, 0)]
        res = np.where(found, hi, np.inf)
        idx = np.nonzero(found & (first > 0))[0]
        lo, hi = lo[idx], hi[idx]
        ss = s[idx]
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            m = fn(ss, mid) <= 0.0
            hi = np.where(m, mid, hi)
            lo = np.where(m, lo, mid)
        res[idx] = hi
        res[found & (first == 0)] = 0.0
        out.append(res)
    return out[0], out[1]


# ----------------------------------------------------------------------------
# public closed forms


@dataclass(frozen=True)
class RotationPhase:
    tau_s: float
    x_s: float
    y_s: float
    costate_s: Costate
    omega: float
    theta_e_s: float


def rotation_phase(s: float, params: GameParams,
                   theta_e_s: float = 0.5 * math.pi) -> RotationPhase:
    """State at the switch for the path leaving the usable part at ``s``.

    ``theta_e_s`` is the world heading of the evader at the switch instant.
    """
    sched = switch_schedule(s, params)
    if not sched.switches:
        raise ValueError(f"path from s={s} meets the x-axis before any switch")
    xs, ys = _primary_xy(s, sched.tau_s, escape_direction(s), params)
    return RotationPhase(sched.tau_s, xs, ys, costate_retro(s, sched.tau_s, params),
                         rotation_rate(s, params), wrap_angle(theta_e_s))


def costate_retro(s: float, tau: float, params: GameParams,
                  unit: bool = False) -> Costate:
    """Costate along the path from ``s``, scaled so the Hamiltonian is zero.

    Constant up to the switch, then rotating rigidly at the turn rate. With
    ``unit=True`` the unit-norm direction is returned instead; controls only
    depend on the direction.
    """
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    sched = switch_schedule(s, params)
    k = 1.0 if unit else costate_scale(s, params)
    phi = s
    if sched.switches and tau > sched.tau_s:
        phi = s - rotation_rate(s, params) * (tau - sched.tau_s)
    return Costate(-k * math.sin(phi), -k * math.cos(phi))


def primary_point(s: float, tau: float, params: GameParams) -> ReducedState:
    sched = switch_schedule(s, params)
    end = sched.primary_end
    if tau < 0.0 or tau > end * (1.0 + 1e-12) + 1e-12:
        raise ValueError(f"tau={tau} outside the primary range [0, {end}]")
    x, y = _primary_xy(s, tau, escape_direction(s), params)
    return ReducedState(x, y)


def rotation_point(rot: RotationPhase, s: float, tau: float,
                   params: GameParams) -> ReducedState:
    if tau < rot.tau_s * (1.0 - 1e-12) - 1e-12:
        raise ValueError(f"tau={tau} precedes the switch at {rot.tau_s}")
    d = max(tau - rot.tau_s, 0.0)
    ang = rot.omega * d
    ca, sa = math.cos(ang), math.sin(ang)
    phi = s - ang
    vd = params.v_d_max
    return ReducedState(rot.x_s * ca - rot.y_s * sa + d * vd * math.sin(phi),
                        rot.x_s * sa + rot.y_s * ca + d * vd * math.cos(phi))


def evader_heading(rot: RotationPhase, tau: float) -> float:
    """World heading of the evader during the rotation phase."""
    return wrap_angle(rot.theta_e_s - rot.omega * (tau - rot.tau_s))


# ----------------------------------------------------------------------------
# sampled trajectories


@dataclass(frozen=True)
class RetroTrajectory:
    """Closed-form samples of one optimal path, indexed by retro-time."""

    s: float
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    phase: np.ndarray  # 'primary' / 'rotation'
    end: TrajectoryEnd
    end_tau: float
    tau_switch: float  # inf when the path never rotates
    omega: float  # turn rate after the switch

    def __len__(self) -> int:
        return len(self.tau)

    def headings(self, theta_final: float = 0.5 * math.pi) -> tuple[np.ndarray, np.ndarray]:
        """World headings ``(theta_e, psi_p)`` given the evader heading at escape."""
        theta = np.full_like(self.tau, theta_final)
        rot = self.tau > self.tau_switch
        theta[rot] = theta_final - self.omega * (self.tau[rot] - self.tau_switch)
        psi = np.mod(theta - self.v2, 2.0 * math.pi)
        return np.mod(theta, 2.0 * math.pi), psi


def trajectory(s: float, tau_total: float, params: GameParams,
               dt: float = 1e-3) -> RetroTrajectory:
    """Sample the optimal path ending at ``s`` over ``[0, tau_total]``.

    Sampling stops early where the path reaches the x-axis (Dispersal Surface)
    or leaves the detection disk.
    """
    sched = switch_schedule(s, params)
    sig, eps = arc_signs(s)
    vr, vd, rd = params.v_r_max, params.v_d_max, params.r_d

    end, end_tau = TrajectoryEnd.HORIZON, tau_total
    # the primary segment leaves the disk again when it starts close to the BUP
    wx, wy = vd * math.sin(s), vd * math.cos(s) - sig * vr
    tau_exit = 2.0 * rd * (vr * abs(math.cos(s)) - vd) / (wx * wx + wy * wy)
    if sched.switches:
        if tau_exit < sched.tau_s:
            cand = [(tau_exit, TrajectoryEnd.EXIT)]
        else:
            d_axis, d_exit = rotation_ends(s, sig, eps, params)
            cand = [(sched.tau_s + d_axis[0], TrajectoryEnd.DISPERSAL),
                    (sched.tau_s + d_exit[0], TrajectoryEnd.EXIT)]
    else:
        cand = [(sched.tau_i, TrajectoryEnd.DISPERSAL), (tau_exit, TrajectoryEnd.EXIT)]
    t_end, kind = min(cand, key=lambda c: c[0])
    if t_end < end_tau:
        end, end_tau = kind, t_end

    n = int(math.floor(end_tau / dt + 1e-9)) + 1
    tau = np.arange(n) * dt
    rot = np.zeros(n, dtype=bool)
    if sched.switches:
        rot = tau > sched.tau_s
    x, y = _primary_xy(s, tau, sig, params, np)
    phi = np.full(n, float(s))
    if rot.any():
        d = tau[rot] - sched.tau_s
        x[rot], y[rot] = _rotation_xy(s, d, sig, eps, params, np)
        phi[rot] = s - rotation_rate(s, params) * d
    k = costate_scale(s, params)
    ut = translation_controls(s, params)
    ur = rotation_controls(s, params)
    u1 = np.where(rot, ur.u1, ut.u1)
    u2 = np.where(rot, ur.u2, ut.u2)
    phase = np.where(rot, TrajectoryPhase.ROTATION.value, TrajectoryPhase.PRIMARY.value)
    traj = RetroTrajectory(
        s=float(s), tau=tau, x=x, y=y,
        lambda_x=-k * np.sin(phi), lambda_y=-k * np.cos(phi),
        u1=u1, u2=u2, v1=np.full(n, vd), v2=np.mod(phi + math.pi, 2.0 * math.pi),
        phase=phase, end=end, end_tau=float(end_tau),
        tau_switch=sched.tau_s if sched.switches else math.inf,
        omega=rotation_rate(s, params))
    return traj
