"""Closed-loop simulation in the world frame.

Both players act through :class:`Strategy` objects that map the current
world state to controls. Controls are held constant over each step (zero-order
hold) and the state is advanced with classic RK4.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .core import (GameParams, EvaderControls, RealisticState, ReducedState,
                   WorldPursuerControls, check_evader_controls,
                   check_pursuer_speed, from_reduced, to_reduced)
from .inverse import OutsideDiskError, SynthesisResult, synthesize
from .synthesis import (TrajectoryEnd, TrajectoryPhase, _primary_xy,
                        _rotation_xy, arc_signs, switch_schedule, trajectory)
from .terminal import classify_boundary

# half-width (m) of the band around the x-axis where the upper branch is latched
DISPERSAL_BAND = 1e-6
ESCAPE_TIME_TOL = 1e-9


class EventKind(enum.Enum):
    SWITCH = "switch"
    DISPERSAL_CHOICE = "dispersal_choice"
    ESCAPE = "escape"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    detail: str = ""


# ----------------------------------------------------------------------------
# optimal feedback shared by both players


class _FeedbackCache:
    """Memoises the synthesis of the last queried state.

    Both optimal players query the same state each step; the previous
    solution also warm-starts the next solve.
    """

    def __init__(self):
        self.key = None
        self.result = None

    def solve(self, rs: RealisticState, params: GameParams) -> SynthesisResult:
        key = (rs.as_tuple(), params)
        if key == self.key:
            return self.result
        xr = to_reduced(rs)
        branch = None
        if abs(xr.y) <= DISPERSAL_BAND:
            # latch the upper branch while inside the band, so round-off
            # cannot make the feedback chatter between the two sides
            if abs(xr.x) > DISPERSAL_BAND:
                branch = "upper"
            xr = ReducedState(xr.x, 0.0)
        res = synthesize(xr, params, branch=branch, hint=self.result)
        self.key, self.result = key, res
        return res


class Strategy:
    """Maps ``(state, params, t)`` to one player's controls."""

    def __call__(self, rs: RealisticState, params: GameParams, t: float):
        raise NotImplementedError

    def bind(self, cache: _FeedbackCache) -> None:
        """Share a feedback cache with the other player (optional)."""


class OptimalEvader(Strategy):
    def __init__(self):
        self._cache = _FeedbackCache()

    def bind(self, cache):
        self._cache = cache

    def __call__(self, rs, params, t) -> EvaderControls:
        return self._cache.solve(rs, params).evader


class OptimalPursuer(Strategy):
    def __init__(self):
        self._cache = _FeedbackCache()

    def bind(self, cache):
        self._cache = cache

    def __call__(self, rs, params, t) -> WorldPursuerControls:
        return self._cache.solve(rs, params).pursuer.to_world(rs.theta_e)


class FixedHeadingPursuer(Strategy):
    """Constant world heading ``psi_p`` at speed ``v_p`` (default full speed)."""

    def __init__(self, psi_p: float, v_p: float | None = None):
        self.psi_p = psi_p
        self.v_p = v_p

    def __call__(self, rs, params, t) -> WorldPursuerControls:
        v = params.v_d_max if self.v_p is None else self.v_p
        return WorldPursuerControls(v, self.psi_p)


class StationaryPursuer(Strategy):
    def __call__(self, rs, params, t) -> WorldPursuerControls:
        return WorldPursuerControls(0.0, 0.0)


_EVADER_KINDS = ("scale", "scale_u1", "scale_u2", "turn_bias", "noise",
                 "blend_forward", "blend_backward")
_PURSUER_KINDS = ("speed_scale", "heading_offset", "heading_noise", "speed_noise")


class PerturbedStrategy(Strategy):
    """Deterministic perturbation of a base strategy.

    Parameters
    ----------
    base : Strategy
    kind : str
        Evader kinds: ``scale``, ``scale_u1``, ``scale_u2`` (wheel speeds times
        ``1 - magnitude``), ``turn_bias`` (adds ``magnitude * v_r_max`` of
        opposite wheel speed, sign of ``magnitude`` picks the turn direction),
        ``noise`` (uniform wheel noise of that relative size), ``blend_forward``
        and ``blend_backward`` (convex blend with full forward/backward drive).
        Pursuer kinds: ``speed_scale``, ``heading_offset`` (radians),
        ``heading_noise`` (radians), ``speed_noise`` (relative).
    magnitude : float
    seed : int
        Seed of the noise kinds. Noise is a pure function of ``(seed, t)``.
    """

    def __init__(self, base: Strategy, kind: str, magnitude: float, seed: int = 0):
        if kind not in _EVADER_KINDS + _PURSUER_KINDS:
            raise ValueError(f"unknown perturbation kind {kind!r}")
        self.base = base
        self.kind = kind
        self.magnitude = magnitude
        self.seed = seed

    def bind(self, cache):
        self.base.bind(cache)

    def _noise(self, t: float, k: int) -> float:
        r = random.Random(hash((self.seed, k, round(t * 1e9))))
        return r.uniform(-1.0, 1.0)

    def __call__(self, rs, params, t):
        c = self.base(rs, params, t)
        m, kind = self.magnitude, self.kind
        if isinstance(c, EvaderControls):
            vr = params.v_r_max
            u1, u2 = c.u1, c.u2
            if kind == "scale":
                u1, u2 = (1 - m) * u1, (1 - m) * u2
            elif kind == "scale_u1":
                u1 = (1 - m) * u1
            elif kind == "scale_u2":
                u2 = (1 - m) * u2
            elif kind == "turn_bias":
                u1, u2 = u1 - m * vr, u2 + m * vr
            elif kind == "noise":
                u1 += m * vr * self._noise(t, 1)
                u2 += m * vr * self._noise(t, 2)
            elif kind == "blend_forward":
                u1, u2 = (1 - m) * u1 + m * vr, (1 - m) * u2 + m * vr
            elif kind == "blend_backward":
                u1, u2 = (1 - m) * u1 - m * vr, (1 - m) * u2 - m * vr
            else:
                raise ValueError(f"{kind!r} does not apply to an evader")
            return EvaderControls(max(-vr, min(vr, u1)), max(-vr, min(vr, u2)))
        v, psi = c.v_p, c.psi_p
        if kind == "speed_scale":
            v = (1 - m) * v
        elif kind == "heading_offset":
            psi += m
        elif kind == "heading_noise":
            psi += m * self._noise(t, 3)
        elif kind == "speed_noise":
            v *= 1.0 - m * 0.5 * (1.0 + self._noise(t, 4))
        else:
            raise ValueError(f"{kind!r} does not apply to a pursuer")
        return WorldPursuerControls(min(v, params.v_d_max), psi)


def evader_perturbations(magnitude: float = 0.2, seed: int = 0) -> list[PerturbedStrategy]:
    """Eight perturbed variants of the optimal evader."""
    specs = [("scale", magnitude), ("scale_u1", magnitude), ("scale_u2", magnitude),
             ("turn_bias", magnitude), ("turn_bias", -magnitude), ("noise", magnitude),
             ("blend_forward", magnitude), ("blend_backward", magnitude)]
    return [PerturbedStrategy(OptimalEvader(), k, m, seed) for k, m in specs]


def pursuer_perturbations(magnitude: float = 0.2, seed: int = 0) -> list[PerturbedStrategy]:
    """Eight perturbed variants of the optimal pursuer."""
    specs = [("speed_scale", magnitude), ("heading_offset", magnitude),
             ("heading_offset", -magnitude), ("heading_offset", 0.5 * magnitude),
             ("heading_offset", -0.5 * magnitude), ("heading_noise", magnitude),
             ("speed_noise", magnitude), ("heading_noise", 0.5 * magnitude)]
    return [PerturbedStrategy(OptimalPursuer(), k, m, seed) for k, m in specs]


# ----------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    """Sampled closed-loop play.

    ``realistic`` rows are ``(x_p, y_p, x_e, y_e, theta_e)``, ``evader`` rows
    ``(u1, u2)``, ``pursuer`` rows ``(v_p, psi_p)``. Controls in row ``k`` are
    the ones held over ``[t_k, t_{k+1})``; the last row repeats the final
    controls.
    """

    t: np.ndarray
    realistic: np.ndarray
    reduced: np.ndarray
    evader: np.ndarray
    pursuer: np.ndarray
    phase: list[str]
    events: list[Event] = field(default_factory=list)
    escape_time: float | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def truncated(self) -> bool:
        return self.escape_time is None

    def events_of(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind is kind]


def _rk4(st, u1, u2, vp, psi, b, h):
    """One RK4 step of the world dynamics under constant controls."""
    xp, yp, xe, ye, th = st
    speed = 0.5 * (u1 + u2)
    w = (u2 - u1) / (2.0 * b)
    pvx, pvy = vp * math.cos(psi), vp * math.sin(psi)
    # the pursuer rate is constant; only the heading-dependent terms vary
    k1 = math.cos(th), math.sin(th)
    t2 = th + 0.5 * h * w
    k2 = math.cos(t2), math.sin(t2)
    k4 = math.cos(th + h * w), math.sin(th + h * w)
    ex = speed * (k1[0] + 4.0 * k2[0] + k4[0]) / 6.0
    ey = speed * (k1[1] + 4.0 * k2[1] + k4[1]) / 6.0
    return (xp + h * pvx, yp + h * pvy, xe + h * ex, ye + h * ey, th + h * w)


def _radius2(st) -> float:
    dx, dy = st[0] - st[2], st[1] - st[3]
    return dx * dx + dy * dy


def _phase_label(u1: float, u2: float) -> str:
    if u1 * u2 < 0.0:
        return TrajectoryPhase.ROTATION.value
    return TrajectoryPhase.PRIMARY.value


def simulate(initial: RealisticState, evader: Strategy, pursuer: Strategy,
             params: GameParams, dt: float = 1e-3, t_max: float = 60.0) -> Trajectory:
    """Integrate the closed loop until escape or ``t_max``.

    Raises
    ------
    OutsideDiskError
        If the initial state is not strictly inside the detection disk.
    ValueError
        If ``dt`` or ``t_max`` is not positive.
    """
    if not dt > 0.0 or not t_max > 0.0:
        raise ValueError(f"dt and t_max must be positive, got dt={dt}, t_max={t_max}")
    rd2 = params.r_d ** 2
    st = initial.as_tuple()
    if not _radius2(st) < rd2:
        raise OutsideDiskError("initial state is not strictly inside the detection disk")
    cache = _FeedbackCache()
    evader.bind(cache)
    pursuer.bind(cache)

    ts, rows, ev_rows, pu_rows, phases = [], [], [], [], []
    events: list[Event] = []
    prev_u = None
    in_band = False
    escape = None
    n_max = int(math.ceil(t_max / dt - 1e-9))
    t = 0.0
    for k in range(n_max + 1):
        t = k * dt
        rs = RealisticState(*st)
        xr = to_reduced(rs)
        band = abs(xr.y) <= DISPERSAL_BAND
        if band and not in_band:
            side = "upper" if abs(xr.x) > DISPERSAL_BAND else "origin"
            events.append(Event(t, EventKind.DISPERSAL_CHOICE, side))
        in_band = band
        u = evader(rs, params, t)
        v = pursuer(rs, params, t)
        check_evader_controls(u, params)
        check_pursuer_speed(v.v_p, params)
        if prev_u is not None and (prev_u[0] * u.u1 < 0.0 or prev_u[1] * u.u2 < 0.0):
            which = "u1" if prev_u[0] * u.u1 < 0.0 else "u2"
            events.append(Event(t, EventKind.SWITCH, which))
        prev_u = (u.u1, u.u2)
        ts.append(t)
        rows.append(st)
        ev_rows.append((u.u1, u.u2))
        pu_rows.append((v.v_p, v.psi_p))
        phases.append(_phase_label(u.u1, u.u2))
        if k == n_max:
            break
        nxt = _rk4(st, u.u1, u.u2, v.v_p, v.psi_p, params.b, dt)
        if _radius2(nxt) > rd2:
            lo, hi = 0.0, dt
            while hi - lo > ESCAPE_TIME_TOL:
                mid = 0.5 * (lo + hi)
                if _radius2(_rk4(st, u.u1, u.u2, v.v_p, v.psi_p, params.b, mid)) > rd2:
                    hi = mid
                else:
                    lo = mid
            end = _rk4(st, u.u1, u.u2, v.v_p, v.psi_p, params.b, hi)
            escape = t + hi
            ts.append(escape)
            rows.append(end)
            ev_rows.append((u.u1, u.u2))
            pu_rows.append((v.v_p, v.psi_p))
            phases.append(phases[-1])
            events.append(Event(escape, EventKind.ESCAPE))
            break
        st = nxt

    real = np.array(rows, dtype=float)
    real[:, 4] = np.mod(real[:, 4], 2.0 * math.pi)
    th = real[:, 4]
    dx, dy = real[:, 0] - real[:, 2], real[:, 1] - real[:, 3]
    red = np.column_stack([dx * np.sin(th) - dy * np.cos(th), dx * np.cos(th) + dy * np.sin(th)])
    pu = np.array(pu_rows, dtype=float)
    pu[:, 1] = np.mod(pu[:, 1], 2.0 * math.pi)
    return Trajectory(t=np.array(ts), realistic=real, reduced=red,
                      evader=np.array(ev_rows, dtype=float), pursuer=pu,
                      phase=phases, events=events, escape_time=escape)


def escape_time(initial: RealisticState, params: GameParams, dt: float = 1e-3,
                t_max: float = 60.0) -> float | None:
    """Escape time under optimal play by both players (``None`` if truncated)."""
    return simulate(initial, OptimalEvader(), OptimalPursuer(), params, dt, t_max).escape_time


def synthesis_start(s: float, tau: float, params: GameParams,
                    x_e: float = 0.0, y_e: float = 0.0,
                    theta_e: float = 0.5 * math.pi,
                    snap: float = 0.01) -> RealisticState:
    """World state whose reduced part is the closed-form point ``(s, tau)``.

    Optimal paths end where they reach the Dispersal Surface. A ``tau`` at
    most ``snap`` seconds beyond that end (e.g. a horizon rounded to two
    decimals) is moved back onto it; anything further raises ``ValueError``.
    """
    traj = trajectory(s, tau, params, dt=max(tau, 1e-3))
    if traj.end is TrajectoryEnd.EXIT:
        raise OutsideDiskError(f"path from s={s} leaves the disk before tau={tau}")
    if traj.end is TrajectoryEnd.DISPERSAL:
        if tau - traj.end_tau > snap:
            raise ValueError(f"tau={tau} lies beyond the end of the path from s={s} "
                             f"(Dispersal Surface at tau={traj.end_tau:.6f})")
        tau = traj.end_tau
    sched = switch_schedule(s, params)
    sig, eps = arc_signs(s)
    if sched.switches and tau > sched.tau_s:
        x, y = _rotation_xy(s, tau - sched.tau_s, sig, eps, params)
    else:
        x, y = _primary_xy(s, tau, sig, params)
    if traj.end is TrajectoryEnd.DISPERSAL and tau == traj.end_tau:
        y = 0.0
    xr = ReducedState(x, y)
    if not xr.inside(params):
        raise OutsideDiskError(f"(s={s}, tau={tau}) maps outside the detection disk")
    return from_reduced(xr, x_e, y_e, theta_e)


def escape_class(traj: Trajectory, params: GameParams):
    """Boundary class of the escape point (``None`` if truncated)."""
    if traj.truncated:
        return None
    x, y = traj.reduced[-1]
    return classify_boundary(math.atan2(x, y), params)
