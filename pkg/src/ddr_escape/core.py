"""Domain types, coordinate transform and kinematics of the escape game.

Two frames are used throughout:

* the *realistic* (world) frame, angles counter-clockwise from the world
  x-axis, state ``(x_p, y_p, x_e, y_e, theta_e)``;
* the *reduced* (evader body) frame, y-axis along the evader heading, angles
  clockwise from that axis, state ``(x, y)`` = pursuer position relative to
  the evader.

Wheel speeds ``u1, u2`` are rim speeds in m/s, bounded by ``v_r_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# relative slack on control bounds, absorbs round-off from callers
_BOUND_SLACK = 1e-12


class InvalidParamsError(ValueError):
    """Raised when game parameters violate a model invariant."""


class ControlBoundsError(ValueError):
    """Raised when a control lies outside its admissible set."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to ``[0, 2*pi)``."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if a >= TWO_PI:
        a = 0.0
    return a


@dataclass(frozen=True)
class GameParams:
    """Speeds (m/s) and lengths (m) of the game.

    ``b`` is the distance from the evader centre to each wheel and ``r_d`` the
    detection radius. The evader must be strictly faster than the detection
    region and ``r_d > b``.
    """

    v_r_max: float
    v_d_max: float
    b: float
    r_d: float

    def __post_init__(self):
        for name in ("v_r_max", "v_d_max", "b", "r_d"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise InvalidParamsError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, float(val))
        if self.v_r_max <= 0.0:
            raise InvalidParamsError(f"v_r_max must be > 0, got {self.v_r_max}")
        if self.b <= 0.0:
            raise InvalidParamsError(f"b must be > 0, got {self.b}")
        if self.r_d <= 0.0:
            raise InvalidParamsError(f"r_d must be > 0, got {self.r_d}")
        if self.v_d_max < 0.0:
            raise InvalidParamsError(f"v_d_max must be >= 0, got {self.v_d_max}")
        if not self.v_d_max < self.v_r_max:
            raise InvalidParamsError(
                f"v_d_max < v_r_max required (evader strictly faster), "
                f"got v_d_max={self.v_d_max}, v_r_max={self.v_r_max}")
        if not self.r_d > self.b:
            raise InvalidParamsError(
                f"r_d > b required, got r_d={self.r_d}, b={self.b}")

    @classmethod
    def from_ratios(cls, rho_v: float, rho_l: float, v_r_max: float = 1.0,
                    b: float = 1.0) -> "GameParams":
        """Build parameters from the speed ratio and the radius ratio."""
        return cls(v_r_max=v_r_max, v_d_max=rho_v * v_r_max, b=b, r_d=rho_l * b)

    @property
    def rho_v(self) -> float:
        return self.v_d_max / self.v_r_max

    @property
    def rho_l(self) -> float:
        return self.r_d / self.b

    @property
    def turn_rate(self) -> float:
        """Magnitude of the in-place rotation rate, ``v_r_max / b``."""
        return self.v_r_max / self.b

    @property
    def s_bup(self) -> float:
        """Half-width of the backward usable arc, ``arccos(rho_v)``."""
        return math.acos(self.rho_v)


@dataclass(frozen=True)
class RealisticState:
    x_p: float
    y_p: float
    x_e: float
    y_e: float
    theta_e: float

    def __post_init__(self):
        object.__setattr__(self, "theta_e", wrap_angle(self.theta_e))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x_p, self.y_p, self.x_e, self.y_e, self.theta_e)


@dataclass(frozen=True)
class ReducedState:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite reduced state ({self.x}, {self.y})")

    @property
    def radius(self) -> float:
        return math.hypot(self.x, self.y)

    def inside(self, params: GameParams) -> bool:
        return self.x * self.x + self.y * self.y <= params.r_d * params.r_d


@dataclass(frozen=True)
class EvaderControls:
    u1: float
    u2: float

    @property
    def speed(self) -> float:
        return 0.5 * (self.u1 + self.u2)

    def turn_rate(self, params: GameParams) -> float:
        return (self.u2 - self.u1) / (2.0 * params.b)


@dataclass(frozen=True)
class PursuerControls:
    """Pursuer speed ``v1`` and reduced-frame heading ``v2`` (clockwise from body y)."""

    v1: float
    v2: float

    def __post_init__(self):
        object.__setattr__(self, "v2", wrap_angle(self.v2))

    def to_world(self, theta_e: float) -> "WorldPursuerControls":
        return WorldPursuerControls(self.v1, theta_e - self.v2)


@dataclass(frozen=True)
class WorldPursuerControls:
    """Pursuer speed ``v_p`` and world heading ``psi_p`` (counter-clockwise from x)."""

    v_p: float
    psi_p: float

    def __post_init__(self):
        object.__setattr__(self, "psi_p", wrap_angle(self.psi_p))

    def to_reduced(self, theta_e: float) -> PursuerControls:
        return PursuerControls(self.v_p, theta_e - self.psi_p)


def check_evader_controls(u: EvaderControls, params: GameParams) -> None:
    lim = params.v_r_max * (1.0 + _BOUND_SLACK)
    if abs(u.u1) > lim or abs(u.u2) > lim:
        raise ControlBoundsError(
            f"wheel speeds ({u.u1}, {u.u2}) exceed v_r_max={params.v_r_max}")


def check_pursuer_speed(v: float, params: GameParams) -> None:
    if v < 0.0 or v > params.v_d_max * (1.0 + _BOUND_SLACK) + 1e-300:
        raise ControlBoundsError(
            f"pursuer speed {v} outside [0, v_d_max={params.v_d_max}]")


def to_reduced(rs: RealisticState) -> ReducedState:
    """Pursuer position in the evader body frame."""
    dx = rs.x_p - rs.x_e
    dy = rs.y_p - rs.y_e
    st, ct = math.sin(rs.theta_e), math.cos(rs.theta_e)
    return ReducedState(dx * st - dy * ct, dx * ct + dy * st)


def from_reduced(xr: ReducedState, x_e: float = 0.0, y_e: float = 0.0,
                 theta_e: float = 0.5 * math.pi) -> RealisticState:
    """Place the evader at ``(x_e, y_e, theta_e)`` and the pursuer at ``xr``.

    The default heading aligns the body frame with the world frame.
    """
    st, ct = math.sin(theta_e), math.cos(theta_e)
    dx = xr.x * st + xr.y * ct
    dy = -xr.x * ct + xr.y * st
    return RealisticState(x_e + dx, y_e + dy, x_e, y_e, theta_e)


def reduced_dynamics(xr: ReducedState, u: EvaderControls, v: PursuerControls,
                     params: GameParams) -> tuple[float, float]:
    """Time derivative ``(xdot, ydot)`` of the reduced state."""
    check_evader_controls(u, params)
    check_pursuer_speed(v.v1, params)
    w = (u.u2 - u.u1) / (2.0 * params.b)
    xdot = w * xr.y + v.v1 * math.sin(v.v2)
    ydot = -w * xr.x - 0.5 * (u.u1 + u.u2) + v.v1 * math.cos(v.v2)
    return xdot, ydot


def retro_reduced_dynamics(xr: ReducedState, u: EvaderControls,
                           v: PursuerControls, params: GameParams) -> tuple[float, float]:
    """Retro-time derivative, ``d/dtau`` with ``tau = t_f - t``."""
    xdot, ydot = reduced_dynamics(xr, u, v, params)
    return -xdot, -ydot


def realistic_dynamics(rs: RealisticState, u: EvaderControls,
                       vp: WorldPursuerControls, params: GameParams
                       ) -> tuple[float, float, float, float, float]:
    """Rates ``(xdot_p, ydot_p, xdot_e, ydot_e, thetadot_e)`` in the world frame."""
    check_evader_controls(u, params)
    check_pursuer_speed(vp.v_p, params)
    speed = 0.5 * (u.u1 + u.u2)
    return (vp.v_p * math.cos(vp.psi_p),
            vp.v_p * math.sin(vp.psi_p),
            speed * math.cos(rs.theta_e),
            speed * math.sin(rs.theta_e),
            (u.u2 - u.u1) / (2.0 * params.b))
