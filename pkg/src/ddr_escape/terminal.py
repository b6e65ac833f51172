"""Target circle geometry: usable part, its boundary, terminal data."""

from __future__ import annotations

import enum
import math

from .core import (TWO_PI, EvaderControls, GameParams, PursuerControls,
                   ReducedState, wrap_angle)

# angles this close to a BUP angle classify as BUP (callers reach them by root finding)
BUP_TOL = 1e-9


class BoundaryClass(enum.Enum):
    UP_BACKWARD = "up_backward"
    UP_FORWARD = "up_forward"
    BUP = "bup"
    NUP = "nup"
    DISPERSAL_ENDPOINT = "dispersal_endpoint"

    @property
    def usable(self) -> bool:
        return self in (BoundaryClass.UP_BACKWARD, BoundaryClass.UP_FORWARD)


class NotUsableError(ValueError):
    """Terminal data requested at a point outside the usable part."""


def _angle_dist(a: float, b: float) -> float:
    d = abs(wrap_angle(a) - wrap_angle(b))
    return min(d, TWO_PI - d)


def boundary_point(s: float, params: GameParams) -> ReducedState:
    return ReducedState(params.r_d * math.sin(s), params.r_d * math.cos(s))


def bup_angles(params: GameParams) -> tuple[float, float, float, float]:
    a = params.s_bup
    return (a, math.pi - a, math.pi + a, TWO_PI - a)


def escape_margin(s: float, params: GameParams) -> float:
    """``min_u max_v`` of the inward normal velocity on the target circle.

    Negative on the usable part, zero on its boundary.
    """
    return params.v_d_max - params.v_r_max * abs(math.cos(s))


def classify_boundary(s: float, params: GameParams) -> BoundaryClass:
    s = wrap_angle(s)
    if any(_angle_dist(s, a) <= BUP_TOL for a in bup_angles(params)):
        return BoundaryClass.BUP
    if _angle_dist(s, 0.5 * math.pi) == 0.0 or _angle_dist(s, 1.5 * math.pi) == 0.0:
        return BoundaryClass.DISPERSAL_ENDPOINT
    c = math.cos(s)
    if c > params.rho_v:
        return BoundaryClass.UP_BACKWARD
    if -c > params.rho_v:
        return BoundaryClass.UP_FORWARD
    return BoundaryClass.NUP


def escape_direction(s: float) -> int:
    """+1 when the evader escapes backward (``cos s > 0``), -1 when forward."""
    return 1 if math.cos(s) > 0.0 else -1


def terminal_controls(s: float, params: GameParams) -> tuple[EvaderControls, PursuerControls]:
    """Saddle-point controls on the usable part.

    The evader translates at full speed away from the pursuer; the pursuer
    runs at full speed straight at the evader, i.e. along the inward normal,
    which is reduced heading ``s + pi``.
    """
    cls = classify_boundary(s, params)
    if not cls.usable:
        raise NotUsableError(f"s={s} is {cls.value}, terminal controls undefined")
    u = -escape_direction(s) * params.v_r_max
    return EvaderControls(u, u), PursuerControls(params.v_d_max, s + math.pi)


def terminal_costate(s: float, params: GameParams | None = None):
    """Costate on the target circle.

    Without ``params`` this is the unit inward normal ``(-sin s, -cos s)``.
    With ``params`` it is scaled by ``1 / (v_r |cos s| - v_d)`` so that the
    Hamiltonian vanishes; the direction, and hence every control derived from
    it, is the same.
    """
    from .synthesis import Costate

    lx, ly = -math.sin(s), -math.cos(s)
    if params is None:
        return Costate(lx, ly)
    k = costate_scale(s, params)
    return Costate(k * lx, k * ly)


def costate_scale(s: float, params: GameParams) -> float:
    den = params.v_r_max * abs(math.cos(s)) - params.v_d_max
    if den <= 0.0:
        raise NotUsableError(f"s={s} is not in the usable part; costate scale undefined")
    return 1.0 / den
