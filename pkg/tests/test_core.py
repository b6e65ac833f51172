import math

import pytest
from hypothesis import given, strategies as st

from ddr_escape.core import (ControlBoundsError, EvaderControls, GameParams,
                             InvalidParamsError, PursuerControls, RealisticState,
                             ReducedState, WorldPursuerControls, from_reduced,
                             realistic_dynamics, reduced_dynamics,
                             retro_reduced_dynamics, to_reduced, wrap_angle)

coord = st.floats(-5, 5)
angle = st.floats(0, 2 * math.pi)


def eq2(xp, yp, xe, ye, th):
    # independent evaluation of the body-frame transform
    return ((xp - xe) * math.sin(th) - (yp - ye) * math.cos(th),
            (xp - xe) * math.cos(th) + (yp - ye) * math.sin(th))


class TestParams:
    def test_ratios(self):
        p = GameParams.from_ratios(0.6, 2.0)
        assert p.rho_v == pytest.approx(0.6) and p.rho_l == pytest.approx(2.0)
        assert p.turn_rate == 1.0
        assert p.s_bup == pytest.approx(math.acos(0.6))

    @pytest.mark.parametrize("kw", [
        dict(v_r_max=0, v_d_max=0, b=1, r_d=2),
        dict(v_r_max=1, v_d_max=1, b=1, r_d=2),
        dict(v_r_max=1, v_d_max=1.2, b=1, r_d=2),
        dict(v_r_max=1, v_d_max=-0.1, b=1, r_d=2),
        dict(v_r_max=1, v_d_max=0.5, b=0, r_d=2),
        dict(v_r_max=1, v_d_max=0.5, b=2, r_d=2),
        dict(v_r_max=1, v_d_max=0.5, b=1, r_d=float("nan")),
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParamsError):
            GameParams(**kw)

    def test_zero_pursuer_speed_allowed(self):
        assert GameParams(1, 0, 1, 2).rho_v == 0.0


class TestTransform:
    def test_dead_ahead(self):
        xr = to_reduced(RealisticState(0, 1, 0, 0, math.pi / 2))
        assert (xr.x, xr.y) == pytest.approx((0, 1), abs=1e-15)

    def test_heading_along_world_x(self):
        xr = to_reduced(RealisticState(1, 0, 0, 0, 0))
        assert (xr.x, xr.y) == pytest.approx((0, 1), abs=1e-15)

    def test_generic_matches_formula(self):
        xr = to_reduced(RealisticState(0.3, 1.7, -0.2, 0.4, 2.1))
        assert (xr.x, xr.y) == pytest.approx(eq2(0.3, 1.7, -0.2, 0.4, 2.1), abs=1e-15)

    def test_theta_normalized(self):
        assert RealisticState(0, 0, 0, 0, -0.5).theta_e == pytest.approx(2 * math.pi - 0.5)
        assert 0 <= wrap_angle(-1e-300) < 2 * math.pi

    @given(coord, coord, angle, coord, coord)
    def test_from_reduced_inverts(self, x, y, th, xe, ye):
        xr = to_reduced(from_reduced(ReducedState(x, y), xe, ye, th))
        assert (xr.x, xr.y) == pytest.approx((x, y), abs=1e-12)

    @given(coord, coord, coord, coord, angle, coord, coord)
    def test_translation_invariance(self, xp, yp, xe, ye, th, dx, dy):
        a = to_reduced(RealisticState(xp, yp, xe, ye, th))
        b = to_reduced(RealisticState(xp + dx, yp + dy, xe + dx, ye + dy, th))
        assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-12)

    @given(coord, coord, coord, coord, angle, angle)
    def test_rotation_invariance(self, xp, yp, xe, ye, th, phi):
        c, s = math.cos(phi), math.sin(phi)
        a = to_reduced(RealisticState(xp, yp, xe, ye, th))
        b = to_reduced(RealisticState(c * xp - s * yp, s * xp + c * yp,
                                      c * xe - s * ye, s * xe + c * ye, th + phi))
        assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-12)


class TestDynamics:
    def test_pure_translation(self, ref):
        d = reduced_dynamics(ReducedState(0.4, -0.3), EvaderControls(1, 1),
                             PursuerControls(0, 0), ref)
        assert d == pytest.approx((0, -1))

    def test_pure_rotation(self, ref):
        d = reduced_dynamics(ReducedState(1, 0), EvaderControls(-1, 1),
                             PursuerControls(0, 0), ref)
        assert d == pytest.approx((0, -1))

    def test_formula(self, ref):
        xr, u, v = ReducedState(0.768, 1.484), EvaderControls(-1, -1), PursuerControls(0.6, 0.3)
        w = 0.0
        expect = (w * 1.484 + 0.6 * math.sin(0.3), -w * 0.768 + 1 + 0.6 * math.cos(0.3))
        assert reduced_dynamics(xr, u, v, ref) == pytest.approx(expect, abs=1e-15)

    def test_retro_is_negation(self, ref):
        xr, u, v = ReducedState(0.768, 1.484), EvaderControls(-1, 0.5), PursuerControls(0.6, 0.3)
        f = reduced_dynamics(xr, u, v, ref)
        assert retro_reduced_dynamics(xr, u, v, ref) == (-f[0], -f[1])

    def test_realistic_examples(self, ref):
        rs = RealisticState(0, 0, 0, 0, 0.7)
        d = realistic_dynamics(rs, EvaderControls(1, 1), WorldPursuerControls(0, 0), ref)
        assert d == pytest.approx((0, 0, math.cos(0.7), math.sin(0.7), 0))
        d = realistic_dynamics(rs, EvaderControls(-1, 1), WorldPursuerControls(0, 0), ref)
        assert d == pytest.approx((0, 0, 0, 0, 1.0))
        d = realistic_dynamics(rs, EvaderControls(0, 0), WorldPursuerControls(0.6, 1.0), ref)
        assert d[:2] == pytest.approx((0.6 * math.cos(1.0), 0.6 * math.sin(1.0)))

    @pytest.mark.parametrize("u,v", [((1.1, 0), 0.1), ((0, -1.5), 0.1), ((0, 0), 0.7),
                                     ((0, 0), -0.1)])
    def test_bounds(self, ref, u, v):
        with pytest.raises(ControlBoundsError):
            reduced_dynamics(ReducedState(0, 0), EvaderControls(*u), PursuerControls(v, 0), ref)

    def test_world_reduced_heading_roundtrip(self):
        w = PursuerControls(0.6, 0.3).to_world(1.2)
        assert w.psi_p == pytest.approx(0.9)
        assert w.to_reduced(1.2).v2 == pytest.approx(0.3)

    @given(coord, coord, angle, st.floats(-1, 1), st.floats(-1, 1),
           st.floats(0, 0.6), angle)
    def test_transform_consistency(self, xp, yp, th, u1, u2, vp, psi):
        p = GameParams(1, 0.6, 1, 2)
        rs = RealisticState(xp, yp, 0.1, -0.2, th)
        u, wv = EvaderControls(u1, u2), WorldPursuerControls(vp, psi)
        rates = realistic_dynamics(rs, u, wv, p)
        h = 1e-6
        nxt = RealisticState(*(a + h * r for a, r in zip(rs.as_tuple(), rates)))
        prv = RealisticState(*(a - h * r for a, r in zip(rs.as_tuple(), rates)))
        a, b = to_reduced(nxt), to_reduced(prv)
        fd = ((a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h))
        exact = reduced_dynamics(to_reduced(rs), u, wv.to_reduced(th), p)
        assert fd == pytest.approx(exact, abs=1e-6)
