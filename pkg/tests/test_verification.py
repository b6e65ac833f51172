import json
import math

import numpy as np
import pytest

from ddr_escape.core import GameParams, ReducedState
from ddr_escape.synthesis import Costate, primary_point, trajectory
from ddr_escape.terminal import NotUsableError
from ddr_escape.verification import (barrier_probe, closed_form_deviation,
                                     hamiltonian_residual, local_saddle_check,
                                     retro_integrate_numeric, run_verification,
                                     sweep_angles)


def test_retro_integration_primary(ref):
    nt = retro_integrate_numeric(0.3, 1.0, ref, dt=1e-3)
    assert nt.tau[-1] == pytest.approx(1.0)
    q = primary_point(0.3, 1.0, ref)
    assert (nt.x[-1], nt.y[-1]) == pytest.approx((q.x, q.y), abs=1e-12)
    assert np.all(nt.u1 == -1) and np.all(nt.u2 == -1)
    with pytest.raises(NotUsableError):
        retro_integrate_numeric(1.2, 1.0, ref)


def test_retro_integration_through_the_switch(ref):
    nt = retro_integrate_numeric(0.3, 3.8, ref, dt=2e-3)
    cf = trajectory(0.3, 3.8, ref, dt=2e-3)
    assert np.max(np.hypot(nt.x - cf.x, nt.y - cf.y)) < 1e-6
    # exactly one sign change, on the u1 wheel
    assert np.count_nonzero(np.diff(nt.u1)) == 1 and np.count_nonzero(np.diff(nt.u2)) == 0


def test_sweep_angles_stay_usable(ref):
    a = sweep_angles(ref, 4)
    assert len(a) == 8
    assert np.all(np.abs(np.sin(a)) < math.sin(ref.s_bup))


def test_closed_form_deviation_small_batch():
    p = GameParams.from_ratios(0.4, 4)
    worst, per = closed_form_deviation([(p, 0.4), (p, 2.9), (p, 5.8)], tau_max=3.0, dt=1e-3)
    assert per.shape == (3,) and worst < 1e-6


def test_hamiltonian_residual(ref):
    worst, n = hamiltonian_residual([(ref, 0.3), (ref, 3.3)], 4.0, dt=1e-2)
    assert worst < 1e-12 and n > 500


def test_local_saddle(ref):
    xr = ReducedState(0.9, 1.1)
    rep = local_saddle_check(xr, ref)
    assert rep.passed and rep.controls_match
    # a costate pointing the other way makes the synthesized controls wrong
    bad = local_saddle_check(xr, ref, costate=Costate(1.0, 1.0))
    assert not bad.passed


@pytest.mark.parametrize("rv", [0.6, 0.9, 1e-3])
def test_barrier_exits_at_once(rv):
    rep = barrier_probe(GameParams.from_ratios(rv, 2))
    assert rep.passed
    assert all(g > 0 for g in rep.initial_growth)


def test_barrier_singular_without_pursuer_speed():
    # with v_d = 0 the probe start is the dispersal endpoint; no bang-bang
    # control is self-consistent there and the radius does not grow
    rep = barrier_probe(GameParams.from_ratios(0.0, 2))
    assert not rep.passed
    assert all(m < 1e-6 for m in rep.max_radius_change)


def test_report_json():
    rep = run_verification((0.6,), (2.0,), s_values=(0.3, 3.0), dt=1e-3, tau_max=2.0,
                           n_saddle=2)
    doc = json.loads(rep.to_json())
    assert doc["passed"] is True
    names = [c["name"] for c in doc["checks"]]
    assert names == ["closed_form_vs_numeric", "hamiltonian_residual", "local_saddle",
                     "barrier_probe"]
    forced = run_verification((0.6,), (2.0,), s_values=(0.3,), dt=1e-3, tau_max=2.0,
                              n_saddle=1, tol=1e-300)
    assert not forced.passed
