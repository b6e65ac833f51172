import math

import pytest
from hypothesis import settings

from ddr_escape.core import GameParams

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def ref():
    """Reference closed-loop scenario: V_r = 1, V_d = 0.6, b = 1, r_d = 2."""
    return GameParams(v_r_max=1.0, v_d_max=0.6, b=1.0, r_d=2.0)


def disk_point(params, r_frac, angle):
    from ddr_escape.core import ReducedState
    r = params.r_d * r_frac
    return ReducedState(r * math.sin(angle), r * math.cos(angle))
