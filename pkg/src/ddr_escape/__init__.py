"""Closed-form time-optimal escape of a differential-drive robot from a moving detection disk."""

from .core import (EvaderControls, GameParams, PursuerControls, RealisticState,
                   ReducedState, WorldPursuerControls, from_reduced,
                   realistic_dynamics, reduced_dynamics, retro_reduced_dynamics,
                   to_reduced)
from .inverse import (Branch, PartitionClass, PartitionMap, SynthesisResult,
                      feedback, rasterize_partition, synthesize, value)
from .simulator import (OptimalEvader, OptimalPursuer, escape_time, simulate,
                        synthesis_start)
from .synthesis import (Costate, TrajectoryPhase, optimal_controls,
                        switch_schedule, trajectory)
from .terminal import BoundaryClass, classify_boundary, terminal_controls

__all__ = [
    "Branch", "BoundaryClass", "Costate", "EvaderControls", "GameParams",
    "OptimalEvader", "OptimalPursuer", "PartitionClass", "PartitionMap",
    "PursuerControls", "RealisticState", "ReducedState", "SynthesisResult",
    "TrajectoryPhase", "WorldPursuerControls", "classify_boundary", "escape_time",
    "feedback", "from_reduced", "optimal_controls", "rasterize_partition",
    "realistic_dynamics", "reduced_dynamics", "retro_reduced_dynamics", "simulate",
    "switch_schedule", "synthesis_start", "synthesize", "terminal_controls",
    "to_reduced", "trajectory", "value",
]
