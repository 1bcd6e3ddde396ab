"""Disordered nonlinear lattice dynamics under spontaneous-emission decoherence."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .model import (AbsorberSpec, DisorderRealization, LatticeState,  # noqa: E402
                    SimulationConfig, absorber_profile, initial_state, rhs,
                    sample_disorder)
from .dynamics import (SeSchedule, TrajectoryRecord, apply_kick, evolve,  # noqa: E402
                       sample_se_schedule, step)
from .ensemble import EnsembleResult, EnsembleSpec, realization_streams, run_ensemble  # noqa: E402

__all__ = [
    "BACKEND", "AbsorberSpec", "DisorderRealization", "LatticeState", "SimulationConfig",
    "absorber_profile", "initial_state", "rhs", "sample_disorder", "SeSchedule",
    "TrajectoryRecord", "apply_kick", "evolve", "sample_se_schedule", "step",
    "EnsembleResult", "EnsembleSpec", "realization_streams", "run_ensemble",
]
