"""Cycle-resolved simulation of a two-level thermal machine charging a
ladder battery, with closed-form oracles for the decoupled limit."""

from .analytic import (
    IsolatedCycleAverages,
    MachineClassification,
    MachineMode,
    classify,
    isolated_cycle_averages,
    phase_portrait,
)
from .dynamics import (
    CyclePropagators,
    PropagatorConvergenceError,
    ProtocolState,
    StateInvariantError,
    advance,
    build_cycle_propagators,
    compression_propagator,
    cycle_map,
    initial_joint_state,
    measure_battery,
)
from .metrics import (
    CycleRecord,
    ErgotropyBreakdown,
    compute_cycle_record,
    critical_cycles,
    ergotropy,
)
from .model import LandauZenerData, MachineParams, landau_zener
from .runner import (
    ExperimentConfig,
    IntegratorSettings,
    SweepAxis,
    TrajectoryOutput,
    emit,
    load_config,
    preset_config,
    preset_machine,
    run_sweep,
    run_trajectory,
)
from .switching import SwitchingParams, SwitchingSeries, drift_fit, simulate_switching

__version__ = "0.1.0"

__all__ = [
    "CyclePropagators",
    "CycleRecord",
    "ErgotropyBreakdown",
    "ExperimentConfig",
    "IntegratorSettings",
    "IsolatedCycleAverages",
    "LandauZenerData",
    "MachineClassification",
    "MachineMode",
    "MachineParams",
    "PropagatorConvergenceError",
    "ProtocolState",
    "StateInvariantError",
    "SweepAxis",
    "SwitchingParams",
    "SwitchingSeries",
    "TrajectoryOutput",
    "advance",
    "build_cycle_propagators",
    "classify",
    "compression_propagator",
    "compute_cycle_record",
    "critical_cycles",
    "cycle_map",
    "drift_fit",
    "emit",
    "ergotropy",
    "initial_joint_state",
    "isolated_cycle_averages",
    "landau_zener",
    "load_config",
    "measure_battery",
    "phase_portrait",
    "preset_config",
    "preset_machine",
    "run_sweep",
    "run_trajectory",
    "simulate_switching",
    "__version__",
]
