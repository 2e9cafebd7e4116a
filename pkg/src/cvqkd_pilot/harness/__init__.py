"""Configuration, ensemble runner, sweeps and command-line entry point."""

from .config import RunConfig, SweepSpec, SystemParams, desk_profile, load_config, load_sweep
from .runner import calibrate, prepare, run_phase_study, run_single

__all__ = [
    "RunConfig",
    "SweepSpec",
    "SystemParams",
    "desk_profile",
    "load_config",
    "load_sweep",
    "calibrate",
    "prepare",
    "run_phase_study",
    "run_single",
]
