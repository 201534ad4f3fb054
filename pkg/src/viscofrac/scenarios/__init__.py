"""Scenario configuration, presets, running and output."""
from .config import (ConfigError, ScenarioConfig, apply_overrides, config_from_dict, load_config,
                     load_preset, preset_dict, preset_names)
from .output import TimeSeries, export_csv, export_vtk, msd, read_csv, read_vtk
from .runner import (LoadingProgram, RunResult, build_mesh, build_simulation, compare_stress_modes,
                     run_scenario)

__all__ = [
    "ConfigError", "ScenarioConfig", "apply_overrides", "config_from_dict", "load_config",
    "load_preset", "preset_dict", "preset_names", "TimeSeries", "export_csv", "export_vtk",
    "msd", "read_csv", "read_vtk", "LoadingProgram", "RunResult", "build_mesh",
    "build_simulation", "compare_stress_modes", "run_scenario",
]
