"""Simulation and parameter fitting for piezoelectric-cantilever micro power supplies."""

__version__ = "0.1.0"

from .harvester import (  # noqa: E402
    BeamKind,
    BeamSpec,
    DriveSpec,
    LoadSpec,
    LumpedParams,
    PhasorResponse,
    Wiring,
    average_power,
    bimorph_adjust,
    lumped_from_resonance_pair,
    natural_frequency,
    optimal_load,
    solve_phasor,
)
from .power_stage import (  # noqa: E402
    BuckSpec,
    Mode,
    PowerChain,
    PowerStageState,
    RectifierSpec,
    StorageSpec,
    UvloSpec,
)
from .sweeps import SweepCurve, find_resonance, frequency_sweep, load_sweep, tip_mass_study  # noqa: E402
from .transient import SimConfig, energy_audit, run_transient, steady_state_metrics  # noqa: E402
from .fitting import FitProblem, FitTarget, fit_params  # noqa: E402
