"""Forward solver, multilinearization probes and cost reconstruction for multipopulation MFGs."""
from .errors import (
    CascadeOrderError,
    ConditioningError,
    ConfigError,
    DecouplingError,
    GridMismatchError,
    MfgInvError,
    SlopeCheckError,
    SolverError,
    StageOrderError,
)
from .grid import SpaceField, SpaceTimeField, Spectrum, TorusGrid
from .costs import CostSeries, PlantSpec, cost_eval, make_planted
from .forward import MfgSolution, SolverParams, measure_full, measure_single, solve_mfg

__version__ = "0.1.0"
