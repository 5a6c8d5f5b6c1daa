"""Stochastic hybrid differential game of a two-boat match race.

Solve the far-field single-player problems (:mod:`matchrace.qvi1d`), the
coupled game on a 3-D grid (:mod:`matchrace.solver3d`), then extract switching
maps and simulate races (:mod:`matchrace.strategy`).
"""

from .errors import ArtifactMismatch, ConvergenceError, ObstacleNotReached, ScenarioError
from .model import (GameConfig, Grid3, PlayerId, RaceTrace, SwitchingMaps, ValueField,
                    boat_velocity, coupled_drift, running_cost, speed)
from .qvi1d import (ObstacleSolution, Value1D, boundary_field, obstacle_solution, solve_1d,
                    theta_star)
from .solver3d import SolveReport, operator_T, scheme_update, value_iteration
from .strategy import (SimConfig, SinglePlayerPolicy, extract_switching_maps,
                       race_statistics, simulate)

__version__ = "0.1.0"
