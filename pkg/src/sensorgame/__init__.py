"""Game-theoretic non-myopic sensor trajectory planning.

A mobile sensor network tracks ground targets with range/azimuth radars.
Multi-step sensing trajectories are chosen by maximizing mutual information
between target states and future measurements, formulated as a potential
game and solved with a fictitious-play learning algorithm.
"""

from .config import ConfigError, ScenarioConfig, load_config
from .game import SensorDef, build_tables, potential
from .planner import LearnerParams, PlanResult, plan_myopic, plan_nonmyopic
from .sim import run_monte_carlo, run_scenario
from .tracker import TargetBelief, TrackBank

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "SensorDef",
    "build_tables",
    "potential",
    "LearnerParams",
    "PlanResult",
    "plan_myopic",
    "plan_nonmyopic",
    "run_monte_carlo",
    "run_scenario",
    "TargetBelief",
    "TrackBank",
]

__version__ = "0.1.0"
