"""Grid-world simulator for resilient multi-robot coverage.

A team of robots covers an unknown tiled area task by task; per-robot
discrete event supervisors trigger potential-game reallocations (solved
with Max-Logit) when robots fail or run out of work.
"""

from .engine import MetricsRecord, RunResult, Simulation, run
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "MetricsRecord",
    "RunResult",
    "ScenarioConfig",
    "ScenarioError",
    "Simulation",
    "load_scenario",
    "parse_scenario",
    "run",
    "__version__",
]
