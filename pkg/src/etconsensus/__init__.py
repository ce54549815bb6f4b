"""Event-triggered average consensus on weight-balanced digraphs.

Agents broadcast their state only when a local trigger fires; between
broadcasts every control is constant, so trajectories are integrated
exactly and trigger crossings are solved in closed form.
"""

from .analysis import (
    RateCertificate,
    RunMetrics,
    empirical_rate,
    event_stats,
    lyapunov,
    rate_certificate,
    run_metrics,
    verify_exponential_bound,
)
from .engine import (
    CascadeOverflowError,
    EngineError,
    EventKind,
    SimEvent,
    Trajectory,
    World,
    ZenoGuardError,
    run,
    simulate,
)
from .graph import (
    WeightedDigraph,
    degrees,
    is_strongly_connected,
    is_weight_balanced,
    laplacian,
    spectral,
)
from .periodic import PeriodicConfig, run_periodic_event, run_periodic_laplacian
from .scenario import ScenarioConfig, load_scenario, validate_scenario
from .triggers import TriggerParams, next_crossing, phi, should_broadcast, trigger_function

__version__ = "0.1.0"

__all__ = [
    "CascadeOverflowError", "EngineError", "EventKind", "PeriodicConfig", "RateCertificate",
    "RunMetrics", "ScenarioConfig", "SimEvent", "Trajectory", "TriggerParams", "WeightedDigraph",
    "World", "ZenoGuardError", "degrees", "empirical_rate", "event_stats", "is_strongly_connected",
    "is_weight_balanced", "laplacian", "load_scenario", "lyapunov", "next_crossing", "phi",
    "rate_certificate", "run", "run_metrics", "run_periodic_event", "run_periodic_laplacian",
    "should_broadcast", "simulate", "spectral", "trigger_function", "validate_scenario",
    "verify_exponential_bound",
]
