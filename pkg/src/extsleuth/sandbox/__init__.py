from .events import EventLog, SandboxEvent, parse_event_log
from .scenario import ScenarioConfig, ScenarioError, parse_scenario
from .runner import SandboxEnv, run_dynamic_analysis

__all__ = [
    "EventLog",
    "SandboxEvent",
    "parse_event_log",
    "ScenarioConfig",
    "ScenarioError",
    "parse_scenario",
    "SandboxEnv",
    "run_dynamic_analysis",
]
