"""Scenario front end: DSL, IOS shell, runner, capture statistics, CLI and REPL."""

from .commands import Console, Invocation, parse_command
from .dsl import Scenario, ScenarioError, load_scenario, parse_scenario
from .filters import FilterError, compile_filter
from .ios import IosError, IosSession
from .runner import RunResult, run_scenario, write_outputs
from .stats import count, io_graph, io_graph_csv, load, overhead, tcp_phases

__all__ = [
    "Console", "Invocation", "parse_command", "Scenario", "ScenarioError", "load_scenario",
    "parse_scenario", "FilterError", "compile_filter", "IosError", "IosSession", "RunResult",
    "run_scenario", "write_outputs", "count", "io_graph", "io_graph_csv", "load", "overhead",
    "tcp_phases",
]
