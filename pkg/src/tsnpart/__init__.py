"""Multicast partitioning and time-triggered schedule synthesis for TSN."""

from .harness import IterationMetrics, RunConfig, compare_runs, emit_report, run_scenario
from .kernels import BACKEND
from .netgraph import Network, TopologyKind, gen_topology, read_topology
from .partition import SubStream, partition_stream
from .timing import Schedule, TimingConfig, throughput, validate_schedule
from .workload import Scenario, Stream, gen_scenario, read_scenario

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "IterationMetrics", "Network", "RunConfig", "Scenario", "Schedule",
    "Stream", "SubStream", "TimingConfig", "TopologyKind", "compare_runs", "emit_report",
    "gen_scenario", "gen_topology", "partition_stream", "read_scenario", "read_topology",
    "run_scenario", "throughput", "validate_schedule",
]
