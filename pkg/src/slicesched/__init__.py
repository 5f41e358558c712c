"""TDMA schedule and slice synthesis with deadline guarantees."""

from .model import (
    CapacityError,
    Flow,
    InfeasibleError,
    Instance,
    Link,
    Network,
    SliceAllocation,
    SliceSchedError,
    line_flow,
    line_network,
)
from .schedule import CyclicSchedule, build_block_schedule, build_orr, classify_regularity, inter_scheduling_stats
from .simulator import SimReport, check_deficit_bound, default_horizon, detect_steady_state, simulate
from .synthesis import SynthesisResult, arsc, cbh_baseline

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CyclicSchedule",
    "Flow",
    "InfeasibleError",
    "Instance",
    "Link",
    "Network",
    "SimReport",
    "SliceAllocation",
    "SliceSchedError",
    "SynthesisResult",
    "arsc",
    "build_block_schedule",
    "build_orr",
    "cbh_baseline",
    "check_deficit_bound",
    "classify_regularity",
    "default_horizon",
    "detect_steady_state",
    "inter_scheduling_stats",
    "line_flow",
    "line_network",
    "simulate",
]
