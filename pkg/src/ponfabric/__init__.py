"""Energy-aware routing and link-failure analysis for AWGR-based PON data-centre fabrics."""

from ponfabric.failure import (
    DownReport,
    FailureKind,
    FailureScenario,
    apply_failure,
    classify_link,
    down_analysis,
    enumerate_single_failures,
)
from ponfabric.metrics import (
    DeviceParams,
    mm1_delay,
    olt_power,
    server_power,
    solution_delay,
    total_power,
)
from ponfabric.optimizer import (
    Demand,
    RoutingProblem,
    RoutingSolution,
    SolverConfig,
    brute_force,
    formulate,
    solve,
    verify,
)
from ponfabric.topology import (
    Topology,
    build_pon3,
    build_two_tier,
    candidate_paths,
    load_topology,
    save_topology,
)

__version__ = "0.1.0"

__all__ = [
    "DownReport",
    "FailureKind",
    "FailureScenario",
    "apply_failure",
    "classify_link",
    "down_analysis",
    "enumerate_single_failures",
    "DeviceParams",
    "mm1_delay",
    "olt_power",
    "server_power",
    "solution_delay",
    "total_power",
    "Demand",
    "RoutingProblem",
    "RoutingSolution",
    "SolverConfig",
    "brute_force",
    "formulate",
    "solve",
    "verify",
    "Topology",
    "build_pon3",
    "build_two_tier",
    "candidate_paths",
    "load_topology",
    "save_topology",
]
