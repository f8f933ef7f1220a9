"""Network-aware reliability modeling and placement for microservice DAGs.

Library layout: topology (infrastructure + ledgers), workload (request DAGs),
pathfinding (disjoint path search), relcore (reliability algebra and the
analytic cascade), placement (heuristics), simulator (fault injection),
experiments (sweeps), validation (independent oracles), cli.
"""

from .pathfinding import Path, find_idps
from .placement import (
    PlacementOutcome,
    PlacementState,
    place_request,
    srp_place,
    srp_s_place,
)
from .relcore import RelValue, network_reliability_matrix, service_reliability
from .simulator import BatchResult, SimConfig, SimResult, run_batch, run_simulation
from .topology import InfrastructureNetwork, TopologyRanges, generate_er_topology
from .workload import ServiceRequest, WorkloadRanges, generate_arrivals, generate_request

__version__ = "0.1.0"

__all__ = [
    "Path",
    "find_idps",
    "PlacementOutcome",
    "PlacementState",
    "place_request",
    "srp_place",
    "srp_s_place",
    "RelValue",
    "network_reliability_matrix",
    "service_reliability",
    "BatchResult",
    "SimConfig",
    "SimResult",
    "run_batch",
    "run_simulation",
    "InfrastructureNetwork",
    "TopologyRanges",
    "generate_er_topology",
    "ServiceRequest",
    "WorkloadRanges",
    "generate_arrivals",
    "generate_request",
    "__version__",
]
