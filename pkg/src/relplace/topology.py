"""Infrastructure network model: nodes, links, resource ledgers, random topologies.

Nodes carry a load-dependent two-segment reliability (high reliability below the
load threshold, lower above it). Links fail as a Poisson process and expose two
bandwidth pools: the protected pool bounded by the physical capacity and a
virtual shared pool bounded by omega times the capacity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CapacityError",
    "PhysicalNode",
    "PhysicalLink",
    "InfrastructureNetwork",
    "TopologyRanges",
    "generate_er_topology",
    "select_access_nodes",
    "node_reliability",
    "link_reliability",
]

# float-dust tolerance for ledger arithmetic
_EPS = 1e-9


class CapacityError(Exception):
    """Raised when an allocation would exceed a resource capacity."""


@dataclass
class PhysicalNode:
    id: int
    cpu_capacity: float
    load_threshold: float  # fraction of cpu_capacity
    rel_low: float
    rel_high: float
    cpu_allocated: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rel_high < self.rel_low <= 1.0:
            raise ValueError(f"node {self.id}: need 0 < rel_high < rel_low <= 1")
        if not 0.0 <= self.load_threshold <= 1.0:
            raise ValueError(f"node {self.id}: load_threshold outside [0, 1]")
        if self.cpu_allocated < 0 or self.cpu_allocated > self.cpu_capacity:
            raise ValueError(f"node {self.id}: cpu_allocated outside ledger")


@dataclass
class PhysicalLink:
    id: int
    u: int
    v: int
    bw_capacity: float
    prop_delay: float  # ms
    failure_rate: float  # failures per time unit
    bw_protected: float = 0.0
    bw_shared: float = 0.0

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError("self-loops not allowed")
        if self.prop_delay <= 0:
            raise ValueError("prop_delay must be positive")
        if self.failure_rate < 0:
            raise ValueError("failure_rate must be non-negative")

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)


def node_reliability(node: PhysicalNode, extra_load: float = 0.0) -> float:
    """Two-segment load-dependent reliability of a node.

    The low branch applies while allocated CPU (plus ``extra_load``, used for
    what-if scoring) is at or below threshold * capacity, boundary inclusive.
    """
    load = node.cpu_allocated + extra_load
    if load <= node.load_threshold * node.cpu_capacity + _EPS:
        return node.rel_low
    return node.rel_high


def link_reliability(link: PhysicalLink, horizon: float = 1.0) -> float:
    """Survival probability of a link over ``horizon`` time units."""
    return math.exp(-link.failure_rate * horizon)


@dataclass
class InfrastructureNetwork:
    nodes: list[PhysicalNode]
    links: list[PhysicalLink]
    access_nodes: set[int] = field(default_factory=set)
    omega: float = 1.0  # shared pool capacity factor

    def __post_init__(self):
        n = len(self.nodes)
        seen = set()
        for lk in self.links:
            if not (0 <= lk.u < n and 0 <= lk.v < n):
                raise ValueError("link endpoint out of range")
            key = (min(lk.u, lk.v), max(lk.u, lk.v))
            if key in seen:
                raise ValueError(f"duplicate link {key}")
            seen.add(key)
        if not set(self.access_nodes) <= set(range(n)):
            raise ValueError("access_nodes outside node range")
        self._build_adjacency()

    def _build_adjacency(self):
        self.adjacency: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for lk in self.links:
            self.adjacency[lk.u].append((lk.v, lk.id))
            self.adjacency[lk.v].append((lk.u, lk.id))
        for lst in self.adjacency:
            lst.sort()
        # CSR mirrors for the flow kernel
        indptr = [0]
        nbrs: list[int] = []
        eids: list[int] = []
        for lst in self.adjacency:
            for v, e in lst:
                nbrs.append(v)
                eids.append(e)
            indptr.append(len(nbrs))
        self.adj_indptr = np.asarray(indptr, dtype=np.int32)
        self.adj_nbr = np.asarray(nbrs, dtype=np.int32)
        self.adj_eid = np.asarray(eids, dtype=np.int32)
        self.edge_u_arr = np.asarray([lk.u for lk in self.links], dtype=np.int32)
        self.edge_delay = np.asarray([lk.prop_delay for lk in self.links], dtype=np.float64)
        self.bw_capacity_arr = np.asarray([lk.bw_capacity for lk in self.links], dtype=np.float64)
        self._bw_protected = np.zeros(len(self.links), dtype=np.float64)
        self._bw_shared = np.zeros(len(self.links), dtype=np.float64)
        for lk in self.links:
            self._bw_protected[lk.id] = lk.bw_protected
            self._bw_shared[lk.id] = lk.bw_shared

    # -- resource ledgers ---------------------------------------------------

    def allocate_cpu(self, node_id: int, amount: float) -> None:
        if amount < 0:
            raise ValueError("amount must be non-negative")
        node = self.nodes[node_id]
        if node.cpu_allocated + amount > node.cpu_capacity + _EPS:
            raise CapacityError(f"cpu on node {node_id}: {node.cpu_allocated} + {amount} > {node.cpu_capacity}")
        node.cpu_allocated += amount

    def release_cpu(self, node_id: int, amount: float) -> None:
        node = self.nodes[node_id]
        if amount < 0 or node.cpu_allocated - amount < -_EPS:
            raise ValueError(f"cpu release of {amount} exceeds allocation on node {node_id}")
        node.cpu_allocated = max(0.0, node.cpu_allocated - amount)

    def allocate_bandwidth(self, link_id: int, amount: float, pool: str = "protected") -> None:
        if amount < 0:
            raise ValueError("amount must be non-negative")
        lk = self.links[link_id]
        if pool == "protected":
            if lk.bw_protected + amount > lk.bw_capacity + _EPS:
                raise CapacityError(f"protected bw on link {link_id} exceeded")
            lk.bw_protected += amount
            self._bw_protected[link_id] = lk.bw_protected
        elif pool == "shared":
            if lk.bw_shared + amount > self.omega * lk.bw_capacity + _EPS:
                raise CapacityError(f"shared bw on link {link_id} exceeded")
            lk.bw_shared += amount
            self._bw_shared[link_id] = lk.bw_shared
        else:
            raise ValueError(f"unknown pool {pool!r}")

    def release_bandwidth(self, link_id: int, amount: float, pool: str = "protected") -> None:
        lk = self.links[link_id]
        if pool == "protected":
            if amount < 0 or lk.bw_protected - amount < -_EPS:
                raise ValueError(f"protected release of {amount} exceeds allocation on link {link_id}")
            lk.bw_protected = max(0.0, lk.bw_protected - amount)
            self._bw_protected[link_id] = lk.bw_protected
        elif pool == "shared":
            if amount < 0 or lk.bw_shared - amount < -_EPS:
                raise ValueError(f"shared release of {amount} exceeds allocation on link {link_id}")
            lk.bw_shared = max(0.0, lk.bw_shared - amount)
            self._bw_shared[link_id] = lk.bw_shared
        else:
            raise ValueError(f"unknown pool {pool!r}")

    def residual_bandwidth(self, pool: str) -> np.ndarray:
        if pool == "protected":
            return self.bw_capacity_arr - self._bw_protected
        if pool == "shared":
            return self.omega * self.bw_capacity_arr - self._bw_shared
        raise ValueError(f"unknown pool {pool!r}")

    @property
    def protected_alloc(self) -> np.ndarray:
        return self._bw_protected

    # -- convenience --------------------------------------------------------

    def degree(self, node_id: int) -> int:
        return len(self.adjacency[node_id])

    def node_rel(self, node_id: int, extra_load: float = 0.0) -> float:
        return node_reliability(self.nodes[node_id], extra_load)

    def link_rel(self, link_id: int) -> float:
        return link_reliability(self.links[link_id])

    def edge_between(self, u: int, v: int) -> int | None:
        for nbr, eid in self.adjacency[u]:
            if nbr == v:
                return eid
        return None

    def copy(self) -> "InfrastructureNetwork":
        nodes = [PhysicalNode(n.id, n.cpu_capacity, n.load_threshold, n.rel_low, n.rel_high, n.cpu_allocated)
                 for n in self.nodes]
        links = [PhysicalLink(l.id, l.u, l.v, l.bw_capacity, l.prop_delay, l.failure_rate,
                              l.bw_protected, l.bw_shared)
                 for l in self.links]
        return InfrastructureNetwork(nodes, links, set(self.access_nodes), self.omega)

    # -- JSON interchange ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "cpu_capacity": n.cpu_capacity, "load_threshold": n.load_threshold,
                 "rel_low": n.rel_low, "rel_high": n.rel_high}
                for n in self.nodes
            ],
            "links": [
                {"u": l.u, "v": l.v, "bw_capacity": l.bw_capacity,
                 "prop_delay": l.prop_delay, "failure_rate": l.failure_rate}
                for l in self.links
            ],
            "access_nodes": sorted(self.access_nodes),
            "omega": self.omega,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InfrastructureNetwork":
        nodes = [PhysicalNode(d["id"], d["cpu_capacity"], d["load_threshold"],
                              d["rel_low"], d["rel_high"])
                 for d in data["nodes"]]
        links = [PhysicalLink(i, d["u"], d["v"], d["bw_capacity"], d["prop_delay"], d["failure_rate"])
                 for i, d in enumerate(data["links"])]
        return cls(nodes, links, set(data.get("access_nodes", [])), data.get("omega", 1.0))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "InfrastructureNetwork":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class TopologyRanges:
    """Sampling ranges for random topologies (defaults follow the simulation setup)."""

    cpu_capacity: tuple[int, int] = (8, 16)  # whole cores, inclusive
    load_threshold: float = 0.5
    rel_low: tuple[float, float] = (0.9999, 0.99999)
    rel_high: tuple[float, float] = (0.999, 0.9999)
    bw_capacity: tuple[float, float] = (100.0, 1000.0)  # MBps
    prop_delay: tuple[float, float] = (1.0, 10.0)  # ms
    link_failure_rate: float = 0.00001
    omega: float = 1.0


def generate_er_topology(node_count: int, edge_prob: float,
                         ranges: TopologyRanges | None = None,
                         rng_seed: int = 0,
                         access_fraction: float = 0.2) -> InfrastructureNetwork:
    """Erdos-Renyi random infrastructure: every unordered pair gets a link with
    probability ``edge_prob``. Deterministic for a fixed seed."""
    if node_count <= 0:
        raise ValueError("node_count must be positive")
    if not 0.0 < edge_prob <= 1.0:
        raise ValueError("edge_prob must be in (0, 1]")
    ranges = ranges or TopologyRanges()
    rng = np.random.default_rng(rng_seed)

    nodes = []
    for i in range(node_count):
        cap = int(rng.integers(ranges.cpu_capacity[0], ranges.cpu_capacity[1] + 1))
        rl = float(rng.uniform(*ranges.rel_low))
        rh = float(rng.uniform(*ranges.rel_high))
        nodes.append(PhysicalNode(i, float(cap), ranges.load_threshold, rl, rh))

    links = []
    for i in range(node_count):
        for j in range(i + 1, node_count):
            if rng.uniform() < edge_prob:
                links.append((i, j))
    phys = []
    for eid, (i, j) in enumerate(links):
        bw = float(rng.uniform(*ranges.bw_capacity))
        d = float(rng.uniform(*ranges.prop_delay))
        phys.append(PhysicalLink(eid, i, j, bw, d, ranges.link_failure_rate))

    net = InfrastructureNetwork(nodes, phys, set(), ranges.omega)
    net.access_nodes = select_access_nodes(net, access_fraction)
    return net


def select_access_nodes(net: InfrastructureNetwork, fraction: float) -> set[int]:
    """The ceil(fraction * |N|) nodes of smallest degree, ties by node index."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    count = math.ceil(fraction * len(net.nodes))
    order = sorted(range(len(net.nodes)), key=lambda i: (net.degree(i), i))
    return set(order[:count])
