"""Service request model: microservice DAGs, demands, deadlines, arrivals.

A request is a DAG rooted at microservice 1; microservice 0 is the virtual
access point. It consumes no CPU, its link to the root carries no demand and
never fails, and its placement is pinned to the request's access node.
Requests are immutable after generation; instance bookkeeping (backups) lives
in the placement layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Microservice",
    "MicroserviceLink",
    "ServiceRequest",
    "WorkloadRanges",
    "generate_request",
    "generate_arrivals",
    "link_latency",
    "software_reliability",
]


def software_reliability(failure_rate: float, horizon: float = 1.0) -> float:
    """Poisson no-failure probability over ``horizon`` time units."""
    if failure_rate < 0:
        raise ValueError("failure_rate must be non-negative")
    return math.exp(-failure_rate * horizon)


@dataclass(frozen=True)
class Microservice:
    id: int  # 0 is the virtual access microservice
    cpu_demand: float  # cores
    proc_latency: float  # ms
    failure_rate: float  # per time unit

    def __post_init__(self):
        if self.id == 0 and self.cpu_demand != 0.0:
            raise ValueError("virtual access microservice must not consume CPU")
        if self.cpu_demand < 0:
            raise ValueError("cpu_demand must be non-negative")


@dataclass(frozen=True)
class MicroserviceLink:
    parent_id: int
    child_id: int
    bw_demand: float  # MBps
    data_volume: float  # MB
    deadline: float  # s
    failure_rate: float  # per time unit

    def __post_init__(self):
        if self.parent_id == self.child_id:
            raise ValueError("link endpoints must differ")
        if self.parent_id != 0 and (self.bw_demand <= 0 or self.data_volume <= 0):
            raise ValueError("demands must be positive except on access links")


@dataclass(frozen=True)
class ServiceRequest:
    id: int
    microservices: tuple[Microservice, ...]  # index == id, includes m0
    links: tuple[MicroserviceLink, ...]
    backup_limit: int
    lifetime: int  # time units
    arrival_time: float
    access_node: int

    def __post_init__(self):
        n_real = len(self.microservices) - 1
        if n_real < 1:
            raise ValueError("request needs at least one real microservice")
        if self.lifetime < 1:
            raise ValueError("lifetime must be >= 1")
        if not 0 <= self.backup_limit <= n_real:
            raise ValueError("backup_limit must satisfy B < |M|+1 over real microservices")
        ids = [m.id for m in self.microservices]
        if ids != list(range(len(ids))):
            raise ValueError("microservice ids must be 0..|M|")
        parents: dict[int, list[int]] = {m.id: [] for m in self.microservices}
        for l in self.links:
            if l.parent_id >= l.child_id:
                raise ValueError("links must point from a lower id to a higher id")
            parents[l.child_id].append(l.parent_id)
        if parents[1] != [0]:
            raise ValueError("m0 must be the sole parent of m1")
        for mid in range(2, len(ids)):
            if not parents[mid]:
                raise ValueError(f"microservice {mid} unreachable")

    @property
    def real_ids(self) -> range:
        return range(1, len(self.microservices))

    def parents_of(self, ms_id: int) -> list[int]:
        return [l.parent_id for l in self.links if l.child_id == ms_id]

    def children_of(self, ms_id: int) -> list[int]:
        return [l.child_id for l in self.links if l.parent_id == ms_id]

    def link_between(self, parent_id: int, child_id: int) -> MicroserviceLink:
        for l in self.links:
            if l.parent_id == parent_id and l.child_id == child_id:
                return l
        raise KeyError((parent_id, child_id))

    def bfs_order(self) -> list[int]:
        """Real microservices in breadth-first order from the root."""
        order, seen, queue = [], {1}, [1]
        while queue:
            m = queue.pop(0)
            order.append(m)
            for c in sorted(self.children_of(m)):
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        return order

    def scaled(self, cpu_multiplier: float = 1.0, bw_multiplier: float = 1.0) -> "ServiceRequest":
        """Copy with inflated resource demands (resource-pressure experiments)."""
        if cpu_multiplier == 1.0 and bw_multiplier == 1.0:
            return self
        ms = tuple(replace(m, cpu_demand=m.cpu_demand * (cpu_multiplier if m.id != 0 else 1.0))
                   for m in self.microservices)
        links = tuple(replace(l, bw_demand=l.bw_demand * (bw_multiplier if l.parent_id != 0 else 1.0))
                      for l in self.links)
        return replace(self, microservices=ms, links=links)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "microservices": [
                {"id": m.id, "cpu_demand": m.cpu_demand, "proc_latency": m.proc_latency,
                 "failure_rate": m.failure_rate}
                for m in self.microservices
            ],
            "links": [
                {"parent": l.parent_id, "child": l.child_id, "bw_demand": l.bw_demand,
                 "data_volume": l.data_volume, "deadline": l.deadline, "failure_rate": l.failure_rate}
                for l in self.links
            ],
            "backup_limit": self.backup_limit,
            "lifetime": self.lifetime,
            "arrival_time": self.arrival_time,
            "access_node": self.access_node,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ServiceRequest":
        ms = tuple(Microservice(d["id"], d["cpu_demand"], d["proc_latency"], d["failure_rate"])
                   for d in data["microservices"])
        links = tuple(MicroserviceLink(d["parent"], d["child"], d["bw_demand"],
                                       d["data_volume"], d["deadline"], d["failure_rate"])
                      for d in data["links"])
        return cls(data["id"], ms, links, data["backup_limit"], data["lifetime"],
                   data["arrival_time"], data["access_node"])


@dataclass
class WorkloadRanges:
    """Sampling ranges for request generation (defaults follow the simulation setup)."""

    size: tuple[int, int] = (1, 5)  # real microservices, inclusive
    cpu_demand: tuple[float, float] = (0.1, 1.0)  # cores
    proc_latency: tuple[float, float] = (10.0, 50.0)  # ms
    data_volume: tuple[float, float] = (0.1, 5.0)  # MB
    bw_demand: tuple[float, float] = (0.1, 10.0)  # MBps
    deadline: tuple[float, float] = (0.03, 50.15)  # s
    lifetime: tuple[int, int] = (1, 100)  # time units, inclusive
    ms_failure_rate: float = 0.00001
    link_failure_rate: float = 0.00001
    backup_mode: str = "full"  # full | random | none
    extra_edge_prob: float = 0.0  # cross edges beyond the random tree
    cpu_multiplier: float = 1.0
    bw_multiplier: float = 1.0


def generate_request(ranges: WorkloadRanges, access_nodes: set[int],
                     rng_seed=0, request_id: int = 0,
                     arrival_time: float = 0.0) -> ServiceRequest:
    """Random request: a uniform random tree rooted at m1, demands from the ranges.

    ``rng_seed`` may be an int or a numpy Generator (to draw a stream of requests).
    """
    if not access_nodes:
        raise ValueError("access_nodes must be non-empty")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    size = int(rng.integers(ranges.size[0], ranges.size[1] + 1))
    parent_of = {1: 0}
    for j in range(2, size + 1):
        parent_of[j] = int(rng.integers(1, j))
    edges = [(parent_of[j], j) for j in range(1, size + 1)]
    if ranges.extra_edge_prob > 0:
        for child in range(3, size + 1):
            for par in range(1, child):
                if par != parent_of[child] and rng.uniform() < ranges.extra_edge_prob:
                    edges.append((par, child))
    edges.sort(key=lambda e: (e[1], e[0]))

    ms = [Microservice(0, 0.0, 0.0, 0.0)]
    for j in range(1, size + 1):
        ms.append(Microservice(
            j,
            float(rng.uniform(*ranges.cpu_demand)) * ranges.cpu_multiplier,
            float(rng.uniform(*ranges.proc_latency)),
            ranges.ms_failure_rate,
        ))

    links = []
    for par, child in edges:
        if par == 0:
            links.append(MicroserviceLink(0, child, 0.0, 0.0, float(rng.uniform(*ranges.deadline)), 0.0))
        else:
            links.append(MicroserviceLink(
                par, child,
                float(rng.uniform(*ranges.bw_demand)) * ranges.bw_multiplier,
                float(rng.uniform(*ranges.data_volume)),
                float(rng.uniform(*ranges.deadline)),
                ranges.link_failure_rate,
            ))

    lifetime = int(rng.integers(ranges.lifetime[0], ranges.lifetime[1] + 1))
    access = int(sorted(access_nodes)[rng.integers(0, len(access_nodes))])
    if ranges.backup_mode == "full":
        backup_limit = size
    elif ranges.backup_mode == "random":
        backup_limit = int(rng.integers(1, size + 1))
    elif ranges.backup_mode == "none":
        backup_limit = 0
    else:
        raise ValueError(f"unknown backup_mode {ranges.backup_mode!r}")

    return ServiceRequest(request_id, tuple(ms), tuple(links), backup_limit,
                          lifetime, arrival_time, access)


def generate_arrivals(count: int, rate: float, rng_seed=0) -> list[float]:
    """Cumulative Poisson-process arrival times (exponential inter-arrival gaps)."""
    if count <= 0:
        raise ValueError("count must be positive")
    if rate <= 0:
        raise ValueError("rate must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    gaps = rng.exponential(1.0 / rate, size=count)
    return list(np.cumsum(gaps))


def link_latency(link: MicroserviceLink, placed_paths, child_proc_latency: float) -> float:
    """End-to-end latency of a placed microservice link in seconds.

    Transmission (data over demanded bandwidth) plus the propagation delay of
    the fastest placed path plus the child's processing latency. ``placed_paths``
    items expose ``delay_ms``.
    """
    paths = list(placed_paths)
    if not paths:
        raise ValueError("empty path set")
    if link.bw_demand > 0:
        transmission = link.data_volume / link.bw_demand
    elif link.data_volume == 0:
        transmission = 0.0
    else:
        raise ValueError("data to move but no bandwidth demand")
    return transmission + min(p.delay_ms for p in paths) / 1000.0 + child_proc_latency / 1000.0
