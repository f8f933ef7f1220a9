"""Internally disjoint path search under bandwidth, length and latency constraints.

The search runs a unit-capacity Edmonds-Karp max flow on the vertex-split graph
restricted to edges with enough residual capacity in the requested pool, so the
returned set is maximal: given the returned paths, no further qualifying
disjoint path exists (paths dropped by the length or latency filters can leave
the set sub-maximal in rare cases, which the length bound contract accepts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _flowkernel
from .topology import InfrastructureNetwork

__all__ = ["Path", "find_idps", "path_feasible", "shortest_feasible_path"]

_EPS = 1e-9


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    delay_ms: float

    def __post_init__(self):
        if len(self.nodes) != len(self.edges) + 1 or len(self.edges) == 0:
            raise ValueError("malformed path")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path must be simple")

    @property
    def interior(self) -> tuple[int, ...]:
        return self.nodes[1:-1]

    def __len__(self) -> int:
        return len(self.edges)


def _make_path(net: InfrastructureNetwork, nodes, edges) -> Path:
    delay = float(sum(net.links[e].prop_delay for e in edges))
    return Path(tuple(nodes), tuple(edges), delay)


def find_idps(net: InfrastructureNetwork, src: int, dst: int, max_len: int = 4,
              bw_required: float = 0.0, pool: str = "protected",
              latency_budget_ms: float | None = None) -> list[Path]:
    """Maximal set of internally vertex-disjoint src->dst paths.

    Every returned path has at most ``max_len`` edges, residual ``pool``
    capacity >= ``bw_required`` on each edge, and (when a budget is given)
    total propagation delay within ``latency_budget_ms``.
    Returns an empty list when nothing qualifies.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if bw_required < 0:
        raise ValueError("bw_required must be non-negative")
    if latency_budget_ms is not None and latency_budget_ms < 0:
        return []
    feasible = (net.residual_bandwidth(pool) >= bw_required - _EPS).astype(np.uint8)
    raw = _flowkernel.find_disjoint_paths_raw(
        net.adj_indptr, net.adj_nbr, net.adj_eid, net.edge_u_arr, feasible,
        len(net.nodes), src, dst, max_len)
    paths = [_make_path(net, nodes, edges) for nodes, edges in raw]
    if latency_budget_ms is not None:
        paths = [p for p in paths if p.delay_ms <= latency_budget_ms + _EPS]
    return paths


def path_feasible(net: InfrastructureNetwork, path: Path, bw_required: float,
                  pool: str, deadline_s: float, data_volume: float,
                  bw_demand: float, child_proc_latency_ms: float) -> bool:
    """True iff the path has residual capacity for the demand and meets the
    link deadline (transmission + this path's propagation + processing)."""
    residual = net.residual_bandwidth(pool)
    for e in path.edges:
        if residual[e] < bw_required - _EPS:
            return False
    transmission = data_volume / bw_demand if bw_demand > 0 else 0.0
    latency = transmission + path.delay_ms / 1000.0 + child_proc_latency_ms / 1000.0
    return latency <= deadline_s + _EPS


def shortest_feasible_path(net: InfrastructureNetwork, src: int, dst: int,
                           bw_required: float, pool: str,
                           latency_budget_ms: float | None = None,
                           weight: str = "hops",
                           max_len: int | None = None) -> Path | None:
    """Single cheapest feasible path by hop count or propagation delay.

    Used by the benchmark heuristics; ties resolve to the lexicographically
    smallest node sequence via ascending-neighbor relaxation order.
    """
    residual = net.residual_bandwidth(pool)
    ok = residual >= bw_required - _EPS
    n = len(net.nodes)
    if weight == "hops":
        dist = [np.inf] * n
        dist[src] = 0.0
        prev = [-1] * n
        prev_e = [-1] * n
        frontier = [src]
        while frontier and dist[dst] == np.inf:
            nxt = []
            for u in frontier:
                for v, e in net.adjacency[u]:
                    if ok[e] and dist[v] == np.inf:
                        dist[v] = dist[u] + 1
                        prev[v] = u
                        prev_e[v] = e
                        nxt.append(v)
            frontier = nxt
    elif weight == "delay":
        import heapq
        dist = [np.inf] * n
        dist[src] = 0.0
        prev = [-1] * n
        prev_e = [-1] * n
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            if u == dst:
                break
            for v, e in net.adjacency[u]:
                if not ok[e]:
                    continue
                nd = d + net.links[e].prop_delay
                if nd < dist[v] - _EPS:
                    dist[v] = nd
                    prev[v] = u
                    prev_e[v] = e
                    heapq.heappush(heap, (nd, v))
    else:
        raise ValueError(f"unknown weight {weight!r}")

    if dist[dst] == np.inf:
        return None
    nodes = [dst]
    edges = []
    cur = dst
    while cur != src:
        edges.append(prev_e[cur])
        cur = prev[cur]
        nodes.append(cur)
    nodes.reverse()
    edges.reverse()
    path = _make_path(net, nodes, edges)
    if max_len is not None and len(path) > max_len:
        return None
    if latency_budget_ms is not None and path.delay_ms > latency_budget_ms + _EPS:
        return None
    return path
