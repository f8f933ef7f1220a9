"""Placement heuristics: reliability-aware placement with backtracking and
backup selection, its shared-path contention-aware variant, and the four
benchmark strategies (DAIP, RRSP, Grd, Grd-B).

A placement run mutates the network ledgers; on failure every tentative
reservation is rolled back. Under the shared mechanism, links between primary
instances reserve protected bandwidth and every backup-involving link reserves
from the virtual shared pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import relcore
from .pathfinding import Path, find_idps, shortest_feasible_path
from .topology import CapacityError, InfrastructureNetwork
from .workload import ServiceRequest

__all__ = [
    "PROTECTED",
    "SHARED",
    "ALGORITHMS",
    "RouteRecord",
    "PlacementState",
    "PlacementOutcome",
    "SharedLinkIndex",
    "sprc_path_reliability",
    "srp_place",
    "srp_s_place",
    "daip_place",
    "rrsp_place",
    "grd_place",
    "grd_b_place",
    "place_request",
    "release_placement",
    "constraint_audit",
]

PROTECTED = "protected"
SHARED = "shared"
ALGORITHMS = ("SRP", "SRP-S", "DAIP", "RRSP", "Grd", "Grd-B")

_EPS = 1e-9


@dataclass
class RouteRecord:
    child: tuple[int, int]
    parent: tuple[int, int]
    paths: tuple[Path, ...]  # empty tuple = co-located endpoints
    pool: str
    bw: float

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass
class PlacementState:
    service_id: int
    mechanism: str = PROTECTED
    assignments: dict = field(default_factory=dict)  # (ms, b) -> node
    routes: dict = field(default_factory=dict)  # (child_key, parent_key) -> RouteRecord
    recorded_sigma_ms: dict = field(default_factory=dict)  # ms -> latest sigma_m
    recorded_sigma_inst: dict = field(default_factory=dict)  # (ms, b) -> sigma at placement
    blacklist: dict = field(default_factory=dict)  # ms -> set of nodes
    backtracks: int = 0
    analytic_reliability: float | None = None

    def instances_of(self, ms_id: int) -> list[int]:
        return sorted(b for (m, b) in self.assignments if m == ms_id)

    def to_json(self) -> dict:
        return {
            "service_id": self.service_id,
            "mechanism": self.mechanism,
            "instances": [
                {"microservice": m, "backup_index": b, "node": n}
                for (m, b), n in sorted(self.assignments.items())
            ],
            "links": [
                {"child": list(rec.child), "parent": list(rec.parent), "pool": rec.pool,
                 "bw": rec.bw, "paths": [list(p.nodes) for p in rec.paths]}
                for _k, rec in sorted(self.routes.items())
            ],
            "recorded_sigma": {str(k): v for k, v in sorted(self.recorded_sigma_inst.items())},
            "analytic_reliability": self.analytic_reliability,
            "backtracks": self.backtracks,
        }


@dataclass
class PlacementOutcome:
    success: bool
    state: PlacementState | None = None
    reason: str = ""


@dataclass
class SharedRef:
    service_id: int
    route_key: tuple
    instance: tuple[int, int]
    bw: float
    activation_prob: float


class SharedLinkIndex:
    """Per-edge registry of shared-pool instance links across active services,
    consulted by the shared-path contention estimate."""

    def __init__(self):
        self.by_edge: dict[int, list[SharedRef]] = {}

    def add_route(self, state: PlacementState, rec: RouteRecord) -> None:
        if rec.pool != SHARED:
            return
        refs = []
        for key in (rec.child, rec.parent):
            if key[1] > 1:
                refs.append(SharedRef(state.service_id, (rec.child, rec.parent), key,
                                      rec.bw, _activation_prob(state, key)))
        if not refs:
            return
        for path in rec.paths:
            for e in path.edges:
                bucket = self.by_edge.setdefault(e, [])
                bucket.extend(refs)

    def remove_route(self, service_id: int, route_key: tuple) -> None:
        for bucket in self.by_edge.values():
            bucket[:] = [r for r in bucket
                         if not (r.service_id == service_id and r.route_key == route_key)]

    def remove_service(self, service_id: int) -> None:
        for bucket in self.by_edge.values():
            bucket[:] = [r for r in bucket if r.service_id != service_id]


def _activation_prob(state: PlacementState, inst: tuple[int, int]) -> float:
    """Probability that backup instance (m, b) must activate: every instance of
    m with a lower backup index is down, per the sigma values recorded when
    those instances were placed."""
    ms, b = inst
    act = 1.0
    for b2 in range(1, b):
        act *= 1.0 - state.recorded_sigma_inst.get((ms, b2), 0.0)
    return act


def sprc_path_reliability(net: InfrastructureNetwork, shared_index: SharedLinkIndex | None,
                          paths, link_bw: float, literal: bool = False):
    """Shared-path-contention-corrected per-path reliabilities.

    A contender is a backup instance with a shared link on the path whose
    simultaneous activation would not fit the protected headroom of some shared
    edge. The correction multiplies each path reliability by the first-order
    probability that no contender activates; ``literal`` switches to the
    pseudocode accumulation (sum of contender inactivation probabilities).
    """
    out = []
    prot = net.protected_alloc
    cap = net.bw_capacity_arr
    for path in paths:
        base = relcore.path_rel_from_seq(net, path.nodes)
        contenders: dict[tuple, float] = {}
        if shared_index is not None:
            for e in path.edges:
                for ref in shared_index.by_edge.get(e, ()):
                    if cap[e] < prot[e] + ref.bw + link_bw - _EPS:
                        contenders[(ref.service_id, ref.instance)] = ref.activation_prob
        if literal:
            factor = sum(1.0 - a for a in contenders.values())
        else:
            factor = max(0.0, 1.0 - sum(contenders.values()))
        out.append(min(1.0, factor) * base)
    return out


def release_placement(net: InfrastructureNetwork, state: PlacementState,
                      request: ServiceRequest,
                      shared_index: SharedLinkIndex | None = None) -> None:
    """Return every resource held by a placement to the ledgers."""
    for rec in state.routes.values():
        for path in rec.paths:
            for e in path.edges:
                net.release_bandwidth(e, rec.bw, rec.pool)
    state.routes.clear()
    for (ms, _b), node in list(state.assignments.items()):
        if ms != 0:
            net.release_cpu(node, request.microservices[ms].cpu_demand)
    state.assignments.clear()
    if shared_index is not None:
        shared_index.remove_service(state.service_id)


class _Run:
    """Shared mutable context for one placement attempt."""

    def __init__(self, net, request, mechanism, k, shared_index=None,
                 sprc=False, sprc_literal=False):
        self.net: InfrastructureNetwork = net
        self.request: ServiceRequest = request
        self.mechanism = mechanism
        self.k = k
        self.shared_index = shared_index
        self.sprc = sprc
        self.sprc_literal = sprc_literal
        self.state = PlacementState(request.id, mechanism)
        self.state.assignments[(0, 1)] = request.access_node
        self.state.blacklist = {m: set() for m in request.real_ids}

    # -- pools and budgets ----------------------------------------------

    def pool_for(self, child_key, parent_key) -> str:
        if self.mechanism != SHARED:
            return PROTECTED
        return PROTECTED if child_key[1] == 1 and parent_key[1] == 1 else SHARED

    def budget_ms(self, link, child_proc_ms: float) -> float:
        transmission = link.data_volume / link.bw_demand if link.bw_demand > 0 else 0.0
        return (link.deadline - transmission - child_proc_ms / 1000.0) * 1000.0

    # -- scoring ----------------------------------------------------------

    def candidate_paths(self, ms_id, child_key, parent_key, node):
        """Feasible path set from candidate node to a parent instance. Connected
        instances need a real routed path (an empty path set combines to zero
        reliability), so a node hosting the parent is not reachable from itself."""
        link = self.request.link_between(parent_key[0], ms_id)
        budget = self.budget_ms(link, self.request.microservices[ms_id].proc_latency)
        pnode = self.state.assignments[parent_key]
        if node == pnode or budget < 0:
            return [], False
        pool = self.pool_for(child_key, parent_key)
        paths = find_idps(self.net, node, pnode, self.k, link.bw_demand, pool, budget)
        return paths, bool(paths)

    def parent_instance_reliability(self, ms_id, child_key, parent_key, node):
        """Total path reliability toward one parent instance (possibly
        contention-corrected), plus the path set for later reservation."""
        paths, ok = self.candidate_paths(ms_id, child_key, parent_key, node)
        if not ok:
            return 0.0, None
        link = self.request.link_between(parent_key[0], ms_id)
        if self.sprc and self.pool_for(child_key, parent_key) == SHARED:
            vals = sprc_path_reliability(self.net, self.shared_index, paths,
                                         link.bw_demand, self.sprc_literal)
        else:
            vals = [relcore.path_rel_from_seq(self.net, p.nodes) for p in paths]
        prod = 1.0
        for v in vals:
            prod *= 1.0 - v
        return 1.0 - prod, paths

    def score_candidate(self, ms_id, b, node, critical):
        """Algorithm score of placing instance (ms_id, b) on node: product over
        parent microservices of the reliability-sum over parent instances,
        times the post-placement node reliability (as a ratio when the node is
        already critical)."""
        child_key = (ms_id, b)
        ms = self.request.microservices[ms_id]
        score = 1.0
        routes = {}
        for f in self.request.parents_of(ms_id):
            if f == 0:
                # The access link carries no demand and never fails in the
                # value model, but the search still weighs path reliability
                # toward the access node (no route is stored or reserved).
                link = self.request.link_between(0, ms_id)
                budget = self.budget_ms(link, ms.proc_latency)
                access = self.state.assignments[(0, 1)]
                if node == access or budget < 0:
                    return 0.0, None
                paths = find_idps(self.net, node, access, self.k, 0.0,
                                  PROTECTED, budget)
                if not paths:
                    return 0.0, None
                prod = 1.0
                for p in paths:
                    prod *= 1.0 - relcore.path_rel_from_seq(self.net, p.nodes)
                score *= 1.0 - prod
                continue
            r_b = 0.0
            for b2 in self.state.instances_of(f):
                rel, paths = self.parent_instance_reliability(ms_id, child_key, (f, b2), node)
                if paths is None:
                    continue
                routes[(f, b2)] = paths
                r_b = r_b + rel - r_b * rel
            if r_b <= 0.0:
                return 0.0, None
            score *= r_b
        r_new = self.net.node_rel(node, extra_load=ms.cpu_demand)
        if node in critical:
            score *= r_new / self.net.node_rel(node)
        else:
            score *= r_new
        return score, routes

    # -- mutation ---------------------------------------------------------

    def _reserve_route(self, child_key, parent_key, paths):
        link = self.request.link_between(parent_key[0], child_key[0])
        pool = self.pool_for(child_key, parent_key)
        rec = RouteRecord(child_key, parent_key, tuple(paths), pool, link.bw_demand)
        done = []
        try:
            for path in rec.paths:
                for e in path.edges:
                    self.net.allocate_bandwidth(e, rec.bw, pool)
                    done.append(e)
        except CapacityError:
            for e in done:
                self.net.release_bandwidth(e, rec.bw, pool)
            raise
        self.state.routes[(child_key, parent_key)] = rec
        if self.shared_index is not None:
            self.shared_index.add_route(self.state, rec)
        return rec

    def _drop_route(self, key):
        rec = self.state.routes.pop(key, None)
        if rec is None:
            return
        for path in rec.paths:
            for e in path.edges:
                self.net.release_bandwidth(e, rec.bw, rec.pool)
        if self.shared_index is not None:
            self.shared_index.remove_route(self.state.service_id, (rec.child, rec.parent))

    def place_instance(self, ms_id, b, node, parent_routes) -> bool:
        """Reserve CPU and all parent-side routes; on any capacity miss undo
        everything and report failure."""
        ms = self.request.microservices[ms_id]
        key = (ms_id, b)
        try:
            self.net.allocate_cpu(node, ms.cpu_demand)
        except CapacityError:
            return False
        self.state.assignments[key] = node
        reserved = []
        try:
            for parent_key in sorted(parent_routes):
                self._reserve_route(key, parent_key, parent_routes[parent_key])
                reserved.append((key, parent_key))
        except CapacityError:
            for rk in reserved:
                self._drop_route(rk)
            del self.state.assignments[key]
            self.net.release_cpu(node, ms.cpu_demand)
            return False
        return True

    def route_child_side(self, ms_id, b) -> None:
        """Connect an added backup instance to every placed instance of each
        child microservice, best effort (missing links just contribute zero)."""
        node = self.state.assignments[(ms_id, b)]
        for c in sorted(self.request.children_of(ms_id)):
            link = self.request.link_between(ms_id, c)
            budget = self.budget_ms(link, self.request.microservices[c].proc_latency)
            for b2 in self.state.instances_of(c):
                child_key = (c, b2)
                parent_key = (ms_id, b)
                cnode = self.state.assignments[child_key]
                if cnode == node or budget < 0:
                    continue  # connected instances need a real path
                pool = self.pool_for(child_key, parent_key)
                paths = find_idps(self.net, cnode, node, self.k, link.bw_demand, pool, budget)
                if not paths:
                    continue
                try:
                    self._reserve_route(child_key, parent_key, paths)
                except CapacityError:
                    continue

    def undo_instance(self, key) -> None:
        ms_id, _b = key
        for rk in [rk for rk in self.state.routes if rk[0] == key or rk[1] == key]:
            self._drop_route(rk)
        node = self.state.assignments.pop(key)
        self.net.release_cpu(node, self.request.microservices[ms_id].cpu_demand)
        self.state.recorded_sigma_inst.pop(key, None)
        if not self.state.instances_of(ms_id):
            self.state.recorded_sigma_ms.pop(ms_id, None)

    def record_sigma(self, ms_id, b) -> None:
        crit = relcore.critical_nodes(self.state, self.request)
        self.state.recorded_sigma_inst[(ms_id, b)] = relcore.instance_reliability(
            self.net, self.request, self.state, ms_id, b, crit)
        self.state.recorded_sigma_ms[ms_id] = relcore.microservice_reliability(
            self.net, self.request, self.state, ms_id, crit)

    def rollback_all(self) -> None:
        for key in [k for k in self.state.assignments if k != (0, 1)]:
            self.undo_instance(key)

    # -- Algorithm 2: single microservice placement -----------------------

    def place_one(self, ms_id, b) -> bool:
        ms = self.request.microservices[ms_id]
        critical = relcore.critical_nodes(self.state, self.request)
        blacklist = self.state.blacklist.get(ms_id, set())
        best_score = 0.0
        best_node = -1
        best_routes = None
        for node in range(len(self.net.nodes)):
            nd = self.net.nodes[node]
            if node in blacklist:
                continue
            if nd.cpu_allocated + ms.cpu_demand > nd.cpu_capacity + _EPS:
                continue
            score, routes = self.score_candidate(ms_id, b, node, critical)
            if score > best_score:
                best_score, best_node, best_routes = score, node, routes
        if best_node < 0:
            return False
        if not self.place_instance(ms_id, b, best_node, best_routes):
            return False
        if b > 1:
            self.route_child_side(ms_id, b)
        self.record_sigma(ms_id, b)
        return True

    # -- Algorithm 3: backup selection ------------------------------------

    def backup_placement(self) -> None:
        placed = 0
        candidates = set(self.request.real_ids)
        while placed < self.request.backup_limit and candidates:
            m_min = min(candidates, key=lambda m: (self.state.recorded_sigma_ms[m], m))
            b = self.state.instances_of(m_min)[-1] + 1
            if self.place_one(m_min, b):
                placed += 1
            else:
                candidates.discard(m_min)


def _expand_undo_set(request, base: set[int], placed: set[int]) -> set[int]:
    """Close the undo set over placed descendants so no placed microservice is
    left with a missing parent link after the undo."""
    out = set(base)
    changed = True
    while changed:
        changed = False
        for m in list(out):
            for c in request.children_of(m):
                if c in placed and c not in out:
                    out.add(c)
                    changed = True
    return out


def srp_place(net: InfrastructureNetwork, request: ServiceRequest, k: int = 4,
              delta: int = 3, mechanism: str = PROTECTED,
              shared_index: SharedLinkIndex | None = None,
              sprc: bool = False, sprc_literal: bool = False) -> PlacementOutcome:
    """Reliability-aware placement with bounded backtracking and
    lowest-sigma-first backup selection."""
    run = _Run(net, request, mechanism, k, shared_index, sprc, sprc_literal)
    order = request.bfs_order()
    placed: set[int] = set()
    while len(placed) < len(order):
        m = next(m for m in order if m not in placed)
        if run.place_one(m, 1):
            placed.add(m)
            continue
        parents = [p for p in request.parents_of(m) if p != 0]
        if m == 1 or run.state.backtracks >= delta or not parents:
            run.rollback_all()
            return PlacementOutcome(False, None, f"microservice {m} unplaceable")
        undo = set(parents)
        for p in parents:
            undo.update(request.children_of(p))
        undo = _expand_undo_set(request, undo, placed)
        for p in parents:
            run.state.blacklist[p].add(run.state.assignments[(p, 1)])
        for q in sorted(undo):
            if q in placed:
                run.undo_instance((q, 1))
                placed.discard(q)
        run.state.backtracks += 1
    run.backup_placement()
    run.state.analytic_reliability = relcore.service_reliability(net, request, run.state)
    return PlacementOutcome(True, run.state)


def srp_s_place(net: InfrastructureNetwork, request: ServiceRequest, k: int = 4,
                delta: int = 3, shared_index: SharedLinkIndex | None = None,
                sprc_literal: bool = False) -> PlacementOutcome:
    """SRP with the shared backup path mechanism and contention-aware path
    reliability for backup-involving links."""
    return srp_place(net, request, k, delta, SHARED, shared_index,
                     sprc=True, sprc_literal=sprc_literal)


# -- benchmark heuristics -----------------------------------------------------


def _benchmark_route_parents(run: _Run, ms_id, b, node, weight,
                             require_all: bool) -> dict | None:
    """Single-path routes from a candidate node to every placed parent
    instance. With require_all, any unroutable real parent link fails the
    candidate; otherwise unroutable links are skipped (backup best effort,
    at least one route still required)."""
    child_key = (ms_id, b)
    routes = {}
    any_real_parent = False
    for f in run.request.parents_of(ms_id):
        if f == 0:
            # access reachability is a feasibility requirement; nothing reserved
            link = run.request.link_between(0, ms_id)
            budget = run.budget_ms(link, run.request.microservices[ms_id].proc_latency)
            access = run.state.assignments[(0, 1)]
            if node == access or budget < 0 or shortest_feasible_path(
                    run.net, node, access, 0.0, PROTECTED, budget, weight) is None:
                return None
            continue
        any_real_parent = True
        link = run.request.link_between(f, ms_id)
        budget = run.budget_ms(link, run.request.microservices[ms_id].proc_latency)
        for b2 in run.state.instances_of(f):
            parent_key = (f, b2)
            pnode = run.state.assignments[parent_key]
            if pnode == node or budget < 0:
                if require_all and b2 == 1 and b == 1:
                    return None  # connected instances need a real path
                continue
            pool = run.pool_for(child_key, parent_key)
            path = shortest_feasible_path(run.net, node, pnode, link.bw_demand,
                                          pool, budget, weight)
            if path is not None:
                routes[parent_key] = [path]
            elif require_all and b2 == 1 and b == 1:
                return None
    if any_real_parent and not routes:
        return None
    return routes


def _benchmark_place_instance(run: _Run, ms_id, b, node_order, weight,
                              require_all: bool) -> bool:
    ms = run.request.microservices[ms_id]
    for node in node_order:
        nd = run.net.nodes[node]
        if nd.cpu_allocated + ms.cpu_demand > nd.cpu_capacity + _EPS:
            continue
        routes = _benchmark_route_parents(run, ms_id, b, node, weight, require_all)
        if routes is None:
            continue
        if not run.place_instance(ms_id, b, node, routes):
            continue
        if b > 1:
            run.route_child_side(ms_id, b)
        run.record_sigma(ms_id, b)
        return True
    return False


def _by_current_reliability(net: InfrastructureNetwork) -> list[int]:
    return sorted(range(len(net.nodes)), key=lambda i: (-net.node_rel(i), i))


def _round_robin_backups(run: _Run, weight: str) -> None:
    cycle = list(run.request.real_ids)
    placed = 0
    while placed < run.request.backup_limit and cycle:
        m = cycle.pop(0)
        b = run.state.instances_of(m)[-1] + 1
        if _benchmark_place_instance(run, m, b, _by_current_reliability(run.net),
                                     weight, require_all=False):
            placed += 1
            cycle.append(m)
    return


def _greedy_style_place(net, request, k, mechanism, shared_index, weight,
                        backups: bool) -> PlacementOutcome:
    run = _Run(net, request, mechanism, k, shared_index)
    for m in request.bfs_order():
        if not _benchmark_place_instance(run, m, 1, _by_current_reliability(net),
                                         weight, require_all=True):
            run.rollback_all()
            return PlacementOutcome(False, None, f"microservice {m} unplaceable")
    if backups:
        _round_robin_backups(run, weight)
    run.state.analytic_reliability = relcore.service_reliability(net, request, run.state)
    return PlacementOutcome(True, run.state)


def daip_place(net, request, k: int = 4, mechanism: str = PROTECTED,
               shared_index=None) -> PlacementOutcome:
    """Availability-aware benchmark: most reliable node first, least-latency
    single path per link, round-robin backup selection."""
    return _greedy_style_place(net, request, k, mechanism, shared_index,
                               weight="delay", backups=True)


def grd_place(net, request, k: int = 4, mechanism: str = PROTECTED,
              shared_index=None) -> PlacementOutcome:
    """Greedy benchmark: most reliable node, shortest path, no backups."""
    return _greedy_style_place(net, request, k, mechanism, shared_index,
                               weight="hops", backups=False)


def grd_b_place(net, request, k: int = 4, mechanism: str = PROTECTED,
                shared_index=None) -> PlacementOutcome:
    """Greedy benchmark plus round-robin backups."""
    return _greedy_style_place(net, request, k, mechanism, shared_index,
                               weight="hops", backups=True)


def rrsp_place(net, request, rng: np.random.Generator, k: int = 4,
               mechanism: str = PROTECTED, shared_index=None,
               candidates: int = 50) -> PlacementOutcome:
    """Redundant-placement benchmark: sample random CPU-feasible assignments of
    all instances (backup objects by descending dependency-graph degree), keep
    the one with the best product of post-placement node reliabilities, then
    route on shortest feasible paths."""
    run = _Run(net, request, mechanism, k, shared_index)
    degree: dict[int, int] = {m: 0 for m in request.real_ids}
    for l in request.links:
        if l.parent_id in degree:
            degree[l.parent_id] += 1
        if l.child_id in degree:
            degree[l.child_id] += 1
    order = sorted(request.real_ids, key=lambda m: (-degree[m], m))
    backup_objects = [order[i % len(order)] for i in range(request.backup_limit)]
    instances = [(m, 1) for m in request.bfs_order()]
    counts = {m: 1 for m in request.real_ids}
    for m in backup_objects:
        counts[m] += 1
        instances.append((m, counts[m]))

    best_score = -1.0
    best_assign = None
    n = len(net.nodes)
    neighbors = {m: set(request.parents_of(m)) | set(request.children_of(m))
                 for m in request.real_ids}
    for _ in range(candidates):
        load: dict[int, float] = {}
        assign = {(0, 1): request.access_node}
        ok = True
        for (m, b) in instances:
            demand = request.microservices[m].cpu_demand
            taken = {node for (m2, _b2), node in assign.items() if m2 in neighbors[m]}
            feas = [i for i in range(n)
                    if i not in taken
                    and net.nodes[i].cpu_allocated + load.get(i, 0.0) + demand
                    <= net.nodes[i].cpu_capacity + _EPS]
            if not feas:
                ok = False
                break
            node = feas[int(rng.integers(0, len(feas)))]
            assign[(m, b)] = node
            load[node] = load.get(node, 0.0) + demand
        if not ok:
            continue
        score = 1.0
        for node, extra in load.items():
            score *= net.node_rel(node, extra_load=extra)
        if score > best_score:
            best_score, best_assign = score, assign

    if best_assign is None:
        return PlacementOutcome(False, None, "no CPU-feasible assignment sampled")

    for (m, b) in instances:
        node = best_assign[(m, b)]
        require_all = b == 1
        nd = net.nodes[node]
        ms = request.microservices[m]
        if nd.cpu_allocated + ms.cpu_demand > nd.cpu_capacity + _EPS:
            if require_all:
                run.rollback_all()
                return PlacementOutcome(False, None, "assignment no longer CPU-feasible")
            continue
        routes = _benchmark_route_parents(run, m, b, node, "hops", require_all)
        if routes is None or not run.place_instance(m, b, node, routes):
            if require_all:
                run.rollback_all()
                return PlacementOutcome(False, None, f"routing failed for microservice {m}")
            continue
        if b > 1:
            run.route_child_side(m, b)
        run.record_sigma(m, b)
    run.state.analytic_reliability = relcore.service_reliability(net, request, run.state)
    return PlacementOutcome(True, run.state)


def place_request(net, request, algorithm: str, k: int = 4, delta: int = 3,
                  mechanism: str = PROTECTED, shared_index=None,
                  rng: np.random.Generator | None = None,
                  rrsp_candidates: int = 50,
                  sprc_literal: bool = False) -> PlacementOutcome:
    if algorithm == "SRP":
        return srp_place(net, request, k, delta, mechanism, shared_index)
    if algorithm == "SRP-S":
        return srp_s_place(net, request, k, delta, shared_index, sprc_literal)
    if algorithm == "DAIP":
        return daip_place(net, request, k, mechanism, shared_index)
    if algorithm == "RRSP":
        if rng is None:
            rng = np.random.default_rng(request.id)
        return rrsp_place(net, request, rng, k, mechanism, shared_index, rrsp_candidates)
    if algorithm == "Grd":
        return grd_place(net, request, k, mechanism, shared_index)
    if algorithm == "Grd-B":
        return grd_b_place(net, request, k, mechanism, shared_index)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def constraint_audit(net: InfrastructureNetwork, states: list[PlacementState],
                     requests: dict[int, ServiceRequest]) -> list[str]:
    """Check every optimization constraint and ledger conservation against the
    active placements. Returns a list of violation descriptions (empty = ok)."""
    problems = []
    prot = np.zeros(len(net.links))
    shar = np.zeros(len(net.links))
    cpu = np.zeros(len(net.nodes))
    for st in states:
        req = requests[st.service_id]
        n_inst = 0
        for (m, b), node in st.assignments.items():
            if m == 0:
                continue
            n_inst += 1
            cpu[node] += req.microservices[m].cpu_demand
        limit = req.backup_limit + len(list(req.real_ids))
        if n_inst > limit:
            problems.append(f"service {st.service_id}: {n_inst} instances exceeds B+|M|={limit}")
        if req.backup_limit > len(list(req.real_ids)):
            problems.append(f"service {st.service_id}: backup limit above microservice count")
        for (child, parent), rec in st.routes.items():
            arrays = prot if rec.pool == PROTECTED else shar
            for path in rec.paths:
                for e in path.edges:
                    arrays[e] += rec.bw
            if st.mechanism == SHARED:
                expected = PROTECTED if child[1] == 1 and parent[1] == 1 else SHARED
                if rec.pool != expected:
                    problems.append(f"service {st.service_id} link {child}->{parent}: pool {rec.pool}")
            if parent[0] != 0:
                link = req.link_between(parent[0], child[0])
                proc = req.microservices[child[0]].proc_latency
                trans = link.data_volume / link.bw_demand if link.bw_demand > 0 else 0.0
                prop = min((p.delay_ms for p in rec.paths), default=0.0)
                if trans + prop / 1000.0 + proc / 1000.0 > link.deadline + 1e-6:
                    problems.append(f"service {st.service_id} link {child}->{parent}: deadline violated")
    for e, lk in enumerate(net.links):
        if prot[e] > lk.bw_capacity + 1e-6:
            problems.append(f"link {e}: protected demand {prot[e]} over capacity")
        if shar[e] > net.omega * lk.bw_capacity + 1e-6:
            problems.append(f"link {e}: shared demand {shar[e]} over shared capacity")
        if abs(prot[e] - lk.bw_protected) > 1e-6 or abs(shar[e] - lk.bw_shared) > 1e-6:
            problems.append(f"link {e}: ledger mismatch")
    for i, nd in enumerate(net.nodes):
        if cpu[i] > nd.cpu_capacity + 1e-6:
            problems.append(f"node {i}: cpu demand {cpu[i]} over capacity")
        if abs(cpu[i] - nd.cpu_allocated) > 1e-6:
            problems.append(f"node {i}: cpu ledger mismatch")
    return problems
