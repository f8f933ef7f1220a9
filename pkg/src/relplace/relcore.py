"""Network-aware reliability algebra.

Reliability values carry their path provenance so that combining operators can
detect shared nodes/edges. The matrix pipeline builds, per node pair, the
greedy shortest-first family of internally disjoint simple paths up to length
k; entry values are the combined reliability of that family with each path
scored over its interior nodes and edges (the source-side node reliability
used while composing is stripped at the end, and critical nodes are excluded
from path products when a correction set is given).

The per-instance / per-microservice / per-service cascade turns a placement
(instance assignments plus routed path sets) into the analytic service
reliability that the simulator validates against fault injection.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

from .topology import InfrastructureNetwork
from .workload import ServiceRequest, software_reliability

__all__ = [
    "RelValue",
    "PathRelMatrix",
    "op_plus",
    "op_minus",
    "op_times",
    "one_step_matrix",
    "mat_mul",
    "mat_add",
    "network_reliability_matrix",
    "critical_nodes",
    "effective_link_probability",
    "instance_reliability",
    "microservice_reliability",
    "service_reliability",
    "path_rel_from_seq",
    "total_path_reliability",
    "PlacementView",
    "perturb_instance_reliability",
]

# test harness hook: scales every per-instance reliability (sensitivity checks)
_INSTANCE_REL_SCALE = 1.0


@contextlib.contextmanager
def perturb_instance_reliability(scale: float):
    """Temporarily scale per-instance reliabilities (validation sensitivity hook)."""
    global _INSTANCE_REL_SCALE
    old = _INSTANCE_REL_SCALE
    _INSTANCE_REL_SCALE = scale
    try:
        yield
    finally:
        _INSTANCE_REL_SCALE = old


def _content(seq: tuple[int, ...]) -> frozenset:
    """Path content per the paper's path definition: interior nodes and edges,
    endpoints excluded. Edges are undirected, encoded as frozensets."""
    items: set = set(seq[1:-1])
    for a, b in zip(seq, seq[1:]):
        items.add(frozenset((a, b)))
    return frozenset(items)


@dataclass(frozen=True)
class RelValue:
    """Reliability scalar with path provenance.

    ``paths`` are node sequences; ``path_values`` the per-path reliabilities the
    value combines: value = 1 - prod(1 - pv). An empty provenance means the
    value is taken at face value (identities 0 and 1 in the algebra).
    """

    value: float
    paths: tuple[tuple[int, ...], ...] = ()
    path_values: tuple[float, ...] = ()

    def __post_init__(self):
        if not -1e-12 <= self.value <= 1.0 + 1e-12:
            raise ValueError(f"reliability {self.value} outside [0, 1]")
        if len(self.paths) != len(self.path_values):
            raise ValueError("paths and path_values must align")

    def contents(self) -> tuple[frozenset, ...]:
        return tuple(_content(p) for p in self.paths)


def _combine(path_values) -> float:
    prod = 1.0
    for v in path_values:
        prod *= 1.0 - v
    return 1.0 - prod


def _overlaps(x: RelValue, y: RelValue) -> bool:
    xc = x.contents()
    yc = y.contents()
    for a in xc:
        for b in yc:
            if a & b:
                return True
    return False


def op_plus(x: RelValue, y: RelValue) -> RelValue:
    """Reliability sum of two path collections: x + y - xy."""
    seen = set(x.paths)
    paths = list(x.paths)
    vals = list(x.path_values)
    for p, v in zip(y.paths, y.path_values):
        if p not in seen:
            seen.add(p)
            paths.append(p)
            vals.append(v)
    return RelValue(x.value + y.value - x.value * y.value, tuple(paths), tuple(vals))


def op_minus(x: RelValue, y: float) -> RelValue:
    """Inverse of op_plus on values: (a (+) b) (-) b = a. Requires y in [0, x)."""
    if not 0.0 <= y < 1.0 or y >= x.value:
        raise ValueError("op_minus requires 0 <= y < x <= 1")
    return RelValue((x.value - y) / (1.0 - y))


def op_times(x: RelValue, y: RelValue) -> RelValue:
    """Reliability of two path collections merged in series: zero when any
    provenance paths share a node or edge, else the product."""
    if _overlaps(x, y):
        return RelValue(0.0)
    paths = []
    vals = []
    for px, vx in zip(x.paths, x.path_values):
        for py, vy in zip(y.paths, y.path_values):
            if px[-1] == py[0]:
                paths.append(px + py[1:])
            else:
                paths.append(px + py)
            vals.append(vx * vy)
    return RelValue(x.value * y.value, tuple(paths), tuple(vals))


@dataclass
class PathRelMatrix:
    order: int
    entries: list[list[RelValue]] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            self.entries = [[RelValue(0.0) for _ in range(self.order)]
                            for _ in range(self.order)]

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    def values(self):
        return [[e.value for e in row] for row in self.entries]


def one_step_matrix(net: InfrastructureNetwork) -> PathRelMatrix:
    """Adjacency-style matrix: entry (i, j) is r_ni * r_eij for an existing
    link, zero otherwise; zero diagonal."""
    n = len(net.nodes)
    m = PathRelMatrix(n)
    for lk in net.links:
        re = net.link_rel(lk.id)
        for a, b in ((lk.u, lk.v), (lk.v, lk.u)):
            v = net.node_rel(a) * re
            m.entries[a][b] = RelValue(v, ((a, b),), (v,))
    return m


def mat_mul(a: PathRelMatrix, b: PathRelMatrix) -> PathRelMatrix:
    """Path-extending matrix product: entry (i, j) accumulates, over middle
    nodes n, the series merge of a[i, n] with b[n, j]. Merging happens per
    provenance path pair; an extension that would revisit a node is dropped
    rather than zeroing the whole term, so R^(k) holds exactly the simple
    k-edge paths. Identical extended paths are deduplicated."""
    if a.order != b.order:
        raise ValueError("order mismatch")
    n = a.order
    out = PathRelMatrix(n)
    for i in range(n):
        row = a.entries[i]
        for j in range(n):
            if i == j:
                continue
            paths = []
            vals = []
            seen = set()
            for mid in range(n):
                av = row[mid]
                bv = b.entries[mid][j]
                if not av.paths or not bv.paths:
                    continue
                for pa, va in zip(av.paths, av.path_values):
                    for pb, vb in zip(bv.paths, bv.path_values):
                        if pa[-1] != pb[0]:
                            continue
                        tail = pb[1:]
                        if any(t in pa for t in tail):
                            continue  # would revisit a node
                        newp = pa + tail
                        if newp in seen:
                            continue
                        seen.add(newp)
                        paths.append(newp)
                        vals.append(va * vb)
            if paths:
                order = sorted(range(len(paths)), key=lambda t: (len(paths[t]), paths[t]))
                paths = [paths[t] for t in order]
                vals = [vals[t] for t in order]
                out.entries[i][j] = RelValue(_combine(vals), tuple(paths), tuple(vals))
    return out


def mat_add(a: PathRelMatrix, b: PathRelMatrix) -> PathRelMatrix:
    """Greedy disjoint merge: b's paths join an entry only when their content
    (interior nodes and edges) avoids everything already kept; intersecting
    candidates leave the accumulated entry unchanged."""
    if a.order != b.order:
        raise ValueError("order mismatch")
    n = a.order
    out = PathRelMatrix(n)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            av = a.entries[i][j]
            bv = b.entries[i][j]
            if not bv.paths:
                out.entries[i][j] = av
                continue
            paths = list(av.paths)
            vals = list(av.path_values)
            kept = [_content(p) for p in av.paths]
            for p, v in zip(bv.paths, bv.path_values):
                c = _content(p)
                if any(c & k for k in kept):
                    continue
                paths.append(p)
                vals.append(v)
                kept.append(c)
            out.entries[i][j] = RelValue(_combine(vals), tuple(paths), tuple(vals))
    return out


def path_rel_from_seq(net: InfrastructureNetwork, seq, include_source: bool = False,
                      exclude=frozenset()) -> float:
    """Reliability of one path: interior-node (optionally plus source) survival
    times edge survival; nodes in ``exclude`` are skipped (critical correction)."""
    val = 1.0
    interior = seq[0 if include_source else 1:-1]
    for nd in interior:
        if nd not in exclude:
            val *= net.node_rel(nd)
    for a, b in zip(seq, seq[1:]):
        eid = net.edge_between(a, b)
        if eid is None:
            raise ValueError(f"no physical link between {a} and {b}")
        val *= net.link_rel(eid)
    return val


def total_path_reliability(net: InfrastructureNetwork, paths, exclude=frozenset()) -> float:
    """Combined reliability of a path set (1 - prod of path failure odds).
    ``paths`` may be Path objects or raw node sequences."""
    prod = 1.0
    for p in paths:
        seq = p.nodes if hasattr(p, "nodes") else tuple(p)
        prod *= 1.0 - path_rel_from_seq(net, seq, exclude=exclude)
    return 1.0 - prod


def network_reliability_matrix(net: InfrastructureNetwork, k: int,
                               critical=None) -> PathRelMatrix:
    """Network-aware reliability between every node pair over all internally
    disjoint simple paths of length <= k (greedy shortest-first family). Unit
    diagonal. With ``critical`` given, those nodes drop out of the interior
    products (corrected variant)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    exclude = frozenset(critical or ())
    one = one_step_matrix(net)
    acc = one
    power = one
    for _ in range(2, k + 1):
        power = mat_mul(power, one)
        acc = mat_add(acc, power)
    n = len(net.nodes)
    out = PathRelMatrix(n)
    for i in range(n):
        for j in range(n):
            if i == j:
                out.entries[i][j] = RelValue(1.0)
                continue
            entry = acc.entries[i][j]
            if not entry.paths:
                continue
            vals = tuple(path_rel_from_seq(net, p, exclude=exclude) for p in entry.paths)
            out.entries[i][j] = RelValue(_combine(vals), entry.paths, vals)
    return out


# -- placement-level cascade -------------------------------------------------


@dataclass
class PlacementView:
    """Minimal placement facade for the reliability cascade.

    assignments: (ms_id, backup_index) -> node id, including the virtual access
    instance (0, 1). routes: (child_key, parent_key) -> tuple of Path; an empty
    tuple means co-located endpoints (perfect network path); a missing key
    means the instance link could not be routed (zero effective probability).
    """

    assignments: dict
    routes: dict


def critical_nodes(placement, request: ServiceRequest) -> frozenset[int]:
    """Nodes hosting every instance of some microservice (their failure
    necessarily fails the service)."""
    assignments = placement.assignments if hasattr(placement, "assignments") else placement
    per_ms: dict[int, set[int]] = {}
    for (ms, _b), node in assignments.items():
        per_ms.setdefault(ms, set()).add(node)
    return frozenset(next(iter(nodes)) for nodes in per_ms.values() if len(nodes) == 1)


def effective_link_probability(link_software_rel: float, end_to_end_rel: float) -> float:
    """Effective probability of a microservice link: software survival times
    the network-aware reliability between its endpoint nodes."""
    if not (0.0 <= link_software_rel <= 1.0 and 0.0 <= end_to_end_rel <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return link_software_rel * end_to_end_rel


def _kappa(net, request, placement, child_key, parent_key, exclude) -> float:
    """Corrected effective probability of the instance link child <- parent."""
    parent_ms = parent_key[0]
    if parent_ms == 0:
        return 1.0  # virtual access link
    link = request.link_between(parent_ms, child_key[0])
    rec = placement.routes.get((child_key, parent_key))
    if rec is None:
        return 0.0
    paths = rec.paths if hasattr(rec, "paths") else rec
    if len(paths) == 0:
        net_rel = 1.0  # co-located endpoints
    else:
        prod = 1.0
        for p in paths:
            seq = p.nodes if hasattr(p, "nodes") else tuple(p)
            prod *= 1.0 - path_rel_from_seq(net, seq, exclude=exclude)
        net_rel = 1.0 - prod
    return effective_link_probability(software_reliability(link.failure_rate), net_rel)


def _instances_of(placement, ms_id: int) -> list[int]:
    return sorted(b for (m, b) in placement.assignments if m == ms_id)


def instance_reliability(net: InfrastructureNetwork, request: ServiceRequest,
                         placement, ms_id: int, backup_index: int,
                         critical=None) -> float:
    """Reliability of one placed instance together with all its parent links:
    software survival times, per parent microservice, the odds that at least
    one parent instance is effectively reachable."""
    key = (ms_id, backup_index)
    if key not in placement.assignments:
        raise ValueError(f"instance {key} not placed")
    exclude = frozenset(critical if critical is not None else critical_nodes(placement, request))
    ms = request.microservices[ms_id]
    sigma = software_reliability(ms.failure_rate)
    for f in request.parents_of(ms_id):
        if f == 0:
            continue  # kappa = 1 contributes a unit factor
        miss = 1.0
        for b2 in _instances_of(placement, f):
            if (f, b2) not in placement.assignments:
                raise ValueError(f"parent instance ({f},{b2}) not placed")
            miss *= 1.0 - _kappa(net, request, placement, key, (f, b2), exclude)
        sigma *= 1.0 - miss
    return sigma * _INSTANCE_REL_SCALE


def microservice_reliability(net: InfrastructureNetwork, request: ServiceRequest,
                             placement, ms_id: int, critical=None) -> float:
    """Combined reliability of all instances of a microservice across nodes.

    Per node: 1 - prod(1 - sigma_instance). Across nodes, hosting nodes outside
    the critical set keep their own reliability factor; critical hosts do not
    (their reliability multiplies the service once, in service_reliability).
    """
    crit = frozenset(critical if critical is not None else critical_nodes(placement, request))
    by_node: dict[int, float] = {}
    for b in _instances_of(placement, ms_id):
        node = placement.assignments[(ms_id, b)]
        s = instance_reliability(net, request, placement, ms_id, b, crit)
        by_node[node] = 1.0 - (1.0 - by_node.get(node, 0.0)) * (1.0 - s)
    if not by_node:
        raise ValueError(f"microservice {ms_id} has no placed instances")
    prod = 1.0
    for node, s_mn in by_node.items():
        if node in crit:
            prod *= 1.0 - s_mn
        else:
            prod *= net.node_rel(node) * (1.0 - s_mn)
    return 1.0 - prod


def service_reliability(net: InfrastructureNetwork, request: ServiceRequest,
                        placement) -> float:
    """Analytic reliability of the whole dependency graph: critical node
    survival once, times every microservice's combined instance reliability."""
    for ms_id in request.real_ids:
        if not _instances_of(placement, ms_id):
            raise ValueError(f"incomplete placement: microservice {ms_id} unplaced")
    crit = critical_nodes(placement, request)
    val = 1.0
    for node in crit:
        val *= net.node_rel(node)
    for ms_id in range(len(request.microservices)):
        val *= microservice_reliability(net, request, placement, ms_id, crit)
    return val
