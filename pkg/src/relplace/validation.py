"""Independent oracles and on-demand validation suites.

Everything here deliberately avoids the production code paths it checks: the
matrix oracle enumerates simple paths with networkx instead of the matrix
algebra, the disjoint-count oracle searches subsets of enumerated paths
instead of running max flow, and the Monte Carlo oracle samples component
fates directly against a placement instead of using the reliability cascade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import placement as pl
from . import relcore
from .simulator import build_eval_plan
from .topology import InfrastructureNetwork, TopologyRanges, generate_er_topology
from .workload import WorkloadRanges, generate_request

__all__ = [
    "SuiteReport",
    "oracle_disjoint_family",
    "oracle_matrix_entry",
    "oracle_max_disjoint_count",
    "monte_carlo_survival",
    "sign_test_p",
    "run_operator_suite",
    "run_matrix_suite",
    "run_model_suite",
    "random_small_placement",
]


@dataclass
class SuiteReport:
    name: str
    passed: bool
    detail: str
    checks: list = field(default_factory=list)


def _path_content(seq) -> frozenset:
    items: set = set(seq[1:-1])
    for a, b in zip(seq, seq[1:]):
        items.add(frozenset((a, b)))
    return frozenset(items)


def _nx_graph(net: InfrastructureNetwork) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(len(net.nodes)))
    g.add_edges_from((lk.u, lk.v) for lk in net.links)
    return g


def oracle_disjoint_family(net: InfrastructureNetwork, src: int, dst: int, k: int,
                           graph: nx.Graph | None = None) -> list[tuple[int, ...]]:
    """Greedy shortest-first internally disjoint family over all simple paths
    of length <= k, ties in canonical node-sequence order."""
    g = graph if graph is not None else _nx_graph(net)
    paths = sorted(tuple(p) for p in nx.all_simple_paths(g, src, dst, cutoff=k))
    paths.sort(key=len)
    kept: list[tuple[int, ...]] = []
    contents: list[frozenset] = []
    for p in paths:
        c = _path_content(p)
        if all(not (c & c2) for c2 in contents):
            kept.append(p)
            contents.append(c)
    return kept


def oracle_matrix_entry(net: InfrastructureNetwork, src: int, dst: int, k: int,
                        critical=frozenset(), graph=None) -> float:
    fam = oracle_disjoint_family(net, src, dst, k, graph)
    prod = 1.0
    for p in fam:
        prod *= 1.0 - relcore.path_rel_from_seq(net, p, exclude=critical)
    return 1.0 - prod


def oracle_max_disjoint_count(net: InfrastructureNetwork, src: int, dst: int,
                              k: int | None = None) -> int:
    """Maximum number of pairwise internally disjoint src->dst paths, by
    exhaustive search over enumerated simple paths (small graphs only)."""
    g = _nx_graph(net)
    cutoff = k if k is not None else len(net.nodes)
    paths = [tuple(p) for p in nx.all_simple_paths(g, src, dst, cutoff=cutoff)]
    contents = [_path_content(p) for p in paths]
    best = 0

    def extend(start: int, chosen: list[int]):
        nonlocal best
        best = max(best, len(chosen))
        if len(chosen) + (len(paths) - start) <= best:
            return
        for i in range(start, len(paths)):
            if all(not (contents[i] & contents[j]) for j in chosen):
                chosen.append(i)
                extend(i + 1, chosen)
                chosen.pop()

    extend(0, [])
    return best


def monte_carlo_survival(net: InfrastructureNetwork, request, state: pl.PlacementState,
                         n_samples: int = 100_000, seed: int = 0) -> float:
    """Empirical one-step survival frequency of a placed service under
    independent component failures at the network's current loads. Vectorized
    over samples; no shared-pool contention (fully protected semantics)."""
    rng = np.random.default_rng(seed)
    plan = build_eval_plan(request, state)
    n = len(net.nodes)
    r_node = np.array([net.node_rel(i) for i in range(n)])
    r_link = np.array([net.link_rel(e) for e in range(len(net.links))])
    node_up = rng.uniform(size=(n_samples, n)) < r_node
    link_up = rng.uniform(size=(n_samples, len(net.links))) < r_link

    b_span = request.backup_limit + 1
    n_real = len(request.microservices) - 1
    surv_ms = np.repeat(
        np.exp(-np.array([request.microservices[m].failure_rate for m in range(1, n_real + 1)])),
        b_span)
    inst_up = rng.uniform(size=(n_samples, n_real * b_span)) < surv_ms
    rates = [l.failure_rate for l in request.links if l.parent_id != 0]
    if rates:
        surv_l = np.repeat(np.exp(-np.array(rates)), b_span * b_span)
        il_up = rng.uniform(size=(n_samples, len(rates) * b_span * b_span)) < surv_l
    else:
        il_up = np.empty((n_samples, 0), dtype=bool)

    op = np.zeros((n_samples, len(plan)), dtype=bool)
    n_ms = len(request.microservices)
    ms_ok = np.zeros((n_samples, n_ms), dtype=bool)
    for i, (node, soft, ms, groups) in enumerate(plan):
        if ms == 0:
            ok = node_up[:, node].copy()
        else:
            ok = node_up[:, node] & inst_up[:, soft]
            for cands in groups:
                connected = np.zeros(n_samples, dtype=bool)
                for (ppos, il, coloc, _shared, _bw, paths) in cands:
                    via = op[:, ppos].copy()
                    if il >= 0:
                        via &= il_up[:, il]
                    if not coloc:
                        path_ok = np.zeros(n_samples, dtype=bool)
                        for edges, interior in paths:
                            pa = np.ones(n_samples, dtype=bool)
                            for e in edges:
                                pa &= link_up[:, e]
                            for v in interior:
                                pa &= node_up[:, v]
                            path_ok |= pa
                        via &= path_ok
                    connected |= via
                ok &= connected
        op[:, i] = ok
        ms_ok[:, ms] |= ok
    alive = ms_ok.all(axis=1)
    return float(alive.mean())


def sign_test_p(wins: int, trials: int) -> float:
    """One-sided exact sign test: P[X >= wins] for X ~ Binomial(trials, 1/2)."""
    if trials == 0:
        return 1.0
    total = sum(math.comb(trials, i) for i in range(wins, trials + 1))
    return total / 2.0 ** trials


# -- suites -------------------------------------------------------------------


def run_operator_suite(trials: int = 100_000, seed: int = 0, tol: float = 1e-12) -> SuiteReport:
    """Operator identities over random triples: commutativity and associativity
    of the reliability sum, its inverse, and the zero branch of the merge.

    The inverse identity divides by 1 - b, which amplifies the rounding already
    baked into the 64-bit representation of a (+) b; past b ~ 0.999 no float64
    implementation can recover a to 1e-12, so b is drawn where the identity is
    representable at the tolerance (error bound ~2 eps / (1 - b) < 1e-12).
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=trials)
    b = rng.uniform(size=trials)
    c = rng.uniform(size=trials)
    comm = np.abs((a + b - a * b) - (b + a - b * a)).max()
    ab = a + b - a * b
    bc = b + c - b * c
    assoc = np.abs((ab + c - ab * c) - (a + bc - a * bc)).max()
    b2 = rng.uniform(0.0, 0.999, size=trials)
    ab2 = a + b2 - a * b2
    recovered = (ab2 - b2) / (1.0 - b2)
    inv = np.abs(recovered - a).max()
    x = relcore.RelValue(0.9, ((1, 2, 3),), (0.9,))
    y_overlap = relcore.RelValue(0.8, ((4, 2, 5),), (0.8,))
    y_disjoint = relcore.RelValue(0.8, ((4, 5, 6),), (0.8,))
    zero_ok = relcore.op_times(x, y_overlap).value == 0.0
    prod_ok = abs(relcore.op_times(x, y_disjoint).value - 0.72) < tol
    worst = max(comm, assoc, inv)
    passed = worst < tol and zero_ok and prod_ok
    return SuiteReport(
        "operator-algebra", passed,
        f"max identity error {worst:.3e} over {trials} triples; "
        f"overlap zero branch {'ok' if zero_ok else 'BROKEN'}",
        checks=[("max_identity_error", worst), ("overlap_zero", zero_ok)],
    )


def _random_small_net(rng: np.random.Generator) -> InfrastructureNetwork:
    while True:
        n = int(rng.integers(3, 8))
        p = float(rng.uniform(0.3, 0.9))
        seed = int(rng.integers(0, 2 ** 31))
        net = generate_er_topology(n, p, TopologyRanges(), seed)
        if len(net.links) >= 2:
            return net


def run_matrix_suite(graphs: int = 200, k_max: int = 4, seed: int = 1,
                     tol: float = 1e-12) -> SuiteReport:
    """Entrywise comparison of the matrix pipeline against the independent
    simple-path enumeration oracle on random small graphs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    for _ in range(graphs):
        net = _random_small_net(rng)
        k = int(rng.integers(1, k_max + 1))
        mat = relcore.network_reliability_matrix(net, k)
        g = _nx_graph(net)
        n = len(net.nodes)
        for i in range(n):
            for j in range(n):
                want = 1.0 if i == j else oracle_matrix_entry(net, i, j, k, graph=g)
                err = abs(mat[i, j].value - want)
                worst = max(worst, err)
                checked += 1
    passed = worst < tol
    return SuiteReport(
        "matrix-vs-enumeration", passed,
        f"max entry error {worst:.3e} over {graphs} graphs ({checked} entries)",
        checks=[("max_entry_error", worst)],
    )


def random_small_placement(seed: int, n_nodes: int = 5, ms_max: int = 3,
                           max_backups: int = 1):
    """A placed request on a small dense topology (at most one backup), for
    model validation. Returns (net, request, state) or None when infeasible."""
    from dataclasses import replace

    rng = np.random.default_rng(seed)
    net = generate_er_topology(n_nodes, 0.7, TopologyRanges(), int(rng.integers(2 ** 31)))
    ranges = WorkloadRanges(size=(1, ms_max))
    req = generate_request(ranges, net.access_nodes, int(rng.integers(2 ** 31)))
    req = replace(req, backup_limit=min(max_backups, req.backup_limit))
    outcome = pl.srp_place(net, req, k=3)
    if not outcome.success:
        return None
    return net, req, outcome.state


def run_model_suite(cases: int = 20, n_samples: int = 100_000, seed: int = 2,
                    perturb: float = 0.0, max_misses: int = 1) -> SuiteReport:
    """Analytic reliability vs Monte Carlo fault injection on fixed small
    placements: the empirical one-step survival frequency must fall within
    three binomial standard deviations of the analytic value in all but
    ``max_misses`` cases. ``perturb`` scales per-instance reliabilities to
    demonstrate the suite's sensitivity."""
    rng = np.random.default_rng(seed)
    done = 0
    misses = 0
    worst_ratio = 0.0
    details = []
    while done < cases:
        built = random_small_placement(int(rng.integers(2 ** 31)))
        if built is None:
            continue
        net, req, state = built
        if perturb:
            with relcore.perturb_instance_reliability(1.0 - perturb):
                analytic = relcore.service_reliability(net, req, state)
        else:
            analytic = relcore.service_reliability(net, req, state)
        empirical = monte_carlo_survival(net, req, state, n_samples,
                                         seed=int(rng.integers(2 ** 31)))
        sd = math.sqrt(max(analytic * (1 - analytic), 1e-12) / n_samples)
        ratio = abs(empirical - analytic) / (3 * sd)
        worst_ratio = max(worst_ratio, ratio)
        if ratio > 1.0:
            misses += 1
        details.append((analytic, empirical, ratio))
        done += 1
    passed = misses <= max_misses
    return SuiteReport(
        "analytic-vs-monte-carlo", passed,
        f"{misses}/{cases} cases beyond 3 binomial sigma (worst ratio {worst_ratio:.2f})",
        checks=details,
    )
