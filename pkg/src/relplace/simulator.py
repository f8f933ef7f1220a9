"""Discrete-time fault injection engine.

Each repetition builds its own random topology and request stream, places
arrivals with the configured algorithm, then advances in unit time steps:
sample per-component survival, evaluate every active service bottom-up, count
and remove services that lost all instances of some microservice, release
expired services, and record metrics.

Component fates are drawn from streams keyed by (seed, repetition, step) and
component identity only, never by placement, so runs with different algorithms
on the same seed share topology, workload and hardware fates (common random
numbers); paired comparisons then isolate the placement decisions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import placement as pl
from .topology import InfrastructureNetwork, TopologyRanges, generate_er_topology
from .workload import ServiceRequest, WorkloadRanges, generate_arrivals, generate_request

__all__ = [
    "SimConfig",
    "SimResult",
    "BatchResult",
    "ComponentFailureSample",
    "sample_failures",
    "evaluate_service_alive",
    "record_bandwidth",
    "run_simulation",
    "run_batch",
    "HISTOGRAM_EDGES",
]

_EPS = 1e-9

HISTOGRAM_EDGES = (0.99, 0.999, 0.9999)
HISTOGRAM_LABELS = ("[0,0.99)", "[0.99,0.999)", "[0.999,0.9999)", "[0.9999,1]")


@dataclass
class SimConfig:
    node_count: int = 50
    edge_prob: float = 0.2
    topology_ranges: TopologyRanges = field(default_factory=TopologyRanges)
    access_fraction: float = 0.2
    request_count: int = 100
    arrival_rate: float = 1.0
    workload_ranges: WorkloadRanges = field(default_factory=WorkloadRanges)
    backup_mode: str = "full"  # full | random | none
    algorithm: str = "SRP"
    mechanism: str = pl.PROTECTED
    omega: float = 1.0
    k: int = 4
    delta: int = 3
    repetitions: int = 100
    cpu_multiplier: float = 1.0
    bw_multiplier: float = 1.0
    rng_seed: int = 0
    rrsp_candidates: int = 50
    sprc_literal: bool = False
    continue_after_failure: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.request_count <= 0 or self.arrival_rate <= 0 or self.repetitions <= 0:
            raise ValueError("counts and rates must be positive")
        if self.cpu_multiplier < 1 or self.bw_multiplier < 1:
            raise ValueError("demand multipliers must be >= 1")
        if self.algorithm not in pl.ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.mechanism not in (pl.PROTECTED, pl.SHARED):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.algorithm == "SRP-S" and self.mechanism != pl.SHARED:
            raise ValueError("SRP-S requires the shared mechanism")

    def effective_workload_ranges(self) -> WorkloadRanges:
        return replace(self.workload_ranges, backup_mode=self.backup_mode,
                       cpu_multiplier=self.cpu_multiplier,
                       bw_multiplier=self.bw_multiplier)

    def to_json(self) -> dict:
        out = {
            "node_count": self.node_count, "edge_prob": self.edge_prob,
            "access_fraction": self.access_fraction,
            "request_count": self.request_count, "arrival_rate": self.arrival_rate,
            "backup_mode": self.backup_mode, "algorithm": self.algorithm,
            "mechanism": self.mechanism, "omega": self.omega,
            "k": self.k, "delta": self.delta, "repetitions": self.repetitions,
            "cpu_multiplier": self.cpu_multiplier, "bw_multiplier": self.bw_multiplier,
            "rng_seed": self.rng_seed, "rrsp_candidates": self.rrsp_candidates,
            "sprc_literal": self.sprc_literal,
            "continue_after_failure": self.continue_after_failure,
        }
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__ if f not in ("topology_ranges", "workload_ranges")}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items()})


@dataclass
class ComponentFailureSample:
    """Per-step survival draws. Arrays are survival flags; the failed_* views
    give the spec-level failed component sets."""

    node_up: np.ndarray
    link_up: np.ndarray
    inst_up: dict  # service -> bool array over potential instances
    ilink_up: dict  # service -> bool array over potential instance links
    layout: dict  # service -> (n_real_ms, backup_limit, n_real_links)

    @property
    def failed_nodes(self) -> set[int]:
        return set(np.flatnonzero(~self.node_up).tolist())

    @property
    def failed_links(self) -> set[int]:
        return set(np.flatnonzero(~self.link_up).tolist())

    @property
    def failed_instances(self) -> set[tuple[int, int, int]]:
        out = set()
        for sid, arr in self.inst_up.items():
            _n_ms, b_max, _nl = self.layout[sid]
            for idx in np.flatnonzero(~arr):
                out.add((sid, int(idx) // (b_max + 1) + 1, int(idx) % (b_max + 1) + 1))
        return out

    @property
    def failed_instance_links(self) -> set[tuple[int, int, int, int]]:
        out = set()
        for sid, arr in self.ilink_up.items():
            _n_ms, b_max, _nl = self.layout[sid]
            span = b_max + 1
            for idx in np.flatnonzero(~arr):
                idx = int(idx)
                out.add((sid, idx // (span * span), (idx // span) % span + 1, idx % span + 1))
        return out


def _request_layout(request: ServiceRequest) -> tuple[int, int, int]:
    n_real = len(request.microservices) - 1
    n_links = sum(1 for l in request.links if l.parent_id != 0)
    return n_real, request.backup_limit, n_links


def sample_failures(net: InfrastructureNetwork, requests: dict[int, ServiceRequest],
                    rng: np.random.Generator) -> ComponentFailureSample:
    """Draw one step of component survival for the given services.

    Nodes fail with 1 - r_n at their current load, physical links with
    1 - exp(-lambda), software per instance / instance link likewise. Draw
    order is fixed (nodes, links, then services by ascending id) so a given
    generator state yields identical fates regardless of placement.
    """
    cpu = np.fromiter((n.cpu_allocated for n in net.nodes), dtype=np.float64, count=len(net.nodes))
    thr = np.fromiter((n.load_threshold * n.cpu_capacity for n in net.nodes), dtype=np.float64,
                      count=len(net.nodes))
    rl = np.fromiter((n.rel_low for n in net.nodes), dtype=np.float64, count=len(net.nodes))
    rh = np.fromiter((n.rel_high for n in net.nodes), dtype=np.float64, count=len(net.nodes))
    r_node = np.where(cpu <= thr + _EPS, rl, rh)
    r_link = np.exp(-np.fromiter((l.failure_rate for l in net.links), dtype=np.float64,
                                 count=len(net.links)))
    node_up = rng.uniform(size=len(net.nodes)) < r_node
    link_up = rng.uniform(size=len(net.links)) < r_link
    inst_up = {}
    ilink_up = {}
    layout = {}
    for sid in sorted(requests):
        req = requests[sid]
        n_real, b_max, n_links = _request_layout(req)
        layout[sid] = (n_real, b_max, n_links)
        span = b_max + 1
        surv_ms = np.repeat(
            np.exp(-np.array([req.microservices[m].failure_rate for m in range(1, n_real + 1)])),
            span)
        inst_up[sid] = rng.uniform(size=n_real * span) < surv_ms
        rates = [l.failure_rate for l in req.links if l.parent_id != 0]
        surv_l = np.repeat(np.exp(-np.array(rates)), span * span) if rates else np.empty(0)
        ilink_up[sid] = rng.uniform(size=n_links * span * span) < surv_l
    return ComponentFailureSample(node_up, link_up, inst_up, ilink_up, layout)


# -- liveness -----------------------------------------------------------------


def build_eval_plan(request: ServiceRequest, state: pl.PlacementState):
    """Flatten a placement into the structure the per-step liveness walk needs:
    instances in dependency order, parent groups with candidate links and their
    path edge/interior arrays."""
    b_span = request.backup_limit + 1
    inst_keys = sorted(state.assignments.keys())
    pos = {key: i for i, key in enumerate(inst_keys)}
    link_idx = {}
    nxt = 0
    for l in request.links:
        if l.parent_id != 0:
            link_idx[(l.parent_id, l.child_id)] = nxt
            nxt += 1
    plan = []
    for key in inst_keys:
        ms, b = key
        node = state.assignments[key]
        if ms == 0:
            plan.append((node, -1, ms, ()))
            continue
        soft = (ms - 1) * b_span + (b - 1)
        groups = []
        for f in request.parents_of(ms):
            cands = []
            if f == 0:
                cands.append((pos[(0, 1)], -1, True, False, 0.0, ()))
            else:
                for b2 in state.instances_of(f):
                    rec = state.routes.get((key, (f, b2)))
                    if rec is None:
                        continue
                    il = (link_idx[(f, ms)] * b_span + (b - 1)) * b_span + (b2 - 1)
                    cands.append((pos[(f, b2)], il, len(rec.paths) == 0,
                                  rec.pool == pl.SHARED, rec.bw,
                                  tuple((p.edges, p.interior) for p in rec.paths)))
            groups.append(tuple(cands))
        plan.append((node, soft, ms, tuple(groups)))
    return plan


def evaluate_service_alive(request: ServiceRequest, state: pl.PlacementState,
                           sample: ComponentFailureSample, net: InfrastructureNetwork,
                           mechanism: str = pl.PROTECTED, claims: dict | None = None,
                           plan=None) -> bool:
    """Ground-truth liveness: every microservice keeps at least one instance
    whose node, software and (per parent microservice) some link to an
    operational parent instance all survive. Under the shared mechanism a
    needed backup link additionally claims protected headroom on a surviving
    path, first-come-first-served; a failed service's claims are rolled back.
    """
    if plan is None:
        plan = build_eval_plan(request, state)
    inst_up = sample.inst_up.get(state.service_id)
    il_up = sample.ilink_up.get(state.service_id)
    node_up = sample.node_up
    link_up = sample.link_up
    shared_mode = mechanism == pl.SHARED
    if claims is None:
        claims = {}
    taken: list[tuple[int, float]] = []
    cap = net.bw_capacity_arr
    prot = net.protected_alloc

    n_ms = len(request.microservices)
    ms_ok = [False] * n_ms
    op = [False] * len(plan)
    for i, (node, soft, ms, groups) in enumerate(plan):
        if ms == 0:
            ok = bool(node_up[node])
        else:
            ok = bool(node_up[node]) and bool(inst_up[soft])
            if ok:
                for cands in groups:
                    connected = False
                    for (ppos, il, coloc, shared, bw, paths) in cands:
                        if not op[ppos]:
                            continue
                        if il >= 0 and not il_up[il]:
                            continue
                        if coloc:
                            connected = True
                            break
                        for edges, interior in paths:
                            alive = True
                            for e in edges:
                                if not link_up[e]:
                                    alive = False
                                    break
                            if alive:
                                for v in interior:
                                    if not node_up[v]:
                                        alive = False
                                        break
                            if not alive:
                                continue
                            if shared and shared_mode:
                                fits = True
                                for e in edges:
                                    if prot[e] + claims.get(e, 0.0) + bw > cap[e] + _EPS:
                                        fits = False
                                        break
                                if not fits:
                                    continue  # try another surviving path
                                for e in edges:
                                    claims[e] = claims.get(e, 0.0) + bw
                                    taken.append((e, bw))
                            connected = True
                            break
                        if connected:
                            break
                    if not connected:
                        ok = False
                        break
        op[i] = ok
        if ok:
            ms_ok[ms] = True
    alive = all(ms_ok)
    if not alive:
        for e, bw in taken:
            claims[e] -= bw
    return alive


def record_bandwidth(net: InfrastructureNetwork) -> float:
    """Mean protected-pool reservation over edges, MBps. Shared-pool
    reservations are virtual until activation and excluded."""
    if len(net.links) == 0:
        return 0.0
    return float(np.mean(net.protected_alloc))


# -- simulation ---------------------------------------------------------------


@dataclass
class SimResult:
    cumulative_failures: np.ndarray
    bandwidth: np.ndarray
    histogram: np.ndarray  # 4 buckets over analytic reliability at placement
    placements_succeeded: int
    placements_rejected: int
    analytic_reliabilities: list[float]

    @property
    def failures_total(self) -> int:
        return int(self.cumulative_failures[-1]) if len(self.cumulative_failures) else 0

    @property
    def mean_bandwidth(self) -> float:
        return float(np.mean(self.bandwidth)) if len(self.bandwidth) else 0.0


def _histogram_bucket(r: float) -> int:
    for i, edge in enumerate(HISTOGRAM_EDGES):
        if r < edge:
            return i
    return len(HISTOGRAM_EDGES)


def run_simulation(cfg: SimConfig, rep: int = 0) -> SimResult:
    """One repetition: fresh topology and workload, placement at arrival,
    per-step fault injection until every service expired or failed."""
    ss = np.random.SeedSequence([cfg.rng_seed, rep])
    topo_ss, wl_ss, place_ss = ss.spawn(3)
    net = generate_er_topology(cfg.node_count, cfg.edge_prob, cfg.topology_ranges,
                               topo_ss, cfg.access_fraction)
    net.omega = cfg.omega
    wl_rng = np.random.default_rng(wl_ss)
    arrivals = generate_arrivals(cfg.request_count, cfg.arrival_rate, wl_rng)
    ranges = cfg.effective_workload_ranges()
    requests = [generate_request(ranges, net.access_nodes, wl_rng, i, arrivals[i])
                for i in range(cfg.request_count)]
    place_rng = np.random.default_rng(place_ss)

    horizon = max(int(math.floor(r.arrival_time)) + r.lifetime for r in requests) + 1
    shared_index = pl.SharedLinkIndex() if cfg.mechanism == pl.SHARED else None

    pending = list(range(cfg.request_count))
    active: dict[int, dict] = {}
    failures = 0
    cum_failures = np.zeros(horizon, dtype=np.float64)
    bandwidth = np.zeros(horizon, dtype=np.float64)
    histogram = np.zeros(4, dtype=np.int64)
    placed_n = 0
    rejected_n = 0
    reliabilities: list[float] = []

    for t in range(horizon):
        # expiries release resources silently
        for sid in [sid for sid, rec in active.items() if t >= rec["expires"]]:
            rec = active.pop(sid)
            pl.release_placement(net, rec["state"], requests[sid], shared_index)

        # arrivals due this step are placed in arrival order
        while pending and requests[pending[0]].arrival_time < t + 1:
            sid = pending.pop(0)
            req = requests[sid]
            outcome = pl.place_request(
                net, req, cfg.algorithm, cfg.k, cfg.delta, cfg.mechanism,
                shared_index, place_rng, cfg.rrsp_candidates, cfg.sprc_literal)
            if outcome.success:
                placed_n += 1
                r_g = outcome.state.analytic_reliability
                reliabilities.append(r_g)
                histogram[_histogram_bucket(r_g)] += 1
                active[sid] = {
                    "state": outcome.state,
                    "plan": build_eval_plan(req, outcome.state),
                    "expires": t + req.lifetime,
                }
            else:
                rejected_n += 1

        # fault injection over services currently in their lifetime window
        window = {i: requests[i] for i in range(cfg.request_count)
                  if requests[i].arrival_time < t + 1
                  and t < int(math.floor(requests[i].arrival_time)) + requests[i].lifetime}
        if window:
            step_rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, rep, 7919, t]))
            sample = sample_failures(net, window, step_rng)
            claims: dict[int, float] = {}
            for sid in sorted(active):
                rec = active[sid]
                ok = evaluate_service_alive(requests[sid], rec["state"], sample, net,
                                            cfg.mechanism, claims, rec["plan"])
                if not ok:
                    failures += 1
                    if not cfg.continue_after_failure:
                        pl.release_placement(net, rec["state"], requests[sid], shared_index)
                        del active[sid]

        cum_failures[t] = failures
        bandwidth[t] = record_bandwidth(net)

    return SimResult(cum_failures, bandwidth, histogram, placed_n, rejected_n, reliabilities)


@dataclass
class BatchResult:
    mean_failures: np.ndarray
    mean_bandwidth_series: np.ndarray
    per_rep_failures: np.ndarray
    per_rep_bandwidth: np.ndarray
    per_rep_placed: np.ndarray
    per_rep_rejected: np.ndarray
    histogram: np.ndarray

    @property
    def mean_total_failures(self) -> float:
        return float(np.mean(self.per_rep_failures))

    @property
    def mean_bandwidth(self) -> float:
        return float(np.mean(self.per_rep_bandwidth))

    @property
    def placement_success_rate(self) -> float:
        placed = self.per_rep_placed.sum()
        total = placed + self.per_rep_rejected.sum()
        return float(placed / total) if total else 0.0


def _run_one(args):
    cfg, rep = args
    return run_simulation(cfg, rep)


def run_batch(cfg: SimConfig, repetitions: int | None = None) -> BatchResult:
    """Run the configured repetitions (optionally overridden) and average.
    Repetition seeds derive from (rng_seed, repetition index) only."""
    reps = repetitions if repetitions is not None else cfg.repetitions
    if cfg.jobs > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run_one, [(cfg, r) for r in range(reps)]))
    else:
        results = [run_simulation(cfg, r) for r in range(reps)]
    horizon = max(len(r.cumulative_failures) for r in results)
    fail = np.zeros((reps, horizon))
    bw = np.zeros((reps, horizon))
    for i, r in enumerate(results):
        n = len(r.cumulative_failures)
        fail[i, :n] = r.cumulative_failures
        fail[i, n:] = r.cumulative_failures[-1] if n else 0.0
        bw[i, :n] = r.bandwidth
    return BatchResult(
        mean_failures=fail.mean(axis=0),
        mean_bandwidth_series=bw.mean(axis=0),
        per_rep_failures=np.array([r.failures_total for r in results], dtype=np.float64),
        per_rep_bandwidth=np.array([r.mean_bandwidth for r in results], dtype=np.float64),
        per_rep_placed=np.array([r.placements_succeeded for r in results], dtype=np.int64),
        per_rep_rejected=np.array([r.placements_rejected for r in results], dtype=np.int64),
        histogram=np.sum([r.histogram for r in results], axis=0),
    )


# -- export -------------------------------------------------------------------


def write_timeseries_csv(path, failures: np.ndarray, bandwidth: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cumulative_failures", "mean_bandwidth_mbps"])
        for t in range(len(failures)):
            w.writerow([t, f"{failures[t]:.10g}", f"{bandwidth[t]:.10g}"])


def summary_dict(cfg: SimConfig, batch: BatchResult) -> dict:
    return {
        "config": cfg.to_json(),
        "totals": {
            "mean_failures": batch.mean_total_failures,
            "mean_bandwidth_mbps": batch.mean_bandwidth,
            "placed": int(batch.per_rep_placed.sum()),
            "rejected": int(batch.per_rep_rejected.sum()),
            "placement_success_rate": batch.placement_success_rate,
        },
        "reliability_histogram": {
            label: int(n) for label, n in zip(HISTOGRAM_LABELS, batch.histogram)
        },
    }


def write_summary_json(path, cfg: SimConfig, batch: BatchResult) -> None:
    with open(path, "w") as fh:
        json.dump(summary_dict(cfg, batch), fh, indent=2, sort_keys=True)
