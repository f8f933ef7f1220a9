"""Unit-capacity max-flow kernel for internally disjoint path search.

Works on the implicit vertex-split graph (node v becomes v_in -> v_out with
capacity 1) so that augmenting paths are internally vertex-disjoint. Augmenting
paths are found shortest-first with a 0-1 BFS (physical arcs cost 1, internal
arcs cost 0) and the search stops once the shortest augmenting path exceeds the
length bound. JIT-compiled with numba when available; set RELPLACE_NO_NUMBA=1
to force the pure-Python fallback.

Flow state:
  flow_fwd[e] = 1 while the arc (edge_u[e] -> edge_v[e]) carries flow
  flow_bwd[e] = 1 while the opposite arc carries flow
  node_used[v] = 1 while the internal arc of v carries flow
Positions in the split graph are encoded 2*v (v_in) and 2*v + 1 (v_out).
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    if os.environ.get("RELPLACE_NO_NUMBA"):
        raise ImportError
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _bfs_augment(indptr, nbr, eid, edge_u, feasible, flow_fwd, flow_bwd,
                 node_used, src, dst, max_len, dist, prev_pos, prev_edge, deque):
    """One 0-1 BFS over the residual split graph. Returns the physical-edge
    length of the shortest augmenting path, or -1 if none within max_len."""
    n2 = dist.shape[0]
    for i in range(n2):
        dist[i] = -1
    start = 2 * src + 1  # src_out
    goal = 2 * dst       # dst_in
    mid = n2 + 2
    head = mid
    tail = mid
    dist[start] = 0
    deque[tail] = start
    tail += 1
    while head < tail:
        pos = deque[head]
        head += 1
        if pos == goal:
            return dist[pos]
        d = dist[pos]
        node = pos >> 1
        if pos & 1:  # node_out
            if node_used[node] == 1:
                back = 2 * node  # reverse internal, cost 0
                if dist[back] < 0:
                    dist[back] = d
                    prev_pos[back] = pos
                    prev_edge[back] = -1
                    head -= 1
                    deque[head] = back
            if d < max_len:
                for i in range(indptr[node], indptr[node + 1]):
                    e = eid[i]
                    if feasible[e] == 0:
                        continue
                    # forward physical arc node -> w, cost 1
                    if edge_u[e] == node:
                        if flow_fwd[e] == 1:
                            continue
                    else:
                        if flow_bwd[e] == 1:
                            continue
                    tgt = 2 * nbr[i]
                    if dist[tgt] < 0:
                        dist[tgt] = d + 1
                        prev_pos[tgt] = pos
                        prev_edge[tgt] = e
                        deque[tail] = tgt
                        tail += 1
        else:  # node_in
            if node_used[node] == 0:
                fwd = 2 * node + 1  # forward internal, cost 0
                if dist[fwd] < 0:
                    dist[fwd] = d
                    prev_pos[fwd] = pos
                    prev_edge[fwd] = -1
                    head -= 1
                    deque[head] = fwd
            if d < max_len:
                for i in range(indptr[node], indptr[node + 1]):
                    e = eid[i]
                    w = nbr[i]
                    # reverse physical arc: cancel existing flow w -> node, cost 1
                    if edge_u[e] == w:
                        if flow_fwd[e] == 0:
                            continue
                    else:
                        if flow_bwd[e] == 0:
                            continue
                    tgt = 2 * w + 1
                    if dist[tgt] < 0:
                        dist[tgt] = d + 1
                        prev_pos[tgt] = pos
                        prev_edge[tgt] = e
                        deque[tail] = tgt
                        tail += 1
    return -1


@njit(cache=True)
def _max_disjoint_flow(indptr, nbr, eid, edge_u, feasible, n_nodes, n_edges,
                       src, dst, max_len):
    """Shortest-augmenting-path max flow; returns (flow_fwd, flow_bwd, value)."""
    flow_fwd = np.zeros(n_edges, np.int8)
    flow_bwd = np.zeros(n_edges, np.int8)
    node_used = np.zeros(n_nodes, np.int8)
    n2 = 2 * n_nodes
    dist = np.empty(n2, np.int32)
    prev_pos = np.empty(n2, np.int32)
    prev_edge = np.empty(n2, np.int32)
    deque = np.empty(2 * n2 + 4, np.int32)
    value = 0
    while value < n_nodes:
        length = _bfs_augment(indptr, nbr, eid, edge_u, feasible, flow_fwd,
                              flow_bwd, node_used, src, dst, max_len, dist,
                              prev_pos, prev_edge, deque)
        if length < 0:
            break
        pos = 2 * dst
        while pos != 2 * src + 1:
            par = prev_pos[pos]
            e = prev_edge[pos]
            if e >= 0:
                par_node = par >> 1
                if (par & 1) == 1:
                    # forward physical arc par_node -> (pos >> 1)
                    if edge_u[e] == par_node:
                        flow_fwd[e] = 1
                    else:
                        flow_bwd[e] = 1
                else:
                    # reverse physical arc cancelled flow (pos>>1) -> par_node
                    if edge_u[e] == (pos >> 1):
                        flow_fwd[e] = 0
                    else:
                        flow_bwd[e] = 0
            else:
                node = pos >> 1
                if (pos & 1) == 1:
                    node_used[node] = 1
                else:
                    node_used[node] = 0
            pos = par
        value += 1
    return flow_fwd, flow_bwd, value


@njit(cache=True)
def _decompose(indptr, nbr, eid, edge_u, net_flow, n_nodes, src, dst, max_paths):
    """Follow net flow from src, yielding flat node/edge sequences. Flow cycles
    disconnected from src are ignored."""
    out_nodes = np.empty(max_paths * (n_nodes + 1), np.int32)
    out_edges = np.empty(max_paths * n_nodes, np.int32)
    offsets = np.zeros(max_paths + 1, np.int32)
    n_paths = 0
    wn = 0
    we = 0
    for i0 in range(indptr[src], indptr[src + 1]):
        e0 = eid[i0]
        f = net_flow[e0]
        if (edge_u[e0] == src and f == 1) or (edge_u[e0] != src and f == -1):
            start_wn = wn
            start_we = we
            out_nodes[wn] = src
            wn += 1
            net_flow[e0] = 0
            cur = nbr[i0]
            out_edges[we] = e0
            we += 1
            out_nodes[wn] = cur
            wn += 1
            ok = True
            steps = 0
            while cur != dst:
                steps += 1
                if steps > n_nodes:
                    ok = False
                    break
                found = False
                for i in range(indptr[cur], indptr[cur + 1]):
                    e = eid[i]
                    f2 = net_flow[e]
                    if (edge_u[e] == cur and f2 == 1) or (edge_u[e] != cur and f2 == -1):
                        net_flow[e] = 0
                        cur = nbr[i]
                        out_edges[we] = e
                        we += 1
                        out_nodes[wn] = cur
                        wn += 1
                        found = True
                        break
                if not found:
                    ok = False
                    break
            if ok:
                n_paths += 1
                offsets[n_paths] = wn
            else:  # dead fragment; rewind
                wn = start_wn
                we = start_we
    return out_nodes[:wn], out_edges[:we], offsets[:n_paths + 1]


def find_disjoint_paths_raw(indptr, nbr, eid, edge_u, feasible, n_nodes,
                            src, dst, max_len):
    """Internally disjoint src->dst paths over feasible edges, each of length
    <= max_len physical edges (augmenting paths beyond the bound are not taken;
    decomposed paths beyond it are dropped). Returns a list of (nodes, edges)
    tuples sorted by (length, node sequence)."""
    n_edges = feasible.shape[0]
    flow_fwd, flow_bwd, value = _max_disjoint_flow(
        indptr, nbr, eid, edge_u, feasible, np.int64(n_nodes), np.int64(n_edges),
        np.int64(src), np.int64(dst), np.int64(max_len))
    if value == 0:
        return []
    net = (flow_fwd.astype(np.int8) - flow_bwd.astype(np.int8))
    nodes_flat, edges_flat, offs = _decompose(
        indptr, nbr, eid, edge_u, net, np.int64(n_nodes),
        np.int64(src), np.int64(dst), np.int64(value) + 1)
    paths = []
    for p in range(len(offs) - 1):
        lo, hi = int(offs[p]), int(offs[p + 1])
        nodes = tuple(int(x) for x in nodes_flat[lo:hi])
        edges = tuple(int(x) for x in edges_flat[lo - p:hi - p - 1])
        if len(edges) <= max_len:
            paths.append((nodes, edges))
    paths.sort(key=lambda ne: (len(ne[0]), ne[0]))
    return paths
