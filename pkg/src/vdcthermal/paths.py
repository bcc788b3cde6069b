"""Compiled path searches over the CSR adjacency of a DataCenterState.

Both searches run backwards from the destination and then walk forward from
the source picking the smallest admissible neighbour id, which yields the
lexicographically smallest node sequence among the optimal paths.

Costs are integers: a used link costs ``(capacity - residual) * scale / capacity``
(utilisation scaled by the lcm of link capacities), an unused link
``LARGE_COST * scale``.  Each hop also adds 1 in the low digits so that
``key = cost * hop_base + hops`` orders by cost, then hop count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .topology import DataCenterState

# cost of an unused link, in utilisation units (a used link costs at most 1)
LARGE_COST = 100

_EMPTY = np.zeros(0, dtype=np.int64)


@njit(cache=True, inline="always")
def _push(keys, vals, size, key, val):
    # binary min-heap stored in two parallel arrays; returns the new size
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return size + 1


@njit(cache=True, inline="always")
def _pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[i] <= keys[child]:
            break
        keys[child], keys[i] = keys[i], keys[child]
        vals[child], vals[i] = vals[i], vals[child]
        i = child
    return key, val, size


@njit(cache=True, inline="always")
def _step(l, demand, cap, res, unit, unused_step, widest, floor):
    # -1 marks a pruned link; unit[l] = scale // cap[l] * hop_base
    if widest:
        return 1 if res[l] >= floor else -1
    if res[l] < demand:
        return -1
    if res[l] == cap[l]:
        return unused_step
    return (cap[l] - res[l]) * unit[l] + 1


@njit(cache=True)
def _walk(src, dst, demand, indptr, nbr, elink, cap, res, unit, unused_step, widest, floor, label):
    # follow edges u->v with label[v] + step == label[u], smallest v first
    n_max = indptr.shape[0]
    nodes = np.empty(n_max, dtype=np.int64)
    links = np.empty(n_max, dtype=np.int64)
    nodes[0] = src
    u = src
    k = 0
    while u != dst:
        nxt = -1
        for e in range(indptr[u], indptr[u + 1]):
            v = nbr[e]
            if label[v] < 0:
                continue
            l = elink[e]
            w = _step(l, demand, cap, res, unit, unused_step, widest, floor)
            if w >= 0 and label[v] + w == label[u]:
                nxt = v
                links[k] = l
                break
        if nxt < 0:
            return nodes[:0], links[:0]
        k += 1
        nodes[k] = nxt
        u = nxt
    return nodes[: k + 1].copy(), links[:k].copy()


@njit(cache=True)
def _min_cost_path(src, dst, demand, indptr, nbr, elink, cap, res, is_server, unit, unused_step):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[dst] = 0
    # each relaxation pushes at most once per directed edge
    hkeys = np.empty(nbr.shape[0] + 1, dtype=np.int64)
    hvals = np.empty(nbr.shape[0] + 1, dtype=np.int64)
    size = _push(hkeys, hvals, 0, 0, dst)
    while size > 0:
        d, u, size = _pop(hkeys, hvals, size)
        if done[u]:
            continue
        done[u] = True
        if u == src:
            break
        for e in range(indptr[u], indptr[u + 1]):
            v = nbr[e]
            # a server other than the source is a leaf and cannot be transited
            if done[v] or (is_server[v] and v != src):
                continue
            w = _step(elink[e], demand, cap, res, unit, unused_step, False, 0)
            if w < 0:
                continue
            nd = d + w
            if dist[v] < 0 or nd < dist[v]:
                dist[v] = nd
                size = _push(hkeys, hvals, size, nd, v)
    if not done[src]:
        return _EMPTY, _EMPTY
    return _walk(src, dst, demand, indptr, nbr, elink, cap, res, unit, unused_step, False, 0, dist)


@njit(cache=True)
def _widest_path(src, dst, demand, indptr, nbr, elink, cap, res, is_server):
    n = indptr.shape[0] - 1
    # phase 1: best achievable bottleneck residual
    width = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    big = np.int64(1) << 62
    width[dst] = big
    hkeys = np.empty(nbr.shape[0] + 1, dtype=np.int64)
    hvals = np.empty(nbr.shape[0] + 1, dtype=np.int64)
    size = _push(hkeys, hvals, 0, -big, dst)
    while size > 0:
        negw, u, size = _pop(hkeys, hvals, size)
        if done[u]:
            continue
        done[u] = True
        if u == src:
            break
        for e in range(indptr[u], indptr[u + 1]):
            v = nbr[e]
            if done[v] or (is_server[v] and v != src):
                continue
            l = elink[e]
            if res[l] < demand:
                continue
            w = min(-negw, res[l])
            if w > width[v]:
                width[v] = w
                size = _push(hkeys, hvals, size, -w, v)
    if not done[src]:
        return _EMPTY, _EMPTY, np.int64(-1)
    best = width[src]
    # phase 2: fewest hops using only links at least as wide as the best bottleneck
    hops = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    hops[dst] = 0
    queue[0] = dst
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        if u == src:
            break
        for e in range(indptr[u], indptr[u + 1]):
            v = nbr[e]
            if hops[v] >= 0 or (is_server[v] and v != src):
                continue
            if res[elink[e]] >= best:
                hops[v] = hops[u] + 1
                queue[tail] = v
                tail += 1
    nodes, links = _walk(src, dst, demand, indptr, nbr, elink, cap, res, cap, 0, True, best, hops)
    return nodes, links, best


def _cost_tables(state: DataCenterState) -> tuple[np.ndarray, int]:
    """Per-link cost multipliers, cached on the state (capacities never change)."""
    tables = state.__dict__.get("_cost_tables")
    if tables is None:
        hop_base = state.n_nodes + 1
        if LARGE_COST * state.cost_scale * hop_base * hop_base >= 2**62:
            raise OverflowError("topology too large for integer path costs")
        unit = (state.cost_scale // state.link_capacity) * hop_base
        tables = (unit.astype(np.int64), LARGE_COST * state.cost_scale * hop_base + 1)
        state.__dict__["_cost_tables"] = tables
    return tables


def find_path(state: DataCenterState, src: int, dst: int, demand: int) -> tuple[list[int], list[int]] | None:
    """Minimum-cost route preferring links that already carry traffic.

    Links whose residual is below ``demand`` are pruned.  Returns (nodes, links)
    or None when the pruned graph disconnects the endpoints.
    """
    found = min_cost_route(state, src, dst, demand)
    return None if found is None else (found[0].tolist(), found[1].tolist())


def find_widest_path(state: DataCenterState, src: int, dst: int, demand: int) -> tuple[list[int], list[int]] | None:
    """Least-loaded routing: maximise the bottleneck residual, then fewest hops."""
    found = widest_route(state, src, dst, demand)
    return None if found is None else (found[0].tolist(), found[1].tolist())


def min_cost_route(state: DataCenterState, src: int, dst: int, demand: int):
    """``find_path`` returning numpy (nodes, links) arrays."""
    if src == dst:
        raise ValueError("source and destination servers coincide")
    unit, unused_step = _cost_tables(state)
    nodes, links = _min_cost_path(
        src,
        dst,
        demand,
        state.csr_indptr,
        state.csr_nbr,
        state.csr_link,
        state.link_capacity,
        state.link_residual,
        state.is_server,
        unit,
        unused_step,
    )
    if len(nodes) == 0:
        return None
    return nodes, links


def widest_route(state: DataCenterState, src: int, dst: int, demand: int):
    """``find_widest_path`` returning numpy (nodes, links) arrays."""
    if src == dst:
        raise ValueError("source and destination servers coincide")
    nodes, links, _ = _widest_path(
        src,
        dst,
        demand,
        state.csr_indptr,
        state.csr_nbr,
        state.csr_link,
        state.link_capacity,
        state.link_residual,
        state.is_server,
    )
    if len(nodes) == 0:
        return None
    return nodes, links


def path_cost(state: DataCenterState, links: list[int]) -> float:
    """Cost of a route in utilisation units, as seen by ``find_path``."""
    total = 0.0
    for l in links:
        cap = int(state.link_capacity[l])
        res = int(state.link_residual[l])
        total += LARGE_COST if res == cap else (cap - res) / cap
    return total
