from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdcthermal.paths import LARGE_COST, find_path, find_widest_path, path_cost
from vdcthermal.topology import OPTICAL

from conftest import make_state


def _graph(state):
    g = nx.Graph()
    for link in state.links():
        g.add_edge(link.a, link.b, l=link.id)
    return g


def _candidates(state, src, dst, demand):
    """All simple paths that transit no server and fit ``demand`` on every hop."""
    g = _graph(state)
    for nodes in nx.all_simple_paths(g, src, dst):
        if any(n < state.n_servers for n in nodes[1:-1]):
            continue
        links = [g[a][b]["l"] for a, b in zip(nodes, nodes[1:])]
        if all(state.link_residual[l] >= demand for l in links):
            yield nodes, links


def _oracle_min_cost(state, src, dst, demand):
    best = None
    for nodes, links in _candidates(state, src, dst, demand):
        cost = Fraction(0)
        for l in links:
            cap, res = int(state.link_capacity[l]), int(state.link_residual[l])
            cost += LARGE_COST if res == cap else Fraction(cap - res, cap)
        key = (cost, len(links), nodes)
        if best is None or key < best:
            best = key
    return best


def _oracle_widest(state, src, dst, demand):
    best = None
    for nodes, links in _candidates(state, src, dst, demand):
        width = min(int(state.link_residual[l]) for l in links)
        key = (-width, len(links), nodes)
        if best is None or key < best:
            best = key
    return best


def _random_load(state, draws):
    for l, amt in draws:
        l %= state.n_links
        amt = min(amt, int(state.link_residual[l]))
        if amt > 0:
            state.reserve_link(l, amt)


loads = st.lists(st.tuples(st.integers(0, 200), st.integers(1, 9000)), max_size=25)


@settings(max_examples=150, deadline=None)
@given(loads, st.integers(0, 8), st.integers(0, 8), st.integers(1, 600))
def test_min_cost_matches_enumeration(draws, a, b, demand):
    s = make_state(3, 3, n_agg=3, n_core=2)
    _random_load(s, draws)
    if a == b:
        return
    got = find_path(s, a, b, demand)
    want = _oracle_min_cost(s, a, b, demand)
    if want is None:
        assert got is None
        return
    nodes, links = got
    assert nodes == want[2]
    assert len(links) == want[1]
    assert path_cost(s, links) == pytest.approx(float(want[0]))


@settings(max_examples=150, deadline=None)
@given(loads, st.integers(0, 8), st.integers(0, 8), st.integers(1, 600))
def test_widest_matches_enumeration(draws, a, b, demand):
    s = make_state(3, 3, n_agg=3, n_core=2)
    _random_load(s, draws)
    if a == b:
        return
    got = find_widest_path(s, a, b, demand)
    want = _oracle_widest(s, a, b, demand)
    if want is None:
        assert got is None
        return
    assert got[0] == want[2]


def test_same_rack_two_hops():
    s = make_state(2, 3)
    nodes, links = find_path(s, 0, 2, 10)
    assert nodes == [0, s.tor_of(0), 2]
    assert len(links) == 2
    assert find_widest_path(s, 0, 2, 10)[0] == [0, s.tor_of(0), 2]


def test_demand_above_access_fails():
    s = make_state(2, 3)
    assert find_path(s, 0, 4, 1001) is None
    assert find_widest_path(s, 0, 4, 1001) is None


def test_prefers_used_trunk():
    # two racks, both ToRs wired to both aggregation switches, one core
    s = make_state(2, 2, n_agg=2, n_core=1)
    tor0, tor1 = s.tor_of(0), s.tor_of(2)
    aggs = sorted(n for n, _ in s.adj[tor0] if s.link_medium[s.link_between(tor0, n)] == OPTICAL)
    assert len(aggs) == 2
    # on a fresh DC the lower-id aggregation switch wins the tie
    assert find_path(s, 0, 2, 10)[0] == [0, tor0, aggs[0], tor1, 2]
    # pre-load the path through the higher-id aggregation switch
    for l in (s.link_between(tor0, aggs[1]), s.link_between(aggs[1], tor1)):
        s.reserve_link(l, 1000)
    nodes, _ = find_path(s, 0, 2, 10)
    assert nodes == [0, tor0, aggs[1], tor1, 2]
    # the widest route avoids the loaded trunks
    assert find_widest_path(s, 0, 2, 10)[0] == [0, tor0, aggs[0], tor1, 2]


def test_same_endpoints_rejected():
    s = make_state(2, 2)
    with pytest.raises(ValueError):
        find_path(s, 1, 1, 10)
