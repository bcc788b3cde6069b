import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdcthermal import embedding as emb_mod
from vdcthermal.config import WORKLOAD_A, WorkloadParams
from vdcthermal.embedding import (
    LOAD_BALANCED,
    TEMPERATURE_AWARE,
    Embedding,
    embed_load_balanced,
    embed_temperature_aware,
    map_vms,
    release_vdc,
    validate_embedding,
)
from vdcthermal.exactopt import MilpInstance, validate_solution
from vdcthermal.thermal import rack_outlets, thermal_report
from vdcthermal.topology import DataCenterState, StateError
from vdcthermal.workload import generate_static_batch, generate_vdc

from conftest import make_state, make_vdc

ALGS = [TEMPERATURE_AWARE, LOAD_BALANCED]
EMBED = {TEMPERATURE_AWARE: embed_temperature_aware, LOAD_BALANCED: embed_load_balanced}


def test_coldest_rack_skips_colocated_server():
    # rack 0 is coldest but full; in rack 1 the least-residual server that fits
    # takes the first VM, so the second VM must go to the next one
    s = make_state(4, 4, inlets=[10, 15, 25, 25])
    for sid in range(4):
        s.host_vm(sid, 100, 0, 0)
    for sid, load in zip(range(4, 8), (95, 50, 40, 0)):
        s.host_vm(sid, load, 0, 0)
    out = rack_outlets(s)
    assert out[0] < out[1] < min(out[2:])
    vdc = make_vdc(0, [30, 20], [(0, 1, 10)])
    placement = map_vms(s, vdc, TEMPERATURE_AWARE)
    assert placement == {0: 5, 1: 6}


def test_single_vm_single_server():
    for alg in ALGS:
        s = make_state(1, 1, n_agg=1)
        assert map_vms(s, make_vdc(0, [30], []), alg) == {0: 0}
        assert s.servers[0].residual_cpu == 70


@pytest.mark.parametrize("alg", ALGS)
def test_more_vms_than_servers_fails(alg):
    s = make_state(1, 2, n_agg=1)
    before = s.snapshot()
    vdc = make_vdc(0, [5, 5, 5], [(0, 1, 10), (1, 2, 10)])
    assert EMBED[alg](s, vdc) is None
    assert s.snapshot() == before


def test_least_loaded_choice():
    s = make_state(1, 3, n_agg=1)
    for sid, load in enumerate((10, 5, 20)):
        s.host_vm(sid, load, 0, 0)
    assert map_vms(s, make_vdc(0, [10], []), LOAD_BALANCED) == {0: 1}


def test_least_loaded_spreads_on_fresh_dc():
    s = make_state(2, 3)
    placed = []
    for i in range(2):
        e = embed_load_balanced(s, make_vdc(i, [10, 10, 10], [(0, 1, 10), (1, 2, 10)]))
        placed += list(e.vm_placement.values())
    assert sorted(placed) == list(range(6))


@pytest.mark.parametrize("alg", ALGS)
def test_full_dc_fails_unchanged(alg):
    s = make_state(2, 2)
    for sid in range(4):
        s.host_vm(sid, 100, 0, 0)
    before = s.snapshot()
    assert EMBED[alg](s, make_vdc(0, [5, 5], [(0, 1, 10)])) is None
    assert s.snapshot() == before


def test_cooler_rack_takes_more_vms():
    # two racks, rack 1 cooler: temperature-aware packs more VMs there and
    # narrows the outlet gap, while the load-balanced run spreads evenly
    rng = random.Random(0)
    batch = generate_static_batch(6, WorkloadParams(m_min=2, m_max=3, cpu_min=20, cpu_max=30), rng)
    results = {}
    for alg in ALGS:
        s = make_state(2, 5, inlets=[20, 16])
        for v in batch:
            assert EMBED[alg](s, v) is not None
        per_rack = [s.rack_vms[0], s.rack_vms[1]]
        out = rack_outlets(s)
        active = sum(srv.active for srv in s.servers)
        results[alg] = (per_rack, out[0] - out[1], max(out), active)
    ta, lb = results[TEMPERATURE_AWARE], results[LOAD_BALANCED]
    assert ta[0][1] > ta[0][0]
    assert abs(ta[1]) < abs(lb[1])
    assert ta[2] < lb[2]
    assert ta[3] < lb[3]


@pytest.mark.parametrize("alg", ALGS)
def test_embed_release_restores_state(alg):
    s = make_state(3, 3)
    pristine = s.snapshot()
    report0 = thermal_report(s)
    v = make_vdc(7, [20, 10, 15], [(0, 1, 30), (1, 2, 40)])
    e = EMBED[alg](s, v)
    assert e is not None
    assert validate_embedding(s, e) == []
    s.check_consistency()
    release_vdc(s, e)
    assert s.snapshot() == pristine
    assert s.is_pristine()
    assert thermal_report(s) == report0
    with pytest.raises(StateError):
        release_vdc(s, e)


def test_release_unknown_embedding():
    s = make_state(2, 2)
    with pytest.raises(StateError):
        release_vdc(s, Embedding(vdc_id=3, vm_placement={}))


def test_double_embed_refused():
    s = make_state(2, 2)
    v = make_vdc(1, [5, 5], [(0, 1, 10)])
    embed_temperature_aware(s, v)
    with pytest.raises(StateError):
        embed_temperature_aware(s, v)


def test_link_stage_failure_rolls_back():
    # access links too thin for the vlink only after VM mapping succeeds:
    # the reservation on the shared ToR uplinks is what breaks
    s = make_state(2, 1, n_agg=1)
    for l in range(s.n_links):
        if s.link_medium[l] == "optical":
            s.reserve_link(l, int(s.link_capacity[l]) - 5)
    before = s.snapshot()
    v = make_vdc(0, [5, 5], [(0, 1, 50)])
    for alg in ALGS:
        assert EMBED[alg](s, v) is None
        assert s.snapshot() == before


@pytest.mark.parametrize("alg", ALGS)
@pytest.mark.parametrize("fail_at", [0, 1, 2, 3])
def test_rollback_under_injected_errors(monkeypatch, alg, fail_at):
    s = make_state(3, 3)
    v = make_vdc(0, [20, 10, 15, 5], [(0, 1, 30), (1, 2, 40), (2, 3, 10), (0, 3, 20)])
    before = s.snapshot()
    calls = {"n": 0}
    real = DataCenterState.reserve_path

    def flaky(self, links, amount):
        if calls["n"] == fail_at:
            raise StateError("injected")
        calls["n"] += 1
        real(self, links, amount)

    monkeypatch.setattr(DataCenterState, "reserve_path", flaky)
    with pytest.raises(StateError, match="injected"):
        EMBED[alg](s, v)
    assert s.snapshot() == before
    s.check_consistency()


@pytest.mark.parametrize("alg", ALGS)
def test_router_failure_rolls_back(monkeypatch, alg):
    s = make_state(3, 3)
    real = emb_mod._ROUTERS[alg]
    calls = {"n": 0}

    def router(state, a, b, bw):
        calls["n"] += 1
        return None if calls["n"] == 2 else real(state, a, b, bw)

    monkeypatch.setitem(emb_mod._ROUTERS, alg, router)
    before = s.snapshot()
    v = make_vdc(0, [20, 10, 15], [(0, 1, 30), (1, 2, 40)])
    assert EMBED[alg](s, v) is None
    assert s.snapshot() == before


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(ALGS), st.integers(1, 25))
def test_batch_embeddings_pass_validator(seed, alg, n):
    rng = random.Random(seed)
    s = make_state(3, 4, n_agg=2, n_core=2)
    batch = generate_static_batch(n, WORKLOAD_A, rng)
    done = [e for e in (EMBED[alg](s, v) for v in batch) if e is not None]
    s.check_consistency()
    for e in done:
        assert validate_embedding(s, e) == []
    inst = MilpInstance(make_state(3, 4, n_agg=2, n_core=2), [e.vdc for e in done])
    report = validate_solution(inst, done)
    assert report.ok, report.failed()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(ALGS))
def test_random_embed_release_conserves(seed, alg):
    rng = random.Random(seed)
    s = make_state(3, 4, n_agg=2, n_core=2)
    pristine = s.snapshot()
    live = []
    for i in range(60):
        if live and rng.random() < 0.45:
            release_vdc(s, live.pop(rng.randrange(len(live))))
        else:
            e = EMBED[alg](s, generate_vdc(WORKLOAD_A, rng, vdc_id=i))
            if e is not None:
                live.append(e)
    s.check_consistency()
    for e in live:
        release_vdc(s, e)
    assert s.snapshot() == pristine
    assert s.is_pristine()
