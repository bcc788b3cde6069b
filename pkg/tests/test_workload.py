import random
import statistics

import pytest

from vdcthermal.config import WORKLOAD_A, WORKLOAD_B, ConfigError, WorkloadParams
from vdcthermal.workload import (
    ARRIVE,
    DEPART,
    Event,
    EventTrace,
    VdcRequest,
    generate_dynamic_trace,
    generate_static_batch,
    generate_vdc,
    read_batch,
    read_trace,
    write_batch,
    write_trace,
)


def test_vm_count_ranges():
    rng = random.Random(1)
    a = {len(generate_vdc(WORKLOAD_A, rng).vms) for _ in range(2000)}
    b = {len(generate_vdc(WORKLOAD_B, rng).vms) for _ in range(4000)}
    assert a == set(range(2, 7))
    assert b == set(range(2, 13))


def test_two_vm_vdc_has_one_link():
    rng = random.Random(2)
    p = WorkloadParams(m_min=2, m_max=2)
    for _ in range(200):
        v = generate_vdc(p, rng)
        assert len(v.vlinks) == 1


def test_generated_vdcs_connected_10k():
    rng = random.Random(3)
    for i in range(10_000):
        v = generate_vdc(WORKLOAD_B, rng, vdc_id=i)
        v.validate()
        assert v.is_connected()


def test_demands_within_ranges():
    rng = random.Random(4)
    p = WORKLOAD_A
    for v in generate_static_batch(500, p, rng):
        for vm in v.vms:
            assert p.cpu_min <= vm.cpu <= p.cpu_max
            assert p.mem_min <= vm.mem <= p.mem_max
            assert p.disk_min <= vm.disk <= p.disk_max
        for vl in v.vlinks:
            assert p.bw_min <= vl.bandwidth <= p.bw_max


@pytest.mark.parametrize("kw", [dict(m_min=0), dict(m_min=5, m_max=4), dict(bw_min=20, bw_max=10)])
def test_bad_params(kw):
    with pytest.raises(ConfigError):
        generate_vdc(WorkloadParams(**kw), random.Random(0))


def test_static_batch():
    assert generate_static_batch(0, WORKLOAD_B, random.Random(0)) == []
    batch = generate_static_batch(200, WORKLOAD_B, random.Random(5))
    assert len(batch) == 200
    assert all(2 <= len(v.vms) <= 12 for v in batch)
    again = generate_static_batch(200, WORKLOAD_B, random.Random(5))
    assert [v.to_dict() for v in batch] == [v.to_dict() for v in again]


def test_validate_rejects_bad_vdcs():
    from conftest import make_vdc

    with pytest.raises(ValueError):
        make_vdc(0, [5, 5, 5], [(0, 1, 10)]).validate()  # disconnected
    with pytest.raises(ValueError):
        make_vdc(0, [5, 5], [(0, 1, 10), (1, 0, 10)]).validate()  # duplicate
    with pytest.raises(ValueError):
        make_vdc(0, [5, 5], [(0, 0, 10), (0, 1, 10)]).validate()  # self-loop


def test_dynamic_trace_shape():
    assert len(generate_dynamic_trace(0, 80, 3, WORKLOAD_B, random.Random(0))) == 0
    tr = generate_dynamic_trace(2000, 80, 3, WORKLOAD_B, random.Random(6))
    tr.validate()
    seen = {}
    for ev in tr.events:
        seen.setdefault(ev.vdc_id, []).append(ev)
    assert len(seen) == 2000
    for evs in seen.values():
        assert [e.kind for e in evs] == [ARRIVE, DEPART]
        assert evs[1].time > evs[0].time


def test_interarrival_mean():
    tr = generate_dynamic_trace(100_000, 80, 3, WorkloadParams(m_min=2, m_max=2), random.Random(7))
    arr = sorted(v.arrival_time for v in tr.requests.values())
    gaps = [b - a for a, b in zip([0.0] + arr, arr)]
    assert abs(statistics.fmean(gaps) - 1 / 80) < 0.01 / 80


def test_trace_validation_errors():
    v = VdcRequest(0, [], [])
    with pytest.raises(ValueError):
        EventTrace([Event(1.0, DEPART, 0)], {0: v}).validate()
    with pytest.raises(ValueError):
        EventTrace([Event(2.0, ARRIVE, 0), Event(1.0, DEPART, 0)], {0: v}).validate()
    with pytest.raises(ValueError):
        EventTrace([Event(1.0, ARRIVE, 9)], {0: v}).validate()


def test_jsonl_roundtrip(tmp_path):
    batch = generate_static_batch(20, WORKLOAD_A, random.Random(8))
    write_batch(tmp_path / "b.jsonl", batch)
    back = read_batch(tmp_path / "b.jsonl")
    assert [v.to_dict() for v in back] == [v.to_dict() for v in batch]
    tr = generate_dynamic_trace(50, 80, 3, WORKLOAD_A, random.Random(9))
    write_trace(tmp_path / "t.jsonl", tr)
    back_tr = read_trace(tmp_path / "t.jsonl")
    assert back_tr.events == tr.events
    assert {k: v.to_dict() for k, v in back_tr.requests.items()} == {
        k: v.to_dict() for k, v in tr.requests.items()
    }


def test_malformed_trace_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"t": 1.0, "kind": "ARRIVE"}\n')
    with pytest.raises(ValueError):
        read_trace(p)
