import math
import random
from dataclasses import replace

import pytest

from vdcthermal.config import CASE_A, WORKLOAD_A, DynamicParams, RunConfig
from vdcthermal.embedding import LOAD_BALANCED, TEMPERATURE_AWARE
from vdcthermal.simulation import (
    DynamicReport,
    dynamic_replication,
    outlet_histogram,
    run_dynamic,
    run_static,
    static_replication,
)
from vdcthermal.workload import ARRIVE, DEPART, Event, EventTrace, generate_dynamic_trace

from conftest import make_state, make_vdc

ALGS = [TEMPERATURE_AWARE, LOAD_BALANCED]


def _cfg(n=10, **dyn):
    return replace(RunConfig(), topology=CASE_A, workload=WORKLOAD_A, n_vdcs=n, dynamic=DynamicParams(**dyn))


def test_histogram_right_closed():
    h = outlet_histogram([29.5, 29.6, 30.0, 30.01])
    assert h == {29.0: 1, 29.5: 2, 30.0: 1}


@pytest.mark.parametrize("alg", ALGS)
def test_static_zero_vdcs(alg):
    st = make_state(2, 2, inlets=[15, 19])
    rep = run_static(st, [], alg)
    assert rep.total_it_power == 0
    assert rep.max_outlet == 19
    assert rep.n_failed == 0


@pytest.mark.parametrize("alg", ALGS)
def test_static_bookkeeping(alg):
    st, vdcs = static_replication(_cfg(25), 4)
    rep = run_static(st, vdcs, alg)
    assert len(rep.success) == 25
    assert sum(rep.success.values()) == len(rep.embeddings) == len(st.embeddings)
    assert sum(rep.histogram.values()) == len(st.racks)
    st.check_consistency()
    s = rep.summary()
    assert s["n_failed"] == rep.n_failed
    assert s["max_outlet_c"] >= s["min_outlet_c"]


def test_static_replication_is_paired():
    a_state, a_vdcs = static_replication(_cfg(), 9)
    b_state, b_vdcs = static_replication(_cfg(), 9)
    assert a_state.inlet_temperatures == b_state.inlet_temperatures
    assert [v.to_dict() for v in a_vdcs] == [v.to_dict() for v in b_vdcs]
    assert static_replication(_cfg(), 10)[0].inlet_temperatures != a_state.inlet_temperatures


def test_static_largest_first():
    st = make_state(1, 2, n_agg=1)
    small = make_vdc(0, [60], [])
    big = make_vdc(1, [60, 60], [(0, 1, 10)])
    rep = run_static(st, [small, big], TEMPERATURE_AWARE)
    # the 2-VM VDC goes first and fills both servers' headroom
    assert rep.success == {0: False, 1: True}


@pytest.mark.parametrize("alg", ALGS)
def test_dynamic_empty_trace(alg):
    rep = run_dynamic(make_state(), EventTrace(), alg, threshold=35)
    assert rep.arrivals == 0
    assert rep.rejection_ratio == 0
    assert math.isnan(rep.mean_power)


@pytest.mark.parametrize("alg", ALGS)
def test_dynamic_bookkeeping_and_pristine_end(alg):
    st, trace = dynamic_replication(_cfg(n_requests=400, lam=30), 1)
    rep = run_dynamic(st, trace, alg, threshold=30, warmup=50)
    assert rep.arrivals == 400
    assert rep.commits + rep.rejections == rep.arrivals
    assert rep.measured_arrivals == 350
    assert rep.measured_rejections <= rep.rejections
    assert len(rep.times) == len(trace.events)
    # every VDC departed, so nothing may be left behind
    assert st.is_pristine()
    st.check_consistency()


@pytest.mark.parametrize("alg", ALGS)
def test_unreachable_threshold_no_rejections(alg):
    st = make_state(4, 10)
    trace = generate_dynamic_trace(300, 5, 1, WORKLOAD_A, random.Random(2))
    rep = run_dynamic(st, trace, alg, threshold=math.inf)
    assert rep.rejections == 0
    rep_none = run_dynamic(make_state(4, 10), trace, alg, threshold=None)
    assert rep_none.summary()["commits"] == 300


@pytest.mark.parametrize("alg", ALGS)
def test_threshold_extremes(alg):
    trace = generate_dynamic_trace(200, 40, 3, WORKLOAD_A, random.Random(3))
    cold = run_dynamic(make_state(2, 5), trace, alg, threshold=-math.inf)
    assert cold.rejected_temperature + cold.rejected_resources == 200
    assert cold.commits == 0
    loose = run_dynamic(make_state(2, 5), trace, alg, threshold=math.inf)
    assert loose.rejected_temperature == 0


def test_dynamic_errors():
    with pytest.raises(ValueError):
        run_dynamic(make_state(), EventTrace(), TEMPERATURE_AWARE, warmup=-1)
    v = make_vdc(0, [5], [])
    bad = EventTrace([Event(1.0, DEPART, 0)], {0: v})
    with pytest.raises(ValueError):
        run_dynamic(make_state(), bad, TEMPERATURE_AWARE)


def test_time_weighted_mean():
    rep = DynamicReport(algorithm=TEMPERATURE_AWARE, threshold=None, warmup=0)
    for t, p in ((0.0, 1.0), (1.0, 3.0), (3.0, 0.0)):
        rep.times.append(t)
        rep.power.append(p)
    assert rep.mean_power == pytest.approx((1 * 1 + 3 * 2) / 3)


def test_series_csv_rows():
    st = make_state(2, 2)
    trace = EventTrace(
        [Event(0.5, ARRIVE, 0), Event(1.0, DEPART, 0)], {0: make_vdc(0, [50, 50], [(0, 1, 10)])}
    )
    rep = run_dynamic(st, trace, TEMPERATURE_AWARE)
    lines = rep.series_csv().splitlines()
    assert lines[0] == "t_hours,max_out_c,min_out_c,max_active_c,min_active_c,power_kw"
    assert len(lines) == 3
    assert rep.power[0] > 0 and rep.power[1] == 0
