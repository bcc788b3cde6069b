
import pytest

from vdcthermal.config import PowerModel, ThermoConstants
from vdcthermal.thermal import (
    outlet_temperature,
    rack_outlet_temperature,
    rack_outlets,
    server_power,
    switch_power,
    thermal_report,
    total_it_power,
)
from vdcthermal.topology import OPTICAL, TOR, ServerState, StateError, SwitchState

from conftest import make_state

PM = PowerModel()
TC = ThermoConstants()
RHO_F_CP = 0.2934861


def _srv(alloc, active=True):
    return ServerState(0, 0, 100, 1000, 10000, 100 - alloc, 1000, 10000, vm_count=int(active))


def test_rho_f_cp():
    assert TC.rho_f_cp == RHO_F_CP


def test_server_power_values():
    assert server_power(_srv(0, active=False), PM) == 0.0
    assert server_power(_srv(0), PM) == pytest.approx(0.2)
    assert server_power(_srv(100), PM) == pytest.approx(0.5)
    assert server_power(_srv(50), PM) == pytest.approx(0.35, rel=1e-12)


def test_server_power_overallocated():
    bad = ServerState(0, 0, 100, 1000, 10000, -5, 1000, 10000, vm_count=1)
    with pytest.raises(StateError):
        server_power(bad, PM)


def test_switch_power_values():
    assert switch_power(SwitchState(0, TOR, 0), PM) == 0.0
    idle = SwitchState(0, TOR, 0, used_electronic_ports=1)
    assert switch_power(idle, PM) == pytest.approx(0.05)
    sw = SwitchState(0, TOR, 0, used_electronic_ports=3, used_optical_ports=2)
    assert switch_power(sw, PM) == pytest.approx(0.23, rel=1e-12)


def test_outlet_formula():
    assert outlet_temperature(15, 0.0, TC) == 15
    assert outlet_temperature(20, TC.rho_f_cp, TC) == pytest.approx(21.0)
    assert outlet_temperature(21, 2.34789, TC) == pytest.approx(29.0, abs=1e-4)
    # one kW raises the outlet by 1 / rho f c_p
    assert outlet_temperature(0, 1.0, TC) == pytest.approx(1 / RHO_F_CP, rel=1e-12)


def test_empty_dc_report():
    s = make_state(2, 2, inlets=[15, 20])
    rep = thermal_report(s)
    assert rep.total_it_power == 0
    assert rep.max_outlet == 20
    assert rep.active_spread() == 0.0


def test_single_idle_server_raises_only_its_rack():
    s = make_state(2, 2, inlets=[15, 17])
    s.host_vm(2, 0, 0, 0)
    out = rack_outlets(s)
    assert out[0] == 15
    assert out[1] - 17 == pytest.approx(0.2 / RHO_F_CP, rel=1e-6)


def test_central_switches_outside_racks():
    s = make_state(2, 2, inlets=[15, 15])
    trunk = next(
        l
        for l in range(s.n_links)
        if s.link_medium[l] == OPTICAL and all(s.node_kind(n) != TOR for n in s.link(l).endpoints)
    )
    s.reserve_link(trunk, 10)
    rep = thermal_report(s)
    # agg and core each run 1 optical port
    assert rep.total_it_power == pytest.approx(2 * (0.04 + 0.08))
    assert [r.t_out_c for r in rep.racks] == [15, 15]
    assert not any(r.active for r in rep.racks)


def test_cache_matches_fresh_computation():
    s = make_state(3, 3, inlets=[15, 16, 17])
    s.host_vm(0, 40, 0, 0)
    s.reserve_link(s.server_link[0], 100)
    cached = list(rack_outlets(s))
    fresh = [rack_outlet_temperature(r, s, PowerModel(), ThermoConstants()) for r in s.racks]
    assert cached == pytest.approx(fresh, rel=1e-12)
    assert total_it_power(s) == pytest.approx(0.32 + 0.05)


def test_report_csv():
    s = make_state(2, 2, inlets=[15, 20])
    lines = thermal_report(s).to_csv().splitlines()
    assert lines[0] == "rack_id,power_kw,t_in_c,t_out_c,active"
    assert lines[-1].startswith("summary,")
    assert len(lines) == 4
