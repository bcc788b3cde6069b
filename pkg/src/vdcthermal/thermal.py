"""Equipment power, rack outlet temperatures and DC-wide thermal summaries.

Servers and the ToR belong to their rack; aggregation and core switches sit in
the central area and only add to total IT power.  Inactive equipment draws 0 kW.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import PowerModel, ThermoConstants
from .topology import DataCenterState, Rack, ServerState, StateError, SwitchState


def server_power(server: ServerState, model: PowerModel) -> float:
    if not server.active:
        return 0.0
    alloc = server.cpu_capacity - server.residual_cpu
    if alloc > server.cpu_capacity or alloc < 0:
        raise StateError(f"server {server.id}: allocated CPU {alloc} outside capacity")
    return model.p_server_idle + (model.p_server_max - model.p_server_idle) * (alloc / server.cpu_capacity)


def switch_power(switch: SwitchState, model: PowerModel) -> float:
    if not switch.active:
        return 0.0
    return (
        model.p_switch_idle
        + switch.used_electronic_ports * model.p_e_port
        + switch.used_optical_ports * model.p_o_port
    )


def rack_power(rack: Rack, state: DataCenterState, model: PowerModel | None = None) -> float:
    """Sum of the rack's server and ToR power, kW.  Cached per rack for the state's own model."""
    if model is None or model is state.power:
        cached = state.rack_power_cache[rack.id]
        if cached is not None:
            return cached
        model = state.power
        use_cache = True
    else:
        use_cache = False
    total = 0.0
    for sid in rack.server_ids:
        total += server_power(state.servers[sid], model)
    total += switch_power(state.switches[rack.tor_switch_id], model)
    if use_cache:
        state.rack_power_cache[rack.id] = total
    return total


def outlet_temperature(t_in: float, power_kw: float, thermo: ThermoConstants) -> float:
    return t_in + power_kw / thermo.rho_f_cp


def rack_outlet_temperature(
    rack: Rack,
    state: DataCenterState,
    model: PowerModel | None = None,
    thermo: ThermoConstants | None = None,
) -> float:
    return outlet_temperature(rack.inlet_temperature, rack_power(rack, state, model), thermo or state.thermo)


def rack_outlets(state: DataCenterState) -> list[float]:
    """Current outlet temperature of every rack with the state's own constants.

    Returns the state's internal cache; callers must not modify it.
    """
    out = state.outlet_cache
    if state.dirty_racks:
        k = state.thermo.rho_f_cp
        for i in state.dirty_racks:
            r = state.racks[i]
            out[i] = r.inlet_temperature + rack_power(r, state) / k
        state.dirty_racks.clear()
    return out


def rack_is_active(rack: Rack, state: DataCenterState) -> bool:
    return state.rack_vms[rack.id] > 0 or state.switches[rack.tor_switch_id].active


@dataclass(frozen=True)
class RackThermal:
    rack_id: int
    power_kw: float
    t_in_c: float
    t_out_c: float
    active: bool


@dataclass(frozen=True)
class ThermalReport:
    racks: tuple[RackThermal, ...]
    max_outlet: float
    total_it_power: float

    @property
    def min_outlet(self) -> float:
        return min(r.t_out_c for r in self.racks)

    def active_spread(self) -> float:
        """max - min outlet over racks with any powered equipment (0 if none)."""
        temps = [r.t_out_c for r in self.racks if r.active]
        return max(temps) - min(temps) if temps else 0.0

    def to_csv(self) -> str:
        rows = ["rack_id,power_kw,t_in_c,t_out_c,active"]
        for r in self.racks:
            rows.append(f"{r.rack_id},{r.power_kw!r},{r.t_in_c!r},{r.t_out_c!r},{int(r.active)}")
        rows.append(f"summary,{self.total_it_power!r},,{self.max_outlet!r},")
        return "\n".join(rows) + "\n"


def total_it_power(state: DataCenterState, model: PowerModel | None = None) -> float:
    model = model or state.power
    total = sum(server_power(s, model) for s in state.servers)
    total += sum(switch_power(sw, model) for sw in state.switches.values())
    return total


def thermal_report(
    state: DataCenterState,
    model: PowerModel | None = None,
    thermo: ThermoConstants | None = None,
) -> ThermalReport:
    model = model or state.power
    thermo = thermo or state.thermo
    racks = []
    for rack in state.racks:
        p = rack_power(rack, state, model)
        racks.append(
            RackThermal(
                rack_id=rack.id,
                power_kw=p,
                t_in_c=rack.inlet_temperature,
                t_out_c=outlet_temperature(rack.inlet_temperature, p, thermo),
                active=rack_is_active(rack, state),
            )
        )
    return ThermalReport(
        racks=tuple(racks),
        max_outlet=max(r.t_out_c for r in racks),
        total_it_power=total_it_power(state, model),
    )
