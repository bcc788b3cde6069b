"""VDC embedding: the temperature-aware heuristic and the load-balanced baseline.

Both algorithms share the same transactional skeleton: map VMs (largest CPU
demand first), then route virtual links (largest bandwidth first), and on any
failure undo every reservation made for the VDC.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .paths import min_cost_route, widest_route
from .thermal import rack_outlets
from .topology import DataCenterState, StateError
from .workload import VdcRequest, VirtualLink

TEMPERATURE_AWARE = "temperature_aware"
LOAD_BALANCED = "load_balanced"


@dataclass
class Embedding:
    vdc_id: int
    vm_placement: dict[int, int]
    # vlink (s, d) -> node path from host(s) to host(d), and its link ids
    # (link ids may be a list or an int64 array)
    link_paths: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    link_ids: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    bandwidth: dict[tuple[int, int], int] = field(default_factory=dict)
    vdc: VdcRequest | None = None

    def to_dict(self) -> dict:
        return {
            "vdc_id": self.vdc_id,
            "vm_placement": {str(v): n for v, n in sorted(self.vm_placement.items())},
            "links": [
                {"s": s, "d": d, "path": self.link_paths[(s, d)], "mbps": self.bandwidth[(s, d)]}
                for (s, d) in sorted(self.link_paths)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict, state: DataCenterState | None = None) -> "Embedding":
        emb = cls(vdc_id=int(d["vdc_id"]), vm_placement={int(k): int(v) for k, v in d["vm_placement"].items()})
        for row in d["links"]:
            key = (int(row["s"]), int(row["d"]))
            path = [int(x) for x in row["path"]]
            emb.link_paths[key] = path
            emb.bandwidth[key] = int(row["mbps"])
            if state is not None:
                emb.link_ids[key] = [state.link_between(a, b) for a, b in zip(path, path[1:])]
        return emb


class _Journal:
    """LIFO record of reservations so a failed VDC can be undone exactly."""

    def __init__(self, state: DataCenterState) -> None:
        self.state = state
        self.ops: list[tuple] = []

    def host(self, server: int, cpu: int, mem: int, disk: int) -> None:
        self.state.host_vm(server, cpu, mem, disk)
        self.ops.append(("vm", server, cpu, mem, disk))

    def reserve(self, links: list[int], amount: int) -> None:
        self.state.reserve_path(links, amount)
        self.ops.append(("bw", links, amount))

    def rollback(self) -> None:
        while self.ops:
            op = self.ops.pop()
            if op[0] == "vm":
                self.state.unhost_vm(*op[1:])
            else:
                self.state.release_path(*op[1:])


def _vm_order(vdc: VdcRequest) -> list:
    return sorted(vdc.vms, key=lambda v: (-v.cpu, v.vm_id))


def _vlink_order(vdc: VdcRequest) -> list[VirtualLink]:
    return sorted(vdc.vlinks, key=lambda vl: (-vl.bandwidth, vl.s, vl.d))


def _fits(state: DataCenterState, sid: int, vm, need_bw: int) -> bool:
    s = state.servers[sid]
    return (
        s.residual_cpu >= vm.cpu
        and s.residual_mem >= vm.mem
        and s.residual_disk >= vm.disk
        and state.link_residual[state.server_link[sid]] >= need_bw
    )


def _pick_coldest(state: DataCenterState, vm, need_bw: int, taken: set[int]) -> int | None:
    outlets = rack_outlets(state)
    srv = state.servers
    for k in sorted(range(len(outlets)), key=outlets.__getitem__):
        # sorted() is stable, so equal outlets keep rack id order
        best = None
        for sid in state.racks[k].server_ids:
            s = srv[sid]
            if best is not None and s.residual_cpu >= best_res:
                continue
            if sid not in taken and _fits(state, sid, vm, need_bw):
                best, best_res = sid, s.residual_cpu
        if best is not None:
            return best
    return None


def _pick_least_loaded(state: DataCenterState, vm, need_bw: int, taken: set[int]) -> int | None:
    # load_index is sorted by (allocated cpu, id): the first eligible entry wins
    for _, sid in state.load_index:
        if sid not in taken and _fits(state, sid, vm, need_bw):
            return sid
    return None


_PICKERS: dict[str, Callable] = {
    TEMPERATURE_AWARE: _pick_coldest,
    LOAD_BALANCED: _pick_least_loaded,
}
_ROUTERS: dict[str, Callable] = {
    TEMPERATURE_AWARE: min_cost_route,
    LOAD_BALANCED: widest_route,
}


def _map_vms(state: DataCenterState, vdc: VdcRequest, journal: _Journal, algorithm: str) -> dict[int, int] | None:
    pick = _PICKERS[algorithm]
    need = vdc.incident_bandwidth()
    placement: dict[int, int] = {}
    taken: set[int] = set()
    for vm in _vm_order(vdc):
        sid = pick(state, vm, need[vm.vm_id], taken)
        if sid is None:
            return None
        journal.host(sid, vm.cpu, vm.mem, vm.disk)
        placement[vm.vm_id] = sid
        taken.add(sid)
    return placement


def map_vms(state: DataCenterState, vdc: VdcRequest, algorithm: str = TEMPERATURE_AWARE) -> dict[int, int] | None:
    """Place the VMs of ``vdc`` and keep them hosted; on failure nothing stays reserved.

    Temperature-aware: coldest rack with an eligible server, then the server with
    the least remaining CPU inside it.  Eligible means enough CPU, memory, disk
    and access-link bandwidth for all of the VM's virtual links, and no other VM
    of the same VDC on it.
    """
    journal = _Journal(state)
    placement = _map_vms(state, vdc, journal, algorithm)
    if placement is None:
        journal.rollback()
    return placement


def _embed(state: DataCenterState, vdc: VdcRequest, algorithm: str) -> Embedding | None:
    if vdc.vdc_id in state.embeddings:
        raise StateError(f"VDC {vdc.vdc_id} is already embedded")
    journal = _Journal(state)
    try:
        emb = _embed_steps(state, vdc, algorithm, journal)
    except BaseException:
        # an error mid-way must not leave partial reservations behind
        journal.rollback()
        raise
    if emb is None:
        journal.rollback()
        return None
    state.embeddings[vdc.vdc_id] = emb
    return emb


def _embed_steps(state: DataCenterState, vdc: VdcRequest, algorithm: str, journal: _Journal) -> Embedding | None:
    placement = _map_vms(state, vdc, journal, algorithm)
    if placement is None:
        return None
    route = _ROUTERS[algorithm]
    emb = Embedding(vdc_id=vdc.vdc_id, vm_placement=placement, vdc=vdc)
    for vl in _vlink_order(vdc):
        found = route(state, placement[vl.s], placement[vl.d], vl.bandwidth)
        if found is None:
            return None
        nodes, links = found
        journal.reserve(links, vl.bandwidth)
        emb.link_paths[vl.key] = nodes.tolist()
        emb.link_ids[vl.key] = links
        emb.bandwidth[vl.key] = vl.bandwidth
    return emb


def embed_temperature_aware(state: DataCenterState, vdc: VdcRequest) -> Embedding | None:
    return _embed(state, vdc, TEMPERATURE_AWARE)


def embed_load_balanced(state: DataCenterState, vdc: VdcRequest) -> Embedding | None:
    return _embed(state, vdc, LOAD_BALANCED)


EMBEDDERS: dict[str, Callable[[DataCenterState, VdcRequest], Embedding | None]] = {
    TEMPERATURE_AWARE: embed_temperature_aware,
    LOAD_BALANCED: embed_load_balanced,
}


def release_vdc(state: DataCenterState, embedding: Embedding) -> None:
    """Return every resource held by ``embedding``; idle equipment switches off."""
    current = state.embeddings.get(embedding.vdc_id)
    if current is not embedding:
        raise StateError(f"VDC {embedding.vdc_id} is not embedded in this state")
    vdc = embedding.vdc
    for key in reversed(list(embedding.link_ids)):
        state.release_path(embedding.link_ids[key], embedding.bandwidth[key])
    demand = {v.vm_id: v for v in vdc.vms}
    for vm_id, sid in reversed(list(embedding.vm_placement.items())):
        v = demand[vm_id]
        state.unhost_vm(sid, v.cpu, v.mem, v.disk)
    del state.embeddings[embedding.vdc_id]


def validate_embedding(state: DataCenterState, emb: Embedding, vdc: VdcRequest | None = None) -> list[str]:
    """Structural checks of one embedding against the topology; returns problems found."""
    vdc = vdc or emb.vdc
    problems = []
    vm_ids = {v.vm_id for v in vdc.vms}
    if set(emb.vm_placement) != vm_ids:
        problems.append("not every VM placed exactly once")
    hosts = list(emb.vm_placement.values())
    if len(set(hosts)) != len(hosts):
        problems.append("two VMs of one VDC share a server")
    for sid in hosts:
        if not 0 <= sid < state.n_servers:
            problems.append(f"VM placed on non-server node {sid}")
    for vl in vdc.vlinks:
        path = emb.link_paths.get(vl.key)
        if path is None:
            problems.append(f"vlink {vl.key} unrouted")
            continue
        if path[0] != emb.vm_placement.get(vl.s) or path[-1] != emb.vm_placement.get(vl.d):
            problems.append(f"vlink {vl.key}: path endpoints differ from hosts")
        if len(set(path)) != len(path):
            problems.append(f"vlink {vl.key}: path revisits a node")
        for a, b in zip(path, path[1:]):
            try:
                state.link_between(a, b)
            except KeyError:
                problems.append(f"vlink {vl.key}: {a}-{b} not adjacent")
        if emb.bandwidth.get(vl.key) != vl.bandwidth:
            problems.append(f"vlink {vl.key}: reserved bandwidth differs from demand")
    return problems
