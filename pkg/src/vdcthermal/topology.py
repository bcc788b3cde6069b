"""Physical data center: racks, servers, a three-tier VL2-style switch fabric and links.

Node ids are integers laid out as ``servers | ToRs | aggregation | core``, so
comparing ids compares node sequences deterministically.  Link residuals live in
a numpy array because the path-search kernels read them directly.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .config import ConfigError, PowerModel, ThermoConstants, TopologyConfig

SERVER, TOR, AGG, CORE = "server", "tor", "agg", "core"
ELECTRONIC, OPTICAL = "electronic", "optical"

_PREFIX = {SERVER: "s", TOR: "tor", AGG: "agg", CORE: "core"}


@njit(cache=True)
def _shift_residuals(res, cap, links, delta):
    # validate the whole path first so a failure leaves residuals untouched;
    # a bad link at position i is reported as [-1 - i]
    for i in range(links.shape[0]):
        r = res[links[i]] + delta
        if r < 0 or r > cap[links[i]]:
            out = np.empty(1, dtype=np.int64)
            out[0] = -1 - i
            return out
    flipped = np.empty(links.shape[0], dtype=np.int64)
    k = 0
    for i in range(links.shape[0]):
        l = links[i]
        before = res[l] == cap[l]
        res[l] += delta
        if before != (res[l] == cap[l]):
            flipped[k] = l
            k += 1
    return flipped[:k]


class StateError(RuntimeError):
    """A reservation or release that would break resource accounting."""


@dataclass(slots=True)
class ServerState:
    id: int
    rack_id: int
    cpu_capacity: int
    mem_capacity: int
    disk_capacity: int
    residual_cpu: int
    residual_mem: int
    residual_disk: int
    vm_count: int = 0

    @property
    def active(self) -> bool:
        return self.vm_count > 0

    @property
    def allocated_cpu(self) -> int:
        return self.cpu_capacity - self.residual_cpu


@dataclass(slots=True)
class SwitchState:
    id: int
    tier: str
    rack_id: int | None
    electronic_degree: int = 0
    optical_degree: int = 0
    used_electronic_ports: int = 0
    used_optical_ports: int = 0

    @property
    def active(self) -> bool:
        return self.used_electronic_ports + self.used_optical_ports > 0


@dataclass(frozen=True)
class PhysicalLink:
    """Read-only view of one undirected link."""

    id: int
    a: int
    b: int
    capacity: int
    residual: int
    medium: str

    @property
    def used(self) -> bool:
        return self.residual < self.capacity

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass
class Rack:
    id: int
    server_ids: list[int]
    tor_switch_id: int
    inlet_temperature: float


@dataclass
class DataCenterState:
    """Topology plus every piece of mutable resource state.

    Mutate only through ``host_vm``/``unhost_vm`` and the ``reserve_*``/``release_*`` methods;
    they keep flags and port counters consistent and invalidate the cached rack
    powers used by the thermal module.
    """

    racks: list[Rack]
    servers: list[ServerState]
    switches: dict[int, SwitchState]
    link_a: np.ndarray
    link_b: np.ndarray
    link_capacity: np.ndarray
    link_residual: np.ndarray
    link_medium: list[str]
    power: PowerModel = field(default_factory=PowerModel)
    thermo: ThermoConstants = field(default_factory=ThermoConstants)
    config: TopologyConfig | None = None

    def __post_init__(self) -> None:
        self.n_servers = len(self.servers)
        self.n_nodes = self.n_servers + len(self.switches)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for l in range(len(self.link_medium)):
            a, b = int(self.link_a[l]), int(self.link_b[l])
            adj[a].append((b, l))
            adj[b].append((a, l))
        for lst in adj:
            lst.sort()
        self.adj = adj
        # CSR copy of the adjacency for the compiled kernels
        self.csr_indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        self.csr_indptr[1:] = np.cumsum([len(x) for x in adj])
        self.csr_nbr = np.array([m for lst in adj for m, _ in lst], dtype=np.int64)
        self.csr_link = np.array([l for lst in adj for _, l in lst], dtype=np.int64)
        self.is_server = np.zeros(self.n_nodes, dtype=np.bool_)
        self.is_server[: self.n_servers] = True
        self.server_link = [adj[s][0][1] for s in range(self.n_servers)]
        # integer scale so that link utilisation costs are exact
        caps = {int(c) for c in self.link_capacity}
        self.cost_scale = reduce(math.lcm, caps, 1)
        # per-rack power / outlet caches; racks in dirty_racks must be recomputed
        self.rack_power_cache: list[float | None] = [None] * len(self.racks)
        self.outlet_cache: list[float] = [r.inlet_temperature for r in self.racks]
        self.dirty_racks: set[int] = set(range(len(self.racks)))
        self.embeddings: dict = {}
        self.rack_vms = [0] * len(self.racks)
        # (allocated cpu, server id), kept sorted for least-load lookups
        self.load_index = sorted((s.cpu_capacity - s.residual_cpu, s.id) for s in self.servers)

    # ------------------------------------------------------------------ lookup

    @property
    def n_links(self) -> int:
        return len(self.link_medium)

    def node_kind(self, n: int) -> str:
        if n < self.n_servers:
            return SERVER
        return self.switches[n].tier

    def node_name(self, n: int) -> str:
        kind = self.node_kind(n)
        if kind == SERVER:
            return f"s{n}"
        first = min(k for k, sw in self.switches.items() if sw.tier == kind)
        return f"{_PREFIX[kind]}{n - first}"

    def node_rack(self, n: int) -> int | None:
        if n < self.n_servers:
            return self.servers[n].rack_id
        return self.switches[n].rack_id

    def link(self, l: int) -> PhysicalLink:
        return PhysicalLink(
            l,
            int(self.link_a[l]),
            int(self.link_b[l]),
            int(self.link_capacity[l]),
            int(self.link_residual[l]),
            self.link_medium[l],
        )

    def links(self) -> Iterator[PhysicalLink]:
        for l in range(self.n_links):
            yield self.link(l)

    def link_between(self, m: int, n: int) -> int:
        for nbr, l in self.adj[m]:
            if nbr == n:
                return l
        raise KeyError(f"no link between {m} and {n}")

    def link_used(self, l: int) -> bool:
        return self.link_residual[l] < self.link_capacity[l]

    def tor_of(self, server: int) -> int:
        return self.racks[self.servers[server].rack_id].tor_switch_id

    @property
    def inlet_temperatures(self) -> list[float]:
        return [r.inlet_temperature for r in self.racks]

    # -------------------------------------------------------------- mutation

    def host_vm(self, server: int, cpu: int, mem: int, disk: int) -> None:
        s = self.servers[server]
        if cpu < 0 or mem < 0 or disk < 0:
            raise StateError("negative demand")
        if cpu > s.residual_cpu or mem > s.residual_mem or disk > s.residual_disk:
            raise StateError(
                f"server {server}: demand ({cpu}, {mem}, {disk}) exceeds residual "
                f"({s.residual_cpu}, {s.residual_mem}, {s.residual_disk})"
            )
        self._reindex(s, -cpu)
        s.residual_cpu -= cpu
        s.residual_mem -= mem
        s.residual_disk -= disk
        s.vm_count += 1
        self.rack_vms[s.rack_id] += 1
        self._touch(s.rack_id)

    def unhost_vm(self, server: int, cpu: int, mem: int, disk: int) -> None:
        s = self.servers[server]
        if s.vm_count == 0:
            raise StateError(f"server {server} hosts no VM")
        if (
            s.residual_cpu + cpu > s.cpu_capacity
            or s.residual_mem + mem > s.mem_capacity
            or s.residual_disk + disk > s.disk_capacity
        ):
            raise StateError(f"server {server}: release exceeds allocation")
        if s.vm_count == 1 and (
            s.residual_cpu + cpu != s.cpu_capacity
            or s.residual_mem + mem != s.mem_capacity
            or s.residual_disk + disk != s.disk_capacity
        ):
            raise StateError(f"server {server}: last VM release does not match allocation")
        self._reindex(s, cpu)
        s.residual_cpu += cpu
        s.residual_mem += mem
        s.residual_disk += disk
        s.vm_count -= 1
        self.rack_vms[s.rack_id] -= 1
        self._touch(s.rack_id)

    def _touch(self, rack_id: int) -> None:
        self.rack_power_cache[rack_id] = None
        self.dirty_racks.add(rack_id)

    def _reindex(self, s: ServerState, residual_delta: int) -> None:
        if residual_delta == 0:
            return
        old = (s.cpu_capacity - s.residual_cpu, s.id)
        idx = self.load_index
        del idx[bisect.bisect_left(idx, old)]
        bisect.insort(idx, (old[0] - residual_delta, s.id))

    def _port_delta(self, l: int, delta: int) -> None:
        optical = self.link_medium[l] == OPTICAL
        for n in (int(self.link_a[l]), int(self.link_b[l])):
            sw = self.switches.get(n)
            if sw is None:
                continue
            if optical:
                sw.used_optical_ports += delta
            else:
                sw.used_electronic_ports += delta
            if sw.rack_id is not None:
                self._touch(sw.rack_id)

    def reserve_link(self, l: int, amount: int) -> None:
        if amount <= 0:
            raise StateError("bandwidth reservation must be positive")
        res = int(self.link_residual[l])
        if amount > res:
            raise StateError(f"link {l}: {amount} Mb/s exceeds residual {res}")
        was_unused = res == self.link_capacity[l]
        self.link_residual[l] = res - amount
        if was_unused:
            self._port_delta(l, +1)

    def release_link(self, l: int, amount: int) -> None:
        if amount <= 0:
            raise StateError("bandwidth release must be positive")
        res = int(self.link_residual[l])
        cap = int(self.link_capacity[l])
        if res + amount > cap:
            raise StateError(f"link {l}: release of {amount} exceeds reserved {cap - res}")
        self.link_residual[l] = res + amount
        if res + amount == cap:
            self._port_delta(l, -1)

    def reserve_path(self, links, amount: int) -> None:
        """Reserve ``amount`` on every link of a path, all or nothing."""
        if amount <= 0:
            raise StateError("bandwidth reservation must be positive")
        self._shift_path(links, -amount)

    def release_path(self, links, amount: int) -> None:
        if amount <= 0:
            raise StateError("bandwidth release must be positive")
        self._shift_path(links, amount)

    def _shift_path(self, links, delta: int) -> None:
        arr = np.asarray(links, dtype=np.int64)
        flipped = _shift_residuals(self.link_residual, self.link_capacity, arr, delta)
        if len(flipped) and flipped[0] < 0:
            l = int(arr[-1 - flipped[0]])
            if delta < 0:
                raise StateError(f"link {l}: {-delta} Mb/s exceeds residual {int(self.link_residual[l])}")
            raise StateError(
                f"link {l}: release of {delta} exceeds reserved {int(self.link_capacity[l] - self.link_residual[l])}"
            )
        # links that changed between used and unused
        port = 1 if delta < 0 else -1
        for l in flipped.tolist():
            self._port_delta(l, port)

    # ---------------------------------------------------------- inspection

    def snapshot(self) -> tuple:
        """Hashable copy of all mutable state, for exact before/after comparison."""
        return (
            tuple(
                (s.residual_cpu, s.residual_mem, s.residual_disk, s.vm_count) for s in self.servers
            ),
            tuple(
                (k, sw.used_electronic_ports, sw.used_optical_ports)
                for k, sw in sorted(self.switches.items())
            ),
            tuple(int(x) for x in self.link_residual),
            tuple(sorted(self.embeddings)),
        )

    def check_consistency(self) -> None:
        """Recompute every derived flag from scratch and compare; raise on mismatch."""
        for s in self.servers:
            for res, cap in (
                (s.residual_cpu, s.cpu_capacity),
                (s.residual_mem, s.mem_capacity),
                (s.residual_disk, s.disk_capacity),
            ):
                if not 0 <= res <= cap:
                    raise StateError(f"server {s.id}: residual {res} outside [0, {cap}]")
            if s.vm_count == 0 and (s.residual_cpu, s.residual_mem, s.residual_disk) != (
                s.cpu_capacity,
                s.mem_capacity,
                s.disk_capacity,
            ):
                raise StateError(f"server {s.id}: idle but resources allocated")
        e_ports = {k: 0 for k in self.switches}
        o_ports = {k: 0 for k in self.switches}
        for l in range(self.n_links):
            res, cap = int(self.link_residual[l]), int(self.link_capacity[l])
            if not 0 <= res <= cap:
                raise StateError(f"link {l}: residual {res} outside [0, {cap}]")
            if res < cap:
                for n in (int(self.link_a[l]), int(self.link_b[l])):
                    if n in self.switches:
                        if self.link_medium[l] == OPTICAL:
                            o_ports[n] += 1
                        else:
                            e_ports[n] += 1
        for k, sw in self.switches.items():
            if (sw.used_electronic_ports, sw.used_optical_ports) != (e_ports[k], o_ports[k]):
                raise StateError(
                    f"switch {k}: port counters ({sw.used_electronic_ports}, {sw.used_optical_ports})"
                    f" != recomputed ({e_ports[k]}, {o_ports[k]})"
                )
            if sw.used_electronic_ports > sw.electronic_degree or sw.used_optical_ports > sw.optical_degree:
                raise StateError(f"switch {k}: more used ports than physical ports")
        for rack in self.racks:
            n_vms = sum(self.servers[i].vm_count for i in rack.server_ids)
            if self.rack_vms[rack.id] != n_vms:
                raise StateError(f"rack {rack.id}: VM counter {self.rack_vms[rack.id]} != {n_vms}")
        if self.load_index != sorted((s.cpu_capacity - s.residual_cpu, s.id) for s in self.servers):
            raise StateError("least-load index out of date")

    def is_pristine(self) -> bool:
        return (
            all(s.vm_count == 0 for s in self.servers)
            and bool(np.all(self.link_residual == self.link_capacity))
            and not self.embeddings
        )


def build_vl2(
    cfg: TopologyConfig,
    power: PowerModel | None = None,
    thermo: ThermoConstants | None = None,
    rng: random.Random | None = None,
    inlets: Sequence[float] | None = None,
) -> DataCenterState:
    """Build a three-tier tree.

    Each ToR gets uplinks to two aggregation switches assigned round-robin
    (one if there is a single aggregation switch) and aggregation-core is a
    complete bipartite graph.  Inlet temperatures are drawn once, from ``rng``
    if given, else from ``cfg.seed``; explicit ``inlets`` (one per rack) skip the draw.
    """
    cfg.validate()
    if inlets is not None and len(inlets) != cfg.racks:
        raise ConfigError(f"need {cfg.racks} inlet temperatures, got {len(inlets)}")
    if rng is None:
        rng = random.Random(cfg.seed)
    n_srv = cfg.racks * cfg.servers_per_rack
    tor0 = n_srv
    agg0 = tor0 + cfg.racks
    core0 = agg0 + cfg.n_agg

    servers = [
        ServerState(
            id=i,
            rack_id=i // cfg.servers_per_rack,
            cpu_capacity=cfg.cpu_capacity,
            mem_capacity=cfg.mem_capacity,
            disk_capacity=cfg.disk_capacity,
            residual_cpu=cfg.cpu_capacity,
            residual_mem=cfg.mem_capacity,
            residual_disk=cfg.disk_capacity,
        )
        for i in range(n_srv)
    ]
    switches: dict[int, SwitchState] = {}
    racks = []
    for k in range(cfg.racks):
        switches[tor0 + k] = SwitchState(id=tor0 + k, tier=TOR, rack_id=k)
        inlet = float(inlets[k]) if inlets is not None else rng.uniform(cfg.inlet_min_c, cfg.inlet_max_c)
        sids = list(range(k * cfg.servers_per_rack, (k + 1) * cfg.servers_per_rack))
        racks.append(Rack(id=k, server_ids=sids, tor_switch_id=tor0 + k, inlet_temperature=inlet))
    for j in range(cfg.n_agg):
        switches[agg0 + j] = SwitchState(id=agg0 + j, tier=AGG, rack_id=None)
    for j in range(cfg.n_core):
        switches[core0 + j] = SwitchState(id=core0 + j, tier=CORE, rack_id=None)

    ends: list[tuple[int, int, int, str]] = []
    for s in servers:
        ends.append((s.id, tor0 + s.rack_id, cfg.access_rate_mbps, ELECTRONIC))
    uplinks = min(2, cfg.n_agg)
    for k in range(cfg.racks):
        for j in range(uplinks):
            ends.append((tor0 + k, agg0 + (uplinks * k + j) % cfg.n_agg, cfg.trunk_rate_mbps, OPTICAL))
    for a in range(cfg.n_agg):
        for c in range(cfg.n_core):
            ends.append((agg0 + a, core0 + c, cfg.trunk_rate_mbps, OPTICAL))

    for a, b, _, medium in ends:
        for n in (a, b):
            if n in switches:
                if medium == OPTICAL:
                    switches[n].optical_degree += 1
                else:
                    switches[n].electronic_degree += 1

    state = DataCenterState(
        racks=racks,
        servers=servers,
        switches=switches,
        link_a=np.array([e[0] for e in ends], dtype=np.int64),
        link_b=np.array([e[1] for e in ends], dtype=np.int64),
        link_capacity=np.array([e[2] for e in ends], dtype=np.int64),
        link_residual=np.array([e[2] for e in ends], dtype=np.int64),
        link_medium=[e[3] for e in ends],
        power=power or PowerModel(),
        thermo=thermo or ThermoConstants(),
        config=cfg,
    )
    if not is_connected(state):
        raise StateError("generated topology is not connected")
    return state


def is_connected(state: DataCenterState) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v, _ in state.adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == state.n_nodes


def topology_csv(state: DataCenterState) -> tuple[str, str]:
    """Return (nodes_csv, links_csv) text for ``dump-topology``."""
    node_rows = ["node_id,name,kind,rack_id,inlet_c"]
    for n in range(state.n_nodes):
        rack = state.node_rack(n)
        inlet = f"{state.racks[rack].inlet_temperature:.6f}" if rack is not None else ""
        node_rows.append(
            f"{n},{state.node_name(n)},{state.node_kind(n)},{'' if rack is None else rack},{inlet}"
        )
    link_rows = ["link_id,a,b,capacity_mbps,medium"]
    for link in state.links():
        link_rows.append(f"{link.id},{link.a},{link.b},{link.capacity},{link.medium}")
    return "\n".join(node_rows) + "\n", "\n".join(link_rows) + "\n"
