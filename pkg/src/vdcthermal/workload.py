"""VDC request generation: static batches and Poisson arrival/departure traces."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from .config import ConfigError, WorkloadParams

ARRIVE, DEPART = "ARRIVE", "DEPART"


@dataclass(frozen=True, slots=True)
class VmDemand:
    vm_id: int
    cpu: int
    mem: int
    disk: int


@dataclass(frozen=True, slots=True)
class VirtualLink:
    s: int
    d: int
    bandwidth: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.s, self.d)


@dataclass
class VdcRequest:
    vdc_id: int
    vms: list[VmDemand]
    vlinks: list[VirtualLink]
    arrival_time: float | None = None
    holding_time: float | None = None

    def vm(self, vm_id: int) -> VmDemand:
        return self.vms[self._index()[vm_id]]

    def _index(self) -> dict[int, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {v.vm_id: i for i, v in enumerate(self.vms)}
            self.__dict__["_idx"] = idx
        return idx

    def incident_bandwidth(self) -> dict[int, int]:
        """Sum of incident virtual-link bandwidth per VM."""
        out = {v.vm_id: 0 for v in self.vms}
        for vl in self.vlinks:
            out[vl.s] += vl.bandwidth
            out[vl.d] += vl.bandwidth
        return out

    def is_connected(self) -> bool:
        if not self.vms:
            return True
        nbrs: dict[int, list[int]] = {v.vm_id: [] for v in self.vms}
        for vl in self.vlinks:
            nbrs[vl.s].append(vl.d)
            nbrs[vl.d].append(vl.s)
        start = self.vms[0].vm_id
        seen = {start}
        frontier = [start]
        while frontier:
            u = frontier.pop()
            for w in nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        return len(seen) == len(self.vms)

    def validate(self) -> None:
        ids = [v.vm_id for v in self.vms]
        if len(set(ids)) != len(ids):
            raise ValueError(f"VDC {self.vdc_id}: duplicate VM ids")
        for v in self.vms:
            if v.cpu <= 0 or v.mem < 0 or v.disk < 0:
                raise ValueError(f"VDC {self.vdc_id}: bad demand on VM {v.vm_id}")
        seen = set()
        for vl in self.vlinks:
            if vl.s == vl.d:
                raise ValueError(f"VDC {self.vdc_id}: self-loop on VM {vl.s}")
            if vl.s not in ids or vl.d not in ids:
                raise ValueError(f"VDC {self.vdc_id}: link endpoint outside VDC")
            if vl.bandwidth <= 0:
                raise ValueError(f"VDC {self.vdc_id}: non-positive bandwidth")
            key = frozenset((vl.s, vl.d))
            if key in seen:
                raise ValueError(f"VDC {self.vdc_id}: duplicate link {vl.s}-{vl.d}")
            seen.add(key)
        if not self.is_connected():
            raise ValueError(f"VDC {self.vdc_id}: virtual topology not connected")

    def to_dict(self) -> dict:
        out = {
            "vdc_id": self.vdc_id,
            "vms": [[v.vm_id, v.cpu, v.mem, v.disk] for v in self.vms],
            "vlinks": [[vl.s, vl.d, vl.bandwidth] for vl in self.vlinks],
        }
        if self.arrival_time is not None:
            out["arrival_time"] = self.arrival_time
            out["holding_time"] = self.holding_time
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "VdcRequest":
        return cls(
            vdc_id=int(d["vdc_id"]),
            vms=[VmDemand(*map(int, v)) for v in d["vms"]],
            vlinks=[VirtualLink(*map(int, l)) for l in d["vlinks"]],
            arrival_time=d.get("arrival_time"),
            holding_time=d.get("holding_time"),
        )


class Event(NamedTuple):
    time: float
    kind: str
    vdc_id: int


@dataclass
class EventTrace:
    events: list[Event] = field(default_factory=list)
    requests: dict[int, VdcRequest] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)

    def validate(self) -> None:
        last = float("-inf")
        arrived: dict[int, float] = {}
        departed: set[int] = set()
        for ev in self.events:
            if ev.time < last:
                raise ValueError("trace times decrease")
            last = ev.time
            if ev.vdc_id not in self.requests:
                raise ValueError(f"event for unknown VDC {ev.vdc_id}")
            if ev.kind == ARRIVE:
                if ev.vdc_id in arrived:
                    raise ValueError(f"VDC {ev.vdc_id} arrives twice")
                arrived[ev.vdc_id] = ev.time
            elif ev.kind == DEPART:
                if ev.vdc_id not in arrived or ev.vdc_id in departed:
                    raise ValueError(f"unmatched departure of VDC {ev.vdc_id}")
                departed.add(ev.vdc_id)
            else:
                raise ValueError(f"unknown event kind {ev.kind!r}")


def generate_vdc(params: WorkloadParams, rng: random.Random, vdc_id: int = 0) -> VdcRequest:
    """One VDC with a connected random virtual topology.

    Start from a random VM; every further VM (in random order) links to
    ``randint(1, E)`` distinct VMs already placed in the graph, E being the
    current graph size.
    """
    params.validate()
    m = rng.randint(params.m_min, params.m_max)
    vms = [
        VmDemand(
            vm_id=j,
            cpu=rng.randint(params.cpu_min, params.cpu_max),
            mem=rng.randint(params.mem_min, params.mem_max),
            disk=rng.randint(params.disk_min, params.disk_max),
        )
        for j in range(m)
    ]
    order = list(range(m))
    rng.shuffle(order)
    in_graph = [order[0]]
    vlinks = []
    for vm in order[1:]:
        n_vm = rng.randint(1, len(in_graph))
        for peer in rng.sample(in_graph, n_vm):
            vlinks.append(VirtualLink(vm, peer, rng.randint(params.bw_min, params.bw_max)))
        in_graph.append(vm)
    return VdcRequest(vdc_id=vdc_id, vms=vms, vlinks=vlinks)


def generate_static_batch(n: int, params: WorkloadParams, rng: random.Random) -> list[VdcRequest]:
    if n < 0:
        raise ConfigError("batch size must be >= 0")
    return [generate_vdc(params, rng, vdc_id=i) for i in range(n)]


def generate_dynamic_trace(
    n_requests: int,
    lam: float,
    mean_holding: float,
    params: WorkloadParams,
    rng: random.Random,
) -> EventTrace:
    """Poisson arrivals at ``lam`` per hour, exponential holding times (hours)."""
    if lam <= 0 or mean_holding <= 0:
        raise ConfigError("lambda and mean_holding must be > 0")
    events: list[Event] = []
    requests: dict[int, VdcRequest] = {}
    t = 0.0
    for i in range(n_requests):
        t += rng.expovariate(lam)
        hold = rng.expovariate(1.0 / mean_holding)
        vdc = generate_vdc(params, rng, vdc_id=i)
        vdc.arrival_time = t
        vdc.holding_time = hold
        requests[i] = vdc
        events.append(Event(t, ARRIVE, i))
        events.append(Event(t + hold, DEPART, i))
    # departures first on exact time ties so freed capacity is visible
    events.sort(key=lambda e: (e.time, e.kind != DEPART, e.vdc_id))
    return EventTrace(events=events, requests=requests)


# ------------------------------------------------------------------- line JSON


def write_batch(path: str | Path, vdcs: Iterable[VdcRequest]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vdc in vdcs:
            fh.write(json.dumps(vdc.to_dict(), separators=(",", ":")) + "\n")


def read_batch(path: str | Path) -> list[VdcRequest]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(VdcRequest.from_dict(json.loads(line)))
    return out


def write_trace(path: str | Path, trace: EventTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in trace.events:
            row: dict = {"t": ev.time, "kind": ev.kind, "vdc_id": ev.vdc_id}
            if ev.kind == ARRIVE:
                row["vdc"] = trace.requests[ev.vdc_id].to_dict()
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_trace(path: str | Path) -> EventTrace:
    trace = EventTrace()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                ev = Event(float(row["t"]), row["kind"], int(row["vdc_id"]))
                if ev.kind == ARRIVE:
                    trace.requests[ev.vdc_id] = VdcRequest.from_dict(row["vdc"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed trace line") from exc
            trace.events.append(ev)
    trace.validate()
    return trace
