"""Static and dynamic scenario drivers."""

from __future__ import annotations

import math
import random
from array import array
from collections import Counter
from dataclasses import dataclass, field

from .config import RunConfig
from .embedding import EMBEDDERS, Embedding, release_vdc
from .thermal import ThermalReport, rack_outlets, switch_power, thermal_report
from .topology import TOR, DataCenterState, build_vl2
from .workload import ARRIVE, DEPART, EventTrace, VdcRequest, generate_dynamic_trace, generate_static_batch

HIST_BIN_C = 0.5


def static_replication(cfg: RunConfig, seed: int) -> tuple[DataCenterState, list[VdcRequest]]:
    """Fresh topology and VDC batch for one replication.

    One ``random.Random(seed)`` feeds the inlet temperatures first and then the
    workload, so a seed fixes both; call again for a paired run.
    """
    rng = random.Random(seed)
    state = build_vl2(cfg.topology, cfg.power, cfg.thermo, rng=rng)
    return state, generate_static_batch(cfg.n_vdcs, cfg.workload, rng)


def dynamic_replication(cfg: RunConfig, seed: int, lam: float | None = None) -> tuple[DataCenterState, EventTrace]:
    """Fresh topology and arrival trace for one replication (see ``static_replication``)."""
    rng = random.Random(seed)
    state = build_vl2(cfg.topology, cfg.power, cfg.thermo, rng=rng)
    dyn = cfg.dynamic
    trace = generate_dynamic_trace(
        dyn.n_requests, dyn.lam if lam is None else lam, dyn.mean_holding, cfg.workload, rng
    )
    return state, trace


def outlet_histogram(temps, width: float = HIST_BIN_C) -> dict[float, int]:
    """Counts per right-closed interval ``(lo, lo + width]`` keyed by ``lo``."""
    counts: Counter = Counter()
    for t in temps:
        lo = (math.ceil(t / width) - 1) * width
        counts[round(lo, 9)] += 1
    return dict(sorted(counts.items()))


@dataclass
class StaticReport:
    algorithm: str
    success: dict[int, bool]
    thermal: ThermalReport
    embeddings: list[Embedding]

    @property
    def max_outlet(self) -> float:
        return self.thermal.max_outlet

    @property
    def total_it_power(self) -> float:
        return self.thermal.total_it_power

    @property
    def n_failed(self) -> int:
        return sum(not ok for ok in self.success.values())

    @property
    def histogram(self) -> dict[float, int]:
        return outlet_histogram(r.t_out_c for r in self.thermal.racks)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_vdcs": len(self.success),
            "n_failed": self.n_failed,
            "max_outlet_c": self.max_outlet,
            "min_outlet_c": self.thermal.min_outlet,
            "active_spread_c": self.thermal.active_spread(),
            "total_it_power_kw": self.total_it_power,
            "histogram": {f"{lo:.1f}": n for lo, n in self.histogram.items()},
        }


def run_static(state: DataCenterState, vdcs: list[VdcRequest], algorithm: str) -> StaticReport:
    """Embed a batch, largest VDCs (by VM count) first, and report the final state."""
    embed = EMBEDDERS[algorithm]
    success: dict[int, bool] = {}
    embeddings = []
    for vdc in sorted(vdcs, key=lambda v: (-len(v.vms), v.vdc_id)):
        emb = embed(state, vdc)
        success[vdc.vdc_id] = emb is not None
        if emb is not None:
            embeddings.append(emb)
    return StaticReport(
        algorithm=algorithm,
        success=dict(sorted(success.items())),
        thermal=thermal_report(state),
        embeddings=embeddings,
    )


@dataclass
class DynamicReport:
    algorithm: str
    threshold: float | None
    warmup: int
    arrivals: int = 0
    commits: int = 0
    rejected_resources: int = 0
    rejected_temperature: int = 0
    # counted only after the first ``warmup`` arrivals
    measured_arrivals: int = 0
    measured_rejected_resources: int = 0
    measured_rejected_temperature: int = 0
    times: array = field(default_factory=lambda: array("d"))
    max_outlet: array = field(default_factory=lambda: array("d"))
    min_outlet: array = field(default_factory=lambda: array("d"))
    max_active: array = field(default_factory=lambda: array("d"))
    min_active: array = field(default_factory=lambda: array("d"))
    power: array = field(default_factory=lambda: array("d"))
    measure_from: int = 0  # index of the first sample after warm-up

    @property
    def rejections(self) -> int:
        return self.rejected_resources + self.rejected_temperature

    @property
    def measured_rejections(self) -> int:
        return self.measured_rejected_resources + self.measured_rejected_temperature

    @property
    def rejection_ratio(self) -> float:
        """Rejected / arrived over the measured (post warm-up) arrivals."""
        if self.measured_arrivals == 0:
            return 0.0
        return self.measured_rejections / self.measured_arrivals

    def _time_mean(self, values) -> float:
        start = self.measure_from
        t = self.times
        if len(t) - start < 2:
            return float("nan")
        acc = 0.0
        for i in range(start, len(t) - 1):
            acc += values[i] * (t[i + 1] - t[i])
        span = t[-1] - t[start]
        return acc / span if span > 0 else float("nan")

    def mean_gap(self, active_only: bool = True) -> float:
        """Time-averaged (max - min) rack outlet after warm-up."""
        hi, lo = (self.max_active, self.min_active) if active_only else (self.max_outlet, self.min_outlet)
        return self._time_mean([a - b for a, b in zip(hi, lo)])

    @property
    def mean_power(self) -> float:
        return self._time_mean(self.power)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "threshold_c": self.threshold,
            "warmup": self.warmup,
            "arrivals": self.arrivals,
            "commits": self.commits,
            "rejected_resources": self.rejected_resources,
            "rejected_temperature": self.rejected_temperature,
            "measured_arrivals": self.measured_arrivals,
            "measured_rejections": self.measured_rejections,
            "rejection_ratio": self.rejection_ratio,
            "mean_gap_active_c": self.mean_gap(True),
            "mean_gap_all_c": self.mean_gap(False),
            "mean_power_kw": self.mean_power,
        }

    def series_csv(self) -> str:
        rows = ["t_hours,max_out_c,min_out_c,max_active_c,min_active_c,power_kw"]
        for i in range(len(self.times)):
            rows.append(
                f"{self.times[i]!r},{self.max_outlet[i]!r},{self.min_outlet[i]!r},"
                f"{self.max_active[i]!r},{self.min_active[i]!r},{self.power[i]!r}"
            )
        return "\n".join(rows) + "\n"


class _Sampler:
    """Cheap per-event thermal readout built on the cached rack powers."""

    def __init__(self, state: DataCenterState) -> None:
        self.state = state
        self.k = state.thermo.rho_f_cp
        self.central = [sw for sw in state.switches.values() if sw.tier != TOR]

    def read(self) -> tuple[float, float, float, float, float]:
        st = self.state
        temps = rack_outlets(st)
        powers = st.rack_power_cache
        active = [
            t for r, t in zip(st.racks, temps) if st.rack_vms[r.id] or st.switches[r.tor_switch_id].active
        ]
        total = sum(powers) + sum(switch_power(sw, st.power) for sw in self.central)
        hi, lo = max(temps), min(temps)
        if active:
            return hi, lo, max(active), min(active), total
        return hi, lo, hi, hi, total

    def max_outlet(self) -> float:
        return max(rack_outlets(self.state))


def run_dynamic(
    state: DataCenterState,
    trace: EventTrace,
    algorithm: str,
    threshold: float | None = None,
    warmup: int = 0,
    record_series: bool = True,
) -> DynamicReport:
    """Replay ``trace`` with online admission control.

    An arriving VDC is rejected when embedding fails or when, after tentatively
    embedding it, some rack outlet exceeds ``threshold`` (None disables the
    check).  Departing VDCs release everything.
    """
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    trace.validate()
    embed = EMBEDDERS[algorithm]
    report = DynamicReport(algorithm=algorithm, threshold=threshold, warmup=warmup)
    sampler = _Sampler(state)
    live: dict[int, Embedding] = {}
    for ev in trace.events:
        if ev.kind == ARRIVE:
            vdc = trace.requests[ev.vdc_id]
            report.arrivals += 1
            measured = report.arrivals > warmup
            if measured:
                report.measured_arrivals += 1
                if report.measure_from == 0 and len(report.times) > 0:
                    report.measure_from = len(report.times)
            emb = embed(state, vdc)
            if emb is None:
                report.rejected_resources += 1
                report.measured_rejected_resources += measured
            elif threshold is not None and sampler.max_outlet() > threshold:
                release_vdc(state, emb)
                report.rejected_temperature += 1
                report.measured_rejected_temperature += measured
            else:
                live[ev.vdc_id] = emb
                report.commits += 1
        elif ev.kind == DEPART:
            emb = live.pop(ev.vdc_id, None)
            if emb is not None:
                release_vdc(state, emb)
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        if record_series:
            hi, lo, hi_a, lo_a, total = sampler.read()
            report.times.append(ev.time)
            report.max_outlet.append(hi)
            report.min_outlet.append(lo)
            report.max_active.append(hi_a)
            report.min_active.append(lo_a)
            report.power.append(total)
    return report
