"""Run configuration: dataclasses with the evaluation defaults and an INI-style loader.

The config file is a commented key-value file with sections::

    [topology]
    racks = 4
    servers_per_rack = 5
    ...

Any key can be overridden from the command line (``--racks=40`` or
``--topology.racks=40``).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass(frozen=True)
class TopologyConfig:
    racks: int = 4
    servers_per_rack: int = 5
    n_tor: int = 0  # 0 means one per rack
    n_agg: int = 2
    n_core: int = 2
    access_rate_mbps: int = 1000
    trunk_rate_mbps: int = 10000
    cpu_capacity: int = 100
    mem_capacity: int = 1000
    disk_capacity: int = 10000
    inlet_min_c: float = 15.0
    inlet_max_c: float = 20.0
    seed: int = 0

    def validate(self) -> None:
        if self.racks < 1:
            raise ConfigError("racks must be >= 1")
        if self.n_tor not in (0, self.racks):
            raise ConfigError(f"need exactly one ToR per rack (n_tor={self.n_tor}, racks={self.racks})")
        if self.servers_per_rack < 1:
            raise ConfigError("servers_per_rack must be >= 1")
        if self.n_agg < 1 or self.n_core < 1:
            raise ConfigError("need at least one aggregation and one core switch")
        # every aggregation switch needs at least one ToR below it
        if self.n_agg > 2 * self.racks:
            raise ConfigError(
                f"{self.n_agg} aggregation switches cannot all be reached by "
                f"{self.racks} ToRs with 2 uplinks each"
            )
        if self.access_rate_mbps <= 0 or self.trunk_rate_mbps <= 0:
            raise ConfigError("link rates must be positive")
        if min(self.cpu_capacity, self.mem_capacity, self.disk_capacity) < 0 or self.cpu_capacity == 0:
            raise ConfigError("server capacities must be non-negative with cpu > 0")
        if self.inlet_max_c < self.inlet_min_c:
            raise ConfigError("inlet_max_c < inlet_min_c")


@dataclass(frozen=True)
class WorkloadParams:
    m_min: int = 2
    m_max: int = 6
    cpu_min: int = 5
    cpu_max: int = 30
    mem_min: int = 0
    mem_max: int = 100
    disk_min: int = 0
    disk_max: int = 1000
    bw_min: int = 10
    bw_max: int = 70

    def validate(self) -> None:
        if self.m_min < 1:
            raise ConfigError("m_min must be >= 1")
        for lo, hi, name in (
            (self.m_min, self.m_max, "m"),
            (self.cpu_min, self.cpu_max, "cpu"),
            (self.mem_min, self.mem_max, "mem"),
            (self.disk_min, self.disk_max, "disk"),
            (self.bw_min, self.bw_max, "bw"),
        ):
            if hi < lo:
                raise ConfigError(f"empty {name} range [{lo}, {hi}]")
        if self.cpu_min <= 0:
            raise ConfigError("cpu demands must be > 0")
        if self.bw_min <= 0:
            raise ConfigError("bandwidth demands must be > 0")
        if min(self.mem_min, self.disk_min) < 0:
            raise ConfigError("demands must be >= 0")


@dataclass(frozen=True)
class PowerModel:
    """Equipment power in kW."""

    p_server_idle: float = 0.2
    p_server_max: float = 0.5
    p_switch_idle: float = 0.04
    p_e_port: float = 0.01
    p_o_port: float = 0.08

    def validate(self) -> None:
        if not self.p_server_max >= self.p_server_idle >= 0:
            raise ConfigError("need p_server_max >= p_server_idle >= 0")
        if min(self.p_switch_idle, self.p_e_port, self.p_o_port) < 0:
            raise ConfigError("switch powers must be >= 0")


@dataclass(frozen=True)
class ThermoConstants:
    """Air density (kg/m^3), airflow per rack (m^3/s), specific heat (kJ/(kg C))."""

    rho: float = 1.19
    f: float = 0.2454
    c_p: float = 1.005

    @property
    def rho_f_cp(self) -> float:
        """kW per degree C of outlet rise, rounded to 1e-7 (0.2934861 for the defaults)."""
        return round(self.rho * self.f * self.c_p, 7)

    def validate(self) -> None:
        if min(self.rho, self.f, self.c_p) <= 0:
            raise ConfigError("thermo constants must be > 0")


@dataclass(frozen=True)
class DynamicParams:
    lam: float = 80.0
    mean_holding: float = 3.0
    threshold: float = 35.0
    n_requests: int = 100_000
    warmup: int = 1000

    def validate(self) -> None:
        if self.lam <= 0 or self.mean_holding <= 0:
            raise ConfigError("lambda and mean_holding must be > 0")
        if self.n_requests < 0 or self.warmup < 0:
            raise ConfigError("n_requests and warmup must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    workload: WorkloadParams = field(default_factory=WorkloadParams)
    power: PowerModel = field(default_factory=PowerModel)
    thermo: ThermoConstants = field(default_factory=ThermoConstants)
    dynamic: DynamicParams = field(default_factory=DynamicParams)
    algorithm: str = "temperature_aware"
    n_vdcs: int = 20
    alpha: float = 0.1
    case: str = "custom"
    seeds: tuple[int, ...] = (0,)
    output: str = "out"

    def validate(self) -> None:
        self.topology.validate()
        self.workload.validate()
        self.power.validate()
        self.thermo.validate()
        self.dynamic.validate()
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.n_vdcs < 0:
            raise ConfigError("n_vdcs must be >= 0")


ALGORITHMS = ("temperature_aware", "load_balanced")

# the two evaluation cases
CASE_A = TopologyConfig(racks=4, servers_per_rack=5, n_tor=4, n_agg=2, n_core=2)
CASE_B = TopologyConfig(racks=40, servers_per_rack=10, n_tor=40, n_agg=20, n_core=10)
WORKLOAD_A = WorkloadParams(m_min=2, m_max=6)
WORKLOAD_B = WorkloadParams(m_min=2, m_max=12)

_SECTIONS = {
    "topology": TopologyConfig,
    "workload": WorkloadParams,
    "power": PowerModel,
    "thermo": ThermoConstants,
    "dynamic": DynamicParams,
}
_RUN_KEYS = ("algorithm", "n_vdcs", "alpha", "case", "seeds", "output")
# accepted spellings for a few keys
_ALIASES = {"lambda": "lam", "seed_list": "seeds"}


def _coerce(raw: str, like: Any, key: str) -> Any:
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(int(x) for x in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def _field_owner(key: str) -> list[str]:
    owners = [name for name, cls in _SECTIONS.items() if key in {f.name for f in fields(cls)}]
    if key in _RUN_KEYS:
        owners.append("run")
    return owners


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Return ``cfg`` with ``section.key`` or bare ``key`` overrides applied."""
    sections: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    run: dict[str, Any] = {}
    for full_key, raw in overrides.items():
        full_key = full_key.replace("-", "_")
        if "." in full_key:
            section, key = full_key.split(".", 1)
            key = _ALIASES.get(key, key)
        else:
            key = _ALIASES.get(full_key, full_key)
            owners = _field_owner(key)
            if not owners:
                raise ConfigError(f"unknown config key {full_key!r}")
            if len(owners) > 1:
                raise ConfigError(f"ambiguous key {full_key!r}; use one of {[o + '.' + key for o in owners]}")
            section = owners[0]
        if section == "run":
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown config key run.{key}")
            run[key] = _coerce(raw, getattr(cfg, key), key)
        elif section in _SECTIONS:
            current = getattr(cfg, section)
            if key not in {f.name for f in fields(current)}:
                raise ConfigError(f"unknown config key {section}.{key}")
            sections[section][key] = _coerce(raw, getattr(current, key), key)
        else:
            raise ConfigError(f"unknown config section {section!r}")
    updated = {name: replace(getattr(cfg, name), **vals) for name, vals in sections.items() if vals}
    return replace(cfg, **updated, **run)


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read an INI-style config file (or start from defaults) and apply overrides."""
    cfg = RunConfig()
    flat: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for section in parser.sections():
            for key, value in parser.items(section):
                flat[f"{section}.{key}"] = value
    flat.update(overrides or {})
    cfg = apply_overrides(cfg, flat)
    cfg.validate()
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Serialize ``cfg`` back to the config-file format."""
    lines = ["[run]"]
    for key in _RUN_KEYS:
        value = getattr(cfg, key)
        if isinstance(value, tuple):
            value = " ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    for name in _SECTIONS:
        lines.append("")
        lines.append(f"[{name}]")
        section = getattr(cfg, name)
        for f in fields(section):
            lines.append(f"{f.name} = {getattr(section, f.name)}")
    return "\n".join(lines) + "\n"
