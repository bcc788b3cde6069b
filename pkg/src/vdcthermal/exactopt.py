"""Exact model of static temperature-aware embedding on small instances.

Three independent pieces:

* ``emit_milp`` writes the mixed-integer model (minimise the hottest rack
  outlet plus alpha times total IT power) in CPLEX LP text.
* ``validate_solution`` checks a variable assignment against every constraint
  family directly, without going through the LP text.
* ``brute_force_optimal`` enumerates placements and simple paths to find the
  exact optimum of tiny instances; it shares no code with the heuristic.

``parse_lp`` reads the emitted text back so tests can evaluate the written
model on concrete assignments.

Variable names (node ids as in the topology, ``i`` the VDC id)::

    delta_i_v_n      VM v of VDC i on server n (binary)
    mu_i_s_d_m_n     Mb/s of ordered VM pair (s, d) on directed arc m->n
    omega_n          node n powered (binary)
    pi_m_n           arc m->n used (binary)
    q_n, sigma_n     used electronic / optical ports of switch n (integer)
    p_n              power of node n, kW
    tout_k           outlet temperature of rack k
    T                hottest outlet
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx

from .thermal import thermal_report
from .topology import DataCenterState
from .workload import VdcRequest

LINE_WIDTH = 100
RESOURCES = ("cpu", "mem", "disk")

FAMILIES = (
    "domains",
    "assignment",
    "anti_colocation",
    "server_capacity",
    "flow_servers",
    "flow_switches",
    "path_symmetry",
    "link_capacity",
    "server_on_lower",
    "server_on_upper",
    "link_used_fwd",
    "link_used_rev",
    "link_used_upper",
    "switch_on_in",
    "switch_on_out",
    "electronic_ports",
    "optical_ports",
    "server_power",
    "switch_power",
    "outlet_temperature",
    "max_temperature",
    "objective",
)


class InstanceTooLarge(ValueError):
    """Raised by the exhaustive search when the instance exceeds its budget."""


# --------------------------------------------------------------------- instance


@dataclass(frozen=True)
class MilpInstance:
    """Topology (capacities only; residuals are ignored) plus a static VDC batch."""

    state: DataCenterState
    vdcs: tuple[VdcRequest, ...]
    alpha: float = 0.1
    big_m: int | None = None  # None: the largest link capacity

    def __post_init__(self) -> None:
        object.__setattr__(self, "vdcs", tuple(self.vdcs))
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        max_cap = int(self.state.link_capacity.max()) if self.state.n_links else 0
        if self.big_m is None:
            object.__setattr__(self, "big_m", max_cap)
        elif self.big_m < max_cap:
            raise ValueError(f"big_m {self.big_m} below the largest link capacity {max_cap}")
        ids = [v.vdc_id for v in self.vdcs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate VDC ids in batch")
        for v in self.vdcs:
            v.validate()

    # topology views shared by emitter, validator and assignment builder

    @property
    def servers(self) -> range:
        return range(self.state.n_servers)

    @property
    def switches(self) -> list[int]:
        return sorted(self.state.switches)

    def neighbours(self, n: int) -> list[int]:
        return [m for m, _ in self.state.adj[n]]

    def arcs(self) -> list[tuple[int, int, int]]:
        """Directed adjacencies (m, n, link id), sorted."""
        out = []
        for m in range(self.state.n_nodes):
            for n, l in self.state.adj[m]:
                out.append((m, n, l))
        return out

    def rack_members(self, k: int) -> list[int]:
        rack = self.state.racks[k]
        return list(rack.server_ids) + [rack.tor_switch_id]

    def vdc(self, i: int) -> VdcRequest:
        for v in self.vdcs:
            if v.vdc_id == i:
                return v
        raise KeyError(i)


def pair_demands(vdc: VdcRequest) -> dict[tuple[int, int], int]:
    """Bandwidth of every ordered VM pair (s, d), s != d; 0 if not linked."""
    ids = sorted(v.vm_id for v in vdc.vms)
    out = {(s, d): 0 for s in ids for d in ids if s != d}
    for vl in vdc.vlinks:
        out[(vl.s, vl.d)] = vl.bandwidth
        out[(vl.d, vl.s)] = vl.bandwidth
    return out


def mu_variable_count(instance: MilpInstance) -> int:
    """Closed form: sum over VDCs of |V|(|V|-1) times the number of directed adjacencies."""
    n_arcs = 2 * instance.state.n_links
    return sum(len(v.vms) * (len(v.vms) - 1) for v in instance.vdcs) * n_arcs


# --------------------------------------------------------------------- emitter


def _num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _expr(terms: Iterable[tuple[float, str]]) -> str:
    parts = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {var}" if mag == 1 else f"{sign} {_num(mag)} {var}")
    return " ".join(parts) if parts else "0 T"


def _wrap(line: str) -> list[str]:
    if len(line) <= LINE_WIDTH:
        return [line]
    out = []
    cur = ""
    for tok in re.split(r" (?=[+-] )", line):
        if cur and len(cur) + 1 + len(tok) > LINE_WIDTH:
            out.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    out.append(cur)
    return out


def _rows(instance: MilpInstance):
    """Yield (name, terms, sense, rhs) for every constraint of the model."""
    st = instance.state
    pm, K = st.power, st.thermo.rho_f_cp
    servers, switches = instance.servers, instance.switches
    arcs = instance.arcs()
    big_m = instance.big_m

    # mapping of VMs to servers
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for vm in vdc.vms:
            yield f"assign_{i}_{vm.vm_id}", [(1, f"delta_{i}_{vm.vm_id}_{n}") for n in servers], "=", 1
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for n in servers:
            yield f"one_per_server_{i}_{n}", [(1, f"delta_{i}_{vm.vm_id}_{n}") for vm in vdc.vms], "<=", 1
    for r in RESOURCES:
        for n in servers:
            s = st.servers[n]
            terms = [
                (getattr(vm, r), f"delta_{vdc.vdc_id}_{vm.vm_id}_{n}")
                for vdc in instance.vdcs
                for vm in vdc.vms
                if getattr(vm, r)
            ]
            if terms:
                yield f"cap_{r}_{n}", terms, "<=", getattr(s, f"{r}_capacity")

    # flow conservation, symmetry and link capacity
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for (s, d), b in pair_demands(vdc).items():
            for n in list(servers) + switches:
                terms = [(1, f"mu_{i}_{s}_{d}_{n}_{m}") for m in instance.neighbours(n)]
                terms += [(-1, f"mu_{i}_{s}_{d}_{m}_{n}") for m in instance.neighbours(n)]
                if n < st.n_servers:
                    if b:
                        terms += [(-b, f"delta_{i}_{s}_{n}"), (b, f"delta_{i}_{d}_{n}")]
                    yield f"flow_srv_{i}_{s}_{d}_{n}", terms, "=", 0
                else:
                    yield f"flow_sw_{i}_{s}_{d}_{n}", terms, "=", 0
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for s, d in pair_demands(vdc):
            for m, n, _ in arcs:
                yield f"sym_{i}_{s}_{d}_{m}_{n}", [(1, f"mu_{i}_{s}_{d}_{m}_{n}"), (-1, f"mu_{i}_{d}_{s}_{n}_{m}")], "=", 0
    for m, n, l in arcs:
        terms = [(1, f"mu_{v.vdc_id}_{s}_{d}_{m}_{n}") for v in instance.vdcs for s, d in pair_demands(v)]
        if terms:
            yield f"bw_{m}_{n}", terms, "<=", int(st.link_capacity[l])

    # activity of servers, links and switches
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for vm in vdc.vms:
            for n in servers:
                yield f"srv_on_{i}_{vm.vm_id}_{n}", [(1, f"omega_{n}"), (-1, f"delta_{i}_{vm.vm_id}_{n}")], ">=", 0
    for n in servers:
        terms = [(1, f"omega_{n}")]
        terms += [(-1, f"delta_{v.vdc_id}_{vm.vm_id}_{n}") for v in instance.vdcs for vm in v.vms]
        yield f"srv_off_{n}", terms, "<=", 0
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for s, d in pair_demands(vdc):
            for m, n, _ in arcs:
                yield f"used_fwd_{i}_{s}_{d}_{m}_{n}", [(big_m, f"pi_{m}_{n}"), (-1, f"mu_{i}_{s}_{d}_{m}_{n}")], ">=", 0
                yield f"used_rev_{i}_{s}_{d}_{m}_{n}", [(big_m, f"pi_{m}_{n}"), (-1, f"mu_{i}_{s}_{d}_{n}_{m}")], ">=", 0
    for m, n, _ in arcs:
        terms = [(1, f"pi_{m}_{n}")]
        for v in instance.vdcs:
            for s, d in pair_demands(v):
                terms += [(-1, f"mu_{v.vdc_id}_{s}_{d}_{n}_{m}"), (-1, f"mu_{v.vdc_id}_{s}_{d}_{m}_{n}")]
        yield f"unused_{m}_{n}", terms, "<=", 0
    for m in switches:
        for n in instance.neighbours(m):
            yield f"sw_on_in_{m}_{n}", [(1, f"omega_{m}"), (-1, f"pi_{n}_{m}")], ">=", 0
            yield f"sw_on_out_{m}_{n}", [(1, f"omega_{m}"), (-1, f"pi_{m}_{n}")], ">=", 0

    # ports, power and temperature
    for n in switches:
        nb = instance.neighbours(n)
        yield f"eports_{n}", [(1, f"q_{n}")] + [(-1, f"pi_{n}_{m}") for m in nb if m < st.n_servers], "=", 0
        yield f"oports_{n}", [(1, f"sigma_{n}")] + [(-1, f"pi_{n}_{m}") for m in nb if m >= st.n_servers], "=", 0
    slope = pm.p_server_max - pm.p_server_idle
    for n in servers:
        cap = st.servers[n].cpu_capacity
        terms = [(1, f"p_{n}"), (-pm.p_server_idle, f"omega_{n}")]
        terms += [
            (-slope * vm.cpu / cap, f"delta_{v.vdc_id}_{vm.vm_id}_{n}") for v in instance.vdcs for vm in v.vms
        ]
        yield f"psrv_{n}", [t for t in terms if t[0] != 0], "=", 0
    for n in switches:
        terms = [(1, f"p_{n}"), (-pm.p_switch_idle, f"omega_{n}"), (-pm.p_e_port, f"q_{n}"), (-pm.p_o_port, f"sigma_{n}")]
        yield f"psw_{n}", [t for t in terms if t[0] != 0], "=", 0
    for rack in st.racks:
        k = rack.id
        terms = [(1, f"tout_{k}")] + [(-1 / K, f"p_{n}") for n in instance.rack_members(k)]
        yield f"tout_{k}", terms, "=", rack.inlet_temperature
    for rack in st.racks:
        yield f"tmax_{rack.id}", [(1, "T"), (-1, f"tout_{rack.id}")], ">=", 0


def emit_milp(instance: MilpInstance) -> str:
    """The full model as CPLEX LP text."""
    st = instance.state
    nodes = list(instance.servers) + instance.switches
    out = ["\\ temperature-aware VDC embedding", "Minimize"]
    obj = [(1, "T")] + [(instance.alpha, f"p_{n}") for n in nodes if instance.alpha]
    out += _wrap(" obj: " + _expr(obj))
    out.append("Subject To")
    for name, terms, sense, rhs in _rows(instance):
        out += _wrap(f" {name}: {_expr(terms)} {sense} {_num(rhs)}")
    out.append("Bounds")
    for n in instance.switches:
        sw = st.switches[n]
        out.append(f" 0 <= q_{n} <= {sw.electronic_degree}")
        out.append(f" 0 <= sigma_{n} <= {sw.optical_degree}")
    out.append("Binary")
    binaries = [f"delta_{v.vdc_id}_{vm.vm_id}_{n}" for v in instance.vdcs for vm in v.vms for n in instance.servers]
    binaries += [f"omega_{n}" for n in nodes]
    binaries += [f"pi_{m}_{n}" for m, n, _ in instance.arcs()]
    out += [f" {b}" for b in binaries]
    out.append("General")
    out += [f" {g}_{n}" for n in instance.switches for g in ("q", "sigma")]
    out.append("End")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------- LP reader


@dataclass
class LpModel:
    """A parsed LP file: linear rows, bounds and integrality markers."""

    objective: dict[str, float]
    sense: str
    rows: list[tuple[str, dict[str, float], str, float]]
    bounds: dict[str, tuple[float, float]]
    binaries: set[str]
    generals: set[str]

    def variables(self) -> set[str]:
        names = set(self.objective) | set(self.bounds) | self.binaries | self.generals
        for _, terms, _, _ in self.rows:
            names.update(terms)
        return names

    def objective_value(self, x: Mapping[str, float]) -> float:
        return sum(c * x.get(v, 0.0) for v, c in self.objective.items())

    def violations(self, x: Mapping[str, float], tol: float = 1e-6) -> list[str]:
        """Names of rows, bounds and integrality markers that ``x`` violates (missing vars are 0)."""
        bad = []
        for name, terms, sense, rhs in self.rows:
            lhs = sum(c * x.get(v, 0.0) for v, c in terms.items())
            slack = tol * max(1.0, abs(rhs))
            if (sense == "<=" and lhs > rhs + slack) or (sense == ">=" and lhs < rhs - slack) or (
                sense == "=" and abs(lhs - rhs) > slack
            ):
                bad.append(name)
        for v in sorted(self.variables()):
            val = x.get(v, 0.0)
            lo, hi = self.bounds.get(v, (0.0, math.inf))
            if v in self.binaries:
                lo, hi = max(lo, 0.0), min(hi, 1.0)
            if val < lo - tol or val > hi + tol:
                bad.append(f"bound:{v}")
            if (v in self.binaries or v in self.generals) and abs(val - round(val)) > tol:
                bad.append(f"integer:{v}")
        return bad


_SECTION = re.compile(
    r"^(minimize|minimum|min|maximize|maximum|max|subject to|such that|st|s\.t\.|bounds?|binary|binaries|bin|"
    r"generals?|gen|end)$",
    re.IGNORECASE,
)
_NUM = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf(inity)?)$", re.IGNORECASE)


def _parse_terms(tokens: list[str]) -> dict[str, float]:
    terms: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
        elif _NUM.match(tok):
            coef = float(tok)
        else:
            c = sign * (1.0 if coef is None else coef)
            terms[tok] = terms.get(tok, 0.0) + c
            sign, coef = 1.0, None
    return terms


def parse_lp(text: str) -> LpModel:
    """Read the subset of CPLEX LP used by ``emit_milp``."""
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if _SECTION.match(line):
            key = line.lower()
            current = {
                "minimize": "min", "minimum": "min", "min": "min",
                "maximize": "max", "maximum": "max", "max": "max",
                "bound": "bounds", "bounds": "bounds",
                "binary": "bin", "binaries": "bin", "bin": "bin",
                "general": "gen", "generals": "gen", "gen": "gen",
                "end": "end",
            }.get(key, "st")
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ValueError(f"LP text before any section: {line!r}")
        sections[current].append(line)

    sense = "min" if "min" in sections else "max"
    obj_tokens = " ".join(sections.get(sense, [])).replace(":", " : ").split()
    if ":" in obj_tokens:
        obj_tokens = obj_tokens[obj_tokens.index(":") + 1 :]
    objective = _parse_terms(obj_tokens)

    rows = []
    stream = " ".join(sections.get("st", []))
    for m in re.finditer(r"(\S+)\s*:\s*(.*?)\s*(<=|>=|=<|=>|=|<|>)\s*([+-]?\s*[\d.eE+-]+)", stream):
        name, body, op, rhs = m.groups()
        op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(op, op)
        rows.append((name, _parse_terms(body.split()), op, float(rhs.replace(" ", ""))))

    bounds: dict[str, tuple[float, float]] = {}
    for line in sections.get("bounds", []):
        toks = line.replace("<=", " <= ").replace(">=", " >= ").split()
        if len(toks) == 5 and toks[1] == toks[3] == "<=":
            bounds[toks[2]] = (float(toks[0]), float(toks[4]))
        elif len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = (-math.inf, math.inf)
        elif len(toks) == 3 and toks[1] in ("<=", ">="):
            lo, hi = bounds.get(toks[0], (0.0, math.inf))
            val = float(toks[2])
            bounds[toks[0]] = (lo, val) if toks[1] == "<=" else (val, hi)
        else:
            raise ValueError(f"unsupported bound line {line!r}")
    binaries = {t for line in sections.get("bin", []) for t in line.split()}
    generals = {t for line in sections.get("gen", []) for t in line.split()}
    return LpModel(objective, sense, rows, bounds, binaries, generals)


# --------------------------------------------------------------------- solutions


@dataclass
class ExactSolution:
    """Placements and paths of a full batch with the reported powers and temperatures."""

    objective: float
    t_max: float
    powers: dict[int, float] = field(default_factory=dict)
    outlets: list[float] = field(default_factory=list)
    placement: dict[int, dict[int, int]] = field(default_factory=dict)
    paths: dict[int, dict[tuple[int, int], list[int]]] = field(default_factory=dict)
    feasible: bool = True

    @classmethod
    def infeasible(cls) -> "ExactSolution":
        return cls(objective=math.inf, t_max=math.inf, feasible=False)

    @property
    def total_power(self) -> float:
        return sum(self.powers.values())

    def assignment(self, instance: MilpInstance) -> dict[str, float]:
        """Variable values; powers, outlets and T are the reported ones, the rest derived."""
        x = _structural_assignment(instance, self.placement, self.paths)
        for n, p in self.powers.items():
            x[f"p_{n}"] = p
        for k, t in enumerate(self.outlets):
            x[f"tout_{k}"] = t
        x["T"] = self.t_max
        return x


def _structural_assignment(instance: MilpInstance, placement, paths) -> dict[str, float]:
    st = instance.state
    x: dict[str, float] = {}
    for i, pl in placement.items():
        for v, n in pl.items():
            x[f"delta_{i}_{v}_{n}"] = 1
            x[f"omega_{n}"] = 1
    used: set[tuple[int, int]] = set()
    for i, by_link in paths.items():
        demands = pair_demands(instance.vdc(i))
        for (s, d), path in by_link.items():
            b = demands[(s, d)]
            for m, n in zip(path, path[1:]):
                x[f"mu_{i}_{s}_{d}_{m}_{n}"] = x.get(f"mu_{i}_{s}_{d}_{m}_{n}", 0) + b
                x[f"mu_{i}_{d}_{s}_{n}_{m}"] = x.get(f"mu_{i}_{d}_{s}_{n}_{m}", 0) + b
                used.add((m, n))
                used.add((n, m))
    for m, n in used:
        x[f"pi_{m}_{n}"] = 1
    for sw in instance.switches:
        q = sum(1 for m in instance.neighbours(sw) if (sw, m) in used and m < st.n_servers)
        s = sum(1 for m in instance.neighbours(sw) if (sw, m) in used and m >= st.n_servers)
        x[f"q_{sw}"], x[f"sigma_{sw}"] = q, s
        if q + s:
            x[f"omega_{sw}"] = 1
    return x


def _node_powers(instance: MilpInstance, x: Mapping[str, float]) -> dict[int, float]:
    """Powers implied by the structural variables of ``x``."""
    st, pm = instance.state, instance.state.power
    out = {}
    for n in instance.servers:
        cpu = sum(
            vm.cpu * x.get(f"delta_{v.vdc_id}_{vm.vm_id}_{n}", 0) for v in instance.vdcs for vm in v.vms
        )
        on = x.get(f"omega_{n}", 0)
        cap = st.servers[n].cpu_capacity
        out[n] = on * pm.p_server_idle + (pm.p_server_max - pm.p_server_idle) * (cpu / cap)
    for n in instance.switches:
        out[n] = (
            x.get(f"omega_{n}", 0) * pm.p_switch_idle
            + x.get(f"q_{n}", 0) * pm.p_e_port
            + x.get(f"sigma_{n}", 0) * pm.p_o_port
        )
    return out


def _outlets(instance: MilpInstance, powers: Mapping[int, float]) -> list[float]:
    K = instance.state.thermo.rho_f_cp
    return [
        r.inlet_temperature + sum(powers.get(n, 0.0) for n in instance.rack_members(r.id)) / K
        for r in instance.state.racks
    ]


def _finish(instance: MilpInstance, placement, paths) -> ExactSolution:
    x = _structural_assignment(instance, placement, paths)
    powers = _node_powers(instance, x)
    outlets = _outlets(instance, powers)
    t_max = max(outlets)
    total = sum(powers[n] for n in sorted(powers))
    return ExactSolution(
        objective=t_max + instance.alpha * total,
        t_max=t_max,
        powers=powers,
        outlets=outlets,
        placement={i: dict(p) for i, p in placement.items()},
        paths={i: {k: list(v) for k, v in p.items()} for i, p in paths.items()},
    )


def solution_from_embeddings(instance: MilpInstance, embeddings: Iterable) -> ExactSolution:
    """Objective and reported values for a batch embedded by a heuristic."""
    placement, paths = {}, {}
    for emb in embeddings:
        placement[emb.vdc_id] = dict(emb.vm_placement)
        paths[emb.vdc_id] = {k: list(v) for k, v in emb.link_paths.items()}
    return _finish(instance, placement, paths)


def read_solution(text: str) -> dict[str, float]:
    """Parse ``name=value`` lines (blank lines and ``#`` comments ignored)."""
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected name=value")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: bad number {value.strip()!r}") from None
    return out


def write_solution(x: Mapping[str, float]) -> str:
    return "".join(f"{k}={_num(v) if float(v).is_integer() else repr(float(v))}\n" for k, v in sorted(x.items()))


# --------------------------------------------------------------------- validator


@dataclass
class FamilyResult:
    ok: bool = True
    checked: int = 0
    first_violation: str | None = None


@dataclass
class ValidationReport:
    families: dict[str, FamilyResult]
    objective: float

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.families.values())

    def failed(self) -> list[str]:
        return [k for k, f in self.families.items() if not f.ok]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "objective": self.objective,
            "families": {
                k: {"ok": f.ok, "checked": f.checked, "first_violation": f.first_violation}
                for k, f in self.families.items()
            },
        }


_VAR = re.compile(r"^(delta|mu|omega|pi|q|sigma|p|tout)((?:_-?\d+)+)$")


def _decode(instance: MilpInstance, name: str):
    if name == "T":
        return ("T", ())
    m = _VAR.match(name)
    if not m:
        raise ValueError(f"unknown variable {name!r}")
    kind = m.group(1)
    idx = tuple(int(t) for t in m.group(2)[1:].split("_"))
    st = instance.state
    arity = {"delta": 3, "mu": 5, "omega": 1, "pi": 2, "q": 1, "sigma": 1, "p": 1, "tout": 1}[kind]
    if len(idx) != arity:
        raise ValueError(f"variable {name!r}: expected {arity} indices")
    vdc_ids = {v.vdc_id: {vm.vm_id for vm in v.vms} for v in instance.vdcs}
    adjacent = lambda a, b: 0 <= a < st.n_nodes and any(n == b for n, _ in st.adj[a])  # noqa: E731
    ok = True
    if kind == "delta":
        i, v, n = idx
        ok = i in vdc_ids and v in vdc_ids[i] and 0 <= n < st.n_servers
    elif kind == "mu":
        i, s, d, a, b = idx
        ok = i in vdc_ids and s in vdc_ids[i] and d in vdc_ids[i] and s != d and adjacent(a, b)
    elif kind == "pi":
        ok = adjacent(*idx)
    elif kind in ("omega", "p"):
        ok = 0 <= idx[0] < st.n_nodes
    elif kind in ("q", "sigma"):
        ok = idx[0] in st.switches
    elif kind == "tout":
        ok = 0 <= idx[0] < len(st.racks)
    if not ok:
        raise ValueError(f"variable {name!r} references nodes or VMs outside the instance")
    return kind, idx


def validate_solution(instance: MilpInstance, candidate, tol: float = 1e-6) -> ValidationReport:
    """Check every constraint family of the model; report the first violation of each.

    ``candidate`` is an ExactSolution, an iterable of Embedding objects, or a
    mapping of variable name to value (missing variables are 0).
    """
    reported_obj = None
    if isinstance(candidate, ExactSolution):
        if not candidate.feasible:
            raise ValueError("cannot validate an infeasible result")
        x = candidate.assignment(instance)
        reported_obj = candidate.objective
    elif isinstance(candidate, Mapping):
        x = {k: float(v) for k, v in candidate.items() if k != "objective"}
        if "objective" in candidate:
            reported_obj = float(candidate["objective"])
    else:
        x = solution_from_embeddings(instance, candidate).assignment(instance)

    st, pm = instance.state, instance.state.power
    fam = {k: FamilyResult() for k in FAMILIES}

    def check(family: str, index: str, good: bool) -> None:
        f = fam[family]
        f.checked += 1
        if not good and f.ok:
            f.ok = False
            f.first_violation = index

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    decoded = {}
    for name in sorted(x):
        decoded[name] = _decode(instance, name)
    val = lambda name: x.get(name, 0.0)  # noqa: E731

    for name, (kind, idx) in decoded.items():
        v = x[name]
        if kind in ("delta", "omega", "pi"):
            check("domains", name, abs(v) <= tol or abs(v - 1) <= tol)
        elif kind in ("q", "sigma"):
            sw = st.switches[idx[0]]
            deg = sw.electronic_degree if kind == "q" else sw.optical_degree
            check("domains", name, abs(v - round(v)) <= tol and -tol <= v <= deg + tol)
        else:
            check("domains", name, v >= -tol)

    # mapping of VMs
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for vm in vdc.vms:
            total = sum(val(f"delta_{i}_{vm.vm_id}_{n}") for n in instance.servers)
            check("assignment", f"vdc {i} vm {vm.vm_id}", close(total, 1))
        for n in instance.servers:
            total = sum(val(f"delta_{i}_{vm.vm_id}_{n}") for vm in vdc.vms)
            check("anti_colocation", f"vdc {i} server {n}", total <= 1 + tol)
    for r in RESOURCES:
        for n in instance.servers:
            load = sum(getattr(vm, r) * val(f"delta_{v.vdc_id}_{vm.vm_id}_{n}") for v in instance.vdcs for vm in v.vms)
            cap = getattr(st.servers[n], f"{r}_capacity")
            check("server_capacity", f"{r} server {n}", load <= cap + tol * max(1.0, cap))

    # flows: only nodes touched by a nonzero mu or delta can be unbalanced
    mu = {idx: x[name] for name, (kind, idx) in decoded.items() if kind == "mu" and x[name] != 0}
    net: dict[tuple, float] = {}
    for (i, s, d, a, b), f in mu.items():
        net[(i, s, d, a)] = net.get((i, s, d, a), 0.0) + f
        net[(i, s, d, b)] = net.get((i, s, d, b), 0.0) - f
    for vdc in instance.vdcs:
        i = vdc.vdc_id
        for (s, d), bw in pair_demands(vdc).items():
            touched = {key[3] for key in net if key[:3] == (i, s, d)}
            if bw:
                touched |= {n for n in instance.servers if val(f"delta_{i}_{s}_{n}") or val(f"delta_{i}_{d}_{n}")}
            for n in sorted(touched):
                out = net.get((i, s, d, n), 0.0)
                if n < st.n_servers:
                    rhs = (val(f"delta_{i}_{s}_{n}") - val(f"delta_{i}_{d}_{n}")) * bw
                    check("flow_servers", f"vdc {i} pair {s}-{d} server {n}", close(out, rhs))
                else:
                    check("flow_switches", f"vdc {i} pair {s}-{d} switch {n}", close(out, 0.0))
    for (i, s, d, a, b), f in sorted(mu.items()):
        check("path_symmetry", f"vdc {i} pair {s}-{d} arc {a}->{b}", close(f, mu.get((i, d, s, b, a), 0.0)))
        check("link_used_fwd", f"vdc {i} pair {s}-{d} arc {a}->{b}", instance.big_m * val(f"pi_{a}_{b}") >= f - tol)
        check("link_used_rev", f"vdc {i} pair {s}-{d} arc {b}->{a}", instance.big_m * val(f"pi_{b}_{a}") >= f - tol)
    arc_load: dict[tuple[int, int], float] = {}
    for (i, s, d, a, b), f in mu.items():
        arc_load[(a, b)] = arc_load.get((a, b), 0.0) + f
    for m, n, l in instance.arcs():
        load = arc_load.get((m, n), 0.0)
        cap = int(st.link_capacity[l])
        check("link_capacity", f"arc {m}->{n}", load <= cap + tol * cap)
        both = load + arc_load.get((n, m), 0.0)
        check("link_used_upper", f"arc {m}->{n}", val(f"pi_{m}_{n}") <= both + tol)

    # activity
    for vdc in instance.vdcs:
        for vm in vdc.vms:
            for n in instance.servers:
                d = val(f"delta_{vdc.vdc_id}_{vm.vm_id}_{n}")
                check("server_on_lower", f"vdc {vdc.vdc_id} vm {vm.vm_id} server {n}", val(f"omega_{n}") >= d - tol)
    for n in instance.servers:
        hosted = sum(val(f"delta_{v.vdc_id}_{vm.vm_id}_{n}") for v in instance.vdcs for vm in v.vms)
        check("server_on_upper", f"server {n}", val(f"omega_{n}") <= hosted + tol)
    for m in instance.switches:
        for n in instance.neighbours(m):
            check("switch_on_in", f"switch {m} nbr {n}", val(f"omega_{m}") >= val(f"pi_{n}_{m}") - tol)
            check("switch_on_out", f"switch {m} nbr {n}", val(f"omega_{m}") >= val(f"pi_{m}_{n}") - tol)
        nb = instance.neighbours(m)
        e = sum(val(f"pi_{m}_{n}") for n in nb if n < st.n_servers)
        o = sum(val(f"pi_{m}_{n}") for n in nb if n >= st.n_servers)
        check("electronic_ports", f"switch {m}", close(val(f"q_{m}"), e))
        check("optical_ports", f"switch {m}", close(val(f"sigma_{m}"), o))

    # power and temperature
    implied = _node_powers(instance, x)
    for n in instance.servers:
        check("server_power", f"server {n}", close(val(f"p_{n}"), implied[n]))
    for n in instance.switches:
        check("switch_power", f"switch {n}", close(val(f"p_{n}"), implied[n]))
    powers = {n: val(f"p_{n}") for n in list(instance.servers) + instance.switches}
    outlets = _outlets(instance, powers)
    for k, t in enumerate(outlets):
        check("outlet_temperature", f"rack {k}", close(val(f"tout_{k}"), t))
        check("max_temperature", f"rack {k}", val("T") >= val(f"tout_{k}") - tol)

    objective = val("T") + instance.alpha * sum(powers[n] for n in sorted(powers))
    if reported_obj is not None:
        check("objective", "reported objective", close(reported_obj, objective))
    return ValidationReport(families=fam, objective=objective)


# --------------------------------------------------------------------- brute force

MAX_SERVERS = 8
MAX_VDCS = 3
MAX_VMS = 4
MAX_PLACEMENTS = 500_000


def _placement_count(n_servers: int, vdcs) -> int:
    total = 1
    for v in vdcs:
        total *= math.perm(n_servers, len(v.vms)) if len(v.vms) <= n_servers else 0
    return total


def brute_force_optimal(instance: MilpInstance, max_path_hops: int = 6, eps: float = 1e-9) -> ExactSolution:
    """Exact optimum by exhaustive search with a monotone lower bound.

    Placements are enumerated in lexicographic order of (VDC id, VM id) ->
    server id, paths per virtual link by (hops, node ids); an equal-objective
    (within ``eps``) candidate never replaces an earlier one.
    """
    st = instance.state
    n_srv = st.n_servers
    size = {
        "servers": n_srv,
        "vdcs": len(instance.vdcs),
        "max_vms": max((len(v.vms) for v in instance.vdcs), default=0),
        "placements": _placement_count(n_srv, instance.vdcs),
    }
    if (
        size["servers"] > MAX_SERVERS
        or size["vdcs"] > MAX_VDCS
        or size["max_vms"] > MAX_VMS
        or size["placements"] > MAX_PLACEMENTS
    ):
        raise InstanceTooLarge(
            "instance too large for exhaustive search: "
            + ", ".join(f"{k}={v:.3g}" if v > 1e6 else f"{k}={v}" for k, v in size.items())
            + f" (limits servers<={MAX_SERVERS}, vdcs<={MAX_VDCS}, vms<={MAX_VMS}, placements<={MAX_PLACEMENTS})"
        )

    graph = nx.Graph()
    graph.add_nodes_from(range(st.n_nodes))
    for l in range(st.n_links):
        graph.add_edge(int(st.link_a[l]), int(st.link_b[l]), link=l)
    if n_srv >= 2:
        diameter = max(
            nx.shortest_path_length(graph, a, b) for a in range(n_srv) for b in range(a + 1, n_srv)
        )
        if max_path_hops < diameter:
            raise ValueError(f"max_path_hops {max_path_hops} below the server-to-server diameter {diameter}")

    pm, K = st.power, st.thermo.rho_f_cp
    rack_of = {}
    for r in st.racks:
        for n in instance.rack_members(r.id):
            rack_of[n] = r.id
    inlets = [r.inlet_temperature for r in st.racks]
    slope = pm.p_server_max - pm.p_server_idle

    vms = [(v.vdc_id, vm) for v in sorted(instance.vdcs, key=lambda v: v.vdc_id) for vm in sorted(v.vms, key=lambda m: m.vm_id)]
    vlinks = [
        (v.vdc_id, vl)
        for v in sorted(instance.vdcs, key=lambda v: v.vdc_id)
        for vl in sorted(v.vlinks, key=lambda vl: (vl.s, vl.d))
    ]

    path_cache: dict[tuple[int, int], list[tuple[list[int], list[int]]]] = {}

    def candidates(a: int, b: int):
        if (a, b) not in path_cache:
            found = []
            for p in nx.all_simple_paths(graph, a, b, cutoff=max_path_hops):
                # servers are leaves, so only the endpoints may be servers
                if any(n < n_srv for n in p[1:-1]):
                    continue
                found.append((p, [graph.edges[u, w]["link"] for u, w in zip(p, p[1:])]))
            found.sort(key=lambda t: (len(t[0]), t[0]))
            path_cache[(a, b)] = found
        return path_cache[(a, b)]

    best = {"obj": math.inf, "placement": None, "paths": None}

    cpu_used = [0] * n_srv
    mem_used = [0] * n_srv
    disk_used = [0] * n_srv
    vm_on = [0] * n_srv
    rack_p = [0.0] * len(st.racks)
    total_p = [0.0]

    def server_p(n: int) -> float:
        return 0.0 if vm_on[n] == 0 else pm.p_server_idle + slope * (cpu_used[n] / st.servers[n].cpu_capacity)

    def objective() -> float:
        return max(t + p / K for t, p in zip(inlets, rack_p)) + instance.alpha * total_p[0]

    placement: dict[int, dict[int, int]] = {v.vdc_id: {} for v in instance.vdcs}
    taken: dict[int, set[int]] = {v.vdc_id: set() for v in instance.vdcs}

    # link stage state
    link_load = [0] * st.n_links
    link_users = [0] * st.n_links
    ports = {sw: [0, 0] for sw in st.switches}
    chosen: dict[int, dict[tuple[int, int], list[int]]] = {}

    def switch_p(sw: int) -> float:
        e, o = ports[sw]
        return 0.0 if e + o == 0 else pm.p_switch_idle + e * pm.p_e_port + o * pm.p_o_port

    def toggle(l: int, delta: int) -> None:
        a, b = int(st.link_a[l]), int(st.link_b[l])
        optical = a >= n_srv and b >= n_srv
        for n in (a, b):
            if n in ports:
                before = switch_p(n)
                ports[n][1 if optical else 0] += delta
                diff = switch_p(n) - before
                total_p[0] += diff
                if n in rack_of:
                    rack_p[rack_of[n]] += diff

    def route(j: int) -> None:
        if objective() >= best["obj"] - eps:
            return
        if j == len(vlinks):
            best["obj"] = objective()
            best["placement"] = {i: dict(p) for i, p in placement.items()}
            best["paths"] = {i: {k: list(v) for k, v in p.items()} for i, p in chosen.items()}
            return
        i, vl = vlinks[j]
        a, b = placement[i][vl.s], placement[i][vl.d]
        for nodes, links in candidates(a, b):
            if any(link_load[l] + vl.bandwidth > st.link_capacity[l] for l in links):
                continue
            for l in links:
                link_load[l] += vl.bandwidth
                link_users[l] += 1
                if link_users[l] == 1:
                    toggle(l, +1)
            chosen.setdefault(i, {})[vl.key] = nodes
            route(j + 1)
            del chosen[i][vl.key]
            for l in links:
                link_load[l] -= vl.bandwidth
                link_users[l] -= 1
                if link_users[l] == 0:
                    toggle(l, -1)

    def place(j: int) -> None:
        if objective() >= best["obj"] - eps:
            return
        if j == len(vms):
            route(0)
            return
        i, vm = vms[j]
        for n in range(n_srv):
            s = st.servers[n]
            if n in taken[i]:
                continue
            if cpu_used[n] + vm.cpu > s.cpu_capacity or mem_used[n] + vm.mem > s.mem_capacity:
                continue
            if disk_used[n] + vm.disk > s.disk_capacity:
                continue
            before = server_p(n)
            cpu_used[n] += vm.cpu
            mem_used[n] += vm.mem
            disk_used[n] += vm.disk
            vm_on[n] += 1
            diff = server_p(n) - before
            rack_p[rack_of[n]] += diff
            total_p[0] += diff
            taken[i].add(n)
            placement[i][vm.vm_id] = n
            place(j + 1)
            del placement[i][vm.vm_id]
            taken[i].discard(n)
            cpu_used[n] -= vm.cpu
            mem_used[n] -= vm.mem
            disk_used[n] -= vm.disk
            vm_on[n] -= 1
            rack_p[rack_of[n]] -= diff
            total_p[0] -= diff

    place(0)
    if best["placement"] is None:
        return ExactSolution.infeasible()
    return _finish(instance, best["placement"], best["paths"])


def objective_of_state(state: DataCenterState, alpha: float) -> float:
    """T + alpha * total IT power for the equipment state as it stands."""
    rep = thermal_report(state)
    return rep.max_outlet + alpha * rep.total_it_power


__all__ = [
    "FAMILIES",
    "ExactSolution",
    "InstanceTooLarge",
    "LpModel",
    "MilpInstance",
    "ValidationReport",
    "brute_force_optimal",
    "emit_milp",
    "mu_variable_count",
    "objective_of_state",
    "pair_demands",
    "parse_lp",
    "read_solution",
    "solution_from_embeddings",
    "validate_solution",
    "write_solution",
]
