import random

import pytest

from vdcthermal.config import TopologyConfig
from vdcthermal.topology import build_vl2
from vdcthermal.workload import VdcRequest, VirtualLink, VmDemand


def small_cfg(racks=2, spr=3, n_agg=2, n_core=1, **kw) -> TopologyConfig:
    return TopologyConfig(racks=racks, servers_per_rack=spr, n_tor=racks, n_agg=n_agg, n_core=n_core, **kw)


def make_state(racks=2, spr=3, inlets=None, n_agg=2, n_core=1, **kw):
    return build_vl2(small_cfg(racks, spr, n_agg, n_core, **kw), inlets=inlets)


def make_vdc(vdc_id, cpus, links, mem=0, disk=0) -> VdcRequest:
    """VDC from a list of CPU demands and (s, d, mbps) triples."""
    vms = [VmDemand(i, c, mem, disk) for i, c in enumerate(cpus)]
    return VdcRequest(vdc_id, vms, [VirtualLink(s, d, b) for s, d, b in links])


@pytest.fixture
def rng():
    return random.Random(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
