import numpy as np
import pytest

from vmga import kernels
from vmga.datacenter import Instance, PmSpec, VmSpec

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def make_instance(cpu, mem=None, caps=((8.0, 10.0),), dur=None, horizon=3600.0, p_idle=70.0, p_max=250.0):
    mem = [1.0] * len(cpu) if mem is None else mem
    dur = [100.0] * len(cpu) if dur is None else dur
    vms = [VmSpec(i, float(c), float(m), float(d)) for i, (c, m, d) in enumerate(zip(cpu, mem, dur))]
    pms = [PmSpec(j, float(c), float(m), p_idle, p_max) for j, (c, m) in enumerate(caps)]
    return Instance(tuple(vms), tuple(pms), horizon=horizon)


def random_instance(rng, n, m, hetero=True):
    """Small random instance where every VM fits on every PM by itself."""
    caps = []
    for j in range(m):
        c = float(rng.choice([8.0, 16.0])) if hetero else 8.0
        caps.append((c, 4 * c))
    min_c = min(c for c, _ in caps)
    cpu = rng.uniform(0.5, min_c * 0.9, size=n)
    mem = rng.uniform(1.0, 4 * min_c * 0.9, size=n)
    dur = rng.uniform(60, 3600, size=n)
    pms = [PmSpec(j, c, mm, float(rng.uniform(50, 100)), float(rng.uniform(200, 300))) for j, (c, mm) in enumerate(caps)]
    vms = [VmSpec(i, float(cpu[i]), float(mem[i]), float(dur[i])) for i in range(n)]
    return Instance(tuple(vms), tuple(pms))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance bookkeeping: tests marked ``criterion(n, text)`` get one summary line each.
_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and rep.passed:
        return
    number, text = mark.args
    ok = rep.passed and _CRITERIA.get(number, (text, True))[1]
    _CRITERIA[number] = (text, ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")
