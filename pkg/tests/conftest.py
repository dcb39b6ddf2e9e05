import math

import pytest

from pcrta.coil import CoilSpec, JointResistances, MaterialParams, jc0_from_ic


def make_spec(n_parallel=2, n_turns=3, inner_radius=0.03, pitch=0.1e-3, rho=5e-9,
              joints_in=None, joints_out=None, ic=233.0, n_value=30.0, delta=0.0):
    joints_in = joints_in or (300e-9,) * n_parallel
    joints_out = joints_out or (300e-9,) * n_parallel
    return CoilSpec(
        n_parallel=n_parallel,
        n_turns=n_turns,
        inner_radius=inner_radius,
        tape_width=4e-3,
        tape_thickness=0.095e-3,
        radial_pitch=pitch,
        material=MaterialParams(jc0=jc0_from_ic(ic, 4e-3, 0.095e-3), n_value=n_value),
        joints=JointResistances(tuple(joints_in), tuple(joints_out), delta),
        contact_resistivity=rho,
    )


@pytest.fixture
def small_spec():
    return make_spec()


@pytest.fixture
def table1_spec():
    from pcrta.config import load_config
    return load_config("table1.cfg").coil


_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL/SKIP line per acceptance check; returns the pass flag."""

    def record(criterion: str, check: str, ok: bool | None, detail: str) -> bool | None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status} [{criterion}] {check}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
