import pytest

from fibresqueeze import (
    PulseSpec,
    SolverConfig,
    TimeGrid,
    calibrated_fibre,
    make_pulse,
    output_covariance,
    propagate_with_noise,
)
from fibresqueeze.scenarios import QUANTUM_GRID, QUANTUM_SOLVER


@pytest.fixture(scope="session")
def quantum_grid():
    return TimeGrid(*QUANTUM_GRID)


@pytest.fixture(scope="session")
def quantum_cfg():
    return SolverConfig(max_nonlinear_phase_per_step=QUANTUM_SOLVER)


@pytest.fixture(scope="session")
def fig3_state(quantum_grid, quantum_cfg):
    """Output field and covariance after 1 m of calibrated fibre at 15.8 pJ."""
    env = make_pulse(PulseSpec(shape="sech", fwhm=130.0, energy=15.8), quantum_grid)
    out, smap = propagate_with_noise(env, calibrated_fibre(length=1.0), quantum_cfg)
    return out, output_covariance(smap), smap


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}")
