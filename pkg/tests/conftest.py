import numpy as np
import pytest

from emheat import AngularPotential, ProblemSpec, solve_ab, solve_sphere_constant


@pytest.fixture
def ab03():
    return ProblemSpec(2, AngularPotential.aharonov_bohm(0.3))


@pytest.fixture
def ab03_pairs():
    return solve_ab(0.3, 4)


@pytest.fixture
def free3():
    return ProblemSpec(3, AngularPotential.sphere_constant(0.0))


@pytest.fixture
def free3_pairs():
    return solve_sphere_constant(3, 0.0, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    def record(num, title, ok, detail=""):
        line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return ok

    return record
