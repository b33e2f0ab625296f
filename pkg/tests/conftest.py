import numpy as np
import pytest
from hypothesis import strategies as st

from blpp.env import GridSpec, LineEnsemble


def brownian_env(seed: int, n: int, steps: int, t_end: float = 1.0) -> LineEnsemble:
    rng = np.random.default_rng(seed)
    grid = GridSpec(0.0, t_end, steps)
    inc = rng.standard_normal((n, steps)) * np.sqrt(grid.dt)
    values = np.concatenate([np.zeros((n, 1)), np.cumsum(inc, axis=1)], axis=1)
    return LineEnsemble(values, grid)


@st.composite
def small_envs(draw, max_lines=4, max_steps=8, min_lines=1):
    n = draw(st.integers(min_lines, max_lines))
    steps = draw(st.integers(1, max_steps))
    seed = draw(st.integers(0, 2**32 - 1))
    return brownian_env(seed, n, steps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
