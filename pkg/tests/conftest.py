import numpy as np
import pytest
from hypothesis import strategies as st

from squeezelab.gaussian import GaussianState, phase_rotation_symplectic, beam_splitter_symplectic


def random_symplectic(rng, n_modes, max_r=1.0):
    """Product of random single-mode squeezers, rotations and beam splitters."""
    s = np.eye(2 * n_modes)
    for _ in range(3):
        for k in range(n_modes):
            r = rng.uniform(-max_r, max_r)
            sq = np.eye(2 * n_modes)
            sq[2 * k, 2 * k] = np.exp(-r)
            sq[2 * k + 1, 2 * k + 1] = np.exp(r)
            s = phase_rotation_symplectic(n_modes, k, rng.uniform(0, 2 * np.pi)) @ sq @ s
        for a in range(n_modes):
            for b in range(a + 1, n_modes):
                s = beam_splitter_symplectic(n_modes, a, b, rng.uniform(0, 1)) @ s
    return s


def random_physical_state(rng, n_modes, max_r=1.0, max_thermal=1.0):
    s = random_symplectic(rng, n_modes, max_r)
    nu = 1.0 + rng.uniform(0, max_thermal, n_modes)
    d = np.repeat(nu, 2)
    mean = rng.normal(0, 1, 2 * n_modes)
    return GaussianState(mean, s @ np.diag(d) @ s.T)


@st.composite
def physical_states(draw, n_modes=None, max_r=1.0):
    n = draw(st.integers(1, 3)) if n_modes is None else n_modes
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_physical_state(np.random.default_rng(seed), n, max_r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
