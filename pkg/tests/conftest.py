import numpy as np
import pytest
from hypothesis import strategies as st

# retrieved efficiencies of the 4-pixel device, physical pixel order
DEVICE_ETAS = np.array([0.0248, 0.3565, 0.4862, 0.0566])

# published click-probability matrix, M = 9
DEVICE_MATRIX = np.array([
    [1, 0.076, 0.0063, 0.0005, 0, 0, 0, 0, 0, 0],
    [0, 0.924, 0.5067, 0.2602, 0.1354, 0.0716, 0.0383, 0.0207, 0.0113, 0.0062],
    [0, 0, 0.487, 0.6472, 0.6728, 0.6482, 0.6067, 0.5596, 0.514, 0.4712],
    [0, 0, 0, 0.092, 0.1858, 0.2645, 0.3275, 0.3777, 0.4177, 0.4498],
    [0, 0, 0, 0, 0.0058, 0.0157, 0.0281, 0.042, 0.057, 0.0767],
])

# published Monte Carlo standard deviations of the matrix entries
DEVICE_SIGMA = np.array([
    [0, 0.0224, 0.0035, 0.0004, 0, 0, 0, 0, 0, 0],
    [0, 0.0224, 0.0202, 0.0178, 0.0122, 0.0078, 0.0049, 0.003, 0.0018, 0.0011],
    [0, 0, 0.0236, 0.0117, 0.0026, 0.003, 0.0061, 0.0079, 0.0088, 0.0093],
    [0, 0, 0, 0.0067, 0.0091, 0.0095, 0.0092, 0.0085, 0.0077, 0.007],
    [0, 0, 0, 0, 0.0006, 0.0012, 0.0018, 0.0024, 0.0029, 0.0035],
])

# quoted +- on the retrieved efficiencies, same order as DEVICE_ETAS
DEVICE_ETAS_SIGMA = np.array([0.0006, 0.0087, 0.0118, 0.0014])


@pytest.fixture
def device_etas():
    return DEVICE_ETAS.copy()


def random_etas(rng, n_pixels, total=None):
    """Random feasible efficiency vector; total drawn in [0, 1] if not given."""
    w = rng.dirichlet(np.ones(n_pixels + 1))
    etas = w[:n_pixels]
    if total is not None:
        etas = total * etas / etas.sum()
    return etas


@st.composite
def efficiency_vectors(draw, min_pixels=1, max_pixels=4, allow_full=True):
    n = draw(st.integers(min_pixels, max_pixels))
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=n + 1, max_size=n + 1))
    raw = np.array(raw)
    if not allow_full:
        raw[-1] = max(raw[-1], 1e-3)
    if raw.sum() == 0:
        return np.zeros(n)
    etas = raw[:n] / raw.sum()
    # renormalizing can overshoot 1 by an ulp
    return etas / max(1.0, etas.sum())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
