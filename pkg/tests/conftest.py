import json
import math
from pathlib import Path

import numpy as np
import pytest

from rg2flow.fields import DriftField
from rg2flow.flow import FlowState, harmonic_drift
from rg2flow.geometry import WarpedTorus

ORACLES = Path(__file__).parent / "oracles"
TWO_PI = 2.0 * math.pi

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def load_oracle(name: str):
    return json.loads((ORACLES / name).read_text())


def bumpy_torus(N: int, L: float = TWO_PI) -> WarpedTorus:
    r = np.arange(N) * L / N
    return WarpedTorus(L, 1 + 0.1 * np.cos(r), 1 + 0.2 * np.sin(r))


def sin_torus(N: int, L: float = TWO_PI) -> WarpedTorus:
    r = np.arange(N) * L / N
    return WarpedTorus(L, np.ones(N), 1 + 0.3 * np.sin(r))


def flat_torus(N: int, L: float = TWO_PI) -> WarpedTorus:
    return WarpedTorus(L, np.ones(N), np.ones(N))


def bumpy_state(N: int, harmonic: float = 0.03, psi_amp: float = 0.2) -> FlowState:
    """Bumpy torus with ``alpha_g = 1`` on average and a nowhere-vanishing drift."""
    g = bumpy_torus(N)
    r = g.nodes
    f = math.log(4 * math.pi**2) + 0.3 * np.cos(r)
    drift = DriftField.from_parts(g, psi_amp * np.sin(r), harmonic_drift(g, f, harmonic))
    return FlowState.initial(g, f, drift)


@pytest.fixture
def oracle():
    return load_oracle


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
