import numpy as np
import pytest

from balanced_rd import BalancedForm, ReactionNetwork, assemble, uniform_interval_mesh

# filled by tests/test_acceptance.py, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []

X_STAR = np.array([1.0, 1.0, 0.25, 0.15])
D_FIG3 = np.array([0.33, 0.72, 0.91, 0.67])


def two_reaction_network() -> ReactionNetwork:
    # X1 + X2 <-> X3 <-> X1 + X4
    Z = np.array([[1, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    B = np.array([[-1, 0], [1, -1], [0, 1]])
    return ReactionNetwork(("x1", "x2", "x3", "x4"), Z, B, [0.1, 0.3], [0.4, 0.5])


def hand_field(k, x):
    """Rate laws of the two-reaction network written out term by term."""
    k1f, k1r, k2f, k2r = k
    x1, x2, x3, x4 = x
    return np.array([
        -k1f * x1 * x2 + (k2f + k1r) * x3 - k2r * x1 * x4,
        -k1f * x1 * x2 + k1r * x3,
        k1f * x1 * x2 - (k1r + k2f) * x3 + k2r * x1 * x4,
        k2f * x3 - k2r * x1 * x4,
    ])


def fig3_initial_state(mesh) -> np.ndarray:
    xi = mesh.vertices[:, 0]
    return np.column_stack([4 * xi + 0.3, 1.3 * xi**2 + 0.1, 2 * np.sin(xi) ** 2 + 0.2 * xi + 0.2, 3 * xi + 0.1]).ravel()


@pytest.fixture(scope="session")
def net():
    return two_reaction_network()


@pytest.fixture(scope="session")
def bf(net):
    return BalancedForm.from_equilibrium(net, X_STAR)


@pytest.fixture(scope="session")
def fig3_system(net, bf):
    return assemble(net, bf, uniform_interval_mesh(1.0, 20), D_FIG3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
