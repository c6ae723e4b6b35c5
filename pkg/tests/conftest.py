import numpy as np
import pytest

from gakpain.landmark_io import GeneratorConfig, generate_synthetic

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


REFLECT = np.array([[1.0, 0.0], [0.0, -1.0]])


def random_walk_trajectory(rng, length, m=6, step=0.3):
    """Factors of a random trajectory: a base factor plus Gaussian steps."""
    base = rng.standard_normal((m, 2))
    return base + step * np.cumsum(rng.standard_normal((length, m, 2)), axis=0)


def geodesic_trajectory(rng, length, m=6, speed=0.05):
    """Equally spaced points ``A + i V`` with ``A^T V`` symmetric (horizontal)."""
    A = rng.standard_normal((m, 2))
    V = rng.standard_normal((m, 2))
    # drop the vertical component A Omega (Omega antisymmetric) so that A^T V
    # is symmetric; for d = 2, S Omega + Omega S = tr(S) Omega
    S = A.T @ A
    W = A.T @ V - V.T @ A
    omega = W[0, 1] / np.trace(S)
    Omega = np.array([[0.0, omega], [-omega, 0.0]])
    V = V - A @ Omega
    V *= speed / np.linalg.norm(V)
    return np.stack([A + i * V for i in range(length)])


@pytest.fixture(scope="session")
def small_dataset():
    cfg = GeneratorConfig(subjects=10, seqs_per_subject=3, frames_min=24, frames_max=40, n=6, seed=3)
    return generate_synthetic(cfg)
