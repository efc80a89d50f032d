import numpy as np
import pytest

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def unit_rows(n, d, seed):
    """Gaussian rows normalised to unit length: L_i = 1 for every component."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
