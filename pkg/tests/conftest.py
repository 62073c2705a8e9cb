import numpy as np
import pytest

ACCEPTANCE_LINES = []


def naive_dft(phys):
    """O(N^2) DFT with the library's normalization: coeff = sum(x e^{-ikx}) / N."""
    shape = phys.shape
    out = np.zeros(shape, dtype=complex)
    grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
    for idx in np.ndindex(shape):
        phase = sum(k * j / n for k, j, n in zip(idx, grids, shape))
        out[idx] = np.sum(phys * np.exp(-2j * np.pi * phase)) / phys.size
    return out


@pytest.fixture
def record_acceptance():
    def add(number, title, ok, detail):
        ACCEPTANCE_LINES.append((number, title, bool(ok), detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
