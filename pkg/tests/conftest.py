import numpy as np
import pytest

_REPORT = []


def central_differences(f, x, step=1e-5):
    """Numerical gradient of scalar ``f`` w.r.t. array ``x`` (modified in place, restored)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def rel_error(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)))


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def _record(name, passed, detail=""):
        _REPORT.append((name, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _REPORT:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")
