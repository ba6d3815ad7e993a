import numpy as np
import pytest

# verdict lines collected by test_acceptance.py
ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def circular_conv_bruteforce(x, taps):
    """Direct periodic correlation by explicit index wrapping."""
    h, w = x.shape
    c = taps.shape[0] // 2
    out = np.zeros_like(x, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            s = 0.0
            for a in range(taps.shape[0]):
                for b in range(taps.shape[1]):
                    s += taps[a, b] * x[(i + a - c) % h, (j + b - c) % w]
            out[i, j] = s
    return out


def dft_bruteforce(x):
    h, w = x.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            s = 0j
            for a in range(h):
                for b in range(w):
                    s += x[a, b] * np.exp(-2j * np.pi * (u * a / h + v * b / w))
            out[u, v] = s
    return out


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fd_grad(f, x, eps=1e-5):
    """Central finite-difference gradient of scalar ``f`` at ``x`` (modified in place, then restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return g
