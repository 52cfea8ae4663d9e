import numpy as np
import pytest


def random_spd(rng, p, cond=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    ev = np.exp(rng.uniform(0, np.log(cond), p))
    m = (q * ev) @ q.T
    return 0.5 * (m + m.T)


def match_columns(a, b, tol):
    """True if the columns of ``b`` equal those of ``a`` up to sign and permutation."""
    used = set()
    for j in range(a.shape[1]):
        hit = None
        for k in range(b.shape[1]):
            if k in used:
                continue
            for s in (1.0, -1.0):
                if np.max(np.abs(a[:, j] - s * b[:, k])) <= tol * max(1.0, np.max(np.abs(a[:, j]))):
                    hit = k
                    break
            if hit is not None:
                break
        if hit is None:
            return False
        used.add(hit)
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def mixture(rng, n=500, p=4, frac=0.02, shift=5.0):
    x = rng.standard_normal((n, p))
    m = int(round(frac * n))
    x[:m, 0] += shift
    labels = np.zeros(n, dtype=bool)
    labels[:m] = True
    return x, labels


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
