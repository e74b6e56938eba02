import numpy as np
import pytest


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def random_dag_matrix(rng, d, density=0.5, low=0.0, high=2.0):
    """Nonnegative matrix whose pattern is a DAG (permuted strictly upper triangle)."""
    U = np.triu(rng.uniform(low, high, (d, d)) * (rng.random((d, d)) < density), k=1)
    perm = rng.permutation(d)
    return U[np.ix_(perm, perm)]


def random_cyclic_matrix(rng, d, density=0.3):
    """Nonnegative matrix with at least one directed cycle of random length."""
    M = random_dag_matrix(rng, d, density, 0.5, 1.0)
    L = int(rng.integers(2, d + 1))
    nodes = rng.permutation(d)[:L]
    for a, b in zip(nodes, np.roll(nodes, -1)):
        M[a, b] = rng.uniform(0.5, 1.0)
    return M


def scale_to_radius(M, rho):
    r = spectral_radius(M)
    return M * (rho / r) if r > 0 else M


def random_positive(rng, d, s=1.0, max_frac=0.5):
    """Entrywise positive matrix (every entry well away from 0) with rho < max_frac * s."""
    M = rng.uniform(0.2, 1.0, (d, d))
    return scale_to_radius(M, rng.uniform(0.05, max_frac) * s)


def random_in_domain(rng, d, s=1.0, max_frac=0.5, cyclic=True):
    M = random_cyclic_matrix(rng, d) if cyclic else random_dag_matrix(rng, d)
    if not cyclic:
        return M
    return scale_to_radius(M, rng.uniform(0.05, max_frac) * s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line (and print it) before asserting on it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
