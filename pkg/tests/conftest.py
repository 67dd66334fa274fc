import itertools
import math

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- oracles
# Independent of the pinsync kernels they check.


def series_expm(M, t=1.0, tol=1e-18, max_terms=10000):
    """Truncated power series for exp(tM), summed until the term norm drops below ``tol``."""
    A = t * np.asarray(M, dtype=float)
    n = A.shape[0]
    term = np.eye(n)
    total = np.eye(n)
    for k in range(1, max_terms):
        term = term @ A / k
        total = total + term
        if np.linalg.norm(term, 2) < tol:
            return total
    raise RuntimeError("series did not converge")


def rk4_transition(phase_mats, dwell_times, steps_per_phase=2000, x0=None):
    """Fixed-step RK4 integration of de/dt = D(t) e over consecutive constant phases.

    With ``x0=None`` propagates the identity (all basis vectors at once).
    """
    n = phase_mats[0].shape[0]
    X = np.eye(n) if x0 is None else np.array(x0, dtype=float)
    for D, tau in zip(phase_mats, dwell_times):
        h = tau / steps_per_phase
        for _ in range(steps_per_phase):
            k1 = D @ X
            k2 = D @ (X + 0.5 * h * k1)
            k3 = D @ (X + 0.5 * h * k2)
            k4 = D @ (X + h * k3)
            X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def kron_loops(A, B):
    """Kronecker product by explicit index arithmetic."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    p, q = A.shape
    m, n = B.shape
    K = np.zeros((p * m, q * n))
    for i in range(p):
        for j in range(q):
            for k in range(m):
                for l in range(n):
                    K[i * m + k, j * n + l] = A[i, j] * B[k, l]
    return K


def charpoly(M):
    """Characteristic polynomial coefficients (highest degree first) by Faddeev-LeVerrier."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[-1] * I
        c = -np.trace(M @ Mk) / k
        coeffs.append(c)
    return np.array(coeffs)


def multiset_distance(a, b):
    """Smallest max-abs pairing error between two equal-size complex multisets (n <= 8)."""
    a = list(a)
    b = list(b)
    assert len(a) == len(b)
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        err = max((abs(a[i] - b[j]) for i, j in enumerate(perm)), default=0.0)
        best = min(best, err)
    return best


def exact_rank(M):
    """Rank over the rationals by fraction-exact row reduction."""
    from fractions import Fraction

    rows = [[Fraction(x) for x in row] for row in np.asarray(M).tolist()]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def gelfand_log_rate(M, k):
    """(1/m) ln ||M^m||_2 for m = 2**k by repeated normalized squaring."""
    X = np.array(M, dtype=float)
    s = np.linalg.norm(X, 2)
    log_norm = math.log(s)
    X = X / s
    for _ in range(k):
        X = X @ X
        s = np.linalg.norm(X, 2)
        log_norm = 2 * log_norm + math.log(s)
        X = X / s
    return log_norm / 2**k
