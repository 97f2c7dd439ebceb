import numpy as np
import pytest


def dense_two_qubit(gate, q1, q2, n):
    """Independent dense embedding of a 4x4 gate on qubits (q1, q2) of an
    n-qubit register, built entry by entry from basis-state bit math.

    Deliberately avoids the strided kernel code path: used as the oracle
    it checks against.
    """
    d = 1 << n
    b1, b2 = n - q1, n - q2
    op = np.zeros((d, d), dtype=complex)
    for col in range(d):
        c1 = (col >> b1) & 1
        c2 = (col >> b2) & 1
        stripped = col & ~((1 << b1) | (1 << b2))
        for r1 in (0, 1):
            for r2 in (0, 1):
                row = stripped | (r1 << b1) | (r2 << b2)
                op[row, col] += gate[2 * r1 + r2, 2 * c1 + c2]
    return op


def dense_step_matrix(step, n):
    """Dense matrix of a full Floquet step (gates applied left to right)."""
    u = np.eye(1 << n, dtype=complex)
    for g, q1, q2 in step.gates:
        u = dense_two_qubit(g, q1, q2, n) @ u
    return u


def expm_taylor(h, terms=60):
    """Truncated Taylor series of exp(-i h), the small-matrix oracle."""
    out = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ (-1j * h) / k
        out = out + term
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
