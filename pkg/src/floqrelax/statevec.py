"""Pure-state storage and gate application kernels.

Qubits are numbered 1..n with qubit 1 the most significant bit of the
basis index, so the first n/2 qubits form the row index when the
amplitude array is reshaped to a 2^(n/2) x 2^(n/2) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_QUBITS = 26

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class Seed:
    """Master seed plus a trajectory stream id.

    Identical (master_seed, stream_id) pairs reproduce identical random
    streams bit-exactly, independent of how many other streams exist.
    """

    master_seed: int
    stream_id: int = 0

    def rng(self, *extra_keys: int) -> np.random.Generator:
        """Generator for this stream; extra keys derive independent
        sub-streams (e.g. gate kicks vs the initial-state draw)."""
        return np.random.default_rng(
            np.random.SeedSequence(
                entropy=self.master_seed, spawn_key=(self.stream_id, *extra_keys)
            )
        )

    def stream(self, stream_id: int) -> "Seed":
        return Seed(self.master_seed, stream_id)


class StateVector:
    """n-qubit pure state with 2^n double-precision complex amplitudes.

    The amplitude array is exclusively owned by this object during
    mutation; copies are cheap to request via copy().
    """

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes: np.ndarray):
        _check_qubit_count(num_qubits)
        amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128).ravel()
        if amplitudes.size != 1 << num_qubits:
            raise ValueError(
                f"expected {1 << num_qubits} amplitudes, got {amplitudes.size}"
            )
        self.num_qubits = num_qubits
        self.amplitudes = amplitudes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    @classmethod
    def computational_basis(cls, num_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(num_qubits, amps)


def _check_qubit_count(n: int) -> None:
    if n % 2 != 0 or n < 2 or n > MAX_QUBITS:
        raise ValueError(f"qubit count must be even and in [2, {MAX_QUBITS}], got {n}")


def _check_site(n: int, q: int) -> None:
    if not 1 <= q <= n:
        raise ValueError(f"qubit id {q} out of range 1..{n}")


def random_product_state(n: int, seed: Seed) -> StateVector:
    """Tensor product of n independent Haar-random single-qubit states.

    Each factor is two standard complex Gaussians normalized to unit
    length, which is Haar-uniform on the Bloch sphere.
    """
    _check_qubit_count(n)
    rng = seed.rng()
    amps = np.ones(1, dtype=np.complex128)
    for _ in range(n):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        z /= np.linalg.norm(z)
        amps = np.kron(amps, z)
    amps /= np.linalg.norm(amps)  # kill accumulated rounding
    return StateVector(n, amps)


@njit(cache=True)
def _kernel_two_qubit(amps, g, b1, b2):
    # b1, b2: bit positions of the two target qubits (b = n - q), b1 for
    # the first ket factor. Insert two zero bits into the loop counter to
    # enumerate every amplitude group exactly once.
    b_lo, b_hi = (b1, b2) if b1 < b2 else (b2, b1)
    m_lo = 1 << b_lo
    m_hi = 1 << b_hi
    m1 = 1 << b1
    m2 = 1 << b2
    for i in range(amps.size >> 2):
        j = ((i >> b_lo) << (b_lo + 1)) | (i & (m_lo - 1))
        base = ((j >> b_hi) << (b_hi + 1)) | (j & (m_hi - 1))
        i0 = base
        i1 = base | m2
        i2 = base | m1
        i3 = base | m1 | m2
        a0 = amps[i0]
        a1 = amps[i1]
        a2 = amps[i2]
        a3 = amps[i3]
        amps[i0] = g[0, 0] * a0 + g[0, 1] * a1 + g[0, 2] * a2 + g[0, 3] * a3
        amps[i1] = g[1, 0] * a0 + g[1, 1] * a1 + g[1, 2] * a2 + g[1, 3] * a3
        amps[i2] = g[2, 0] * a0 + g[2, 1] * a1 + g[2, 2] * a2 + g[2, 3] * a3
        amps[i3] = g[3, 0] * a0 + g[3, 1] * a1 + g[3, 2] * a2 + g[3, 3] * a3


@njit(cache=True)
def _kernel_one_qubit(amps, g, b):
    m = 1 << b
    for i in range(amps.size >> 1):
        i0 = ((i >> b) << (b + 1)) | (i & (m - 1))
        i1 = i0 | m
        a0 = amps[i0]
        a1 = amps[i1]
        amps[i0] = g[0, 0] * a0 + g[0, 1] * a1
        amps[i1] = g[1, 0] * a0 + g[1, 1] * a1


def apply_two_qubit_gate(
    state: StateVector, gate: np.ndarray, q1: int, q2: int
) -> StateVector:
    """Apply a 4x4 unitary to the ordered pair (q1, q2), in place.

    The pair may be non-adjacent and in either order; the first tensor
    factor of the gate acts on q1.
    """
    n = state.num_qubits
    _check_site(n, q1)
    _check_site(n, q2)
    if q1 == q2:
        raise ValueError("q1 and q2 must differ")
    g = np.ascontiguousarray(gate, dtype=np.complex128)
    if g.shape != (4, 4):
        raise ValueError("two-qubit gate must be 4x4")
    _kernel_two_qubit(state.amplitudes, g, n - q1, n - q2)
    return state


def apply_one_qubit_gate(state: StateVector, gate: np.ndarray, q: int) -> StateVector:
    """Apply a 2x2 unitary to qubit q, in place."""
    n = state.num_qubits
    _check_site(n, q)
    g = np.ascontiguousarray(gate, dtype=np.complex128)
    if g.shape != (2, 2):
        raise ValueError("one-qubit gate must be 2x2")
    _kernel_one_qubit(state.amplitudes, g, n - q)
    return state


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def pauli_matrix(axis: str) -> np.ndarray:
    try:
        return _PAULI[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}") from None


def apply_pauli(state: StateVector, site: int, axis: str) -> StateVector:
    """Multiply the state by a single-site Pauli operator, in place."""
    return apply_one_qubit_gate(state, pauli_matrix(axis), site)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> with conjugation on a."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("states live on different qubit counts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
