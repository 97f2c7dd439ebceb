"""Two-qubit gate families, canonical (Weyl chamber) parameters and the
dual-unitarity predicate.

Gate matrices act on the computational basis |00>, |01>, |10>, |11>
with the first ket factor belonging to the first qubit of a pair.
All builders return freshly allocated immutable arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .statevec import Seed, pauli_matrix

DEFAULT_PHI = 0.6

FAMILIES = ("DualUnitaryKicked", "ExpXXZ", "RandomKicked")

_SX = pauli_matrix("x")
_SY = pauli_matrix("y")
_SZ = pauli_matrix("z")
_ID2 = np.eye(2, dtype=np.complex128)

# Magic (Bell) basis columns; transforms local gates into SO(4).
_MAGIC = np.array(
    [
        [1, 0, 0, 1j],
        [0, 1j, 1, 0],
        [0, 1j, -1, 0],
        [1, 0, 0, -1j],
    ],
    dtype=np.complex128,
) / np.sqrt(2)


@dataclass(frozen=True)
class GateSpec:
    """Recipe for one of the three two-qubit gate families.

    h_x and h_z default to cos(phi) and sin(phi) as in the exponential
    XXZ construction; scale multiplies the pi/4 two-body prefactor.
    """

    family: str
    a_z: float = 0.5
    phi: float = DEFAULT_PHI
    h_x: Optional[float] = None
    h_z: Optional[float] = None
    scale: float = 1.0
    kick_seed: Optional[Seed] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown gate family {self.family!r}")

    @property
    def field_x(self) -> float:
        return np.cos(self.phi) if self.h_x is None else self.h_x

    @property
    def field_z(self) -> float:
        return np.sin(self.phi) if self.h_z is None else self.h_z

    def to_dict(self) -> dict:
        d = {"family": self.family, "a_z": self.a_z, "phi": self.phi,
             "scale": self.scale}
        if self.h_x is not None:
            d["h_x"] = self.h_x
        if self.h_z is not None:
            d["h_z"] = self.h_z
        if self.kick_seed is not None:
            d["kick_seed"] = {"master_seed": self.kick_seed.master_seed,
                              "stream_id": self.kick_seed.stream_id}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GateSpec":
        d = dict(d)
        ks = d.pop("kick_seed", None)
        if ks is not None:
            ks = Seed(int(ks["master_seed"]), int(ks.get("stream_id", 0)))
        return cls(kick_seed=ks, **d)


def check_unitary(u: np.ndarray, tol: float = 1e-12) -> None:
    dev = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2)
    if dev > tol:
        raise ValueError(f"matrix is not unitary (deviation {dev:.2e})")


def build_W(a_z: float, scale: float = 1.0) -> np.ndarray:
    """exp(-i*scale*(pi/4)(XX + YY + a_z ZZ)) in closed form.

    |00> and |11> pick up a pure ZZ phase; |01>, |10> mix through a 2x2
    rotation because XX+YY flips both middle states onto each other.
    """
    th = scale * np.pi / 4
    w = np.zeros((4, 4), dtype=np.complex128)
    edge = np.exp(-1j * a_z * th)
    w[0, 0] = edge
    w[3, 3] = edge
    mid = np.exp(1j * a_z * th)
    c, s = np.cos(2 * th), np.sin(2 * th)
    w[1, 1] = mid * c
    w[2, 2] = mid * c
    w[1, 2] = -1j * mid * s
    w[2, 1] = -1j * mid * s
    return w


def build_V(phi: float) -> np.ndarray:
    """exp(-i(cos(phi) X + sin(phi) Z)); the generator squares to 1."""
    g = np.cos(phi) * _SX + np.sin(phi) * _SZ
    return np.cos(1.0) * _ID2 - 1j * np.sin(1.0) * g


def build_dual_unitary_kicked(spec: GateSpec) -> np.ndarray:
    """Kicked XXZ gate (V (x) V) W, with W applied to the state first."""
    if spec.family != "DualUnitaryKicked":
        raise ValueError(f"spec family is {spec.family!r}, not DualUnitaryKicked")
    v = build_V(spec.phi)
    return np.kron(v, v) @ build_W(spec.a_z, spec.scale)


def xxz_hamiltonian(a_z: float, h_x: float, h_z: float) -> np.ndarray:
    """pi/4 (XX + YY + a_z ZZ) + h_x (X1+X2) + h_z (Z1+Z2)."""
    h = (np.pi / 4) * (
        np.kron(_SX, _SX) + np.kron(_SY, _SY) + a_z * np.kron(_SZ, _SZ)
    )
    h += h_x * (np.kron(_SX, _ID2) + np.kron(_ID2, _SX))
    h += h_z * (np.kron(_SZ, _ID2) + np.kron(_ID2, _SZ))
    return h


def build_exp_xxz(spec: GateSpec) -> np.ndarray:
    """exp(-i*scale*H) of the XXZ Hamiltonian with single-site fields,
    via exact eigendecomposition of the 4x4 Hermitian generator."""
    if spec.family != "ExpXXZ":
        raise ValueError(f"spec family is {spec.family!r}, not ExpXXZ")
    h = xxz_hamiltonian(spec.a_z, spec.field_x, spec.field_z)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * spec.scale * evals)) @ evecs.conj().T


def build_gate(spec: GateSpec) -> np.ndarray:
    """Fixed-gate dispatch; RandomKicked gates are drawn per step by the
    circuit expander, not here."""
    if spec.family == "DualUnitaryKicked":
        return build_dual_unitary_kicked(spec)
    if spec.family == "ExpXXZ":
        return build_exp_xxz(spec)
    raise ValueError(f"family {spec.family!r} has no fixed gate matrix")


def haar_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix with
    the R-diagonal phase fix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample_random_kick(seed: Seed) -> np.ndarray:
    """First Haar 2x2 unitary of the stream identified by the seed."""
    return haar_unitary(seed.rng())


def canonical_params(gate: np.ndarray) -> tuple[float, float, float]:
    """Canonical interaction content (a_x, a_y, a_z) of a two-qubit gate.

    The gate is taken to the magic basis where local unitaries become
    real orthogonal; the eigenphases of m = M^T M then encode the Weyl
    chamber point. Each coordinate is folded into [0, pi/4], expressed
    in units of pi/4 and sorted descending, which makes the result
    invariant under single-qubit dressing on either side.
    """
    u = np.asarray(gate, dtype=np.complex128)
    if u.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    check_unitary(u)
    su = u / np.linalg.det(u) ** 0.25
    m_magic = _MAGIC.conj().T @ su @ _MAGIC
    m = m_magic.T @ m_magic
    # Eigenvalues exp(-2i theta_k); any branch/pairing error shifts the
    # derived coordinates by multiples of pi/2, absorbed by the folding.
    theta = np.angle(np.linalg.eigvals(m)) / 2.0
    c = np.array(
        [
            (theta[0] + theta[1]) / 2,
            (theta[1] + theta[2]) / 2,
            (theta[0] + theta[2]) / 2,
        ]
    )
    c = np.mod(c, np.pi / 2)
    c = np.where(c > np.pi / 4, np.pi / 2 - c, c)
    a = np.sort(np.abs(c))[::-1] / (np.pi / 4)
    return (float(a[0]), float(a[1]), float(a[2]))


def reshuffle(gate: np.ndarray) -> np.ndarray:
    """Space-time reshuffled matrix: row (i,k), column (j,l) taken from
    U with row (i,j), column (k,l)."""
    return (
        np.asarray(gate, dtype=np.complex128)
        .reshape(2, 2, 2, 2)
        .transpose(0, 2, 1, 3)
        .reshape(4, 4)
    )


def is_dual_unitary(gate: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff the space-time reshuffling of the gate is unitary."""
    check_unitary(np.asarray(gate, dtype=np.complex128))
    ut = reshuffle(gate)
    dev = np.linalg.norm(ut.conj().T @ ut - np.eye(4), 2)
    return bool(dev <= tol)
