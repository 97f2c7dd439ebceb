"""Floquet step expansion, time evolution, and the maximal-rank law.

A circuit configuration is a topology (staircase, brick-wall, or the
layered A/B control circuit), a boundary condition, a qubit count and a
two-qubit gate spec. One Floquet step is an ordered list of
(matrix, q1, q2) triples applied to the state left to right.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .gates import GateSpec, build_W, build_gate, haar_unitary
from .statevec import StateVector, apply_two_qubit_gate

KINDS = ("S", "BW", "LayeredAB")
BOUNDARIES = ("OBC", "PBC")


@dataclass(frozen=True)
class CircuitConfig:
    kind: str
    boundary: str
    n: int
    gate_spec: GateSpec
    layers: int = 4  # LayeredAB only: brick-wall sub-steps per half
    even_layer_first: bool = False  # BW: swap the two sublattice layers

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown circuit kind {self.kind!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.n % 2 != 0 or self.n < 4:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if self.kind == "LayeredAB":
            if self.boundary != "OBC":
                raise ValueError("LayeredAB is defined for OBC only")
            if self.layers < 1:
                raise ValueError("LayeredAB needs at least one layer")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "boundary": self.boundary, "n": self.n,
             "gate_spec": self.gate_spec.to_dict()}
        if self.kind == "LayeredAB":
            d["layers"] = self.layers
        if self.even_layer_first:
            d["even_layer_first"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitConfig":
        d = dict(d)
        d["gate_spec"] = GateSpec.from_dict(d["gate_spec"])
        return cls(**d)


def _bw_pairs(first: int, last: int) -> tuple[list, list]:
    """Odd and even sublattice pair layers of a brick wall on an
    inclusive qubit range."""
    odd = [(q, q + 1) for q in range(first, last, 2)]
    even = [(q, q + 1) for q in range(first + 1, last, 2)]
    return odd, even


def step_pairs(config: CircuitConfig) -> list[tuple[int, int]]:
    """Ordered qubit pairs of one Floquet step."""
    n = config.n
    if config.kind == "S":
        pairs = [(q, q + 1) for q in range(1, n)]
        if config.boundary == "PBC":
            pairs.append((n, 1))
        return pairs
    if config.kind == "BW":
        odd, even = _bw_pairs(1, n)
        if config.boundary == "PBC":
            even = even + [(n, 1)]
        return even + odd if config.even_layer_first else odd + even
    # LayeredAB: layers complete brick-wall sub-steps on each half,
    # coupled by one gate across the cut; the A block acts first.
    half = n // 2
    odd_a, even_a = _bw_pairs(1, half)
    odd_b, even_b = _bw_pairs(half + 1, n)
    block_a = (odd_a + even_a) * config.layers
    block_b = (odd_b + even_b) * config.layers
    return block_a + [(half, half + 1)] + block_b


class FloquetStep:
    """Materialized gate list for one period: (matrix, q1, q2) triples.

    fresh_kicks marks the RandomKicked family, where a new step must be
    drawn for every period instead of reusing this list.
    """

    def __init__(self, gates: list, fresh_kicks: bool = False):
        self.gates = gates
        self.fresh_kicks = fresh_kicks

    def __len__(self) -> int:
        return len(self.gates)

    def inverted(self) -> "FloquetStep":
        inv = [(g.conj().T, q1, q2) for g, q1, q2 in reversed(self.gates)]
        return FloquetStep(inv, self.fresh_kicks)

    def apply(self, state: StateVector) -> StateVector:
        for g, q1, q2 in self.gates:
            apply_two_qubit_gate(state, g, q1, q2)
        return state


def build_step(
    config: CircuitConfig, rng: Optional[np.random.Generator] = None
) -> FloquetStep:
    """Expand a config into one Floquet step.

    For the RandomKicked family an rng is required and fresh Haar kicks
    are drawn for every gate; fixed families share one gate matrix.
    """
    pairs = step_pairs(config)
    spec = config.gate_spec
    if spec.family == "RandomKicked":
        if rng is None:
            raise ValueError("RandomKicked steps need a random generator")
        w = build_W(spec.a_z, spec.scale)
        gates = []
        for q1, q2 in pairs:
            v1 = haar_unitary(rng)
            v2 = haar_unitary(rng)
            gates.append((np.kron(v1, v2) @ w, q1, q2))
        return FloquetStep(gates, fresh_kicks=True)
    g = build_gate(spec)
    return FloquetStep([(g, q1, q2) for q1, q2 in pairs])


def evolve(
    state: StateVector,
    config: CircuitConfig,
    t: int,
    rng: Optional[np.random.Generator] = None,
    callback: Optional[Callable[[int, StateVector], None]] = None,
) -> StateVector:
    """Apply t Floquet steps in place; callback(step, state) runs after
    each completed period."""
    if state.num_qubits != config.n:
        raise ValueError(
            f"state has {state.num_qubits} qubits, config expects {config.n}"
        )
    if t < 0:
        raise ValueError("t must be non-negative")
    fresh = config.gate_spec.family == "RandomKicked"
    step = None if fresh else build_step(config)
    for k in range(1, t + 1):
        if fresh:
            step = build_step(config, rng)
        step.apply(state)
        if callback is not None:
            callback(k, state)
    return state


def max_rank(config: CircuitConfig, t: int) -> int:
    """Theoretical maximal rank of the half-chain reduced density matrix
    after t steps, capped at 2^(n/2); rank 1 at t = 0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if config.kind not in ("S", "BW"):
        raise ValueError(f"no rank law for kind {config.kind!r}")
    if t == 0:
        return 1
    n = config.n
    odd_half = n % 4 == 2  # crossing gate sits in the first BW layer
    if config.kind == "BW":
        exponent = (2 * t - 1) if odd_half else 2 * t
        if config.boundary == "PBC":
            exponent = (4 * t - 1) if odd_half else 4 * t
    else:
        exponent = t if config.boundary == "OBC" else 2 * t + 1
    return min(1 << (n // 2), 1 << exponent)
