import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floqrelax import (
    Seed,
    StateVector,
    apply_pauli,
    apply_two_qubit_gate,
    inner_product,
    random_product_state,
)
from floqrelax.gates import haar_unitary
from floqrelax.observables import purity, reduced_density

from conftest import dense_two_qubit


def random_state(n, rng):
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    amps /= np.linalg.norm(amps)
    return StateVector(n, amps)


class TestRandomProductState:
    def test_norm(self):
        for n in (2, 4, 8, 12):
            st_ = random_product_state(n, Seed(7))
            assert abs(st_.norm() - 1.0) < 1e-12

    def test_every_contiguous_bipartition_is_rank_one(self):
        st_ = random_product_state(8, Seed(3))
        for cut in range(1, 8):
            m = st_.amplitudes.reshape(1 << cut, -1)
            s = np.linalg.svd(m, compute_uv=False)
            assert abs(np.sum(s**4) - 1.0) < 1e-12  # purity of the cut

    def test_deterministic(self):
        a = random_product_state(8, Seed(99, 5))
        b = random_product_state(8, Seed(99, 5))
        assert np.array_equal(a.amplitudes, b.amplitudes)

    def test_different_streams_differ(self):
        a = random_product_state(8, Seed(99, 0))
        b = random_product_state(8, Seed(99, 1))
        assert not np.allclose(a.amplitudes, b.amplitudes)

    @pytest.mark.parametrize("n", [3, 0, 1, 28])
    def test_rejects_bad_n(self, n):
        with pytest.raises(ValueError):
            random_product_state(n, Seed(0))

    def test_haar_moment(self):
        # mean |<0|chi>|^2 over Haar single-qubit states is 1/2
        rng = Seed(5).rng()
        vals = []
        for _ in range(20000):
            z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            z /= np.linalg.norm(z)
            vals.append(abs(z[0]) ** 2)
        assert abs(np.mean(vals) - 0.5) < 0.01


class TestApplyTwoQubitGate:
    def test_identity_leaves_state(self, rng):
        st_ = random_state(4, rng)
        before = st_.amplitudes.copy()
        apply_two_qubit_gate(st_, np.eye(4), 2, 4)
        assert np.allclose(st_.amplitudes, before, atol=1e-15)

    def test_swap_raises_rank_one_to_four(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        st_ = StateVector(4, np.kron(bell, bell))
        swap = np.eye(4)[[0, 2, 1, 3]]
        assert np.linalg.matrix_rank(reduced_density(st_), tol=1e-10) == 1
        apply_two_qubit_gate(st_, swap, 2, 3)
        rho = reduced_density(st_)
        assert np.linalg.matrix_rank(rho, tol=1e-10) == 4
        assert np.allclose(np.linalg.eigvalsh(rho), 0.25, atol=1e-12)

    @pytest.mark.parametrize("pair", [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3)])
    def test_matches_dense_oracle(self, pair, rng):
        g = haar_unitary(rng, 4)
        amps = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        amps /= np.linalg.norm(amps)
        st_ = StateVector.__new__(StateVector)  # n=3 is odd, bypass ctor check
        st_.num_qubits = 3
        st_.amplitudes = amps.copy()
        from floqrelax.statevec import _kernel_two_qubit

        _kernel_two_qubit(st_.amplitudes, np.ascontiguousarray(g), 3 - pair[0], 3 - pair[1])
        expected = dense_two_qubit(g, *pair, 3) @ amps
        assert np.abs(st_.amplitudes - expected).max() < 1e-12

    def test_nonadjacent_wraparound_pair(self, rng):
        g = haar_unitary(rng, 4)
        amps = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        amps /= np.linalg.norm(amps)
        st_ = StateVector(4, amps.copy())
        apply_two_qubit_gate(st_, g, 4, 1)
        expected = dense_two_qubit(g, 4, 1, 4) @ amps
        assert np.abs(st_.amplitudes - expected).max() < 1e-12

    def test_rejects_bad_pairs(self, rng):
        st_ = random_state(4, rng)
        with pytest.raises(ValueError):
            apply_two_qubit_gate(st_, np.eye(4), 2, 2)
        with pytest.raises(ValueError):
            apply_two_qubit_gate(st_, np.eye(4), 0, 2)
        with pytest.raises(ValueError):
            apply_two_qubit_gate(st_, np.eye(4), 1, 5)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_disjoint_gates_commute(self, seed):
        rng = np.random.default_rng(seed)
        g1, g2 = haar_unitary(rng, 4), haar_unitary(rng, 4)
        amps = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        amps /= np.linalg.norm(amps)
        a = StateVector(6, amps.copy())
        b = StateVector(6, amps.copy())
        apply_two_qubit_gate(apply_two_qubit_gate(a, g1, 1, 4), g2, 2, 6)
        apply_two_qubit_gate(apply_two_qubit_gate(b, g2, 2, 6), g1, 1, 4)
        assert np.abs(a.amplitudes - b.amplitudes).max() < 1e-12

    def test_norm_conserved_over_many_gates(self, rng):
        st_ = random_state(6, rng)
        for k in range(200):
            q1 = int(rng.integers(1, 7))
            q2 = int(rng.integers(1, 7))
            if q1 == q2:
                continue
            apply_two_qubit_gate(st_, haar_unitary(rng, 4), q1, q2)
        assert abs(st_.norm() - 1.0) < 1e-10 * 200


class TestPauli:
    def test_z_on_zero_state(self):
        st_ = StateVector.computational_basis(4)
        before = st_.amplitudes.copy()
        apply_pauli(st_, 2, "z")
        assert np.array_equal(st_.amplitudes, before)

    def test_x_involution(self, rng):
        st_ = random_state(4, rng)
        before = st_.amplitudes.copy()
        apply_pauli(apply_pauli(st_, 3, "x"), 3, "x")
        assert np.allclose(st_.amplitudes, before, atol=1e-15)

    def test_xz_anticommute(self, rng):
        st_ = random_state(4, rng)
        before = st_.amplitudes.copy()
        for axis in ("x", "z", "x", "z"):
            apply_pauli(st_, 1, axis)
        assert np.allclose(st_.amplitudes, -before, atol=1e-15)

    def test_rejects_bad_site_and_axis(self, rng):
        st_ = random_state(4, rng)
        with pytest.raises(ValueError):
            apply_pauli(st_, 5, "x")
        with pytest.raises(ValueError):
            apply_pauli(st_, 1, "w")


class TestInnerProduct:
    def test_self_overlap(self, rng):
        st_ = random_state(4, rng)
        assert abs(inner_product(st_, st_) - 1.0) < 1e-12

    def test_orthogonal_basis_states(self):
        a = StateVector.computational_basis(4, 0)
        b = StateVector.computational_basis(4, 7)
        assert inner_product(a, b) == 0

    def test_conjugate_symmetry(self, rng):
        a, b = random_state(4, rng), random_state(4, rng)
        assert abs(inner_product(a, b) - np.conj(inner_product(b, a))) < 1e-14

    def test_rejects_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            inner_product(random_state(4, rng), random_state(6, rng))
