import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qtmachines.errors import DomainError
from qtmachines.operators import (
    fock_state,
    haar_unitary,
    pure_state,
    random_density_matrix,
    random_hermitian,
    von_neumann_entropy,
)
from qtmachines.passivity import ergotropy, is_passive, passive_state, passive_states

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def brute_force_passive_energy(rho, H):
    """Minimum of sum_k p_sigma(k) E_k over all permutations of the spectrum."""
    p = np.linalg.eigvalsh(rho)
    E = np.linalg.eigvalsh(H)
    return min(float(np.dot(p[list(perm)], E)) for perm in itertools.permutations(range(len(p))))


def test_excited_qubit_ergotropy_is_omega():
    H = np.diag([0.0, 1.0])
    d = passive_state(fock_state(1, 2), H)
    assert d.ergotropy == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(d.passive_state.matrix, np.diag([1.0, 0.0]))


def test_diagonal_example_against_permutations():
    rho = np.diag([0.5, 0.2, 0.3])
    H = np.diag([0.0, 1.0, 2.0])
    d = passive_state(rho, H)
    assert d.energy == pytest.approx(0.8)
    assert d.passive_energy == pytest.approx(brute_force_passive_energy(rho, H), abs=1e-14)
    assert d.ergotropy == pytest.approx(0.1, abs=1e-14)
    # eigvalsh order of rho is (0.2, 0.3, 0.5): ground level gets index 2
    assert d.permutation == (2, 1, 0)


def test_plus_state_ergotropy_against_unitary_scan():
    H = np.diag([0.0, 1.0])
    rho = pure_state([1, 1]).matrix
    assert ergotropy(rho, H) == pytest.approx(0.5, abs=1e-14)
    # the best unitary on a grid of qubit rotations reaches the same value
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1, -1])
    best = 0.0
    for th in np.linspace(0, 2 * np.pi, 361):
        for ph in np.linspace(0, 2 * np.pi, 73):
            U = expm(-1j * ph / 2 * sz) @ expm(-1j * th / 2 * sy)
            out = U @ rho @ U.conj().T
            best = max(best, np.trace(rho @ H).real - np.trace(out @ H).real)
    assert best == pytest.approx(0.5, abs=1e-4)
    assert best <= 0.5 + 1e-12


@settings(max_examples=80, deadline=None)
@given(seed=seeds, dim=st.integers(2, 5))
def test_passive_energy_matches_permutation_oracle(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(dim, rng).matrix
    H = random_hermitian(dim, rng)
    d = passive_state(rho, H)
    assert d.passive_energy == pytest.approx(brute_force_passive_energy(rho, H), abs=1e-10)
    assert d.ergotropy >= -1e-12


@settings(max_examples=60, deadline=None)
@given(seed=seeds, dim=st.integers(2, 6))
def test_passive_state_properties(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(dim, rng).matrix
    H = random_hermitian(dim, rng)
    pi = passive_state(rho, H).passive_state.matrix
    # same spectrum, so same entropy
    assert np.allclose(np.linalg.eigvalsh(pi), np.linalg.eigvalsh(rho), atol=1e-12)
    assert von_neumann_entropy(pi) == pytest.approx(von_neumann_entropy(rho), abs=1e-10)
    # commutes with H, populations non-increasing in energy
    assert np.linalg.norm(pi @ H - H @ pi) < 1e-10
    E, V = np.linalg.eigh(H)
    pops = np.einsum("ik,ij,jk->k", V.conj(), pi, V).real
    assert np.all(np.diff(pops) <= 1e-12)
    assert is_passive(pi, H)
    # no unitary lowers the passive energy
    U = haar_unitary(dim, rng)
    assert np.trace(U @ pi @ U.conj().T @ H).real >= np.trace(pi @ H).real - 1e-10


def test_gibbs_like_state_is_passive():
    H = np.diag([0.0, 1.0, 3.0])
    assert is_passive(np.diag([0.6, 0.3, 0.1]), H)
    assert not is_passive(np.diag([0.3, 0.6, 0.1]), H)
    # diagonal populations passive but coherent: not passive
    rho = np.array([[0.7, 0.2, 0], [0.2, 0.3, 0], [0, 0, 0]])
    assert not is_passive(rho, H)


def test_batched_passive_states_agree_with_single():
    rng = np.random.default_rng(5)
    rhos = np.stack([random_density_matrix(3, rng).matrix for _ in range(6)])
    Hs = np.stack([random_hermitian(3, rng) for _ in range(6)])
    batch = passive_states(rhos, Hs)
    for k in range(6):
        assert np.allclose(batch[k], passive_state(rhos[k], Hs[k]).passive_state.matrix, atol=1e-12)
    shared = passive_states(rhos, Hs[0])
    assert np.allclose(shared[2], passive_state(rhos[2], Hs[0]).passive_state.matrix, atol=1e-12)


def test_degenerate_hamiltonian():
    H = np.diag([0.0, 1.0, 1.0])
    rho = np.diag([0.1, 0.3, 0.6])
    d = passive_state(rho, H)
    assert d.passive_energy == pytest.approx(0.4)
    assert d.ergotropy == pytest.approx(0.5)


def test_shape_mismatch():
    with pytest.raises(DomainError):
        passive_state(np.eye(2) / 2, np.eye(3))
