"""Passive states and ergotropy.

The passive counterpart of a state keeps its spectrum but hands the largest
eigenvalue to the lowest energy level, the next largest to the next level,
and so on.  It is the unitary orbit's minimum-energy member, so the energy
difference to it is the maximal cyclically extractable work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .operators import (
    DensityMatrix,
    _stable_level_order,
    as_matrix,
    commutator,
    eigh,
)

DEFAULT_PASSIVE_TOL = 1e-9


@dataclass(frozen=True)
class PassiveDecomposition:
    """Passive counterpart of a state together with its ergotropy.

    ``permutation[k]`` is the index (in ascending eigenvalue order, as
    returned by ``eigh``) of the state eigenvalue placed on energy level
    ``k``, levels counted upward from the ground state.
    """

    passive_state: DensityMatrix
    ergotropy: float
    permutation: tuple[int, ...]
    energy: float
    passive_energy: float


def _descending(values: np.ndarray) -> np.ndarray:
    return np.argsort(-values, kind="stable")


def passive_state(rho, H) -> PassiveDecomposition:
    r = as_matrix(rho)
    h = as_matrix(H)
    if r.shape != h.shape:
        raise DomainError(f"state shape {r.shape} does not match Hamiltonian {h.shape}")
    levels = eigh(h)
    lam = np.linalg.eigvalsh(r)
    order = _descending(lam)
    pops = lam[order]
    pi = (levels.vectors * pops) @ levels.vectors.conj().T
    energy = float(np.trace(r @ h).real)
    passive_energy = float(np.dot(pops, levels.values))
    return PassiveDecomposition(
        passive_state=DensityMatrix._trusted(0.5 * (pi + pi.conj().T)),
        ergotropy=energy - passive_energy,
        permutation=tuple(int(i) for i in order),
        energy=energy,
        passive_energy=passive_energy,
    )


def ergotropy(rho, H) -> float:
    return passive_state(rho, H).ergotropy


def is_passive(rho, H, tol: float = DEFAULT_PASSIVE_TOL) -> bool:
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    if ergotropy(rho, H) > tol:
        return False
    return float(np.linalg.norm(commutator(rho, H))) <= tol


def passive_states(states: np.ndarray, hamiltonians: np.ndarray) -> np.ndarray:
    """Passive counterparts of a stack of states.

    ``hamiltonians`` is either one matrix shared by all states or a stack of
    the same length.  Used by the ledger, where thousands of samples need
    the same treatment as :func:`passive_state`.
    """
    states = np.asarray(states, dtype=complex)
    hamiltonians = np.asarray(hamiltonians, dtype=complex)
    lam = np.linalg.eigvalsh(states)[..., ::-1]
    # eigvalsh is ascending; reversing gives descending order with ties
    # resolved last-first, which is harmless since tied values are equal.
    if hamiltonians.ndim == 2:
        e = eigh(hamiltonians)
        vecs = np.broadcast_to(np.asarray(e.vectors), states.shape)
    else:
        if hamiltonians.shape != states.shape:
            raise DomainError("need one Hamiltonian per state")
        vals, vecs = np.linalg.eigh(hamiltonians)
        gaps = np.diff(vals, axis=-1)
        scale = np.maximum(1.0, np.max(np.abs(vals), axis=-1, keepdims=True))
        degenerate = np.any(gaps <= 1e-12 * scale, axis=-1)
        if np.any(degenerate):
            vecs = vecs.copy()
            for k in np.flatnonzero(degenerate):
                vecs[k] = vecs[k][:, _stable_level_order(vals[k], vecs[k])]
    pi = (vecs * lam[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))
    return 0.5 * (pi + np.conj(np.swapaxes(pi, -1, -2)))
