"""Dense linear algebra on small Hilbert spaces.

Units follow hbar = k_B = 1, so frequencies, energies and temperatures share
one unit.  Operators are plain complex numpy matrices underneath; the two
wrapper classes below only add validation and immutability.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .errors import DomainError, IntegrationError, NumericalError

MAX_DIM = 256
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
ENTROPY_CUTOFF = 1e-14


def _readonly(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def as_matrix(obj) -> np.ndarray:
    """Return the underlying complex ndarray of an operator-like object."""
    if isinstance(obj, (HermitianOperator, DensityMatrix)):
        return obj.matrix
    return np.asarray(obj, dtype=complex)


def _check_square(m: np.ndarray) -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    dim = m.shape[0]
    if dim < 1 or dim > MAX_DIM:
        raise DomainError(f"dimension {dim} outside [1, {MAX_DIM}]")
    return dim


def _hermitian_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


class HermitianOperator:
    """Immutable Hermitian matrix (observable or Hamiltonian).

    Hermiticity is checked to 1e-12 relative to the largest element, so a
    number operator on 200 levels is judged on the same footing as a Pauli
    matrix.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        m = as_matrix(matrix)
        _check_square(m)
        scale = max(1.0, float(np.max(np.abs(m))))
        if _hermitian_defect(m) > tol * scale:
            raise DomainError("matrix is not Hermitian")
        self.matrix = _readonly(0.5 * (m + m.conj().T))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class DensityMatrix:
    """Immutable density matrix: Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        m = as_matrix(matrix)
        _check_square(m)
        if _hermitian_defect(m) > tol:
            raise DomainError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"density matrix trace {tr!r} differs from 1")
        if np.linalg.eigvalsh(m)[0] < -POSITIVITY_TOL:
            raise DomainError("density matrix has a negative eigenvalue")
        self.matrix = _readonly(m)

    @classmethod
    def _trusted(cls, matrix: np.ndarray) -> "DensityMatrix":
        # skips validation for states this module has just built itself
        obj = cls.__new__(cls)
        obj.matrix = _readonly(matrix)
        return obj

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def eigh(A) -> EigenSystem:
    """Eigendecomposition with ascending eigenvalues.

    Inside a degenerate block the eigenvectors are ordered by the basis index
    of their largest component, which keeps the output stable with respect
    to the input basis order.
    """
    m = as_matrix(A)
    _check_square(m)
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = _stable_level_order(values, vectors)
    values = values[order]
    vectors = vectors[:, order]
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenSystem(values, vectors)


def _stable_level_order(values: np.ndarray, vectors: np.ndarray,
                        tol: float = 1e-12) -> np.ndarray:
    dim = values.shape[0]
    scale = max(1.0, float(np.max(np.abs(values)))) if dim else 1.0
    anchor = np.argmax(np.abs(vectors), axis=0)
    order = np.arange(dim)
    start = 0
    while start < dim:
        stop = start + 1
        while stop < dim and values[stop] - values[start] <= tol * scale:
            stop += 1
        if stop - start > 1:
            block = np.arange(start, stop)
            order[start:stop] = block[np.argsort(anchor[block], kind="stable")]
        start = stop
    return order


def von_neumann_entropy(rho) -> float:
    """-Tr(rho ln rho), ignoring eigenvalues at or below 1e-14."""
    lam = np.linalg.eigvalsh(as_matrix(rho))
    lam = lam[lam > ENTROPY_CUTOFF]
    return float(-np.sum(lam * np.log(lam)))


def entropies(states: np.ndarray) -> np.ndarray:
    """Batched von Neumann entropy of a stack of density matrices."""
    lam = np.linalg.eigvalsh(states)
    safe = np.where(lam > ENTROPY_CUTOFF, lam, 1.0)
    return -np.sum(np.where(lam > ENTROPY_CUTOFF, lam * np.log(safe), 0.0), axis=-1)


def gibbs_state(H, T: float) -> DensityMatrix:
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")
    eig = eigh(H)
    weights = np.exp(-(eig.values - eig.values[0]) / T)
    weights /= weights.sum()
    return DensityMatrix._trusted((eig.vectors * weights) @ eig.vectors.conj().T)


def expectation(rho, op) -> float:
    return float(np.trace(as_matrix(rho) @ as_matrix(op)).real)


def commutator(A, B) -> np.ndarray:
    a, b = as_matrix(A), as_matrix(B)
    return a @ b - b @ a


def trace_distance(rho, sigma) -> float:
    lam = np.linalg.eigvalsh(as_matrix(rho) - as_matrix(sigma))
    return 0.5 * float(np.sum(np.abs(lam)))


def bose_occupancy(omega: float, T: float) -> float:
    """Mean thermal quanta of a bosonic mode, 1/(exp(omega/T) - 1)."""
    if not omega > 0:
        raise DomainError(f"mode frequency must be positive, got {omega}")
    if T < 0:
        raise DomainError(f"temperature must be non-negative, got {T}")
    if T == 0:
        return 0.0
    x = omega / T
    if x > 700.0:
        return float(np.exp(-x))
    return float(1.0 / np.expm1(x))


# --- constructors -----------------------------------------------------------

def fock_space(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and number operators on the truncated basis |0>..|dim-1>."""
    if dim < 2 or dim > MAX_DIM:
        raise DomainError(f"Fock dimension must be in [2, {MAX_DIM}], got {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    return a, a.conj().T @ a


def fock_state(n: int, dim: int) -> DensityMatrix:
    if not 0 <= n < dim:
        raise DomainError(f"level {n} not in truncated space of size {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return DensityMatrix._trusted(rho)


def coherent_ket(alpha: complex, dim: int, tail_tol: float = 1e-8) -> np.ndarray:
    """Truncated, renormalised coherent-state amplitudes."""
    n = np.arange(dim)
    mag = abs(alpha)
    if mag == 0:
        ket = np.zeros(dim, dtype=complex)
        ket[0] = 1.0
        return ket
    log_amp = -0.5 * mag**2 + n * np.log(mag) - 0.5 * np.array([lgamma(k + 1) for k in n])
    ket = np.exp(log_amp) * np.exp(1j * np.angle(alpha) * n)
    kept = float(np.sum(np.abs(ket) ** 2))
    if 1.0 - kept > tail_tol:
        raise DomainError(
            f"coherent state alpha={alpha} loses {1 - kept:.2e} beyond dim={dim}; "
            "increase the truncation")
    return ket / np.sqrt(kept)


def coherent_state(alpha: complex, dim: int) -> DensityMatrix:
    ket = coherent_ket(alpha, dim)
    return DensityMatrix._trusted(np.outer(ket, ket.conj()))


def pure_state(ket) -> DensityMatrix:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix._trusted(np.outer(ket, ket.conj()))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = r.diagonal()
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Dirichlet(1) spectrum conjugated by a Haar-random unitary."""
    spectrum = rng.dirichlet(np.ones(dim))
    u = haar_unitary(dim, rng)
    rho = (u * spectrum) @ u.conj().T
    return DensityMatrix._trusted(0.5 * (rho + rho.conj().T))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (z + z.conj().T)


# --- clamping for integrated states -------------------------------------------

def clamp_states(states: np.ndarray, fail_tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Project a stack of integrated states back onto the state space.

    Each matrix is symmetrised, negative eigenvalues down to ``-fail_tol``
    are set to zero and the trace is renormalised.  Returns the cleaned
    stack and the most negative eigenvalue seen.  Anything below
    ``-fail_tol`` raises :class:`IntegrationError`.
    """
    states = 0.5 * (states + np.conj(np.swapaxes(states, -1, -2)))
    lam, vec = np.linalg.eigh(states)
    worst = float(lam[..., 0].min())
    if worst < -fail_tol:
        raise IntegrationError(
            f"state lost positivity (eigenvalue {worst:.3e}); reduce the time step")
    bad = lam[..., 0] < 0
    if np.any(bad):
        lam_b = np.clip(lam[bad], 0.0, None)
        vec_b = vec[bad]
        states[bad] = (vec_b * lam_b[:, None, :]) @ np.conj(np.swapaxes(vec_b, -1, -2))
    tr = np.trace(states, axis1=-2, axis2=-1).real
    states = states / tr[..., None, None]
    return states, min(worst, 0.0)

