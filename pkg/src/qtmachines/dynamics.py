"""Markovian (GKLS) propagation of density matrices.

Each bath channel contributes a lowering jump ``L`` weighted by ``N + 1`` and
its adjoint weighted by ``N``.  A squeezed channel adds the two anomalous
terms ``-gamma*M*(L^+ rho L^+ - {L^+ L^+, rho}/2)`` and the same with
``L``, where

    N = n cosh(2r) + sinh(r)**2,      M = -(n + 1/2) sinh(2r)

(squeezing phase fixed to zero).  The anomalous terms only make sense in the
frame co-rotating with the mode, so a squeezed channel should be paired with
the Hamiltonian in that frame; for a single mode ``omega * a^+ a`` that is
the zero matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DomainError, IntegrationError
from .operators import (
    DensityMatrix,
    as_matrix,
    bose_occupancy,
    clamp_states,
)

# dense Liouville-space propagator is used below this dimension
_DENSE_LIOUVILLE_DIM = 12
# step safety factors: plain stability, and ledger quadratures at ~1e-5
STABLE_SAFETY = 0.1
LEDGER_SAFETY = 0.005


@dataclass(frozen=True)
class BathChannel:
    """One dissipative coupling.

    ``jump_operator`` is the lowering operator of the coupled transition.
    ``None`` stands for the annihilation operator of a single mode kept
    symbolic; such channels are only usable by
    :func:`oscillator_steady_moments`.
    """

    jump_operator: np.ndarray | None
    rate: float
    occupancy: float = 0.0
    squeezing: float = 0.0
    temperature: float | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise DomainError(f"rate must be non-negative, got {self.rate}")
        if self.occupancy < 0:
            raise DomainError(f"occupancy must be non-negative, got {self.occupancy}")
        if self.squeezing < 0:
            raise DomainError(f"squeezing must be non-negative, got {self.squeezing}")
        if self.jump_operator is not None:
            object.__setattr__(self, "jump_operator", np.asarray(self.jump_operator, dtype=complex))

    @classmethod
    def thermal(cls, jump_operator, rate: float, omega: float, temperature: float,
                squeezing: float = 0.0) -> "BathChannel":
        """Channel whose occupancy is the Bose factor at ``omega``."""
        return cls(jump_operator, rate, bose_occupancy(omega, temperature),
                   squeezing, temperature)

    @property
    def effective_occupancy(self) -> float:
        n, r = self.occupancy, self.squeezing
        return n * np.cosh(2 * r) + np.sinh(r) ** 2

    @property
    def anomalous(self) -> float:
        return -(self.occupancy + 0.5) * np.sinh(2 * self.squeezing)


@dataclass(frozen=True)
class HamiltonianSchedule:
    """Time-dependent Hamiltonian ``H(t)``."""

    evaluator: Callable[[float], np.ndarray]
    period: float | None = None

    def __post_init__(self):
        if self.period is None:
            return
        if not self.period > 0:
            raise DomainError(f"period must be positive, got {self.period}")
        # spot check: a few phases, one period apart
        for t in (0.0, 0.37 * self.period, 0.81 * self.period):
            a, b = self(t), self(t + self.period)
            if a.shape != b.shape or np.max(np.abs(a - b)) > 1e-12 * max(1.0, np.max(np.abs(a))):
                raise DomainError("schedule is not periodic with the declared period")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.evaluator(t), dtype=complex)

    @classmethod
    def constant(cls, H) -> "HamiltonianSchedule":
        h = np.array(as_matrix(H))
        h.setflags(write=False)
        sched = cls(lambda t: h)
        object.__setattr__(sched, "_constant", True)
        return sched

    @property
    def is_constant(self) -> bool:
        return getattr(self, "_constant", False)


ChannelSpec = Union[Sequence[BathChannel], Callable[[float], Sequence[BathChannel]]]


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution: times, states and the Hamiltonian at each sample.

    ``states`` and ``hamiltonians`` are stacked ``(samples, dim, dim)``
    arrays.  ``max_negativity`` is the most negative eigenvalue removed by
    clamping; ``trace_drift`` the largest trace error before renormalising.
    """

    times: np.ndarray
    states: np.ndarray
    hamiltonians: np.ndarray
    max_negativity: float = 0.0
    trace_drift: float = 0.0

    def __post_init__(self):
        n = len(self.times)
        if len(self.states) != n or len(self.hamiltonians) != n:
            raise DomainError("times, states and hamiltonians differ in length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.states[k])


# --- generator -----------------------------------------------------------------

class _Generator:
    """GKLS generator compiled into ``-i(G rho - rho G^+) + sum c A rho B``."""

    __slots__ = ("G", "Gd", "terms")

    def __init__(self, H: np.ndarray, channels: Sequence[BathChannel]):
        K = np.zeros_like(H)
        terms = []
        for ch in channels:
            if ch.rate == 0:
                continue
            L = ch.jump_operator
            if L is None:
                raise DomainError("symbolic channel cannot act on a density matrix")
            if L.shape != H.shape:
                raise DomainError(f"jump operator shape {L.shape} does not match {H.shape}")
            Ld = L.conj().T
            N, M = ch.effective_occupancy, ch.anomalous
            pieces = [(ch.rate * (N + 1), L, Ld), (ch.rate * N, Ld, L)]
            if M != 0:
                pieces += [(-ch.rate * M, Ld, Ld), (-ch.rate * M, L, L)]
            for c, A, B in pieces:
                if c != 0:
                    terms.append((c, A, B))
                    K = K + c * (B @ A)
        self.G = H - 0.5j * K
        self.Gd = self.G.conj().T
        self.terms = terms

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.G @ rho - rho @ self.Gd)
        for c, A, B in self.terms:
            out += c * (A @ rho @ B)
        return out

    def superoperator(self, sparse: bool = False):
        """Row-major Liouville matrix: vec(A rho B) = (A kron B^T) vec(rho)."""
        dim = self.G.shape[0]
        mod = sp if sparse else np
        conv = (lambda m: sp.csr_matrix(m)) if sparse else (lambda m: m)
        eye = sp.identity(dim, format="csr", dtype=complex) if sparse else np.eye(dim)
        out = -1j * (mod.kron(conv(self.G), eye) - mod.kron(eye, conv(self.G.conj())))
        for c, A, B in self.terms:
            out = out + c * mod.kron(conv(A), conv(B.T))
        return out.tocsc() if sparse else out


def lindblad_rhs(rho, H, channels: Sequence[BathChannel]) -> np.ndarray:
    """Time derivative of ``rho`` under ``H`` and the given channels."""
    r = as_matrix(rho)
    h = as_matrix(H)
    if r.shape != h.shape:
        raise DomainError(f"state shape {r.shape} does not match Hamiltonian {h.shape}")
    return _Generator(h, channels)(r)


def liouvillian(H, channels: Sequence[BathChannel], sparse: bool = True):
    """Generator as a matrix acting on row-major vectorised density matrices."""
    return _Generator(as_matrix(H), channels).superoperator(sparse=sparse)


def generator_scale(H, channels: Sequence[BathChannel]) -> float:
    """Rough spectral radius of the generator (used for step selection)."""
    h = as_matrix(H)
    lam = np.linalg.eigvalsh(h)
    scale = float(lam[-1] - lam[0])
    diss = 0.0
    for ch in channels:
        if ch.rate == 0 or ch.jump_operator is None:
            continue
        norm2 = np.linalg.norm(ch.jump_operator, 2) ** 2
        diss += ch.rate * (2 * ch.effective_occupancy + 1 + 2 * abs(ch.anomalous)) * norm2
    return max(scale, diss, 1e-300)


def stable_time_step(H, channels: Sequence[BathChannel], safety: float = STABLE_SAFETY,
                     drive_frequency: float = 0.0) -> float:
    """Step satisfying ``dt * scale <= safety`` for the RK4 integrator.

    ``scale`` is the larger of the generator scale and the angular frequency
    of any external drive.  ``STABLE_SAFETY`` keeps RK4 stable; ledger
    quadratures at the 1e-5 level want ``LEDGER_SAFETY``.
    """
    return safety / max(generator_scale(H, channels), abs(drive_frequency))


def _rk4_matrix(L: np.ndarray, h: float) -> np.ndarray:
    # one classical RK4 step of a linear autonomous system, as a matrix
    hL = h * L
    eye = np.eye(L.shape[0], dtype=complex)
    term = eye.copy()
    P = eye.copy()
    for k in range(1, 5):
        term = term @ hL / k
        P = P + term
    return P


def _schedule(schedule) -> HamiltonianSchedule:
    if isinstance(schedule, HamiltonianSchedule):
        return schedule
    return HamiltonianSchedule.constant(schedule)


def evolve(rho0, schedule, channels: ChannelSpec, t_end: float, dt: float,
           stride: int = 1, fail_tol: float = 1e-6) -> Trajectory:
    """Fixed-step RK4 propagation.

    ``schedule`` is a :class:`HamiltonianSchedule` or a constant matrix;
    ``channels`` a list or a callable returning the list at time ``t``.  The
    step is shrunk so that ``t_end`` is hit exactly.  States are stored every
    ``stride`` steps and clamped back to the state space; eigenvalues below
    ``-fail_tol`` abort with :class:`IntegrationError`.
    """
    if not dt > 0 or not t_end > 0:
        raise DomainError("dt and t_end must be positive")
    if stride < 1:
        raise DomainError("stride must be at least 1")
    sched = _schedule(schedule)
    rho = np.array(as_matrix(rho0), dtype=complex)
    dim = rho.shape[0]
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-9)))
    h = t_end / n_steps
    sample_idx = list(range(0, n_steps + 1, stride))
    if sample_idx[-1] != n_steps:
        sample_idx.append(n_steps)
    times = np.array(sample_idx, dtype=float) * h

    static_channels = not callable(channels)
    constant = sched.is_constant and static_channels
    H0 = sched(0.0)
    if H0.shape != rho.shape:
        raise DomainError(f"state shape {rho.shape} does not match Hamiltonian {H0.shape}")

    states = np.empty((len(sample_idx), dim, dim), dtype=complex)
    states[0] = rho
    next_sample = 1
    if constant and dim <= _DENSE_LIOUVILLE_DIM:
        P = _rk4_matrix(_Generator(H0, channels).superoperator(), h)
        v = rho.reshape(-1)
        for step in range(1, n_steps + 1):
            v = P @ v
            if step == sample_idx[next_sample]:
                states[next_sample] = v.reshape(dim, dim)
                next_sample += 1
                if next_sample == len(sample_idx):
                    break
    else:
        def gen_at(t):
            chs = channels if static_channels else channels(t)
            return _Generator(sched(t), chs)
        fixed = gen_at(0.0) if constant else None
        g3 = fixed if constant else gen_at(0.0)
        for step in range(n_steps):
            t = step * h
            if fixed is not None:
                g1 = g2 = g3 = fixed
            else:
                # generator at the end of the previous step is this step's start
                g1, g2, g3 = g3, gen_at(t + 0.5 * h), gen_at(t + h)
            k1 = g1(rho)
            k2 = g2(rho + 0.5 * h * k1)
            k3 = g2(rho + 0.5 * h * k2)
            k4 = g3(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if step + 1 == sample_idx[next_sample]:
                if not np.all(np.isfinite(rho)):
                    raise IntegrationError("state diverged; reduce the time step")
                states[next_sample] = rho
                next_sample += 1

    if not np.all(np.isfinite(states)):
        raise IntegrationError("state diverged; reduce the time step")
    trace_drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)))
    states, negativity = clamp_states(states, fail_tol)
    if sched.is_constant:
        hams = np.broadcast_to(H0, states.shape)
    else:
        hams = np.stack([sched(t) for t in times])
    return Trajectory(times, states, hams, negativity, trace_drift)


@dataclass(frozen=True)
class EvolutionSpec:
    """Everything needed to rerun an evolution (see ledger.counterfactual_exchange)."""

    rho0: object
    schedule: object
    channels: object
    t_end: float
    dt: float
    stride: int = 1
    extras: dict = field(default_factory=dict)

    def hamiltonian_at(self, t: float) -> np.ndarray:
        return _schedule(self.schedule)(t)

    def run(self, rho0=None) -> Trajectory:
        return evolve(self.rho0 if rho0 is None else rho0, self.schedule,
                      self.channels, self.t_end, self.dt, self.stride)


# --- stationary states ----------------------------------------------------------

def _finish_state(rho: np.ndarray) -> np.ndarray:
    rho, _ = clamp_states(rho[None], fail_tol=1e-6)
    return rho[0]


def steady_state(H, channels: Sequence[BathChannel], method: str = "direct",
                 rho0=None, tol: float = 1e-10, residual_tol: float = 1e-8,
                 max_steps: int = 5_000_000) -> DensityMatrix:
    """Stationary state of the generator.

    ``method="direct"`` solves ``L vec(rho) = 0`` with the trace condition
    replacing one diagonal equation (sparse LU).  ``method="propagate"``
    runs RK4 from ``rho0`` (default: maximally mixed) until successive
    checkpoints differ by at most ``tol``.  Either way the result must
    satisfy ``||rhs(rho)||_F <= residual_tol``.
    """
    channels = list(channels)
    if not any(ch.rate > 0 for ch in channels):
        raise DomainError("steady state needs at least one channel with positive rate")
    h = as_matrix(H)
    dim = h.shape[0]
    gen = _Generator(h, channels)

    if method == "direct":
        L = gen.superoperator(sparse=True).tolil()
        L[0, :] = np.eye(dim, dtype=complex).reshape(1, -1)
        rhs = np.zeros(dim * dim, dtype=complex)
        rhs[0] = 1.0
        v = spla.spsolve(L.tocsc(), rhs)
        if not np.all(np.isfinite(v)):
            raise ConvergenceError("singular generator: steady state is not unique")
        rho = _finish_state(v.reshape(dim, dim))
    elif method == "propagate":
        rho = (np.eye(dim, dtype=complex) / dim if rho0 is None
               else np.array(as_matrix(rho0), dtype=complex))
        dt = stable_time_step(h, channels)
        rate = sum(ch.rate for ch in channels)
        block = max(1, int(np.ceil(1.0 / (rate * dt))))
        if dim <= _DENSE_LIOUVILLE_DIM:
            P = np.linalg.matrix_power(_rk4_matrix(gen.superoperator(), dt), block)
            advance = lambda r: (P @ r.reshape(-1)).reshape(dim, dim)  # noqa: E731
        else:
            def advance(r):
                for _ in range(block):
                    k1 = gen(r)
                    k2 = gen(r + 0.5 * dt * k1)
                    k3 = gen(r + 0.5 * dt * k2)
                    k4 = gen(r + dt * k3)
                    r = r + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                return r
        steps = 0
        while True:
            new = advance(rho)
            steps += block
            change = float(np.linalg.norm(new - rho))
            rho = new
            if change <= tol:
                break
            if steps >= max_steps or not np.isfinite(change):
                raise ConvergenceError(
                    f"no stationary state after {steps} steps (last change {change:.2e})")
        rho = _finish_state(rho)
    else:
        raise DomainError(f"unknown steady-state method {method!r}")

    resid = float(np.linalg.norm(gen(rho)))
    if resid > residual_tol:
        raise ConvergenceError(f"steady-state residual {resid:.2e} exceeds {residual_tol:.0e}")
    return DensityMatrix._trusted(rho)


def oscillator_steady_moments(channels: Sequence[BathChannel]) -> tuple[float, float]:
    """Stationary ``<a^+ a>`` and ``<a a>`` of a mode under the given channels.

    Every channel is taken to act on the mode's annihilation operator.  The
    moment equations of the generator close at second order,

        d<a^+a>/dt = -G <a^+a> + sum_k g_k N_k,
        d<aa>/dt   = -G <aa>   + sum_k g_k M_k,     G = sum_k g_k,

    (co-rotating frame), so the answer needs no Fock truncation.
    """
    rates = np.array([ch.rate for ch in channels], dtype=float)
    total = rates.sum()
    if not total > 0:
        raise DomainError("steady state needs at least one channel with positive rate")
    n = sum(ch.rate * ch.effective_occupancy for ch in channels) / total
    m = sum(ch.rate * ch.anomalous for ch in channels) / total
    return float(n), float(m)
