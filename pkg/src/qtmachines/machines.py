"""Machine models: the periodically modulated qubit and the oscillator Otto cycle.

The qubit machine is treated in the idealised two-sideband picture: the
upshifted transition ``omega0 + delta`` sees only the hot bath, the
downshifted one ``omega0 - delta`` only the cold bath.  Each quantum pumped
through the hot sideband carries ``omega0 + delta`` in and ``omega0 - delta``
out, the piston supplying or receiving the ``2*delta`` balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dynamics import BathChannel, oscillator_steady_moments, steady_state
from .errors import DomainError, TruncationError
from .operators import MAX_DIM, DensityMatrix, bose_occupancy, fock_space

IDLE_TOL = 1e-14
TAIL_TOL = 1e-8


def carnot_efficiency(T_C: float, T_H: float) -> float:
    return 1.0 - T_C / T_H


def carnot_cop(T_C: float, T_H: float) -> float:
    return T_C / (T_H - T_C) if T_H > T_C else float("inf")


def critical_modulation(omega0: float, T_H: float, T_C: float) -> float:
    """Modulation frequency at which the machine switches from engine to
    refrigerator: the hot and cold sideband occupancies coincide there."""
    if not omega0 > 0:
        raise DomainError("omega0 must be positive")
    if not (T_H > 0 and 0 <= T_C <= T_H):
        raise DomainError(f"need T_H >= T_C >= 0 and T_H > 0, got T_H={T_H}, T_C={T_C}")
    return omega0 * (T_H - T_C) / (T_H + T_C)


# --- minimal qubit machine -------------------------------------------------------

@dataclass(frozen=True)
class MinimalMachineParams:
    omega0: float
    delta: float
    T_H: float
    T_C: float
    gamma_H: float = 1.0
    gamma_C: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < self.omega0:
            raise DomainError(f"need 0 < delta < omega0, got delta={self.delta}, omega0={self.omega0}")
        if not self.T_H > self.T_C > 0:
            raise DomainError(f"need T_H > T_C > 0, got T_H={self.T_H}, T_C={self.T_C}")
        if not (self.gamma_H > 0 and self.gamma_C > 0):
            raise DomainError("coupling rates must be positive")


@dataclass(frozen=True)
class SteadyStateReport:
    """Steady-state currents of the modulated qubit.

    Signs: ``J_H`` and ``J_C`` are positive when energy flows into the
    qubit, ``power`` is positive when the piston does work on it.
    """

    p_excited: float
    flux_hot: float
    J_H: float
    J_C: float
    power: float
    regime: str
    efficiency: float | None
    cop: float | None
    carnot: float
    carnot_cop: float
    n_hot: float
    n_cold: float
    delta_cr: float


def minimal_machine_steady_state(params: MinimalMachineParams,
                                 method: str = "rates") -> SteadyStateReport:
    """Steady state of the two-sideband qubit machine.

    ``method="rates"`` uses the closed-form population of the two-channel
    rate model; ``method="lindblad"`` obtains it from the stationary state
    of the qubit master equation with one channel per bath.
    """
    w0, d = params.omega0, params.delta
    g_h, g_c = params.gamma_H, params.gamma_C
    n_h = bose_occupancy(w0 + d, params.T_H)
    n_c = bose_occupancy(w0 - d, params.T_C)

    if method == "rates":
        p = (g_h * n_h + g_c * n_c) / (g_h * (2 * n_h + 1) + g_c * (2 * n_c + 1))
    elif method == "lindblad":
        sm = np.array([[0, 1], [0, 0]], dtype=complex)
        H = np.diag([0.0, w0]).astype(complex)
        rho = steady_state(H, [BathChannel(sm, g_h, n_h, temperature=params.T_H),
                               BathChannel(sm, g_c, n_c, temperature=params.T_C)])
        p = float(rho.matrix[1, 1].real)
    else:
        raise DomainError(f"unknown method {method!r}")

    flux = g_h * (n_h * (1 - p) - (n_h + 1) * p)
    J_H = (w0 + d) * flux
    J_C = -(w0 - d) * flux
    power = -(J_H + J_C)
    carnot = carnot_efficiency(params.T_C, params.T_H)
    cop_c = carnot_cop(params.T_C, params.T_H)

    gap = n_h - n_c
    if abs(gap) <= IDLE_TOL * max(1.0, n_h, n_c):
        regime = "idle"
        efficiency = 2 * d / (w0 + d)
        cop = (w0 - d) / (2 * d)
    elif gap > 0:
        regime = "engine"
        efficiency = -power / J_H
        cop = None
    else:
        regime = "refrigerator"
        efficiency = None
        cop = J_C / power
    return SteadyStateReport(
        p_excited=float(p), flux_hot=float(flux), J_H=float(J_H), J_C=float(J_C),
        power=float(power), regime=regime, efficiency=efficiency, cop=cop,
        carnot=carnot, carnot_cop=cop_c, n_hot=n_h, n_cold=n_c,
        delta_cr=critical_modulation(w0, params.T_H, params.T_C),
    )


# --- squeezed thermal states -------------------------------------------------------

def _squeezed_thermal_padded(n: float, r: float, size: int) -> np.ndarray:
    """S(r) rho_th S(r)^+ on ``size`` levels, S = exp(r/2 (a^2 - a^+2))."""
    a = np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)
    k = np.arange(size)
    if n == 0:
        p = (k == 0).astype(float)
    else:
        p = (n / (n + 1)) ** k / (n + 1)
    p /= p.sum()
    if r == 0:
        return np.diag(p)
    S = sla.expm(0.5 * r * (a @ a - a.T @ a.T))
    return (S * p) @ S.T


def squeezed_thermal_from_occupancy(n: float, r: float, dim: int,
                                    tail_tol: float = TAIL_TOL) -> DensityMatrix:
    """Squeezed thermal state of a mode with thermal occupancy ``n``.

    Built on a padded space (the squeeze generator is itself truncated) and
    cut to ``dim`` levels.  Raises :class:`TruncationError` when the top two
    kept levels hold ``tail_tol`` or more, the same rule as
    :func:`required_fock_dim`.
    """
    if n < 0 or r < 0:
        raise DomainError("occupancy and squeezing must be non-negative")
    if dim < 2 or dim > MAX_DIM:
        raise DomainError(f"dim must be in [2, {MAX_DIM}]")
    rho = _squeezed_thermal_padded(n, r, max(2 * dim, dim + 64))[:dim, :dim]
    top = float(rho[-1, -1] + rho[-2, -2])
    if top >= tail_tol:
        raise TruncationError(
            f"squeezed thermal state (n={n}, r={r}) holds {top:.2e} in its top two of "
            f"{dim} levels; use a larger dim")
    return DensityMatrix._trusted((rho / np.trace(rho)).astype(complex))


def squeezed_thermal_state(omega: float, T: float, r: float, dim: int) -> DensityMatrix:
    return squeezed_thermal_from_occupancy(bose_occupancy(omega, T), r, dim)


def required_fock_dim(n: float, r: float, tol: float = TAIL_TOL,
                      search_size: int = 2 * MAX_DIM) -> int | None:
    """Smallest truncation whose top two levels carry less than ``tol``.

    Returns None when no dimension up to ``MAX_DIM`` satisfies the rule.
    """
    pops = np.clip(np.diag(_squeezed_thermal_padded(n, r, search_size)), 0.0, None)
    top_two = pops[:-1] + pops[1:]
    for dim in range(2, MAX_DIM + 1):
        if top_two[dim - 2] < tol:
            return dim
    return None


# --- Otto cycle ----------------------------------------------------------------------

@dataclass(frozen=True)
class OttoParams:
    """Oscillator Otto cycle between ``omega_cold`` and ``omega_hot``.

    ``fock_dim=None`` lets the cycle pick the truncation by the tail rule.
    """

    omega_cold: float
    omega_hot: float
    T_H: float
    T_C: float
    squeezing: float = 0.0
    fock_dim: int | None = None
    rate: float = 1.0

    def __post_init__(self):
        if not 0 < self.omega_cold < self.omega_hot:
            raise DomainError("need 0 < omega_cold < omega_hot")
        if not (self.T_H > 0 and self.T_C > 0):
            raise DomainError("bath temperatures must be positive")
        if self.squeezing < 0:
            raise DomainError("squeezing must be non-negative")
        if self.rate <= 0:
            raise DomainError("rate must be positive")


@dataclass(frozen=True)
class Stroke:
    name: str
    energy_start: float
    energy_end: float
    work: float
    exchange: float


@dataclass(frozen=True)
class CycleReport:
    strokes: tuple[Stroke, ...]
    work_total: float
    exchange_hot: float
    exchange_cold: float
    counterfactual_heat: float
    eta: float | None
    eta_max: float | None
    carnot: float
    regime: str
    method: str
    fock_dim: int | None
    first_law_residual: float
    mean_quanta_hot: float
    mean_quanta_cold: float


def efficiency_bound(exchange_prime: float, exchange: float, T_C: float, T_H: float) -> float:
    """Efficiency bound for a cycle energised by a possibly non-thermal bath.

    The Carnot temperature ratio is scaled by the fraction of the hot-bath
    energy intake that a thermal bath would have delivered as heat.
    """
    if not exchange > 0:
        raise DomainError(f"energy intake from the hot bath must be positive, got {exchange}")
    if not 0 < T_C < T_H:
        raise DomainError("need 0 < T_C < T_H")
    return min(1.0, 1.0 - (T_C / T_H) * (exchange_prime / exchange))


def _contact_quanta_fock(n: float, r: float, dim: int, rate: float) -> tuple[float, np.ndarray]:
    a, number = fock_space(dim)
    # contact strokes are solved in the frame co-rotating with the mode, where
    # the free Hamiltonian drops out (it commutes with the thermal fixed point)
    rho = steady_state(np.zeros((dim, dim), dtype=complex),
                       [BathChannel(a, rate, n, r)]).matrix
    return float(np.trace(rho @ number).real), rho.diagonal().real


def _contact_quanta(n: float, r: float, method: str, dim: int | None, rate: float) -> float:
    if method == "moments":
        return oscillator_steady_moments([BathChannel(None, rate, n, r)])[0]
    quanta, pops = _contact_quanta_fock(n, r, dim, rate)
    if pops[-1] + pops[-2] >= TAIL_TOL:
        raise TruncationError(
            f"top two Fock levels hold {pops[-1] + pops[-2]:.2e} at dim={dim} (n={n}, r={r})")
    return quanta


def _run_cycle(p: OttoParams, r: float, method: str, dim: int | None):
    w1, w2 = p.omega_cold, p.omega_hot
    n_h = bose_occupancy(w2, p.T_H)
    n_c = bose_occupancy(w1, p.T_C)
    q_cold = _contact_quanta(n_c, 0.0, method, dim, p.rate)
    q_hot = _contact_quanta(n_h, r, method, dim, p.rate)
    # ramps keep the Fock populations, so only the frequency multiplying <n> changes
    strokes = (
        Stroke("compression", w1 * q_cold, w2 * q_cold, (w2 - w1) * q_cold, 0.0),
        Stroke("hot contact", w2 * q_cold, w2 * q_hot, 0.0, w2 * (q_hot - q_cold)),
        Stroke("expansion", w2 * q_hot, w1 * q_hot, (w1 - w2) * q_hot, 0.0),
        Stroke("cold contact", w1 * q_hot, w1 * q_cold, 0.0, w1 * (q_cold - q_hot)),
    )
    return strokes, q_hot, q_cold


def _pick_method(p: OttoParams, method: str) -> tuple[str, int | None]:
    if method == "moments":
        return "moments", None
    if method not in ("auto", "fock"):
        raise DomainError(f"unknown method {method!r}")
    if p.fock_dim is not None:
        return "fock", p.fock_dim
    n_h = bose_occupancy(p.omega_hot, p.T_H)
    n_c = bose_occupancy(p.omega_cold, p.T_C)
    need_hot = required_fock_dim(n_h, p.squeezing)
    need_cold = required_fock_dim(n_c, 0.0)
    if need_hot is None or need_cold is None:
        if method == "fock":
            raise TruncationError(
                f"tail rule needs more than {MAX_DIM} Fock levels at r={p.squeezing}")
        return "moments", None
    return "fock", min(MAX_DIM, max(need_hot, need_cold) + 8)


def otto_cycle(params: OttoParams, method: str = "auto") -> CycleReport:
    """Four-stroke Otto cycle with fully equilibrating contact strokes.

    ``method="fock"`` works with truncated density matrices and the master
    equation's stationary states; ``"moments"`` uses the closed second-moment
    equations of the same generator (no truncation); ``"auto"`` prefers Fock
    and falls back to moments when the tail rule cannot be met within
    ``MAX_DIM`` levels.  The counterfactual heat is the hot-contact exchange
    of the identical cycle with an unsqueezed hot bath.
    """
    used, dim = _pick_method(params, method)
    strokes, q_hot, q_cold = _run_cycle(params, params.squeezing, used, dim)
    if params.squeezing == 0:
        thermal_hot = strokes[1].exchange
    else:
        thermal_hot = _run_cycle(params, 0.0, used, dim)[0][1].exchange

    work = sum(s.work for s in strokes)
    ex_hot = strokes[1].exchange
    ex_cold = strokes[3].exchange
    residual = abs(work + ex_hot + ex_cold)
    carnot = carnot_efficiency(params.T_C, params.T_H)
    engine = work < 0 and ex_hot > 0
    eta_max = None
    if ex_hot > 0 and params.T_C < params.T_H:
        eta_max = efficiency_bound(thermal_hot, ex_hot, params.T_C, params.T_H)
    return CycleReport(
        strokes=strokes,
        work_total=work,
        exchange_hot=ex_hot,
        exchange_cold=ex_cold,
        counterfactual_heat=thermal_hot,
        eta=(-work / ex_hot) if engine else None,
        eta_max=eta_max,
        carnot=carnot,
        regime="engine" if engine else "not-engine",
        method=used,
        fock_dim=dim,
        first_law_residual=residual,
        mean_quanta_hot=q_hot,
        mean_quanta_cold=q_cold,
    )
