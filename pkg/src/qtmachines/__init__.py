"""Heat, work and ergotropy accounting for small quantum thermal machines."""

from .dynamics import (
    BathChannel,
    EvolutionSpec,
    HamiltonianSchedule,
    Trajectory,
    evolve,
    lindblad_rhs,
    steady_state,
)
from .errors import ConvergenceError, DomainError, IntegrationError, NumericalError, TruncationError
from .ledger import EnergyLedger, InequalityReport, build_ledger, check_inequalities, counterfactual_exchange
from .machines import (
    CycleReport,
    MinimalMachineParams,
    OttoParams,
    SteadyStateReport,
    critical_modulation,
    efficiency_bound,
    minimal_machine_steady_state,
    otto_cycle,
    squeezed_thermal_state,
)
from .operators import (
    DensityMatrix,
    EigenSystem,
    HermitianOperator,
    bose_occupancy,
    coherent_state,
    eigh,
    fock_space,
    gibbs_state,
    von_neumann_entropy,
)
from .passivity import PassiveDecomposition, ergotropy, is_passive, passive_state

__version__ = "0.1.0"
