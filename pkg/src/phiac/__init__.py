"""phiac: integral-action control of disturbed port-Hamiltonian systems.

Build a disturbed pH plant (or take one of the bundled examples), attach
the integral-action controller, predict where constant disturbances move
the closed-loop equilibrium, simulate deterministically, and certify the
stability claims numerically.
"""

from .core import (
    DisturbanceModel,
    HamiltonianModel,
    MatchedDisturbance,
    Partition,
    PartitionedMatrix,
    PhSystem,
    UnmatchedDisturbance,
    check_assumption_matched,
    check_assumption_min,
    check_assumption_unmatched,
    check_structure,
    eval_drift,
    eval_outputs,
    finite_diff_gradient,
)
from .errors import (
    ConfigurationError,
    ContractError,
    DivergenceError,
    NumericsError,
    PhiacError,
    SingularityError,
)
from .iac import (
    ClosedLoop,
    EquilibriumPrediction,
    IacGains,
    baseline_passive_iac,
    build_closed_loop,
    control_law,
    control_law_wc,
    damping_free_iac,
    detect_outputs,
    equilibrium_matched,
    equilibrium_mixed,
    equilibrium_unmatched,
    integrator_dynamics,
    lyapunov_matched,
    lyapunov_mixed,
    lyapunov_rate_bound,
    lyapunov_rate_bound_unmatched,
    lyapunov_unmatched,
    matched_gains,
)
from .mech import (
    MechanicalSystem,
    TransformedMech,
    body_drift,
    body_energy,
    build_T,
    check_transform_structure,
    mech_equilibrium,
    mech_iac,
    momentum_transform,
    partition_mech,
)
from .sim import (
    ConvergenceVerdict,
    Scenario,
    SweepResult,
    Trajectory,
    check_convergence,
    integrate,
    sweep,
)
from .systems import (
    ManipulatorParams,
    PmsmParams,
    VtolParams,
    available_presets,
    build_manipulator,
    build_pmsm,
    build_vtol,
    load_preset,
    make_scenario,
    manipulator_gains,
    pmsm_gains,
    vtol_gains,
)

__version__ = "0.1.0"
