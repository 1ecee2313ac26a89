"""Variable-metric proximal ADMM with runtime convergence certification."""

from .admm import (
    KktResidualCertificate,
    SubproblemError,
    ThetaParams,
    VmPadmmRun,
    compute_d0_admm,
    compute_sigma_theta,
    sigma_feasible,
    tau_theta,
)
from .hpe import HpeIterate, HpeState, RateBounds, check_error_condition, transportation_check
from .linalg import (
    BlockDiagOperator,
    PsdOperator,
    block_diag,
    dual_seminorm_general,
    dual_seminorm_of_image,
    identity,
    operator_leq,
    seminorm,
    zero_operator,
)
from .problems import (
    FunctionDescriptor,
    ProblemSpec,
    ReferenceSolution,
    generate,
    kkt_residual,
    load_problem,
    plain_admm,
    reference_solve,
    subgradient_sample,
)
from .schedule import (
    THETA_MAX,
    MetricSchedule,
    OperatorRule,
    ScheduleRule,
    assemble_Mk,
    constant_schedule,
    load_schedule,
    schedule_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "BlockDiagOperator",
    "FunctionDescriptor",
    "HpeIterate",
    "HpeState",
    "KktResidualCertificate",
    "MetricSchedule",
    "OperatorRule",
    "ProblemSpec",
    "PsdOperator",
    "RateBounds",
    "ReferenceSolution",
    "ScheduleRule",
    "SubproblemError",
    "THETA_MAX",
    "ThetaParams",
    "VmPadmmRun",
    "assemble_Mk",
    "block_diag",
    "check_error_condition",
    "compute_d0_admm",
    "compute_sigma_theta",
    "constant_schedule",
    "dual_seminorm_general",
    "dual_seminorm_of_image",
    "generate",
    "identity",
    "kkt_residual",
    "load_problem",
    "load_schedule",
    "operator_leq",
    "plain_admm",
    "reference_solve",
    "schedule_from_dict",
    "seminorm",
    "sigma_feasible",
    "subgradient_sample",
    "tau_theta",
    "transportation_check",
    "zero_operator",
    "__version__",
]
