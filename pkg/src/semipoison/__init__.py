"""Semi-derivative sensitivity analysis and data poisoning for constrained convex learners."""

from .attack import (
    AttackConfig,
    AttackTrace,
    ConvergenceReport,
    StepRecord,
    attack_step,
    convergence_check,
    feasible_directions,
    gradient_baseline_step,
    objective,
    objective_derivative,
    project_to_feasible,
    run_attack,
    run_gradient_baseline,
    write_summary_csv,
    write_trace_jsonl,
)
from .data import (
    Dataset,
    denormalize,
    load_csv,
    normalize,
    normalized_box,
    normalized_budget,
    synth_lane_change,
    write_csv,
    write_stats_json,
)
from .errors import (
    AuxInfeasible,
    AuxUnbounded,
    BadLabel,
    DegenerateFeature,
    DimensionMismatch,
    EmptyDirectionSet,
    Infeasible,
    MaxIterations,
    OutOfDomain,
    ParseError,
    RegularityFailure,
    SemipoisonError,
    SingularHessian,
    Stalled,
    Unbounded,
)
from .qp import KktResiduals, KktSolution, QpProblem, kkt_residuals, solve_qp
from .sensitivity import (
    ActiveStructure,
    AuxiliaryProblem,
    OracleTrial,
    SemiDerivative,
    build_auxiliary,
    fd_directional_derivative,
    run_oracle_trials,
    semi_derivative,
    solution_semi_derivative,
)
from .victims import (
    SvmModel,
    VictimModel,
    bound_tracking_model,
    decision_values,
    generic_parametric_qp,
    kink_projection_model,
    solve_victim,
    svm_victim,
    toy_bilevel_model,
    toy_lower_solution,
)

__all__ = [
    "ActiveStructure",
    "AttackConfig",
    "AttackTrace",
    "AuxInfeasible",
    "AuxUnbounded",
    "AuxiliaryProblem",
    "BadLabel",
    "ConvergenceReport",
    "Dataset",
    "DegenerateFeature",
    "DimensionMismatch",
    "EmptyDirectionSet",
    "Infeasible",
    "KktResiduals",
    "KktSolution",
    "MaxIterations",
    "OracleTrial",
    "OutOfDomain",
    "ParseError",
    "QpProblem",
    "RegularityFailure",
    "SemiDerivative",
    "SemipoisonError",
    "SingularHessian",
    "Stalled",
    "StepRecord",
    "SvmModel",
    "Unbounded",
    "VictimModel",
    "attack_step",
    "bound_tracking_model",
    "build_auxiliary",
    "convergence_check",
    "decision_values",
    "denormalize",
    "fd_directional_derivative",
    "feasible_directions",
    "generic_parametric_qp",
    "gradient_baseline_step",
    "kink_projection_model",
    "kkt_residuals",
    "load_csv",
    "normalize",
    "normalized_box",
    "normalized_budget",
    "objective",
    "objective_derivative",
    "project_to_feasible",
    "run_attack",
    "run_gradient_baseline",
    "run_oracle_trials",
    "semi_derivative",
    "solution_semi_derivative",
    "solve_qp",
    "solve_victim",
    "svm_victim",
    "synth_lane_change",
    "toy_bilevel_model",
    "toy_lower_solution",
    "write_csv",
    "write_stats_json",
    "write_summary_csv",
    "write_trace_jsonl",
]
