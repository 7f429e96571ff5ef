"""heatbound: numerical verification of gradient bounds, Harnack inequalities
and quadratic-BSDE identities for positive solutions of the heat equation."""

from .bounds import (
    BoundSpec,
    CheckResult,
    INFINITE_C,
    bound_ricci_k,
    bound_structure_k,
    bound_structure_k_sq,
    bound_sup_log,
    check_field_against_bound,
    harnack_bound,
    liyau_lower,
    liyau_upper,
    psi_admissible,
    psi_linear,
    psi_log,
    psi_sqrt,
)
from .fields import (
    ConditionReport,
    DegenerateConditionError,
    VectorFieldSpec,
    condition_report,
    constant_fields,
    estimate_c1,
    estimate_c2,
    frobenius_check,
    frobenius_report,
    heisenberg_fields,
    lie_bracket,
    linear_fields,
    ricci_proxy,
    spec_from_config,
    triple_bracket,
)
from .heatpde import (
    DiagnosticFields,
    ScalarField,
    SolveConfig,
    TorusGrid,
    check_identity_g,
    gaussian_oracle,
    log_diagnostics,
    make_initial,
    semigroup_domination_check,
    solve_heat,
    wrapped_gaussian,
)
from .flow import (
    FlowConfig,
    PathEnsemble,
    jk_identity_residual,
    simulate_flow,
    z_from_flow,
)
from .bsde import (
    BSDEProblem,
    GirsanovWeights,
    MCEstimate,
    bmo_norm_estimate,
    constant_problem,
    cosine_problem,
    entropic_oracle,
    gaussian_problem,
    girsanov_weights,
    linear_problem,
    liyau_bsde_demo,
    max_principle_check,
    solve_bsde_mc,
    step_problem,
    submartingale_diagnostic,
    sweep,
    weights_from_sweep,
)

__version__ = "0.1.0"
