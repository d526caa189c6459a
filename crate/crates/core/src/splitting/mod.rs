//! Sequential (Lie) and parallel operator splitting for
//! `du/dt = sum_k (A_k u + B_k(u) + g_k)`: explicit linear substeps followed
//! by backward-Euler resolvents.

mod order;
mod resolvent;
mod scheme;

pub use order::{
    builtin_problem, estimate_order, fit_slope, OrderProblem, OrderReport, OrderRow,
    BUILTIN_PROBLEMS,
};
pub use resolvent::{
    double_well_roots, resolve_double_well, resolve_identity, resolve_logit,
    resolve_logit_nonlocal, resolve_logit_nonlocal_mixed, ResolventKind, ANDERSON_DEPTH,
    DEFAULT_FP_MAX_ITERS, DEFAULT_FP_TOL, GAMMA,
};
pub use scheme::{
    apply_linear_step, run, step, step_parallel, step_sequential, LinearOp, LinearTerm, RunOutput,
    SchemeSpec, SplitMode, SplitTerm,
};
