//! Exact and convex solvers for fair decision rules on discrete joints, and
//! instance-level checks of the majority-collapse bounds.

mod bounds;
mod convex;
mod fair;
mod fuzz;
mod generators;
mod lp;

pub use bounds::{
    check_ddp_bound, check_perturbed_bound, check_ratio_bound, check_soft_bound, distances_to_majority, ratio_spread,
    soft_bound, u_fn, BoundReport, BOUND_TOL,
};
pub use convex::{solve_convex_constrained, table_dependence, ConvexSolution};
pub use fair::{
    optimal_fair_policy_ddp, optimal_fair_policy_tv, witness_policy, witness_risk, FairSolution, CONSTRAINT_TOL,
};
pub use fuzz::{
    check_pinsker_lemmas, fuzz_ddp_bound, fuzz_perturbed_bound, fuzz_ratio_bound, fuzz_soft_bound, instance_rng,
    pinsker_slacks, Counterexample, FuzzSummary, LemmaReport,
};
pub use generators::{
    conditional_ratios, make_ratio_joint, random_joint, random_pair_joint, RandomJointSpec, RatioJoint, RatioJointSpec,
};
pub use lp::{solve_lp, LpCertificate, LpProblem, LpSolution, LpStatus};
