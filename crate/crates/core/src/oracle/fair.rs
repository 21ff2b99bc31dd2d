//! Exact fair decision rules on discrete joints via linear programming.

use serde::{Deserialize, Serialize};

use super::lp::{solve_lp, LpCertificate, LpProblem, LpStatus};
use crate::domain::{DiscreteJoint, Policy};
use crate::error::{invalid, Error, Result};
use crate::measures::{ddp, optimal_tv_coupling, rho_tv, DependenceKind};

/// Tolerance for re-checking a returned policy against its constraint.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairSolution {
    pub policy: Policy,
    /// Risk re-evaluated on the returned policy.
    pub risk: f64,
    /// Constraint measure re-evaluated on the returned policy.
    pub measure: f64,
    pub certificate: LpCertificate,
}

/// Supported `(x, s)` rows and the LP column of `Q(0 | x, s)` for each.
struct Layout {
    rows: Vec<(usize, usize)>,
    ny: usize,
}

impl Layout {
    fn new(joint: &DiscreteJoint) -> Self {
        let mut rows = Vec::new();
        for x in 0..joint.nx() {
            for s in 0..joint.ns() {
                if joint.p_xs(x, s) > 0.0 {
                    rows.push((x, s));
                }
            }
        }
        Self { rows, ny: joint.ny() }
    }

    fn num_q(&self) -> usize {
        self.rows.len() * self.ny
    }

    fn col(&self, row: usize, y: usize) -> usize {
        row * self.ny + y
    }

    /// Extracts a policy, clamping round-off and renormalizing each row.
    fn policy(&self, joint: &DiscreteJoint, x: &[f64]) -> Result<Policy> {
        let (nx, ny, ns) = (joint.nx(), joint.ny(), joint.ns());
        let mut table = vec![1.0 / ny as f64; nx * ny * ns];
        for (r, &(xx, s)) in self.rows.iter().enumerate() {
            let vals: Vec<f64> = (0..ny).map(|y| x[self.col(r, y)].max(0.0)).collect();
            let z: f64 = vals.iter().sum();
            for (y, v) in vals.iter().enumerate() {
                table[(xx * ny + y) * ns + s] = v / z;
            }
        }
        Policy::new(nx, ny, ns, table)
    }
}

fn check_groups(joint: &DiscreteJoint) -> Result<()> {
    if let Some(group) = joint.p_s().iter().position(|&p| p <= 0.0) {
        return Err(Error::EmptyGroup { group });
    }
    Ok(())
}

/// Appends `u_{ys} ≥ |P(Ŷ=y | s) − P(Ŷ=y)|` rows; returns the column of `u_{00}`.
fn add_parity_terms(lp: &mut LpProblem, layout: &Layout, joint: &DiscreteJoint) -> usize {
    let (ny, ns) = (joint.ny(), joint.ns());
    let ps = joint.p_s();
    let first_u = lp.num_vars();
    let total = first_u + ny * ns;
    lp.objective.resize(total, 0.0);
    lp.bounds.resize(total, (0.0, f64::INFINITY));
    for row in lp.eq_matrix.iter_mut().chain(lp.ineq_matrix.iter_mut()) {
        row.resize(total, 0.0);
    }
    for y in 0..ny {
        for s in 0..ns {
            // P(Ŷ=y | s) − Σ_{s'} P(s') P(Ŷ=y | s') as a row over Q.
            let mut expr = vec![0.0; total];
            for (r, &(x, s2)) in layout.rows.iter().enumerate() {
                let w = joint.p_xs(x, s2) / ps[s2];
                let own = if s2 == s { w } else { 0.0 };
                expr[layout.col(r, y)] = own - ps[s2] * w;
            }
            let u = first_u + y * ns + s;
            let mut pos = expr.clone();
            pos[u] = -1.0;
            lp.add_le(pos, 0.0);
            let mut neg: Vec<f64> = expr.into_iter().map(|v| -v).collect();
            neg[u] = -1.0;
            lp.add_le(neg, 0.0);
        }
    }
    first_u
}

fn add_normalization(lp: &mut LpProblem, layout: &Layout) {
    let n = lp.num_vars();
    for r in 0..layout.rows.len() {
        let mut row = vec![0.0; n];
        for y in 0..layout.ny {
            row[layout.col(r, y)] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
}

fn add_budget(lp: &mut LpProblem, joint: &DiscreteJoint, first_u: usize, kind: DependenceKind, eps: f64) -> Result<()> {
    let (ny, ns) = (joint.ny(), joint.ns());
    let ps = joint.p_s();
    let mut row = vec![0.0; lp.num_vars()];
    for y in 0..ny {
        for s in 0..ns {
            row[first_u + y * ns + s] = match kind {
                DependenceKind::Ddp => 1.0,
                DependenceKind::RhoTv => 0.5 * ps[s],
                other => return Err(Error::UnsupportedKind(other.to_string())),
            };
        }
    }
    lp.add_le(row, eps);
    Ok(())
}

fn finish(
    joint: &DiscreteJoint,
    layout: &Layout,
    lp: &LpProblem,
    kind: DependenceKind,
    eps: f64,
    tv_risk: bool,
) -> Result<FairSolution> {
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            violation: f64::NAN,
            objective_change: f64::NAN,
        });
    }
    let policy = layout.policy(joint, &sol.x)?;
    let pj = policy.prediction_joint(joint)?;
    let measure = match kind {
        DependenceKind::Ddp => ddp(&pj)?,
        _ => rho_tv(&pj),
    };
    if measure > eps + CONSTRAINT_TOL {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            violation: measure - eps,
            objective_change: 0.0,
        });
    }
    let risk = if tv_risk {
        policy.risk_tv(joint)?
    } else {
        policy.risk_01(joint)?
    };
    Ok(FairSolution {
        policy,
        risk,
        measure,
        certificate: sol.certificate.expect("optimal solutions carry a certificate"),
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    Ok(())
}

/// Minimum 0/1 risk over randomized rules `Q(ŷ | x, s)` with `DDP ≤ ε`.
/// Requires deterministic labels.
pub fn optimal_fair_policy_ddp(joint: &DiscreteJoint, eps: f64) -> Result<FairSolution> {
    check_eps(eps)?;
    check_groups(joint)?;
    if !joint.is_deterministic_label() {
        return Err(Error::PreconditionViolated(
            "labels are not a deterministic function of (x, s); use optimal_fair_policy_tv".into(),
        ));
    }
    let layout = Layout::new(joint);
    let mut objective = vec![0.0; layout.num_q()];
    for (r, &(x, s)) in layout.rows.iter().enumerate() {
        for y in 0..joint.ny() {
            objective[layout.col(r, y)] = -joint.p(x, y, s);
        }
    }
    let mut lp = LpProblem::new(objective);
    add_normalization(&mut lp, &layout);
    let first_u = add_parity_terms(&mut lp, &layout, joint);
    add_budget(&mut lp, joint, first_u, DependenceKind::Ddp, eps)?;
    finish(joint, &layout, &lp, DependenceKind::Ddp, eps, false)
}

/// Minimum expected `TV(Q(· | x, s), P(Y | x, s))` with DDP or ρ_TV at most `ε`.
pub fn optimal_fair_policy_tv(joint: &DiscreteJoint, kind: DependenceKind, eps: f64) -> Result<FairSolution> {
    check_eps(eps)?;
    check_groups(joint)?;
    if !matches!(kind, DependenceKind::Ddp | DependenceKind::RhoTv) {
        return Err(Error::UnsupportedKind(kind.to_string()));
    }
    let layout = Layout::new(joint);
    let nq = layout.num_q();
    let ny = joint.ny();
    // Columns: Q, then t ≥ |Q − P(y | x, s)| per Q entry.
    let mut objective = vec![0.0; 2 * nq];
    for (r, &(x, s)) in layout.rows.iter().enumerate() {
        let pxs = joint.p_xs(x, s);
        for y in 0..ny {
            objective[nq + layout.col(r, y)] = 0.5 * pxs;
        }
    }
    let mut lp = LpProblem::new(objective);
    add_normalization(&mut lp, &layout);
    for (r, &(x, s)) in layout.rows.iter().enumerate() {
        let cond = joint.p_y_given_xs(x, s).expect("supported row");
        for (y, &target) in cond.iter().enumerate() {
            let c = layout.col(r, y);
            let mut up = vec![0.0; 2 * nq];
            up[c] = 1.0;
            up[nq + c] = -1.0;
            lp.add_le(up, target);
            let mut down = vec![0.0; 2 * nq];
            down[c] = -1.0;
            down[nq + c] = -1.0;
            lp.add_le(down, -target);
        }
    }
    let first_u = add_parity_terms(&mut lp, &layout, joint);
    add_budget(&mut lp, joint, first_u, kind, eps)?;
    finish(joint, &layout, &lp, kind, eps, true)
}

/// Rule that predicts `P_{Y | S = s_max}` in every group: for each `s` the
/// label is pushed through the optimal TV coupling of `P_{Y|s}` and
/// `P_{Y|s_max}`. Its predictions are independent of `S` and its 0/1 risk on
/// deterministic-label joints is `E_s TV(P_{Y|s}, P_{Y|s_max})`.
pub fn witness_policy(joint: &DiscreteJoint) -> Result<Policy> {
    check_groups(joint)?;
    let (nx, ny, ns) = (joint.nx(), joint.ny(), joint.ns());
    let target = joint.p_y_given_s(joint.s_max()).expect("non-empty majority");
    let mut table = vec![1.0 / ny as f64; nx * ny * ns];
    for s in 0..ns {
        let pys = joint.p_y_given_s(s).expect("non-empty group");
        let m = optimal_tv_coupling(&pys, &target)?;
        // kernel[y][ŷ] = M[y][ŷ] / P(y | s)
        let kernel: Vec<Vec<f64>> = (0..ny)
            .map(|y| {
                if pys[y] > 0.0 {
                    m[y].iter().map(|v| v / pys[y]).collect()
                } else {
                    target.clone()
                }
            })
            .collect();
        for x in 0..nx {
            let Some(cond) = joint.p_y_given_xs(x, s) else { continue };
            let row: Vec<f64> = (0..ny)
                .map(|yh| (0..ny).map(|y| cond[y] * kernel[y][yh]).sum::<f64>())
                .collect();
            let z: f64 = row.iter().sum();
            for (yh, v) in row.iter().enumerate() {
                table[(x * ny + yh) * ns + s] = v / z;
            }
        }
    }
    Policy::new(nx, ny, ns, table)
}

/// `E_s TV(P_{Y|s}, P_{Y|s_max})`.
pub fn witness_risk(joint: &DiscreteJoint) -> Result<f64> {
    check_groups(joint)?;
    let ps = joint.p_s();
    let target = joint.p_y_given_s(joint.s_max()).expect("non-empty majority");
    let mut total = 0.0;
    for (s, p) in ps.iter().enumerate() {
        let pys = joint.p_y_given_s(s).expect("non-empty group");
        total += p * crate::measures::tv_distance(&pys, &target)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::generators::{random_joint, RandomJointSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bayes(joint: &DiscreteJoint) -> Policy {
        let mut p = Policy::deterministic(joint.nx(), joint.ny(), joint.ns(), |x, s| joint.label_of(x, s).unwrap_or(0));
        p.normalize_unsupported(joint);
        p
    }

    #[test]
    fn loose_budget_keeps_bayes_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let b = bayes(&j);
            let budget = ddp(&b.prediction_joint(&j).unwrap()).unwrap();
            let sol = optimal_fair_policy_ddp(&j, budget + 1e-9).unwrap();
            assert!(sol.risk.abs() < 1e-9);
        }
    }

    #[test]
    fn independence_collapses_onto_majority() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let sol = optimal_fair_policy_ddp(&j, 0.0).unwrap();
            let target = j.p_y_given_s(j.s_max()).unwrap();
            for cond in sol.policy.conditional_predictions(&j).unwrap().into_iter().flatten() {
                assert!(crate::measures::tv_distance(&cond, &target).unwrap() <= 1e-6);
            }
            assert!((sol.risk - witness_risk(&j).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn risk_is_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let mut last = f64::INFINITY;
            for k in 0..=10 {
                let r = optimal_fair_policy_ddp(&j, 0.05 * k as f64).unwrap().risk;
                assert!(r <= last + 1e-9);
                last = r;
            }
        }
    }

    #[test]
    fn tv_formulation_matches_on_deterministic_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..20 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let eps = 0.05 * (i % 4) as f64;
            let a = optimal_fair_policy_ddp(&j, eps).unwrap();
            let b = optimal_fair_policy_tv(&j, DependenceKind::Ddp, eps).unwrap();
            assert!((a.risk - b.risk).abs() < 1e-8, "{} vs {}", a.risk, b.risk);
        }
    }

    #[test]
    fn tv_formulation_copies_truth_with_loose_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = RandomJointSpec {
            deterministic: false,
            ..Default::default()
        };
        for _ in 0..10 {
            let j = random_joint(&spec, &mut rng).unwrap();
            let sol = optimal_fair_policy_tv(&j, DependenceKind::RhoTv, 1.0).unwrap();
            assert!(sol.risk.abs() < 1e-9);
        }
    }

    #[test]
    fn witness_is_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let j = random_joint(&RandomJointSpec { ns: 3, ..Default::default() }, &mut rng).unwrap();
            let w = witness_policy(&j).unwrap();
            assert!(ddp(&w.prediction_joint(&j).unwrap()).unwrap() < 1e-12);
            assert!((w.risk_01(&j).unwrap() - witness_risk(&j).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn certificates_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let c = optimal_fair_policy_ddp(&j, 0.1).unwrap().certificate;
            assert!(c.duality_gap < 1e-8 && c.min_reduced_cost > -1e-8 && c.primal_residual < 1e-8);
        }
    }

    #[test]
    fn nondeterministic_rejected_by_ddp_solver() {
        let j = DiscreteJoint::new(1, 2, 2, vec![0.25; 4]).unwrap();
        assert!(matches!(optimal_fair_policy_ddp(&j, 0.1), Err(Error::PreconditionViolated(_))));
    }
}
