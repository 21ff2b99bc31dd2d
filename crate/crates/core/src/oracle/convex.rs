//! Fair rules under smooth dependence constraints (MI, ERMI, maximal
//! correlation) by an exterior quadratic penalty and projected gradient.

use serde::{Deserialize, Serialize};

use super::fair::{optimal_fair_policy_ddp, witness_policy, CONSTRAINT_TOL};
use crate::domain::{project_simplex, DiscreteJoint, Policy};
use crate::error::{invalid, Error, Result};
use crate::measures::{ermi_table_grad, mc_table_grad, mi_table_grad, DependenceKind};

const MAX_INNER: usize = 20_000;
const MAX_OUTER: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub policy: Policy,
    pub risk: f64,
    /// Constraint measure of the returned policy (MI in bits).
    pub measure: f64,
    /// The witness rule beat the penalty solution and was returned instead.
    pub used_witness: bool,
    /// `ε = 0` was handed to the exact LP.
    pub exact: bool,
    pub iterations: usize,
}

/// Dependence of a `ny × ns` table under `kind`, with mutual information in
/// bits. A constant prediction has zero maximal correlation.
pub fn table_dependence(kind: DependenceKind, t: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    match kind {
        DependenceKind::MutualInformation => {
            let g = mi_table_grad(t);
            let ln2 = std::f64::consts::LN_2;
            let grad = g.grad.into_iter().map(|r| r.into_iter().map(|v| v / ln2).collect()).collect();
            Ok(((g.value / ln2).max(0.0), grad))
        }
        DependenceKind::Ermi => {
            let g = ermi_table_grad(t);
            Ok((g.value.max(0.0), g.grad))
        }
        DependenceKind::MaximalCorrelation => match mc_table_grad(t) {
            Ok(g) => Ok((g.value, g.grad)),
            Err(Error::DegenerateMarginal) => Ok((0.0, vec![vec![0.0; t[0].len()]; t.len()])),
            Err(e) => Err(e),
        },
        other => Err(Error::UnsupportedKind(other.to_string())),
    }
}

/// Flat per-row view of a policy on the supported `(x, s)` cells.
struct Problem<'a> {
    joint: &'a DiscreteJoint,
    rows: Vec<(usize, usize)>,
    kind: DependenceKind,
    eps: f64,
}

impl Problem<'_> {
    fn ny(&self) -> usize {
        self.joint.ny()
    }

    fn table(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let (ny, ns) = (self.ny(), self.joint.ns());
        let mut t = vec![vec![0.0; ns]; ny];
        for (r, &(x, s)) in self.rows.iter().enumerate() {
            let w = self.joint.p_xs(x, s);
            for (y, row) in t.iter_mut().enumerate() {
                row[s] += w * q[r * ny + y];
            }
        }
        t
    }

    fn risk(&self, q: &[f64]) -> f64 {
        let ny = self.ny();
        let mut correct = 0.0;
        for (r, &(x, s)) in self.rows.iter().enumerate() {
            for y in 0..ny {
                correct += self.joint.p(x, y, s) * q[r * ny + y];
            }
        }
        1.0 - correct
    }

    fn measure(&self, q: &[f64]) -> Result<f64> {
        Ok(table_dependence(self.kind, &self.table(q))?.0)
    }

    /// Penalized objective and its gradient.
    fn eval(&self, q: &[f64], rho: f64) -> Result<(f64, Vec<f64>)> {
        let ny = self.ny();
        let (m, g) = table_dependence(self.kind, &self.table(q))?;
        let viol = (m - self.eps).max(0.0);
        let mut grad = vec![0.0; q.len()];
        for (r, &(x, s)) in self.rows.iter().enumerate() {
            let w = self.joint.p_xs(x, s);
            for y in 0..ny {
                grad[r * ny + y] = -self.joint.p(x, y, s) + rho * viol * w * g[y][s];
            }
        }
        Ok((self.risk(q) + 0.5 * rho * viol * viol, grad))
    }

    fn project(&self, v: &mut [f64]) {
        let ny = self.ny();
        for row in v.chunks_mut(ny) {
            let p = project_simplex(row);
            row.copy_from_slice(&p);
        }
    }

    fn to_flat(&self, policy: &Policy) -> Vec<f64> {
        let ny = self.ny();
        let mut q = Vec::with_capacity(self.rows.len() * ny);
        for &(x, s) in &self.rows {
            for y in 0..ny {
                q.push(policy.q(x, y, s));
            }
        }
        q
    }

    fn to_policy(&self, q: &[f64]) -> Result<Policy> {
        let (nx, ny, ns) = (self.joint.nx(), self.ny(), self.joint.ns());
        let mut table = vec![1.0 / ny as f64; nx * ny * ns];
        for (r, &(x, s)) in self.rows.iter().enumerate() {
            let z: f64 = q[r * ny..(r + 1) * ny].iter().map(|v| v.max(0.0)).sum();
            for y in 0..ny {
                table[(x * ny + y) * ns + s] = q[r * ny + y].max(0.0) / z;
            }
        }
        Policy::new(nx, ny, ns, table)
    }

    /// Projected gradient with backtracking on the penalized objective.
    fn minimize(&self, q: &mut Vec<f64>, rho: f64, iterations: &mut usize) -> Result<()> {
        let mut step: f64 = 1.0;
        let (mut f, mut g) = self.eval(q, rho)?;
        for _ in 0..MAX_INNER {
            *iterations += 1;
            step *= 2.0;
            let (z, fz, gz) = loop {
                let mut z: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                self.project(&mut z);
                let (fz, gz) = self.eval(&z, rho)?;
                let lin: f64 = g.iter().zip(z.iter().zip(q.iter())).map(|(gi, (zi, qi))| gi * (zi - qi)).sum();
                let sq: f64 = z.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if fz <= f + lin + sq / (2.0 * step) + 1e-15 || step < 1e-18 {
                    break (z, fz, gz);
                }
                step *= 0.5;
            };
            let change = (f - fz).abs();
            *q = z;
            f = fz;
            g = gz;
            if change <= 1e-14 * f.abs().max(1.0) {
                break;
            }
        }
        Ok(())
    }
}

/// Approximately minimizes the 0/1 risk subject to `measure(Ŷ, S) ≤ ε` for
/// `kind ∈ {MI (bits), ERMI, MC}` on a deterministic-label joint.
///
/// The returned rule is always feasible: after the penalty phase it is
/// blended toward the witness rule until the constraint holds, and replaced
/// by the witness if that has lower risk. `ε = 0` is solved exactly by the
/// DDP LP since every kind then demands independence.
pub fn solve_convex_constrained(joint: &DiscreteJoint, kind: DependenceKind, eps: f64) -> Result<ConvexSolution> {
    if !matches!(
        kind,
        DependenceKind::MutualInformation | DependenceKind::Ermi | DependenceKind::MaximalCorrelation
    ) {
        return Err(Error::UnsupportedKind(kind.to_string()));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    if !joint.is_deterministic_label() {
        return Err(Error::PreconditionViolated("labels are not a deterministic function of (x, s)".into()));
    }
    let mut rows = Vec::new();
    for x in 0..joint.nx() {
        for s in 0..joint.ns() {
            if joint.p_xs(x, s) > 0.0 {
                rows.push((x, s));
            }
        }
    }
    let prob = Problem { joint, rows, kind, eps };

    if eps == 0.0 {
        let sol = optimal_fair_policy_ddp(joint, 0.0)?;
        let q = prob.to_flat(&sol.policy);
        return Ok(ConvexSolution {
            measure: prob.measure(&q)?,
            risk: sol.risk,
            policy: sol.policy,
            used_witness: false,
            exact: true,
            iterations: 0,
        });
    }

    let mut bayes = Policy::deterministic(joint.nx(), joint.ny(), joint.ns(), |x, s| joint.label_of(x, s).unwrap_or(0));
    bayes.normalize_unsupported(joint);
    let mut q = prob.to_flat(&bayes);
    if prob.measure(&q)? <= eps {
        return Ok(ConvexSolution {
            measure: prob.measure(&q)?,
            risk: prob.risk(&q),
            policy: bayes,
            used_witness: false,
            exact: false,
            iterations: 0,
        });
    }

    let witness = witness_policy(joint)?;
    let wq = prob.to_flat(&witness);
    let mut iterations = 0;
    let mut rho = 10.0;
    let mut last_risk = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_OUTER {
        prob.minimize(&mut q, rho, &mut iterations)?;
        let viol = (prob.measure(&q)? - eps).max(0.0);
        let risk = prob.risk(&q);
        let change = (risk - last_risk).abs() / risk.abs().max(1e-12);
        if viol < CONSTRAINT_TOL && change < 1e-8 {
            converged = true;
            break;
        }
        last_risk = risk;
        rho *= 10.0;
    }

    // Restoration: the witness has zero dependence, so some blend is feasible.
    if prob.measure(&q)? > eps {
        let blend = |t: f64| -> Vec<f64> { q.iter().zip(&wq).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if prob.measure(&blend(mid))? > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        q = blend(hi);
    }
    let mut policy = prob.to_policy(&q)?;
    let mut used_witness = false;
    if prob.risk(&q) > prob.risk(&wq) {
        policy = witness;
        q = wq;
        used_witness = true;
    }
    let measure = prob.measure(&q)?;
    if measure > eps + CONSTRAINT_TOL {
        return Err(Error::ConvergenceFailure {
            iterations,
            violation: measure - eps,
            objective_change: if converged { 0.0 } else { f64::NAN },
        });
    }
    Ok(ConvexSolution {
        risk: policy.risk_01(joint)?,
        measure,
        policy,
        used_witness,
        exact: false,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::tv_distance;
    use crate::oracle::fair::witness_risk;
    use crate::oracle::generators::{random_joint, RandomJointSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const KINDS: [DependenceKind; 3] = [
        DependenceKind::MutualInformation,
        DependenceKind::Ermi,
        DependenceKind::MaximalCorrelation,
    ];

    #[test]
    fn loose_budget_returns_bayes_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
        for kind in KINDS {
            let s = solve_convex_constrained(&j, kind, 10.0).unwrap();
            assert!(s.risk.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_budget_matches_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            let lp = optimal_fair_policy_ddp(&j, 0.0).unwrap();
            for kind in KINDS {
                let s = solve_convex_constrained(&j, kind, 0.0).unwrap();
                assert!((s.risk - lp.risk).abs() < 1e-4);
                assert!(s.measure < 1e-6);
                let target = j.p_y_given_s(j.s_max()).unwrap();
                for c in s.policy.conditional_predictions(&j).unwrap().into_iter().flatten() {
                    assert!(tv_distance(&c, &target).unwrap() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn returned_rules_are_feasible_and_no_worse_than_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
            for kind in KINDS {
                let s = solve_convex_constrained(&j, kind, 0.05).unwrap();
                assert!(s.measure <= 0.05 + 1e-6);
                assert!(s.risk <= witness_risk(&j).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn risk_shrinks_with_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
        let a = solve_convex_constrained(&j, DependenceKind::Ermi, 0.01).unwrap();
        let b = solve_convex_constrained(&j, DependenceKind::Ermi, 0.1).unwrap();
        assert!(b.risk <= a.risk + 1e-6);
    }

    #[test]
    fn rejects_other_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let j = random_joint(&RandomJointSpec::default(), &mut rng).unwrap();
        assert!(matches!(
            solve_convex_constrained(&j, DependenceKind::Ddp, 0.1),
            Err(Error::UnsupportedKind(_))
        ));
    }
}
