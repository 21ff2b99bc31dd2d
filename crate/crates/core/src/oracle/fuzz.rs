//! Seeded fuzz runs over the bound checks, Pinsker-type inequalities, and
//! the plain-text counterexample format.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{check_ddp_bound, check_perturbed_bound, check_ratio_bound, check_soft_bound, BoundReport};
use super::generators::{make_ratio_joint, random_joint, random_pair_joint, RandomJointSpec, RatioJointSpec};
use crate::domain::{DiscreteJoint, Policy};
use crate::error::{invalid, Result};
use crate::measures::{ermi, maximal_correlation, mutual_information, rho_tv, DependenceKind, LogBase};

/// Instance, budget and offending rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub joint: DiscreteJoint,
    pub epsilon: f64,
    pub policy: Option<Policy>,
}

fn fmt_list(out: &mut String, label: &str, vals: &[f64]) {
    out.push_str(label);
    for v in vals {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

impl Counterexample {
    /// Four lines: `supports nx ny ns`, `probs …`, `epsilon e`, `policy …`
    /// (`policy none` when absent). Values use 17 significant digits.
    pub fn to_text(&self) -> String {
        let j = &self.joint;
        let mut out = format!("supports {} {} {}\n", j.nx(), j.ny(), j.ns());
        fmt_list(&mut out, "probs", j.probs());
        let _ = writeln!(out, "epsilon {:.16e}", self.epsilon);
        match &self.policy {
            Some(p) => fmt_list(&mut out, "policy", p.table()),
            None => out.push_str("policy none\n"),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| invalid(format!("missing '{name}' line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(invalid(format!("expected '{name}' line, got '{line}'")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let nums = |v: &[String]| -> Result<Vec<f64>> {
            v.iter().map(|t| t.parse::<f64>().map_err(|e| invalid(format!("'{t}': {e}")))).collect()
        };
        let sizes = field("supports")?;
        let sizes: Vec<usize> = sizes
            .iter()
            .map(|t| t.parse().map_err(|e| invalid(format!("'{t}': {e}"))))
            .collect::<Result<_>>()?;
        let [nx, ny, ns] = sizes[..] else {
            return Err(invalid("supports needs three sizes"));
        };
        let probs = nums(&field("probs")?)?;
        let eps = nums(&field("epsilon")?)?;
        let policy = field("policy")?;
        let policy = if policy == ["none"] {
            None
        } else {
            Some(Policy::new(nx, ny, ns, nums(&policy)?)?)
        };
        Ok(Self {
            joint: DiscreteJoint::from_raw(nx, ny, ns, probs)?,
            epsilon: *eps.first().ok_or_else(|| invalid("missing epsilon value"))?,
            policy,
        })
    }
}

/// Outcome of a fuzz run over one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub check: String,
    pub instances: usize,
    pub applicable: usize,
    pub satisfied: usize,
    pub violations: usize,
    /// Smallest `bound − observed` over applicable instances.
    pub min_slack: f64,
    pub worst: Option<Counterexample>,
    pub counterexamples: Vec<Counterexample>,
    /// Largest LP duality gap and most negative reduced cost seen.
    pub max_duality_gap: f64,
    pub min_reduced_cost: f64,
}

impl FuzzSummary {
    fn from_reports(check: &str, reports: Vec<(DiscreteJoint, BoundReport)>) -> Self {
        let mut s = FuzzSummary {
            check: check.to_string(),
            instances: reports.len(),
            applicable: 0,
            satisfied: 0,
            violations: 0,
            min_slack: f64::INFINITY,
            worst: None,
            counterexamples: Vec::new(),
            max_duality_gap: 0.0,
            min_reduced_cost: 0.0,
        };
        for (joint, r) in reports {
            if let Some(c) = r.certificate {
                s.max_duality_gap = s.max_duality_gap.max(c.duality_gap);
                s.min_reduced_cost = s.min_reduced_cost.min(c.min_reduced_cost);
            }
            if !r.applicable {
                continue;
            }
            s.applicable += 1;
            let cx = || Counterexample {
                joint: joint.clone(),
                epsilon: r.epsilon,
                policy: Some(r.policy.clone()),
            };
            if r.satisfied {
                s.satisfied += 1;
            } else {
                s.violations += 1;
                s.counterexamples.push(cx());
            }
            if r.slack() < s.min_slack {
                s.min_slack = r.slack();
                s.worst = Some(cx());
            }
        }
        s
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Independent generator for instance `i` of a run seeded by `seed`.
pub fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Runs `f` over `trials` instances in parallel; results come back in
/// instance order.
fn run_instances<T: Send>(trials: usize, f: impl Fn(usize) -> Result<Vec<T>> + Sync) -> Result<Vec<T>> {
    let parts: Vec<Result<Vec<T>>> = (0..trials).into_par_iter().map(&f).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// DDP bound over `trials` random deterministic-label joints × each `ε`.
pub fn fuzz_ddp_bound(spec: &RandomJointSpec, trials: usize, eps: &[f64], seed: u64) -> Result<FuzzSummary> {
    let reports = run_instances(trials, |i| {
        let joint = random_joint(spec, &mut instance_rng(seed, i))?;
        eps.iter().map(|&e| Ok((joint.clone(), check_ddp_bound(&joint, e)?))).collect()
    })?;
    Ok(FuzzSummary::from_reports("ddp_bound", reports))
}

pub fn fuzz_soft_bound(
    spec: &RandomJointSpec,
    kind: DependenceKind,
    trials: usize,
    eps: &[f64],
    seed: u64,
) -> Result<FuzzSummary> {
    let reports = run_instances(trials, |i| {
        let joint = random_joint(spec, &mut instance_rng(seed, i))?;
        eps.iter().map(|&e| Ok((joint.clone(), check_soft_bound(&joint, kind, e)?))).collect()
    })?;
    Ok(FuzzSummary::from_reports(&format!("soft_bound_{}", kind.as_str()), reports))
}

fn ratio_spec(base: &RatioJointSpec, rng: &mut impl Rng) -> RatioJointSpec {
    let ns = rng.random_range(2..=3);
    RatioJointSpec {
        nx_tilde: rng.random_range(1..=3),
        ns,
        blocks: rng.random_range(1..=ns),
        ..base.clone()
    }
}

/// Exact-ratio joints (`η = 0`) under the TV-loss formulation with DDP.
pub fn fuzz_ratio_bound(trials: usize, eps: &[f64], seed: u64) -> Result<FuzzSummary> {
    let reports = run_instances(trials, |i| {
        let mut rng = instance_rng(seed, i);
        let spec = ratio_spec(&RatioJointSpec::default(), &mut rng);
        let rj = make_ratio_joint(&spec, rng.random())?;
        eps.iter().map(|&e| Ok((rj.joint.clone(), check_ratio_bound(&rj.joint, e)?))).collect()
    })?;
    Ok(FuzzSummary::from_reports("ratio_bound", reports))
}

/// Perturbed-ratio joints with strength `eta` under `ρ_TV ≤ ε`.
pub fn fuzz_perturbed_bound(trials: usize, eps: &[f64], eta: f64, seed: u64) -> Result<FuzzSummary> {
    let base = RatioJointSpec {
        eta,
        ..Default::default()
    };
    let reports = run_instances(trials, |i| {
        let mut rng = instance_rng(seed, i);
        let spec = ratio_spec(&base, &mut rng);
        let rj = make_ratio_joint(&spec, rng.random())?;
        eps.iter().map(|&e| Ok((rj.joint.clone(), check_perturbed_bound(&rj, e)?))).collect()
    })?;
    Ok(FuzzSummary::from_reports("perturbed_bound", reports))
}

/// Slack of the three Pinsker-type inequalities on one `Y × S` joint:
/// `I(bits) − 2 log₂e · ρ²`, `ERMI − h(2ρ)`, and `r · MC − ERMI`.
pub fn pinsker_slacks(joint: &DiscreteJoint) -> Result<[f64; 3]> {
    let rho = rho_tv(joint);
    let mi = mutual_information(joint, LogBase::Bit);
    let e = ermi(joint)?;
    let t = 2.0 * rho;
    let h = if t <= 1.0 { t * t } else { 2.0 * t - 1.0 };
    let r = (joint.ny().min(joint.ns()) - 1) as f64;
    let mc = maximal_correlation(joint)?;
    Ok([mi - 2.0 * std::f64::consts::LOG2_E * rho * rho, e - h, r * mc - e])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub trials: usize,
    /// Minimum slack per inequality: mutual information, χ², maximal correlation.
    pub min_slack: [f64; 3],
    /// Joints with slack below `−1e-9`, per inequality.
    pub violations: [Vec<Counterexample>; 3],
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.min_slack.iter().all(|&s| s >= -1e-9)
    }
}

/// Pinsker-type inequalities on `trials` Dirichlet-uniform joints with
/// `|Y|, |S| ∈ {2, 3, 4}`.
pub fn check_pinsker_lemmas(trials: usize, seed: u64) -> Result<LemmaReport> {
    let results = run_instances(trials, |i| {
        let mut rng = instance_rng(seed, i);
        let ny = rng.random_range(2..=4);
        let ns = rng.random_range(2..=4);
        let j = random_pair_joint(&mut rng, ny, ns)?;
        let s = pinsker_slacks(&j)?;
        Ok(vec![(j, s)])
    })?;
    let mut rep = LemmaReport {
        trials,
        min_slack: [f64::INFINITY; 3],
        violations: [Vec::new(), Vec::new(), Vec::new()],
    };
    for (j, s) in results {
        for k in 0..3 {
            rep.min_slack[k] = rep.min_slack[k].min(s[k]);
            if s[k] < -1e-9 {
                rep.violations[k].push(Counterexample {
                    joint: j.clone(),
                    epsilon: 0.0,
                    policy: None,
                });
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_text_round_trip() {
        let j = DiscreteJoint::new(1, 2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = Policy::new(1, 2, 2, vec![1.0 / 3.0, 0.5, 2.0 / 3.0, 0.5]).unwrap();
        let c = Counterexample {
            joint: j,
            epsilon: 0.1,
            policy: Some(p),
        };
        let text = c.to_text();
        assert!(text.starts_with("supports 1 2 2\nprobs 1.0000000000000001e-1"));
        assert_eq!(Counterexample::from_text(&text).unwrap(), c);
        let none = Counterexample { policy: None, ..c };
        assert_eq!(Counterexample::from_text(&none.to_text()).unwrap(), none);
    }

    #[test]
    fn deterministic_copy_lemma_slack() {
        // Y = S, uniform: I = 1 bit, ρ = 1/2.
        let j = DiscreteJoint::new(1, 2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let s = pinsker_slacks(&j).unwrap();
        assert!((s[0] - (1.0 - 2.0 * std::f64::consts::LOG2_E * 0.25)).abs() < 1e-12);
        assert!(s.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn independent_joint_has_zero_slack() {
        let j = DiscreteJoint::new(1, 2, 2, vec![0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4]).unwrap();
        let s = pinsker_slacks(&j).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
    }

    #[test]
    fn fuzz_runs_are_order_stable() {
        let spec = RandomJointSpec::default();
        let a = fuzz_ddp_bound(&spec, 12, &[0.1], 5).unwrap();
        let b = fuzz_ddp_bound(&spec, 12, &[0.1], 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.instances, 12);
        assert!(a.passed());
    }

    #[test]
    fn lemma_sample() {
        let r = check_pinsker_lemmas(100, 1).unwrap();
        assert!(r.passed(), "{:?}", r.min_slack);
    }
}
