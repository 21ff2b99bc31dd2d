//! Seeded random joints for fuzzing the solvers and bound checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::domain::DiscreteJoint;
use crate::error::{invalid, Error, Result};

/// Family of random joints: symmetric Dirichlet(1) over all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomJointSpec {
    /// Inclusive range for `|X|`.
    pub nx: (usize, usize),
    pub ny: usize,
    pub ns: usize,
    /// Collapse each `P(· | x, s)` onto its most likely label.
    pub deterministic: bool,
    /// Draw `P(S = s_max)` uniformly from this open interval.
    pub majority: Option<(f64, f64)>,
}

impl Default for RandomJointSpec {
    fn default() -> Self {
        Self {
            nx: (1, 4),
            ny: 2,
            ns: 2,
            deterministic: true,
            majority: Some((0.55, 0.95)),
        }
    }
}

pub(crate) fn dirichlet(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

/// Group masses with `P(s_max)` drawn from `range` and the rest split by a
/// Dirichlet draw; `s_max` is chosen uniformly.
fn majority_masses(rng: &mut impl Rng, ns: usize, range: (f64, f64)) -> Vec<f64> {
    let top = rng.random_range(range.0..range.1);
    let smax = rng.random_range(0..ns);
    let rest = dirichlet(rng, ns - 1);
    let mut out = Vec::with_capacity(ns);
    let mut it = rest.into_iter();
    for s in 0..ns {
        out.push(if s == smax { top } else { (1.0 - top) * it.next().unwrap_or(0.0) });
    }
    out
}

fn check_majority(range: Option<(f64, f64)>, ns: usize) -> Result<()> {
    if let Some((lo, hi)) = range {
        let floor = 1.0 / ns as f64;
        if !(lo < hi && lo > floor.max(0.0) && hi < 1.0) {
            return Err(Error::InvalidParams(format!("majority range ({lo}, {hi}) must lie in (1/|S|, 1)")));
        }
    }
    Ok(())
}

pub fn random_joint(spec: &RandomJointSpec, rng: &mut impl Rng) -> Result<DiscreteJoint> {
    let (lo, hi) = spec.nx;
    if lo == 0 || hi < lo || spec.ny < 2 || spec.ns < 2 {
        return Err(Error::InvalidParams("need 1 <= nx.0 <= nx.1, ny >= 2, ns >= 2".into()));
    }
    check_majority(spec.majority, spec.ns)?;
    let nx = rng.random_range(lo..=hi);
    let (ny, ns) = (spec.ny, spec.ns);
    let mut probs = dirichlet(rng, nx * ny * ns);
    let idx = |x: usize, y: usize, s: usize| (x * ny + y) * ns + s;
    if spec.deterministic {
        for x in 0..nx {
            for s in 0..ns {
                let mut best = 0;
                let mut mass = 0.0;
                for y in 0..ny {
                    let v = probs[idx(x, y, s)];
                    mass += v;
                    if v > probs[idx(x, best, s)] {
                        best = y;
                    }
                }
                for y in 0..ny {
                    probs[idx(x, y, s)] = if y == best { mass } else { 0.0 };
                }
            }
        }
    }
    if let Some(range) = spec.majority {
        let target = majority_masses(rng, ns, range);
        let mut current = vec![0.0; ns];
        for (i, p) in probs.iter().enumerate() {
            current[i % ns] += p;
        }
        for (i, p) in probs.iter_mut().enumerate() {
            *p *= target[i % ns] / current[i % ns];
        }
    }
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    DiscreteJoint::new(nx, ny, ns, probs)
}

/// A joint whose features split as `X = [g(S), X̃]` with `g(s) = s mod blocks`
/// and `P(x | y, s) / P(x | s) = φ(x, y)` before perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioJointSpec {
    pub nx_tilde: usize,
    pub ny: usize,
    pub ns: usize,
    /// Number of distinct values of `g(S)`.
    pub blocks: usize,
    /// Perturbation strength `η ∈ [0, 1)`.
    pub eta: f64,
    pub majority: Option<(f64, f64)>,
}

impl Default for RatioJointSpec {
    fn default() -> Self {
        Self {
            nx_tilde: 3,
            ny: 2,
            ns: 2,
            blocks: 2,
            eta: 0.0,
            majority: Some((0.55, 0.95)),
        }
    }
}

/// Joint plus its ratio envelope; tables are indexed `x · ny + y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioJoint {
    pub joint: DiscreteJoint,
    /// Unperturbed ratio `φ(x, y)`.
    pub phi: Vec<f64>,
    /// `min_s` and `max_s` of the recomputed ratio over `s` with `P(x | s) > 0`.
    pub phi_lower: Vec<f64>,
    pub phi_upper: Vec<f64>,
    /// `φ_U − φ_L`.
    pub delta: Vec<f64>,
}

impl RatioJoint {
    /// `E_{P_X × P_{Y | S = s_max}} Δ(x, y)`.
    pub fn expected_delta(&self) -> f64 {
        let j = &self.joint;
        let px = j.p_x();
        let py = j.p_y_given_s(j.s_max()).unwrap_or_else(|| vec![0.0; j.ny()]);
        let mut total = 0.0;
        for (x, pxv) in px.iter().enumerate() {
            for (y, pyv) in py.iter().enumerate() {
                total += pxv * pyv * self.delta[x * j.ny() + y];
            }
        }
        total
    }
}

/// `P(x | y, s) / P(x | s)` for every `(x, y, s)` with `P(x | s) > 0`
/// (`None` elsewhere), recomputed from the joint.
pub fn conditional_ratios(joint: &DiscreteJoint) -> Vec<Option<f64>> {
    let (nx, ny, ns) = (joint.nx(), joint.ny(), joint.ns());
    let mut out = vec![None; nx * ny * ns];
    for s in 0..ns {
        let Some(pxs) = joint.p_x_given_s(s) else { continue };
        for x in 0..nx {
            if pxs[x] <= 0.0 {
                continue;
            }
            for y in 0..ny {
                if let Some(pxys) = joint.p_x_given_ys(x, y, s) {
                    out[joint.index(x, y, s)] = Some(pxys / pxs[x]);
                }
            }
        }
    }
    out
}

pub fn make_ratio_joint(spec: &RatioJointSpec, seed: u64) -> Result<RatioJoint> {
    if !(spec.eta >= 0.0 && spec.eta < 1.0) {
        return Err(Error::InvalidPerturbation(spec.eta));
    }
    if spec.nx_tilde == 0 || spec.ny < 2 || spec.ns < 2 || spec.blocks == 0 || spec.blocks > spec.ns {
        return Err(invalid("need nx_tilde >= 1, ny >= 2, ns >= 2, 1 <= blocks <= ns"));
    }
    check_majority(spec.majority, spec.ns)?;
    let (nt, ny, ns, m) = (spec.nx_tilde, spec.ny, spec.ns, spec.blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = match spec.majority {
        Some(r) => majority_masses(&mut rng, ns, r),
        None => dirichlet(&mut rng, ns),
    };
    let p_y: Vec<Vec<f64>> = (0..m).map(|_| dirichlet(&mut rng, ny)).collect();
    // p_xt[a][y][x̃] = P(x̃ | y, a)
    let p_xt: Vec<Vec<Vec<f64>>> = (0..m).map(|_| (0..ny).map(|_| dirichlet(&mut rng, nt)).collect()).collect();
    let p_xa: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..nt).map(|t| (0..ny).map(|y| p_y[a][y] * p_xt[a][y][t]).sum()).collect())
        .collect();
    let nx = m * nt;
    let mut phi = vec![0.0; nx * ny];
    for a in 0..m {
        for t in 0..nt {
            for y in 0..ny {
                phi[(a * nt + t) * ny + y] = p_xt[a][y][t] / p_xa[a][t];
            }
        }
    }

    let mut probs = vec![0.0; nx * ny * ns];
    for s in 0..ns {
        let a = s % m;
        // ψ(x̃, y, s) = m(x̃) ζ(x̃, s) β_y(s): zero mean under P(x̃ | a) for each
        // y, zero mean under P(y | a) for each x̃, and |ψ| ≤ φ.
        let mins: Vec<f64> = (0..nt)
            .map(|t| (0..ny).map(|y| phi[(a * nt + t) * ny + y]).fold(f64::INFINITY, f64::min))
            .collect();
        let xi: Vec<f64> = (0..nt).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let w: f64 = (0..nt).map(|t| p_xa[a][t] * mins[t]).sum();
        let c = if w > 0.0 {
            (0..nt).map(|t| p_xa[a][t] * mins[t] * xi[t]).sum::<f64>() / w
        } else {
            0.0
        };
        let zeta: Vec<f64> = xi.iter().map(|v| 0.5 * (v - c)).collect();
        let (p0, p1) = (p_y[a][0], p_y[a][1]);
        let big = p0.max(p1);
        let mut beta = vec![0.0; ny];
        beta[0] = p1 / big;
        beta[1] = -p0 / big;
        for t in 0..nt {
            let x = a * nt + t;
            for y in 0..ny {
                let psi = mins[t] * zeta[t] * beta[y];
                let cond = p_xa[a][t] * (phi[x * ny + y] + spec.eta * psi);
                probs[(x * ny + y) * ns + s] = ps[s] * p_y[a][y] * cond.max(0.0);
            }
        }
    }
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    let joint = DiscreteJoint::new(nx, ny, ns, probs)?;

    let ratios = conditional_ratios(&joint);
    let mut phi_lower = vec![0.0; nx * ny];
    let mut phi_upper = vec![0.0; nx * ny];
    for x in 0..nx {
        for y in 0..ny {
            let vals: Vec<f64> = (0..ns).filter_map(|s| ratios[joint.index(x, y, s)]).collect();
            if !vals.is_empty() {
                phi_lower[x * ny + y] = vals.iter().copied().fold(f64::INFINITY, f64::min);
                phi_upper[x * ny + y] = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
    }
    let delta = phi_upper.iter().zip(&phi_lower).map(|(u, l)| u - l).collect();
    Ok(RatioJoint {
        joint,
        phi,
        phi_lower,
        phi_upper,
        delta,
    })
}

/// Random `ny × ns` table with Dirichlet(1) cells, as a `|X| = 1` joint.
pub fn random_pair_joint(rng: &mut impl Rng, ny: usize, ns: usize) -> Result<DiscreteJoint> {
    DiscreteJoint::new(1, ny, ns, dirichlet(rng, ny * ns))
}
