//! Dependence measures and fairness metrics on discrete joints and on hard
//! predictions.
//!
//! Measures named for "a joint over Y × S" marginalize X out first, so any
//! [`DiscreteJoint`] is accepted. The `*_table` variants work on a raw
//! `ny × ns` table and also return gradients with respect to its entries;
//! the surrogate penalties are built on them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{DiscreteJoint, MetricsRecord};
use crate::error::{invalid, Error, Result};

/// Probability floor inside logarithms and ratios of soft joints.
const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DependenceKind {
    #[serde(rename = "ddp")]
    Ddp,
    #[serde(rename = "rho_tv")]
    RhoTv,
    #[serde(rename = "mi")]
    MutualInformation,
    #[serde(rename = "ermi")]
    Ermi,
    #[serde(rename = "mc")]
    MaximalCorrelation,
}

impl DependenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DependenceKind::Ddp => "ddp",
            DependenceKind::RhoTv => "rho_tv",
            DependenceKind::MutualInformation => "mi",
            DependenceKind::Ermi => "ermi",
            DependenceKind::MaximalCorrelation => "mc",
        }
    }
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DependenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddp" => Ok(DependenceKind::Ddp),
            "rho_tv" | "rhotv" | "tv" => Ok(DependenceKind::RhoTv),
            "mi" | "mutual_information" => Ok(DependenceKind::MutualInformation),
            "ermi" => Ok(DependenceKind::Ermi),
            "mc" | "maximal_correlation" => Ok(DependenceKind::MaximalCorrelation),
            other => Err(Error::UnsupportedKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    Nat,
    Bit,
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(invalid(format!("{name} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid("distributions differ in length"));
    }
    Ok(tv_unchecked(p, q))
}

pub(crate) fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// A coupling `M` with row marginal `p`, column marginal `q` and
/// `Σ_{i≠j} M_ij = TV(p, q)`: the overlap `min(p_i, q_i)` goes on the diagonal,
/// the residual mass is matched greedily (north-west corner rule).
pub fn optimal_tv_coupling(p: &[f64], q: &[f64]) -> Result<Vec<Vec<f64>>> {
    if p.len() != q.len() {
        return Err(invalid("distributions differ in length"));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let k = p.len();
    let mut m = vec![vec![0.0; k]; k];
    let mut row_left = vec![0.0; k];
    let mut col_left = vec![0.0; k];
    for i in 0..k {
        let d = p[i].min(q[i]).max(0.0);
        m[i][i] = d;
        row_left[i] = (p[i] - d).max(0.0);
        col_left[i] = (q[i] - d).max(0.0);
    }
    let (mut i, mut j) = (0, 0);
    while i < k && j < k {
        if row_left[i] <= 0.0 {
            i += 1;
            continue;
        }
        if col_left[j] <= 0.0 {
            j += 1;
            continue;
        }
        let t = row_left[i].min(col_left[j]);
        m[i][j] += t;
        row_left[i] -= t;
        col_left[j] -= t;
    }
    Ok(m)
}

fn marginals(t: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let ns = t.first().map_or(0, |r| r.len());
    let py: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let ps: Vec<f64> = (0..ns).map(|s| t.iter().map(|r| r[s]).sum()).collect();
    (py, ps)
}

/// `Σ_{y,s} |P(Ŷ=y | S=s) − P(Ŷ=y)|`.
pub fn ddp(joint: &DiscreteJoint) -> Result<f64> {
    let t = joint.ys_table();
    let (py, ps) = marginals(&t);
    let mut total = 0.0;
    for (s, &p) in ps.iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::EmptyGroup { group: s });
        }
        for (y, row) in t.iter().enumerate() {
            total += (row[s] / p - py[y]).abs();
        }
    }
    Ok(total)
}

/// `E_{s∼P_S} TV(P_{Y|S=s}, P_Y)`.
pub fn rho_tv(joint: &DiscreteJoint) -> f64 {
    let t = joint.ys_table();
    let (py, ps) = marginals(&t);
    let mut total = 0.0;
    for (s, &p) in ps.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let tv: f64 = t.iter().zip(&py).map(|(row, q)| (row[s] / p - q).abs()).sum::<f64>() * 0.5;
        total += p * tv;
    }
    total
}

/// `Σ p(y,s) log(p(y,s) / (p(y) p(s)))` with `0 log 0 = 0`.
pub fn mutual_information(joint: &DiscreteJoint, base: LogBase) -> f64 {
    let nats = mi_nats(&joint.ys_table());
    match base {
        LogBase::Nat => nats,
        LogBase::Bit => nats / std::f64::consts::LN_2,
    }
}

fn mi_nats(t: &[Vec<f64>]) -> f64 {
    let (py, ps) = marginals(t);
    let mut total = 0.0;
    for (y, row) in t.iter().enumerate() {
        for (s, &p) in row.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (py[y] * ps[s])).ln();
            }
        }
    }
    total.max(0.0)
}

/// `Σ p(y,s)² / (p(y) p(s)) − 1`.
pub fn ermi(joint: &DiscreteJoint) -> Result<f64> {
    let t = joint.ys_table();
    let (py, ps) = marginals(&t);
    let mut total = 0.0;
    for (y, row) in t.iter().enumerate() {
        for (s, &p) in row.iter().enumerate() {
            if p > 0.0 {
                let d = py[y] * ps[s];
                if d <= 0.0 {
                    return Err(Error::SingularSupport { y, s });
                }
                total += p * p / d;
            }
        }
    }
    Ok((total - 1.0).max(0.0))
}

/// Second singular value of `B[y,s] = p(y,s) / √(p(y) p(s))`.
pub fn maximal_correlation(joint: &DiscreteJoint) -> Result<f64> {
    Ok(mc_pair(&joint.ys_table())?.sigma)
}

/// Second singular triple of the normalized joint matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub sigma: f64,
    /// Left vector over `y`.
    pub u: Vec<f64>,
    /// Right vector over `s`.
    pub v: Vec<f64>,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200_000;

/// Largest eigenpair of the symmetric PSD matrix `g` restricted to the
/// orthogonal complement of the unit vector `top`, by power iteration from a
/// fixed set of deterministic start vectors.
fn deflated_top_eigen(g: &[Vec<f64>], top: &[f64]) -> (f64, Vec<f64>) {
    let n = top.len();
    let deflate = |v: &mut Vec<f64>| {
        let c: f64 = v.iter().zip(top).map(|(a, b)| a * b).sum();
        for (vi, ti) in v.iter_mut().zip(top) {
            *vi -= c * ti;
        }
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| g[i].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let starts: [Box<dyn Fn(usize) -> f64>; 3] = [
        Box::new(|_| 1.0),
        Box::new(|i| (i + 1) as f64),
        Box::new(|i| ((i + 1) * (i + 1)) as f64),
    ];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts.iter() {
        let mut v: Vec<f64> = (0..n).map(start).collect();
        deflate(&mut v);
        let nv = norm(&v);
        if nv < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= nv);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let mut w = apply(&v);
            deflate(&mut w);
            lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let residual = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let nw = norm(&w);
            if nw < 1e-300 {
                lambda = 0.0;
                break;
            }
            w.iter_mut().for_each(|a| *a /= nw);
            v = w;
            if residual <= POWER_TOL {
                break;
            }
        }
        if best.as_ref().is_none_or(|(l, _)| lambda > *l) {
            best = Some((lambda, v));
        }
    }
    best.unwrap_or_else(|| {
        let mut v = vec![0.0; n];
        if n > 1 {
            v[0] = top[1];
            v[1] = -top[0];
            let nv = norm(&v).max(1e-300);
            v.iter_mut().for_each(|a| *a /= nv);
        }
        (0.0, v)
    })
}

/// Second singular triple of `B` for a `ny × ns` table (any positive total).
pub fn mc_pair(t: &[Vec<f64>]) -> Result<SingularPair> {
    let (py, ps) = marginals(t);
    if py.iter().filter(|&&p| p > 0.0).count() < 2 || ps.iter().filter(|&&p| p > 0.0).count() < 2 {
        return Err(Error::DegenerateMarginal);
    }
    let total: f64 = py.iter().sum();
    let ny = py.len();
    let ns = ps.len();
    // Normalize so the top singular value is exactly one.
    let b: Vec<Vec<f64>> = (0..ny)
        .map(|y| {
            (0..ns)
                .map(|s| {
                    let d = py[y] * ps[s];
                    if d > 0.0 {
                        t[y][s] / d.sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let sqrt_py: Vec<f64> = py.iter().map(|p| (p / total).sqrt()).collect();
    let sqrt_ps: Vec<f64> = ps.iter().map(|p| (p / total).sqrt()).collect();
    // Subtract the known top singular pair before forming the Gram matrix so
    // that near-independent tables give singular values near round-off, not
    // near its square root.
    let bd: Vec<Vec<f64>> = (0..ny)
        .map(|y| (0..ns).map(|s| b[y][s] - sqrt_py[y] * sqrt_ps[s]).collect())
        .collect();
    let mul_t = |u: &[f64]| -> Vec<f64> {
        (0..ns).map(|s| (0..ny).map(|y| bd[y][s] * u[y]).sum()).collect()
    };
    let mul = |v: &[f64]| -> Vec<f64> {
        (0..ny).map(|y| (0..ns).map(|s| bd[y][s] * v[s]).sum()).collect()
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (sigma, u, v) = if ny <= ns {
        let g: Vec<Vec<f64>> = (0..ny)
            .map(|i| (0..ny).map(|j| (0..ns).map(|s| bd[i][s] * bd[j][s]).sum()).collect())
            .collect();
        let (_, u) = deflated_top_eigen(&g, &sqrt_py);
        let mut v = mul_t(&u);
        let sigma = norm(&v);
        normalize_or_complement(&mut v, &sqrt_ps);
        (sigma, u, v)
    } else {
        let g: Vec<Vec<f64>> = (0..ns)
            .map(|i| (0..ns).map(|j| (0..ny).map(|y| bd[y][i] * bd[y][j]).sum()).collect())
            .collect();
        let (_, v) = deflated_top_eigen(&g, &sqrt_ps);
        let mut u = mul(&v);
        let sigma = norm(&u);
        normalize_or_complement(&mut u, &sqrt_py);
        (sigma, u, v)
    };
    Ok(SingularPair {
        sigma: sigma.min(1.0),
        u,
        v,
    })
}

fn normalize_or_complement(v: &mut [f64], top: &[f64]) {
    let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 1e-150 {
        v.iter_mut().for_each(|a| *a /= n);
        return;
    }
    v.iter_mut().for_each(|a| *a = 0.0);
    if v.len() > 1 {
        v[0] = top[1];
        v[1] = -top[0];
        let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        v.iter_mut().for_each(|a| *a /= n);
    }
}

/// Value and gradient of a measure of a soft `ny × ns` joint table with
/// respect to its entries (marginals treated as functions of the table).
#[derive(Debug, Clone, PartialEq)]
pub struct TableGradient {
    pub value: f64,
    pub grad: Vec<Vec<f64>>,
}

/// Mutual information (nats) of a table and `∂/∂J = log(J / (p_y p_s)) − 1`.
pub fn mi_table_grad(t: &[Vec<f64>]) -> TableGradient {
    let (py, ps) = marginals(t);
    let mut value = 0.0;
    let grad = t
        .iter()
        .enumerate()
        .map(|(y, row)| {
            row.iter()
                .enumerate()
                .map(|(s, &j)| {
                    let j = j.max(PROB_FLOOR);
                    let r = (j / (py[y] * ps[s]).max(PROB_FLOOR)).ln();
                    value += j * r;
                    r - 1.0
                })
                .collect()
        })
        .collect();
    TableGradient { value, grad }
}

/// ERMI of a table and its gradient.
pub fn ermi_table_grad(t: &[Vec<f64>]) -> TableGradient {
    let (py, ps) = marginals(t);
    let ny = py.len();
    let ns = ps.len();
    let py: Vec<f64> = py.into_iter().map(|p| p.max(PROB_FLOOR)).collect();
    let ps: Vec<f64> = ps.into_iter().map(|p| p.max(PROB_FLOOR)).collect();
    let mut value = -1.0;
    for y in 0..ny {
        for s in 0..ns {
            value += t[y][s] * t[y][s] / (py[y] * ps[s]);
        }
    }
    // Row and column sums of J²/(p_y p_s) divided by the matching marginal.
    let row_term: Vec<f64> = (0..ny)
        .map(|y| (0..ns).map(|s| t[y][s] * t[y][s] / (py[y] * py[y] * ps[s])).sum())
        .collect();
    let col_term: Vec<f64> = (0..ns)
        .map(|s| (0..ny).map(|y| t[y][s] * t[y][s] / (py[y] * ps[s] * ps[s])).sum())
        .collect();
    let grad = (0..ny)
        .map(|y| {
            (0..ns)
                .map(|s| 2.0 * t[y][s] / (py[y] * ps[s]) - row_term[y] - col_term[s])
                .collect()
        })
        .collect();
    TableGradient { value, grad }
}

/// Maximal correlation of a table and its gradient with the singular pair
/// held fixed.
pub fn mc_table_grad(t: &[Vec<f64>]) -> Result<TableGradient> {
    let pair = mc_pair(t)?;
    let (py, ps) = marginals(t);
    let sigma = pair.sigma;
    let grad = (0..py.len())
        .map(|y| {
            (0..ps.len())
                .map(|s| {
                    let (a, b) = (py[y].max(PROB_FLOOR), ps[s].max(PROB_FLOOR));
                    pair.u[y] * pair.v[s] / (a * b).sqrt()
                        - 0.5 * sigma * (pair.u[y] * pair.u[y] / a + pair.v[s] * pair.v[s] / b)
                })
                .collect()
        })
        .collect();
    Ok(TableGradient { value: sigma, grad })
}

fn group_counts(sensitive: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; k];
    for &s in sensitive {
        if s >= k {
            return Err(invalid(format!("sensitive value {s} outside 0..{k}")));
        }
        counts[s] += 1;
    }
    if let Some(group) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup { group });
    }
    Ok(counts)
}

/// `NR(s) = P(Ŷ = 0 | S = s)` for `s = 0..k`.
pub fn negative_rate(pred: &[u8], sensitive: &[usize], k: usize) -> Result<Vec<f64>> {
    if pred.len() != sensitive.len() {
        return Err(invalid("pred and sensitive differ in length"));
    }
    let counts = group_counts(sensitive, k)?;
    let mut zeros = vec![0usize; k];
    for (&p, &s) in pred.iter().zip(sensitive) {
        if p == 0 {
            zeros[s] += 1;
        }
    }
    Ok(zeros
        .iter()
        .zip(&counts)
        .map(|(&z, &c)| z as f64 / c as f64)
        .collect())
}

/// `Σ_{s,y,ŷ} |P(Ŷ=ŷ | Y=y, S=s) − P(Ŷ=ŷ | Y=y)|` over populated `(y, s)` cells.
pub fn deo(pred: &[u8], label: &[u8], sensitive: &[usize]) -> f64 {
    let k = sensitive.iter().max().map_or(0, |m| m + 1);
    // counts[y][s][ŷ]
    let mut counts = vec![vec![[0usize; 2]; k]; 2];
    for ((&p, &y), &s) in pred.iter().zip(label).zip(sensitive) {
        counts[y as usize][s][p as usize] += 1;
    }
    let mut total = 0.0;
    for by_s in &counts {
        let ny: usize = by_s.iter().map(|c| c[0] + c[1]).sum();
        if ny == 0 {
            continue;
        }
        let pos_y = by_s.iter().map(|c| c[1]).sum::<usize>() as f64 / ny as f64;
        for c in by_s {
            let n = c[0] + c[1];
            if n == 0 {
                continue;
            }
            let pos = c[1] as f64 / n as f64;
            total += 2.0 * (pos - pos_y).abs();
        }
    }
    total
}

/// DDP of hard predictions against `k` sensitive groups.
pub fn ddp_predictions(pred: &[u8], sensitive: &[usize], k: usize) -> Result<f64> {
    ddp(&crate::domain::empirical_joint_k(pred, sensitive, k)?)
}

/// Accuracy, DDP, DEO, NR(s) and per-group accuracy of hard predictions.
pub fn metrics(pred: &[u8], label: &[u8], sensitive: &[usize], k: usize) -> Result<MetricsRecord> {
    if pred.len() != label.len() || pred.len() != sensitive.len() {
        return Err(invalid("pred, label and sensitive differ in length"));
    }
    let counts = group_counts(sensitive, k)?;
    let mut correct = vec![0usize; k];
    for ((&p, &y), &s) in pred.iter().zip(label).zip(sensitive) {
        if p == y {
            correct[s] += 1;
        }
    }
    let n = pred.len() as f64;
    Ok(MetricsRecord {
        accuracy: correct.iter().sum::<usize>() as f64 / n,
        ddp: ddp_predictions(pred, sensitive, k)?,
        deo: deo(pred, label, sensitive),
        nr: negative_rate(pred, sensitive, k)?,
        group_accuracy: correct
            .iter()
            .zip(&counts)
            .map(|(&c, &m)| c as f64 / m as f64)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn random_table(rng: &mut ChaCha8Rng, ny: usize, ns: usize) -> Vec<Vec<f64>> {
        let raw: Vec<f64> = (0..ny * ns).map(|_| Exp1.sample(rng)).collect();
        let z: f64 = raw.iter().sum();
        raw.chunks(ns).map(|r| r.iter().map(|v| v / z).collect()).collect()
    }

    fn joint(t: &[Vec<f64>]) -> DiscreteJoint {
        DiscreteJoint::from_pair_table(t).unwrap()
    }

    fn independent(py: &[f64], ps: &[f64]) -> DiscreteJoint {
        joint(&py.iter().map(|a| ps.iter().map(|b| a * b).collect()).collect::<Vec<_>>())
    }

    fn y_equals_s() -> DiscreteJoint {
        joint(&[vec![0.5, 0.0], vec![0.0, 0.5]])
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.7, 0.3], &[0.4, 0.6]).unwrap() - 0.3).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn coupling_examples() {
        let m = optimal_tv_coupling(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(m, vec![vec![0.3, 0.0], vec![0.0, 0.7]]);
        let m = optimal_tv_coupling(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(m, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(optimal_tv_coupling(&[0.5, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn coupling_matches_tv_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 2..7 {
            for _ in 0..20 {
                let p = random_table(&mut rng, 1, k).remove(0);
                let q = random_table(&mut rng, 1, k).remove(0);
                let m = optimal_tv_coupling(&p, &q).unwrap();
                let off: f64 = (0..k)
                    .flat_map(|i| (0..k).map(move |j| (i, j)))
                    .filter(|(i, j)| i != j)
                    .map(|(i, j)| m[i][j])
                    .sum();
                assert!((off - tv_distance(&p, &q).unwrap()).abs() < 1e-10);
                for i in 0..k {
                    let row: f64 = m[i].iter().sum();
                    let col: f64 = m.iter().map(|r| r[i]).sum();
                    assert!((row - p[i]).abs() < 1e-12 && (col - q[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ddp_examples() {
        assert!(ddp(&independent(&[0.3, 0.7], &[0.6, 0.4])).unwrap() < 1e-12);
        assert!((ddp(&y_equals_s()).unwrap() - 2.0).abs() < 1e-15);
        let empty = DiscreteJoint::from_raw(1, 2, 2, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert_eq!(ddp(&empty).unwrap_err(), Error::EmptyGroup { group: 1 });
    }

    #[test]
    fn deo_examples() {
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let s = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(deo(&y, &y, &s), 0.0);
        // Ŷ = S, Y independent of both.
        let pred: Vec<u8> = s.iter().map(|&v| v as u8).collect();
        assert!((deo(&pred, &y, &s) - 4.0).abs() < 1e-15);
        // Ŷ independent of (Y, S), uniform.
        let s2 = [0, 0, 0, 0, 1, 1, 1, 1];
        let y2 = [0, 0, 1, 1, 0, 0, 1, 1];
        let p2 = [0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(deo(&p2, &y2, &s2), 0.0);
    }

    #[test]
    fn rho_tv_examples() {
        assert!(rho_tv(&independent(&[0.2, 0.8], &[0.5, 0.5])) < 1e-15);
        assert!((rho_tv(&y_equals_s()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mi_examples() {
        assert!(mutual_information(&independent(&[0.2, 0.8], &[0.3, 0.7]), LogBase::Nat) < 1e-12);
        let j = y_equals_s();
        assert!((mutual_information(&j, LogBase::Bit) - 1.0).abs() < 1e-15);
        assert!((mutual_information(&j, LogBase::Nat) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mi_matches_cellwise_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let t = random_table(&mut rng, 3, 4);
            let py: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
            let ps: Vec<f64> = (0..4).map(|s| t.iter().map(|r| r[s]).sum()).collect();
            let mut kl = 0.0;
            for y in 0..3 {
                for s in 0..4 {
                    kl += t[y][s] * (t[y][s].ln() - py[y].ln() - ps[s].ln());
                }
            }
            assert!((mutual_information(&joint(&t), LogBase::Nat) - kl).abs() < 1e-12);
        }
    }

    #[test]
    fn ermi_examples() {
        assert!(ermi(&independent(&[0.2, 0.8], &[0.3, 0.7])).unwrap() < 1e-12);
        assert!((ermi(&y_equals_s()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mc_examples() {
        assert!(maximal_correlation(&independent(&[0.2, 0.8], &[0.3, 0.7])).unwrap() < 1e-10);
        assert!((maximal_correlation(&y_equals_s()).unwrap() - 1.0).abs() < 1e-12);
        let three = joint(&[
            vec![0.2, 0.0, 0.0],
            vec![0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.3],
        ]);
        assert!((maximal_correlation(&three).unwrap() - 1.0).abs() < 1e-9);
        let degenerate = joint(&[vec![0.5, 0.5], vec![0.0, 0.0]]);
        assert_eq!(maximal_correlation(&degenerate).unwrap_err(), Error::DegenerateMarginal);
    }

    #[test]
    fn mc_binary_matches_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = random_table(&mut rng, 2, 2);
            let p1 = t[1][0] + t[1][1];
            let q1 = t[0][1] + t[1][1];
            let pearson = (t[1][1] - p1 * q1) / (p1 * (1.0 - p1) * q1 * (1.0 - q1)).sqrt();
            let mc = maximal_correlation(&joint(&t)).unwrap();
            assert!((mc - pearson.abs()).abs() < 1e-8, "{mc} vs {pearson}");
        }
    }

    #[test]
    fn mc_matches_full_svd_on_larger_tables() {
        // Oracle: second eigenvalue of BᵀB via the characteristic gap of
        // Jacobi rotations on a symmetric matrix.
        fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
            let n = a.len();
            for _ in 0..200 {
                for p in 0..n {
                    for q in p + 1..n {
                        if a[p][q].abs() < 1e-300 {
                            continue;
                        }
                        let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let (akp, akq) = (a[k][p], a[k][q]);
                            a[k][p] = c * akp - s * akq;
                            a[k][q] = s * akp + c * akq;
                        }
                        for k in 0..n {
                            let (apk, aqk) = (a[p][k], a[q][k]);
                            a[p][k] = c * apk - s * aqk;
                            a[q][k] = s * apk + c * aqk;
                        }
                    }
                }
            }
            let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
            ev.sort_by(|x, y| y.total_cmp(x));
            ev
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (ny, ns) in [(3, 3), (3, 4), (4, 2), (4, 4)] {
            for _ in 0..10 {
                let t = random_table(&mut rng, ny, ns);
                let (py, ps) = marginals(&t);
                let g: Vec<Vec<f64>> = (0..ns)
                    .map(|i| {
                        (0..ns)
                            .map(|j| {
                                (0..ny)
                                    .map(|y| t[y][i] * t[y][j] / (py[y] * (ps[i] * ps[j]).sqrt()))
                                    .sum()
                            })
                            .collect()
                    })
                    .collect();
                let ev = jacobi_eigenvalues(g);
                let oracle = ev[1].max(0.0).sqrt();
                let mc = maximal_correlation(&joint(&t)).unwrap();
                assert!((mc - oracle).abs() < 1e-7, "{ny}x{ns}: {mc} vs {oracle}");
            }
        }
    }

    #[test]
    fn negative_rate_examples() {
        assert_eq!(negative_rate(&[0, 0, 0], &[0, 1, 1], 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(negative_rate(&[0, 1], &[0, 0], 2).unwrap_err(), Error::EmptyGroup { group: 1 });
    }

    #[test]
    fn metrics_accuracy_is_group_weighted() {
        let pred = [1, 0, 1, 1, 0];
        let label = [1, 1, 1, 0, 0];
        let s = [0, 0, 1, 1, 1];
        let m = metrics(&pred, &label, &s, 2).unwrap();
        let w = [0.4, 0.6];
        let mixed: f64 = m.group_accuracy.iter().zip(w).map(|(a, b)| a * b).sum();
        assert!((m.accuracy - mixed).abs() < 1e-15);
        assert_eq!(m.nr, vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let t = random_table(&mut rng, 2, 3);
            let evals: [(&str, Box<dyn Fn(&[Vec<f64>]) -> TableGradient>); 3] = [
                ("mi", Box::new(mi_table_grad)),
                ("ermi", Box::new(ermi_table_grad)),
                ("mc", Box::new(|t| mc_table_grad(t).unwrap())),
            ];
            for (name, f) in evals.iter() {
                let g = f(&t);
                for y in 0..2 {
                    for s in 0..3 {
                        let h = 1e-6;
                        let mut a = t.clone();
                        let mut b = t.clone();
                        a[y][s] += h;
                        b[y][s] -= h;
                        let fd = (f(&a).value - f(&b).value) / (2.0 * h);
                        assert!(
                            (fd - g.grad[y][s]).abs() < 1e-5 * (1.0 + fd.abs()),
                            "{name} ({y},{s}): fd {fd} vs {}",
                            g.grad[y][s]
                        );
                    }
                }
            }
        }
    }

    fn table_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..5, 2usize..5).prop_flat_map(|(ny, ns)| {
            prop::collection::vec(0.0f64..1.0, ny * ns).prop_filter_map("zero mass", move |raw| {
                let z: f64 = raw.iter().sum();
                if z < 1e-3 {
                    return None;
                }
                Some(raw.chunks(ns).map(|r| r.iter().map(|v| v / z).collect()).collect())
            })
        })
    }

    fn has_full_marginals(t: &[Vec<f64>]) -> bool {
        let (py, ps) = marginals(t);
        py.iter().chain(&ps).all(|&p| p > 1e-9)
    }

    proptest! {
        #[test]
        fn rho_tv_at_most_half_ddp(t in table_strategy()) {
            prop_assume!(has_full_marginals(&t));
            let j = joint(&t);
            prop_assert!(rho_tv(&j) <= ddp(&j).unwrap() / 2.0 + 1e-12);
        }

        #[test]
        fn pinsker_type_lemmas(t in table_strategy()) {
            prop_assume!(has_full_marginals(&t));
            let j = joint(&t);
            let rho = rho_tv(&j);
            let mi = mutual_information(&j, LogBase::Bit);
            prop_assert!(mi - 2.0 * std::f64::consts::LOG2_E * rho * rho >= -1e-9);
            let e = ermi(&j).unwrap();
            let tt = 2.0 * rho;
            let h = if tt <= 1.0 { tt * tt } else { 2.0 * tt - 1.0 };
            prop_assert!(e - h >= -1e-9);
            let r = (t.len().min(t[0].len()) - 1) as f64;
            prop_assert!(r * maximal_correlation(&j).unwrap() - e >= -1e-9);
        }

        #[test]
        fn merging_labels_never_increases_dependence(t in table_strategy()) {
            prop_assume!(has_full_marginals(&t) && t.len() >= 3);
            let mut merged: Vec<Vec<f64>> = t[1..].to_vec();
            for (m, a) in merged[0].iter_mut().zip(&t[0]) {
                *m += a;
            }
            let (a, b) = (joint(&t), joint(&merged));
            prop_assert!(mutual_information(&b, LogBase::Nat) <= mutual_information(&a, LogBase::Nat) + 1e-12);
            prop_assert!(ermi(&b).unwrap() <= ermi(&a).unwrap() + 1e-12);
        }

        #[test]
        fn measures_vanish_on_products(
            py in prop::collection::vec(0.05f64..1.0, 2..5),
            ps in prop::collection::vec(0.05f64..1.0, 2..5),
        ) {
            let zy: f64 = py.iter().sum();
            let zs: f64 = ps.iter().sum();
            let py: Vec<f64> = py.iter().map(|v| v / zy).collect();
            let ps: Vec<f64> = ps.iter().map(|v| v / zs).collect();
            let j = independent(&py, &ps);
            prop_assert!(ddp(&j).unwrap() < 1e-10);
            prop_assert!(rho_tv(&j) < 1e-10);
            prop_assert!(mutual_information(&j, LogBase::Nat) < 1e-10);
            prop_assert!(ermi(&j).unwrap() < 1e-10);
            prop_assert!(maximal_correlation(&j).unwrap() < 1e-10);
        }
    }
}
