//! Finite joint distributions `P(X, Y, S)` and their derived marginals.
//!
//! Cells are indexed `(x, y, s)` and stored row-major with `s` fastest.
//! Marginals are always recomputed from `probs`, never cached.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used for every normalization check.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    nx: usize,
    ny: usize,
    ns: usize,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    /// Validated constructor: sizes with `|Y| >= 2`, `|S| >= 2`, non-negative
    /// entries summing to one.
    pub fn new(nx: usize, ny: usize, ns: usize, probs: Vec<f64>) -> Result<Self> {
        let joint = Self::from_raw(nx, ny, ns, probs)?;
        let report = validate(&joint);
        if let Some(v) = report
            .violations
            .iter()
            .find(|v| !matches!(v, Violation::EmptyGroup { .. }))
        {
            return Err(invalid(v.to_string()));
        }
        Ok(joint)
    }

    /// Shape-checked constructor that skips value validation, so that
    /// [`validate`] can report on broken tables.
    pub fn from_raw(nx: usize, ny: usize, ns: usize, probs: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny < 2 || ns < 2 {
            return Err(invalid(format!(
                "supports must satisfy |X|>=1, |Y|>=2, |S|>=2; got ({nx}, {ny}, {ns})"
            )));
        }
        if probs.len() != nx * ny * ns {
            return Err(invalid(format!(
                "probability table has {} entries, expected {}",
                probs.len(),
                nx * ny * ns
            )));
        }
        Ok(Self { nx, ny, ns, probs })
    }

    /// Joint over `Y × S` only (`|X| = 1`), from a `ny × ns` table.
    pub fn from_pair_table(table: &[Vec<f64>]) -> Result<Self> {
        let ny = table.len();
        let ns = table.first().map_or(0, |r| r.len());
        if table.iter().any(|r| r.len() != ns) {
            return Err(invalid("ragged pair table"));
        }
        let probs = table.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(1, ny, ns, probs)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ns(&self) -> usize {
        self.ns
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, s: usize) -> usize {
        (x * self.ny + y) * self.ns + s
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize, s: usize) -> f64 {
        self.probs[self.index(x, y, s)]
    }

    pub fn p_s(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ns];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for (s, o) in out.iter_mut().enumerate() {
                    *o += self.p(x, y, s);
                }
            }
        }
        out
    }

    pub fn p_y(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ny];
        for x in 0..self.nx {
            for (y, o) in out.iter_mut().enumerate() {
                for s in 0..self.ns {
                    *o += self.p(x, y, s);
                }
            }
        }
        out
    }

    pub fn p_x(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|x| {
                (0..self.ny)
                    .map(|y| (0..self.ns).map(|s| self.p(x, y, s)).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// `P(x, s)`.
    pub fn p_xs(&self, x: usize, s: usize) -> f64 {
        (0..self.ny).map(|y| self.p(x, y, s)).sum()
    }

    /// `P(Y, S)` as a `ny × ns` table (X marginalized out).
    pub fn ys_table(&self) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; self.ns]; self.ny];
        for x in 0..self.nx {
            for (y, row) in t.iter_mut().enumerate() {
                for (s, v) in row.iter_mut().enumerate() {
                    *v += self.p(x, y, s);
                }
            }
        }
        t
    }

    /// The `Y × S` marginal as its own joint with `|X| = 1`.
    pub fn ys_joint(&self) -> DiscreteJoint {
        let probs = self.ys_table().into_iter().flatten().collect();
        DiscreteJoint {
            nx: 1,
            ny: self.ny,
            ns: self.ns,
            probs,
        }
    }

    /// `P(Y | S = s)`; `None` when `P(s) = 0`.
    pub fn p_y_given_s(&self, s: usize) -> Option<Vec<f64>> {
        let ps = self.p_s()[s];
        if ps <= 0.0 {
            return None;
        }
        let mut out = vec![0.0; self.ny];
        for x in 0..self.nx {
            for (y, o) in out.iter_mut().enumerate() {
                *o += self.p(x, y, s);
            }
        }
        out.iter_mut().for_each(|v| *v /= ps);
        Some(out)
    }

    /// `P(X | S = s)`; `None` when `P(s) = 0`.
    pub fn p_x_given_s(&self, s: usize) -> Option<Vec<f64>> {
        let ps = self.p_s()[s];
        if ps <= 0.0 {
            return None;
        }
        Some((0..self.nx).map(|x| self.p_xs(x, s) / ps).collect())
    }

    /// `P(Y | X = x, S = s)`; `None` when `P(x, s) = 0`.
    pub fn p_y_given_xs(&self, x: usize, s: usize) -> Option<Vec<f64>> {
        let pxs = self.p_xs(x, s);
        if pxs <= 0.0 {
            return None;
        }
        Some((0..self.ny).map(|y| self.p(x, y, s) / pxs).collect())
    }

    /// `P(X = x | Y = y, S = s)`; `None` when `P(y, s) = 0`.
    pub fn p_x_given_ys(&self, x: usize, y: usize, s: usize) -> Option<f64> {
        let pys: f64 = (0..self.nx).map(|xx| self.p(xx, y, s)).sum();
        if pys <= 0.0 {
            None
        } else {
            Some(self.p(x, y, s) / pys)
        }
    }

    /// True iff every `(x, s)` with positive mass has a single label with
    /// conditional probability one.
    pub fn is_deterministic_label(&self) -> bool {
        (0..self.nx).all(|x| (0..self.ns).all(|s| self.label_of(x, s).is_some() || self.p_xs(x, s) <= 0.0))
    }

    /// The deterministic label `h(x, s)` if `P(· | x, s)` is a point mass.
    pub fn label_of(&self, x: usize, s: usize) -> Option<usize> {
        let cond = self.p_y_given_xs(x, s)?;
        let positive: Vec<usize> = (0..self.ny).filter(|&y| cond[y] > NORMALIZATION_TOL).collect();
        match positive.as_slice() {
            [y] if (cond[*y] - 1.0).abs() <= NORMALIZATION_TOL => Some(*y),
            _ => None,
        }
    }

    /// Index of the most likely sensitive outcome (lowest index on ties).
    pub fn s_max(&self) -> usize {
        let ps = self.p_s();
        let mut best = 0;
        for (s, &p) in ps.iter().enumerate() {
            if p > ps[best] {
                best = s;
            }
        }
        best
    }

    /// Majority margin `δ` with `P(S = s_max) = 1/2 + δ` (may be ≤ 0).
    pub fn delta_majority(&self) -> f64 {
        self.p_s()[self.s_max()] - 0.5
    }
}

/// One violated invariant of a [`DiscreteJoint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Normalization { total: f64 },
    Negative { index: usize, value: f64 },
    NonFinite { index: usize },
    EmptyGroup { group: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Normalization { total } => {
                write!(f, "probabilities sum to {total}, not 1")
            }
            Violation::Negative { index, value } => {
                write!(f, "negative probability {value} at cell {index}")
            }
            Violation::NonFinite { index } => write!(f, "non-finite probability at cell {index}"),
            Violation::EmptyGroup { group } => write!(f, "sensitive group {group} has zero mass"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Whether `Y = h(X, S)` holds, so the deterministic-label oracles apply.
    pub is_deterministic_label: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated invariant; never fails.
pub fn validate(joint: &DiscreteJoint) -> ValidationReport {
    let mut violations = Vec::new();
    for (index, &v) in joint.probs.iter().enumerate() {
        if !v.is_finite() {
            violations.push(Violation::NonFinite { index });
        } else if v < 0.0 {
            violations.push(Violation::Negative { index, value: v });
        }
    }
    let total: f64 = joint.probs.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > NORMALIZATION_TOL {
        violations.push(Violation::Normalization { total });
    }
    for (group, p) in joint.p_s().into_iter().enumerate() {
        if p <= 0.0 {
            violations.push(Violation::EmptyGroup { group });
        }
    }
    let is_deterministic_label = joint.is_deterministic_label();
    ValidationReport {
        violations,
        is_deterministic_label,
    }
}

/// Plug-in joint of `(Ŷ, S)` from hard predictions; `|X| = 1`, `|Y| = 2`.
pub fn empirical_joint(predictions: &[u8], sensitive: &[usize]) -> Result<DiscreteJoint> {
    let k = sensitive.iter().max().map_or(0, |m| m + 1);
    empirical_joint_k(predictions, sensitive, k)
}

/// As [`empirical_joint`] with an explicit group count `k`.
pub fn empirical_joint_k(predictions: &[u8], sensitive: &[usize], k: usize) -> Result<DiscreteJoint> {
    if predictions.is_empty() {
        return Err(invalid("empty prediction vector"));
    }
    if predictions.len() != sensitive.len() {
        return Err(invalid("predictions and sensitive differ in length"));
    }
    if k < 2 {
        return Err(invalid("need at least two sensitive groups"));
    }
    let mut counts = vec![0usize; 2 * k];
    let mut group = vec![0usize; k];
    for (&yhat, &s) in predictions.iter().zip(sensitive) {
        if yhat > 1 {
            return Err(invalid(format!("prediction {yhat} is not binary")));
        }
        if s >= k {
            return Err(invalid(format!("sensitive value {s} outside 0..{k}")));
        }
        counts[yhat as usize * k + s] += 1;
        group[s] += 1;
    }
    if let Some(g) = group.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup { group: g });
    }
    let n = predictions.len() as f64;
    let probs = counts.into_iter().map(|c| c as f64 / n).collect();
    Ok(DiscreteJoint {
        nx: 1,
        ny: 2,
        ns: k,
        probs,
    })
}
