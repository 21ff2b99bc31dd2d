//! The DRO decision variable `q` over sensitive outcomes, its χ² ball, and
//! Euclidean projections onto the simplex and the ball.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Simplex membership tolerance for `q`.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// `χ²(q, anchor) = Σ (q_s − a_s)² / a_s`.
pub fn chi2(q: &[f64], anchor: &[f64]) -> f64 {
    q.iter()
        .zip(anchor)
        .map(|(qi, ai)| (qi - ai) * (qi - ai) / ai)
        .sum()
}

pub fn on_simplex(q: &[f64], tol: f64) -> bool {
    q.iter().all(|&v| v >= -tol) && (q.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let ones = vec![1.0; v.len()];
    weighted_simplex_solve(v, &ones)
}

/// Minimizer over the simplex of `Σ (q_i − v_i)² / (2 c_i)`, i.e. the point
/// `q_i = max(0, c_i (w_i − ν))` with `ν` chosen so that `Σ q = 1`, where
/// `w_i = v_i / c_i`. With `c ≡ 1` this is the plain simplex projection.
pub(crate) fn weighted_simplex_solve(w: &[f64], c: &[f64]) -> Vec<f64> {
    let k = w.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let mut sum_cw = 0.0;
    let mut sum_c = 0.0;
    let mut nu = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        sum_cw += c[i] * w[i];
        sum_c += c[i];
        let candidate = (sum_cw - 1.0) / sum_c;
        let next_ok = order.get(rank + 1).is_none_or(|&j| w[j] <= candidate);
        if w[i] > candidate && next_ok {
            nu = candidate;
            break;
        }
        nu = candidate;
    }
    w.iter()
        .zip(c)
        .map(|(wi, ci)| (ci * (wi - nu)).max(0.0))
        .collect()
}

/// Point of the simplex minimizing `½‖q − v‖² + μ χ²(q, anchor)`.
///
/// This is both the χ²-penalized (proximal) step and, for the right `μ`, the
/// projection onto the χ² ball.
pub fn chi2_prox(v: &[f64], anchor: &[f64], mu: f64) -> Vec<f64> {
    if mu <= 0.0 {
        return project_simplex(v);
    }
    // Stationarity: q_i (1 + 2μ/a_i) = v_i + 2μ − ν, clamped at 0.
    let c: Vec<f64> = anchor.iter().map(|a| a / (a + 2.0 * mu)).collect();
    let w: Vec<f64> = v.iter().map(|vi| vi + 2.0 * mu).collect();
    weighted_simplex_solve(&w, &c)
}

/// Euclidean projection of `v` onto `{q ∈ simplex : χ²(q, anchor) ≤ radius}`.
///
/// Projects onto the simplex first; if the χ² constraint is then violated,
/// bisects on the constraint's KKT multiplier `μ` (re-solving the simplex
/// subproblem at each trial) until the boundary is hit. The returned point is
/// always on the feasible side of the bisection bracket.
pub fn project_chi2_simplex(v: &[f64], anchor: &[f64], radius: f64) -> Result<Vec<f64>> {
    if v.len() != anchor.len() || v.is_empty() {
        return Err(invalid("v and anchor must have the same positive length"));
    }
    if !on_simplex(anchor, SIMPLEX_TOL) || anchor.iter().any(|&a| a <= 0.0) {
        return Err(invalid("anchor must lie strictly inside the simplex"));
    }
    if !(radius >= 0.0) || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("radius must be non-negative and v finite"));
    }
    if radius == 0.0 {
        return Ok(anchor.to_vec());
    }
    let q0 = project_simplex(v);
    if chi2(&q0, anchor) <= radius {
        return Ok(q0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut q_hi = chi2_prox(v, anchor, hi);
    let mut guard = 0;
    while chi2(&q_hi, anchor) > radius {
        lo = hi;
        hi *= 2.0;
        q_hi = chi2_prox(v, anchor, hi);
        guard += 1;
        if guard > 200 {
            return Ok(anchor.to_vec());
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q_mid = chi2_prox(v, anchor, mid);
        if chi2(&q_mid, anchor) > radius {
            lo = mid;
        } else {
            hi = mid;
            q_hi = q_mid;
        }
    }
    Ok(q_hi)
}

/// DRO weights `q` with their anchor `p̂` and ball radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights {
    q: Vec<f64>,
    anchor: Vec<f64>,
    radius: f64,
}

impl SimplexWeights {
    /// Starts at `q = anchor`.
    pub fn new(anchor: Vec<f64>, radius: f64) -> Result<Self> {
        if !on_simplex(&anchor, SIMPLEX_TOL) || anchor.iter().any(|&a| a <= 0.0) {
            return Err(invalid("anchor must lie strictly inside the simplex"));
        }
        if !(radius >= 0.0) {
            return Err(invalid("radius must be non-negative"));
        }
        Ok(Self {
            q: anchor.clone(),
            anchor,
            radius,
        })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn len(&self) -> usize {
        self.q.len()
    }
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Sets `q` to the projection of `v` onto the χ² ball.
    pub fn project_from(&mut self, v: &[f64]) -> Result<()> {
        self.q = project_chi2_simplex(v, &self.anchor, self.radius)?;
        Ok(())
    }

    /// Sets `q` directly; it must be on the simplex.
    pub fn set_q(&mut self, q: Vec<f64>) -> Result<()> {
        if q.len() != self.anchor.len() || !on_simplex(&q, SIMPLEX_TOL) {
            return Err(invalid("q must lie on the simplex"));
        }
        self.q = q;
        Ok(())
    }

    pub fn chi2_to_anchor(&self) -> f64 {
        chi2(&self.q, &self.anchor)
    }
}
