//! Differentiable fairness penalties and the q-weighted training risk.
//!
//! Group rates are smoothed as `r_s = mean_{i ∈ s} σ(f_w(x_i) / h)`. The DDP
//! penalty is `Σ_s Σ_ŷ |r_s^(ŷ) − r̄^(ŷ)|` with `r̄ = Σ_s ω_s r_s`; the other
//! kinds evaluate the exact measure of the soft joint
//! `P̃(ŷ = 1, s) = ω_s r_s`, `P̃(ŷ = 0, s) = ω_s (1 − r_s)`.

use serde::{Deserialize, Serialize};

use crate::domain::{sigmoid, softplus, Dataset, ScoreModel, SimplexWeights, SIMPLEX_TOL};
use crate::error::{invalid, Error, Result};
use crate::measures::{ermi_table_grad, mc_table_grad, mi_table_grad, DependenceKind, TableGradient};

/// Per-sample weighting of the risk by the DRO variable `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `q_{s_i} / (n p̂_{s_i})`; `q = p̂` gives the plain empirical risk.
    #[default]
    Ratio,
    /// `q_{s_i} / n`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftGroupStats {
    pub soft_rate: Vec<f64>,
    pub overall: f64,
    pub bandwidth: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyEval {
    pub value: f64,
    pub grad_w: Vec<f64>,
    pub grad_q: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEval {
    pub value: f64,
    pub grad_w: Vec<f64>,
    pub grad_q: Vec<f64>,
}

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(invalid(format!("expected {k} group weights, got {}", weights.len())));
    }
    if weights.iter().any(|&w| !(w >= -SIMPLEX_TOL)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid("group weights must lie on the simplex"));
    }
    Ok(())
}

fn check_model(model: &ScoreModel, data: &Dataset) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(invalid(format!(
            "model expects {} features, data has {}",
            model.dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// Soft per-group positive rates at bandwidth `h`, combined with `weights`.
pub fn soft_group_rates(model: &ScoreModel, data: &Dataset, h: f64, weights: &[f64]) -> Result<SoftGroupStats> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidBandwidth(h));
    }
    check_model(model, data)?;
    check_weights(weights, data.num_groups())?;
    let mut sums = vec![0.0; data.num_groups()];
    for i in 0..data.len() {
        sums[data.sensitive()[i]] += sigmoid(model.score(data.row(i)) / h);
    }
    let soft_rate: Vec<f64> = sums
        .iter()
        .zip(data.group_counts())
        .map(|(s, &c)| s / c as f64)
        .collect();
    let overall = soft_rate.iter().zip(weights).map(|(r, w)| r * w).sum();
    Ok(SoftGroupStats {
        soft_rate,
        overall,
        bandwidth: h,
        weights: weights.to_vec(),
    })
}

/// `0.1 · std(scores)`, or `0.1` when the scores are (nearly) constant.
pub fn default_bandwidth(model: &ScoreModel, data: &Dataset) -> f64 {
    scaled_bandwidth(model, data, 0.1)
}

/// `scale · std(scores)`, or `scale` when the scores are (nearly) constant.
pub fn scaled_bandwidth(model: &ScoreModel, data: &Dataset, scale: f64) -> f64 {
    let n = data.len() as f64;
    let scores: Vec<f64> = (0..data.len()).map(|i| model.score(data.row(i))).collect();
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd.is_finite() && sd > 1e-8 {
        scale * sd
    } else {
        scale
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Penalty value and the partial derivatives with respect to the group
/// rates `r` and the group weights `ω`.
fn penalty_in_rates(kind: DependenceKind, r: &[f64], omega: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let k = r.len();
    match kind {
        DependenceKind::Ddp => {
            let rbar: f64 = r.iter().zip(omega).map(|(a, b)| a * b).sum();
            let signs: Vec<f64> = r.iter().map(|&rs| sign(rs - rbar)).collect();
            let total_sign: f64 = signs.iter().sum();
            let value = 2.0 * r.iter().map(|&rs| (rs - rbar).abs()).sum::<f64>();
            let d_r = (0..k).map(|j| 2.0 * signs[j] - 2.0 * omega[j] * total_sign).collect();
            let d_omega = (0..k).map(|j| -2.0 * r[j] * total_sign).collect();
            Ok((value, d_r, d_omega))
        }
        DependenceKind::MutualInformation | DependenceKind::Ermi | DependenceKind::MaximalCorrelation => {
            let table = vec![
                (0..k).map(|s| omega[s] * (1.0 - r[s])).collect::<Vec<f64>>(),
                (0..k).map(|s| omega[s] * r[s]).collect::<Vec<f64>>(),
            ];
            let TableGradient { value, grad } = match kind {
                DependenceKind::MutualInformation => mi_table_grad(&table),
                DependenceKind::Ermi => ermi_table_grad(&table),
                _ => mc_table_grad(&table)?,
            };
            let d_r = (0..k).map(|s| omega[s] * (grad[1][s] - grad[0][s])).collect();
            let d_omega = (0..k).map(|s| r[s] * grad[1][s] + (1.0 - r[s]) * grad[0][s]).collect();
            Ok((value, d_r, d_omega))
        }
        DependenceKind::RhoTv => Err(Error::UnsupportedKind(kind.to_string())),
    }
}

/// Fairness penalty at bandwidth `h` with weights `ω = q` (when given) or the
/// empirical group frequencies.
pub fn penalty(
    kind: DependenceKind,
    model: &ScoreModel,
    data: &Dataset,
    h: f64,
    q: Option<&SimplexWeights>,
) -> Result<PenaltyEval> {
    if kind == DependenceKind::RhoTv {
        return Err(Error::UnsupportedKind(kind.to_string()));
    }
    let omega = match q {
        Some(q) => q.q().to_vec(),
        None => data.group_frequencies(),
    };
    let stats = soft_group_rates(model, data, h, &omega)?;
    let (value, d_r, d_omega) = penalty_in_rates(kind, &stats.soft_rate, &omega)?;
    let mut grad_w = vec![0.0; model.num_weights()];
    let counts = data.group_counts();
    for i in 0..data.len() {
        let s = data.sensitive()[i];
        if d_r[s] == 0.0 {
            continue;
        }
        let x = data.row(i);
        let sig = sigmoid(model.score(x) / h);
        let scale = d_r[s] * sig * (1.0 - sig) / (h * counts[s] as f64);
        model.accumulate_grad(x, scale, &mut grad_w);
    }
    Ok(PenaltyEval {
        value,
        grad_w,
        grad_q: q.map(|_| d_omega),
    })
}

/// Mean binary cross-entropy reweighted by `q`, with gradients in `w` and `q`.
pub fn weighted_risk(model: &ScoreModel, data: &Dataset, q: &SimplexWeights, mode: WeightMode) -> Result<RiskEval> {
    check_model(model, data)?;
    let k = data.num_groups();
    if q.len() != k {
        return Err(invalid(format!("q has {} entries for {k} groups", q.len())));
    }
    let n = data.len() as f64;
    let p_hat = data.group_frequencies();
    let group_scale: Vec<f64> = (0..k)
        .map(|s| match mode {
            WeightMode::Ratio => 1.0 / (n * p_hat[s]),
            WeightMode::Literal => 1.0 / n,
        })
        .collect();
    let mut loss_sum = vec![0.0; k];
    let mut grad_w = vec![0.0; model.num_weights()];
    let mut value = 0.0;
    for i in 0..data.len() {
        let s = data.sensitive()[i];
        let x = data.row(i);
        let f = model.score(x);
        let y = data.labels()[i] as f64;
        let loss = softplus(f) - y * f;
        loss_sum[s] += loss;
        let w = q.q()[s] * group_scale[s];
        value += w * loss;
        model.accumulate_grad(x, w * (sigmoid(f) - y), &mut grad_w);
    }
    let grad_q = (0..k).map(|s| loss_sum[s] * group_scale[s]).collect();
    Ok(RiskEval { value, grad_w, grad_q })
}

/// Plain mean cross-entropy and its gradient.
pub fn mean_risk(model: &ScoreModel, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_model(model, data)?;
    let n = data.len() as f64;
    let mut grad_w = vec![0.0; model.num_weights()];
    let mut value = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let f = model.score(x);
        let y = data.labels()[i] as f64;
        value += (softplus(f) - y * f) / n;
        model.accumulate_grad(x, (sigmoid(f) - y) / n, &mut grad_w);
    }
    Ok((value, grad_w))
}
