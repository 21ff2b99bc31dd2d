use serde::{Deserialize, Serialize};

use super::joint::DiscreteJoint;
use crate::error::{invalid, Result};

/// Row-sum tolerance for `Q(· | x, s)`.
pub const POLICY_TOL: f64 = 1e-9;

/// A randomized decision rule `Q(ŷ | x, s)` stored with the same `(x, y, s)`
/// layout as [`DiscreteJoint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    nx: usize,
    ny: usize,
    ns: usize,
    table: Vec<f64>,
}

impl Policy {
    pub fn new(nx: usize, ny: usize, ns: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != nx * ny * ns {
            return Err(invalid("policy table has the wrong number of entries"));
        }
        let p = Self { nx, ny, ns, table };
        for x in 0..nx {
            for s in 0..ns {
                let mut total = 0.0;
                for y in 0..ny {
                    let v = p.table[p.index(x, y, s)];
                    if !(v >= -1e-12) {
                        return Err(invalid(format!("Q({y}|{x},{s}) = {v} is negative")));
                    }
                    total += v;
                }
                if (total - 1.0).abs() > POLICY_TOL {
                    return Err(invalid(format!("Q(.|{x},{s}) sums to {total}")));
                }
            }
        }
        Ok(p)
    }

    /// `Q(ŷ | x, s) = 1/|Y|` everywhere.
    pub fn uniform(nx: usize, ny: usize, ns: usize) -> Self {
        Self {
            nx,
            ny,
            ns,
            table: vec![1.0 / ny as f64; nx * ny * ns],
        }
    }

    /// Deterministic rule `ŷ = rule(x, s)`.
    pub fn deterministic(nx: usize, ny: usize, ns: usize, rule: impl Fn(usize, usize) -> usize) -> Self {
        let mut p = Self::uniform(nx, ny, ns);
        for x in 0..nx {
            for s in 0..ns {
                let yhat = rule(x, s);
                for y in 0..ny {
                    let i = p.index(x, y, s);
                    p.table[i] = if y == yhat { 1.0 } else { 0.0 };
                }
            }
        }
        p
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.ns)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, s: usize) -> usize {
        (x * self.ny + y) * self.ns + s
    }

    /// Entry with tiny negative round-off clamped to zero.
    #[inline]
    pub fn q(&self, x: usize, y: usize, s: usize) -> f64 {
        self.table[self.index(x, y, s)].max(0.0)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Sets every row with `P(x, s) = 0` to uniform.
    pub fn normalize_unsupported(&mut self, joint: &DiscreteJoint) {
        for x in 0..self.nx {
            for s in 0..self.ns {
                if joint.p_xs(x, s) <= 0.0 {
                    for y in 0..self.ny {
                        let i = self.index(x, y, s);
                        self.table[i] = 1.0 / self.ny as f64;
                    }
                }
            }
        }
    }

    fn check_shape(&self, joint: &DiscreteJoint) -> Result<()> {
        if (joint.nx(), joint.ny(), joint.ns()) != self.shape() {
            return Err(invalid("policy and joint shapes differ"));
        }
        Ok(())
    }

    /// Joint of `(Ŷ, S)` induced by `P(x, s) Q(ŷ | x, s)`, as a `|X| = 1` joint.
    pub fn prediction_joint(&self, joint: &DiscreteJoint) -> Result<DiscreteJoint> {
        self.check_shape(joint)?;
        let mut t = vec![0.0; self.ny * self.ns];
        for x in 0..self.nx {
            for s in 0..self.ns {
                let pxs = joint.p_xs(x, s);
                if pxs <= 0.0 {
                    continue;
                }
                for y in 0..self.ny {
                    t[y * self.ns + s] += pxs * self.q(x, y, s);
                }
            }
        }
        DiscreteJoint::from_raw(1, self.ny, self.ns, t)
    }

    /// Expected 0/1 risk `P(Ŷ ≠ Y)` under `P(x, y, s) Q(ŷ | x, s)`.
    pub fn risk_01(&self, joint: &DiscreteJoint) -> Result<f64> {
        self.check_shape(joint)?;
        let mut correct = 0.0;
        for x in 0..self.nx {
            for y in 0..self.ny {
                for s in 0..self.ns {
                    correct += joint.p(x, y, s) * self.q(x, y, s);
                }
            }
        }
        Ok(1.0 - correct)
    }

    /// `E_{P(x,s)} TV(Q(· | x, s), P(Y | x, s))`.
    pub fn risk_tv(&self, joint: &DiscreteJoint) -> Result<f64> {
        self.check_shape(joint)?;
        let mut total = 0.0;
        for x in 0..self.nx {
            for s in 0..self.ns {
                let pxs = joint.p_xs(x, s);
                if pxs <= 0.0 {
                    continue;
                }
                let tv: f64 = (0..self.ny)
                    .map(|y| (self.q(x, y, s) - joint.p(x, y, s) / pxs).abs())
                    .sum::<f64>()
                    * 0.5;
                total += pxs * tv;
            }
        }
        Ok(total)
    }

    /// `P(Ŷ | S = s)` for every `s` with positive mass (`None` otherwise).
    pub fn conditional_predictions(&self, joint: &DiscreteJoint) -> Result<Vec<Option<Vec<f64>>>> {
        let pj = self.prediction_joint(joint)?;
        Ok((0..self.ns).map(|s| pj.p_y_given_s(s)).collect())
    }
}
