//! Dense two-phase simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// `min cᵀx` subject to `A_eq x = b_eq`, `A_ub x ≤ b_ub`, `lo ≤ x ≤ hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// All variables default to `[0, ∞)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_matrix: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_matrix: Vec::new(),
            ineq_rhs: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_matrix.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(invalid("bounds length differs from objective length"));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() || self.ineq_matrix.len() != self.ineq_rhs.len() {
            return Err(invalid("constraint matrix and rhs lengths differ"));
        }
        if self.eq_matrix.iter().chain(&self.ineq_matrix).any(|r| r.len() != n) {
            return Err(invalid("constraint row length differs from objective length"));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.ineq_rhs.iter())
            .chain(self.eq_matrix.iter().flatten())
            .chain(self.ineq_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("LP entries must be finite"));
        }
        if self.bounds.iter().any(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY) {
            return Err(invalid("invalid variable bounds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Optimality evidence recomputed from the original standard-form data and
/// the final basis (not read off the tableau).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    /// `|cᵀx − bᵀy|` with `y` solving `Bᵀy = c_B`.
    pub duality_gap: f64,
    /// Smallest reduced cost `c_j − A_jᵀy`; dual feasibility needs `≥ 0`.
    pub min_reduced_cost: f64,
    /// Largest violation of `Ax = b, x ≥ 0`.
    pub primal_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub certificate: Option<LpCertificate>,
}

/// Original variable `x_j = offset + Σ coef · z_col`.
struct VarMap {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

/// Standard form `min cᵀz, Az = b, z ≥ 0, b ≥ 0`.
struct Standard {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Column usable as an initial basic variable for each row, if any.
    unit: Vec<Option<usize>>,
    maps: Vec<VarMap>,
}

fn to_standard(p: &LpProblem) -> Standard {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &p.bounds {
        if lo.is_finite() {
            maps.push(VarMap {
                offset: lo,
                terms: vec![(ncols, 1.0)],
            });
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap {
                offset: hi,
                terms: vec![(ncols, -1.0)],
            });
            ncols += 1;
        } else {
            maps.push(VarMap {
                offset: 0.0,
                terms: vec![(ncols, 1.0), (ncols + 1, -1.0)],
            });
            ncols += 2;
        }
    }
    let n_ineq = p.ineq_matrix.len() + bound_rows.len();
    let total = ncols + n_ineq;
    let mut c = vec![0.0; total];
    for (j, m) in maps.iter().enumerate() {
        for &(col, coef) in &m.terms {
            c[col] += p.objective[j] * coef;
        }
    }
    let expand = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; total];
        let mut r = rhs;
        for (j, m) in maps.iter().enumerate() {
            if row[j] == 0.0 {
                continue;
            }
            r -= row[j] * m.offset;
            for &(col, coef) in &m.terms {
                out[col] += row[j] * coef;
            }
        }
        (out, r)
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut unit = Vec::new();
    for (row, &rhs) in p.eq_matrix.iter().zip(&p.eq_rhs) {
        let (mut r, mut v) = expand(row, rhs);
        if v < 0.0 {
            r.iter_mut().for_each(|x| *x = -*x);
            v = -v;
        }
        a.push(r);
        b.push(v);
        unit.push(None);
    }
    let mut slack = ncols;
    let bound_iter = bound_rows.iter().map(|&(col, cap)| {
        let mut row = vec![0.0; total];
        row[col] = 1.0;
        (row, cap)
    });
    let ineq_iter = p.ineq_matrix.iter().zip(&p.ineq_rhs).map(|(row, &rhs)| expand(row, rhs));
    for (mut r, mut v) in ineq_iter.chain(bound_iter) {
        r[slack] = 1.0;
        if v < 0.0 {
            r.iter_mut().for_each(|x| *x = -*x);
            v = -v;
            unit.push(None);
        } else {
            unit.push(Some(slack));
        }
        a.push(r);
        b.push(v);
        slack += 1;
    }
    Standard {
        a,
        b,
        c,
        unit,
        maps,
    }
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Rows of the standard form still present.
    rows: Vec<usize>,
    /// Index of the right-hand-side column.
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize, d: &mut [f64]) {
        let width = self.t[r].len();
        let pv = self.t[r][col];
        for v in self.t[r].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * prow[k];
                }
                row[col] = 0.0;
            }
        }
        let f = d[col];
        if f != 0.0 {
            for k in 0..width {
                d[k] -= f * prow[k];
            }
            d[col] = 0.0;
        }
        self.basis[r] = col;
    }

    /// Runs Bland's rule on reduced-cost row `d` over columns `< limit`.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, d: &mut [f64], limit: usize) -> bool {
        let rhs = self.rhs;
        loop {
            let Some(col) = (0..limit).find(|&j| d[j] < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[col] > PIVOT_TOL {
                    let ratio = row[rhs] / row[col];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, col, d),
            }
        }
    }
}

/// Solves `M z = rhs` by Gaussian elimination with partial pivoting.
fn dense_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-300 {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (rhs[k] - s) / m[k][k];
    }
    Some(x)
}

fn certificate(std: &Standard, rows: &[usize], basis: &[usize]) -> Option<(LpCertificate, Vec<f64>)> {
    let m = rows.len();
    let ncols = std.c.len();
    let bmat: Vec<Vec<f64>> = rows.iter().map(|&r| basis.iter().map(|&j| std.a[r][j]).collect()).collect();
    let bt: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|k| bmat[k][i]).collect()).collect();
    let rhs: Vec<f64> = rows.iter().map(|&r| std.b[r]).collect();
    let zb = dense_solve(bmat, rhs.clone())?;
    let cb: Vec<f64> = basis.iter().map(|&j| std.c[j]).collect();
    let y = dense_solve(bt, cb)?;
    let mut z = vec![0.0; ncols];
    for (&j, &v) in basis.iter().zip(&zb) {
        z[j] = v;
    }
    let mut min_rc = f64::INFINITY;
    for j in 0..ncols {
        let aty: f64 = rows.iter().zip(&y).map(|(&r, yi)| std.a[r][j] * yi).sum();
        min_rc = min_rc.min(std.c[j] - aty);
    }
    let mut residual: f64 = z.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    for &r in rows {
        let ax: f64 = std.a[r].iter().zip(&z).map(|(a, v)| a * v).sum();
        residual = residual.max((ax - std.b[r]).abs());
    }
    let primal: f64 = std.c.iter().zip(&z).map(|(c, v)| c * v).sum();
    let dual: f64 = rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
    Some((
        LpCertificate {
            duality_gap: (primal - dual).abs(),
            min_reduced_cost: if ncols == 0 { 0.0 } else { min_rc },
            primal_residual: residual,
        },
        z,
    ))
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let std = to_standard(p);
    let m = std.a.len();
    let ncols = std.c.len();
    let artificial: Vec<usize> = (0..m).filter(|&i| std.unit[i].is_none()).collect();
    let width = ncols + artificial.len() + 1;
    let rhs = width - 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0; m];
    let mut art_col = ncols;
    for i in 0..m {
        t[i][..ncols].copy_from_slice(&std.a[i]);
        t[i][rhs] = std.b[i];
        match std.unit[i] {
            Some(col) => basis[i] = col,
            None => {
                t[i][art_col] = 1.0;
                basis[i] = art_col;
                art_col += 1;
            }
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        rows: (0..m).collect(),
        rhs,
    };

    // Phase 1: minimize the sum of artificials.
    let mut d = vec![0.0; width];
    for j in ncols..rhs {
        d[j] = 1.0;
    }
    for (i, row) in tab.t.iter().enumerate() {
        if tab.basis[i] >= ncols {
            for k in 0..width {
                d[k] -= row[k];
            }
        }
    }
    tab.optimize(&mut d, rhs);
    let scale = 1.0 + std.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if -d[rhs] > FEAS_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: Vec::new(),
            certificate: None,
        });
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= ncols {
            match (0..ncols).find(|&j| tab.t[i][j].abs() > 1e-9) {
                Some(col) => {
                    tab.pivot(i, col, &mut d);
                    i += 1;
                }
                None => {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    tab.rows.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 over the structural and slack columns.
    let mut d = vec![0.0; width];
    d[..ncols].copy_from_slice(&std.c);
    for (i, row) in tab.t.iter().enumerate() {
        let cb = std.c[tab.basis[i]];
        if cb != 0.0 {
            for k in 0..width {
                d[k] -= cb * row[k];
            }
        }
    }
    for v in d.iter_mut().take(rhs).skip(ncols) {
        *v = 0.0;
    }
    if !tab.optimize(&mut d, ncols) {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            x: Vec::new(),
            certificate: None,
        });
    }
    let (cert, z) = match certificate(&std, &tab.rows, &tab.basis) {
        Some(v) => v,
        None => {
            let mut z = vec![0.0; ncols];
            for (i, &j) in tab.basis.iter().enumerate() {
                z[j] = tab.t[i][rhs];
            }
            (
                LpCertificate {
                    duality_gap: f64::NAN,
                    min_reduced_cost: f64::NAN,
                    primal_residual: f64::NAN,
                },
                z,
            )
        }
    };
    let x: Vec<f64> = std
        .maps
        .iter()
        .map(|m| m.offset + m.terms.iter().map(|&(c, k)| k * z[c].max(0.0)).sum::<f64>())
        .collect();
    let value = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        certificate: Some(cert),
    })
}
