use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tabular samples `(x_i, y_i, s_i)` with a binary label and a k-ary
/// sensitive attribute. Features are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    sensitive: Vec<usize>,
    group_counts: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset with `k` sensitive groups, checking every invariant:
    /// equal lengths, finite features, labels in {0,1}, and no empty group.
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<u8>,
        sensitive: Vec<usize>,
        k: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(invalid("dataset must contain at least one sample"));
        }
        if sensitive.len() != n {
            return Err(invalid(format!(
                "sensitive has length {} but labels has length {n}",
                sensitive.len()
            )));
        }
        if features.len() != n * dim {
            return Err(invalid(format!(
                "feature buffer has length {} but n*d = {}",
                features.len(),
                n * dim
            )));
        }
        if k < 1 {
            return Err(invalid("need at least one sensitive group"));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite feature value at row {}",
                pos / dim.max(1)
            )));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(invalid(format!("label at row {pos} is not in {{0,1}}")));
        }
        let mut group_counts = vec![0usize; k];
        for (i, &s) in sensitive.iter().enumerate() {
            if s >= k {
                return Err(invalid(format!(
                    "sensitive value {s} at row {i} is outside 0..{k}"
                )));
            }
            group_counts[s] += 1;
        }
        if let Some(group) = group_counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyGroup { group });
        }
        Ok(Self {
            features,
            dim,
            labels,
            sensitive,
            group_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_groups(&self) -> usize {
        self.group_counts.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn group_counts(&self) -> &[usize] {
        &self.group_counts
    }

    /// Empirical sensitive marginal `p̂_s = n_s / n`.
    pub fn group_frequencies(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.group_counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Rows at `indices`, in that order. Fails if a group ends up empty.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut sensitive = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(invalid(format!("row index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            sensitive.push(self.sensitive[i]);
        }
        Self::new(features, self.dim, labels, sensitive, self.num_groups())
    }

    /// Same rows with the sensitive attribute one-hot appended to the features.
    pub fn with_sensitive_features(&self) -> Self {
        let k = self.num_groups();
        let dim = self.dim + k;
        let mut features = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            features.extend_from_slice(self.row(i));
            for s in 0..k {
                features.push(if self.sensitive[i] == s { 1.0 } else { 0.0 });
            }
        }
        Self {
            features,
            dim,
            labels: self.labels.clone(),
            sensitive: self.sensitive.clone(),
            group_counts: self.group_counts.clone(),
        }
    }

    /// Replaces feature columns in place; used by standardization.
    pub(crate) fn map_column(&mut self, col: usize, f: impl Fn(f64) -> f64) {
        for i in 0..self.len() {
            let v = &mut self.features[i * self.dim + col];
            *v = f(*v);
        }
    }

    /// Concatenates datasets with identical dimension and group count.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| invalid("cannot concatenate zero datasets"))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut sensitive = Vec::new();
        for p in parts {
            if p.dim != first.dim || p.num_groups() != first.num_groups() {
                return Err(invalid("datasets differ in dimension or group count"));
            }
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
            sensitive.extend_from_slice(&p.sensitive);
        }
        Self::new(features, first.dim, labels, sensitive, first.num_groups())
    }
}
