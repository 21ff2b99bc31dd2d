//! Dataset ingestion, preprocessing, imbalance construction and synthetic
//! generation.
//!
//! # Schema files
//!
//! Plain `key = value` lines; `#` starts a comment. Lists are comma separated.
//!
//! ```text
//! label = two_year_recid
//! label_positive = 1
//! sensitive = race
//! # groups separated by ';', alternative tokens by '|', '*' matches anything else
//! sensitive_groups = African-American|Hispanic|Other|* ; Caucasian
//! numeric = age, priors_count
//! categorical = c_charge_degree, sex
//! drop = id, name
//! include_sensitive = false
//! standardize = true
//! # optional: a second binary column merged into S = 2·s₁ + s₂
//! merge_sensitive = sex
//! merge_sensitive_groups = Male ; Female
//! ```
//!
//! Every header column must be given a role or dropped. Missing values
//! (`""`, `"?"`, `"NA"`) in retained columns drop the row.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{sigmoid, DiscreteJoint, Dataset};
use crate::error::{Error, Result};
use crate::oracle::{make_ratio_joint, random_joint, RandomJointSpec, RatioJoint, RatioJointSpec};

const MISSING: [&str; 3] = ["", "?", "NA"];

/// Maps raw tokens of a column to group indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMap {
    /// `groups[g]` lists the tokens of group `g`; `"*"` is a wildcard.
    pub groups: Vec<Vec<String>>,
}

impl GroupMap {
    fn parse(text: &str) -> Result<Self> {
        let groups: Vec<Vec<String>> = text
            .split(';')
            .map(|g| g.split('|').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect())
            .collect();
        if groups.len() < 2 || groups.iter().any(|g: &Vec<String>| g.is_empty()) {
            return Err(Error::SchemaError(format!("group list '{text}' needs at least two non-empty groups")));
        }
        Ok(Self { groups })
    }

    fn lookup(&self, token: &str) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.iter().any(|t| t == token))
            .or_else(|| self.groups.iter().position(|g| g.iter().any(|t| t == "*")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub label: String,
    pub label_positive: String,
    pub sensitive: String,
    /// Group order; `None` sorts the distinct tokens.
    pub sensitive_groups: Option<GroupMap>,
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
    pub drop: Vec<String>,
    pub include_sensitive: bool,
    pub standardize: bool,
    pub merge_sensitive: Option<String>,
    pub merge_sensitive_groups: Option<GroupMap>,
}

impl SchemaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::SchemaError(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::SchemaError(format!("key '{k}' given twice")));
            }
        }
        let known = [
            "label",
            "label_positive",
            "sensitive",
            "sensitive_groups",
            "numeric",
            "categorical",
            "drop",
            "include_sensitive",
            "standardize",
            "merge_sensitive",
            "merge_sensitive_groups",
        ];
        if let Some(k) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::SchemaError(format!("unknown key '{k}'")));
        }
        let required = |k: &str| {
            kv.get(k)
                .filter(|v| !v.is_empty())
                .cloned()
                .ok_or_else(|| Error::SchemaError(format!("missing required key '{k}'")))
        };
        let list = |k: &str| -> Vec<String> {
            kv.get(k)
                .map(|v| v.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect())
                .unwrap_or_default()
        };
        let flag = |k: &str, default: bool| -> Result<bool> {
            match kv.get(k).map(|v| v.to_ascii_lowercase()) {
                None => Ok(default),
                Some(v) if v == "true" || v == "yes" || v == "1" => Ok(true),
                Some(v) if v == "false" || v == "no" || v == "0" => Ok(false),
                Some(v) => Err(Error::SchemaError(format!("'{k}' must be true or false, got '{v}'"))),
            }
        };
        let spec = Self {
            label: required("label")?,
            label_positive: required("label_positive")?,
            sensitive: required("sensitive")?,
            sensitive_groups: kv.get("sensitive_groups").map(|v| GroupMap::parse(v)).transpose()?,
            numeric: list("numeric"),
            categorical: list("categorical"),
            drop: list("drop"),
            include_sensitive: flag("include_sensitive", false)?,
            standardize: flag("standardize", true)?,
            merge_sensitive: kv.get("merge_sensitive").filter(|v| !v.is_empty()).cloned(),
            merge_sensitive_groups: kv.get("merge_sensitive_groups").map(|v| GroupMap::parse(v)).transpose()?,
        };
        let mut seen = BTreeSet::new();
        let mut roles: Vec<&String> = vec![&spec.label, &spec.sensitive];
        roles.extend(spec.merge_sensitive.iter());
        roles.extend(spec.numeric.iter().chain(&spec.categorical).chain(&spec.drop));
        for c in roles {
            if !seen.insert(c.clone()) {
                return Err(Error::SchemaError(format!("column '{c}' has more than one role")));
            }
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Per-column affine map `x ↦ (x − mean) / sd` over selected feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of `columns` in `data`
    /// (a zero deviation is replaced by one).
    pub fn fit(data: &Dataset, columns: &[usize]) -> Self {
        let n = data.len() as f64;
        let mut mean = Vec::with_capacity(columns.len());
        let mut sd = Vec::with_capacity(columns.len());
        for &c in columns {
            let m = (0..data.len()).map(|i| data.row(i)[c]).sum::<f64>() / n;
            let v = (0..data.len()).map(|i| (data.row(i)[c] - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            sd.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        Self {
            columns: columns.to_vec(),
            mean,
            sd,
        }
    }

    pub fn apply(&self, data: &mut Dataset) {
        for ((&c, &m), &s) in self.columns.iter().zip(&self.mean).zip(&self.sd) {
            data.map_column(c, |v| (v - m) / s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    /// Feature columns that came from numeric source columns.
    pub numeric_features: Vec<usize>,
    pub dropped_rows: usize,
    pub standardizer: Option<Standardizer>,
    pub group_names: Vec<String>,
}

fn find_column(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::SchemaError(format!("column '{name}' not found in header")))
}

/// Reads a CSV without standardizing.
pub fn load_csv_raw(path: &Path, schema: &SchemaSpec) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_col = find_column(&headers, &schema.label)?;
    let sens_col = find_column(&headers, &schema.sensitive)?;
    let merge_col = schema.merge_sensitive.as_deref().map(|c| find_column(&headers, c)).transpose()?;
    let numeric: Vec<usize> = schema.numeric.iter().map(|c| find_column(&headers, c)).collect::<Result<_>>()?;
    let categorical: Vec<usize> = schema
        .categorical
        .iter()
        .map(|c| find_column(&headers, c))
        .collect::<Result<_>>()?;
    for c in &schema.drop {
        find_column(&headers, c)?;
    }
    let mut assigned: BTreeSet<&str> = BTreeSet::new();
    assigned.extend([schema.label.as_str(), schema.sensitive.as_str()]);
    assigned.extend(schema.merge_sensitive.as_deref());
    assigned.extend(schema.numeric.iter().chain(&schema.categorical).chain(&schema.drop).map(String::as_str));
    if let Some(h) = headers.iter().find(|h| !assigned.contains(h.as_str())) {
        return Err(Error::SchemaError(format!("column '{h}' has no role (add it to drop)")));
    }

    let mut records: Vec<(usize, csv::StringRecord)> = Vec::new();
    let mut dropped = 0;
    let retained: Vec<usize> = [label_col, sens_col]
        .into_iter()
        .chain(merge_col)
        .chain(numeric.iter().copied())
        .chain(categorical.iter().copied())
        .collect();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        if retained.iter().any(|&c| MISSING.contains(&rec.get(c).unwrap_or("").trim())) {
            dropped += 1;
            continue;
        }
        records.push((i + 1, rec));
    }

    let sens_map = match &schema.sensitive_groups {
        Some(m) => m.clone(),
        None => {
            let distinct: BTreeSet<String> = records.iter().map(|(_, r)| r[sens_col].trim().to_string()).collect();
            GroupMap {
                groups: distinct.into_iter().map(|t| vec![t]).collect(),
            }
        }
    };
    let merge_map = match (merge_col, &schema.merge_sensitive_groups) {
        (Some(_), Some(m)) => Some(m.clone()),
        (Some(c), None) => {
            let distinct: BTreeSet<String> = records.iter().map(|(_, r)| r[c].trim().to_string()).collect();
            Some(GroupMap {
                groups: distinct.into_iter().map(|t| vec![t]).collect(),
            })
        }
        _ => None,
    };
    if merge_map.as_ref().is_some_and(|m| m.groups.len() != 2) {
        return Err(Error::SchemaError("merge_sensitive column must be binary".into()));
    }
    let base_k = sens_map.groups.len();
    let k = if merge_map.is_some() { base_k * 2 } else { base_k };
    let mut group_names: Vec<String> = sens_map.groups.iter().map(|g| g.join("|")).collect();
    if let Some(m) = &merge_map {
        group_names = group_names
            .iter()
            .flat_map(|a| m.groups.iter().map(move |b| format!("{a}/{}", b.join("|"))))
            .collect();
    }

    let levels: Vec<Vec<String>> = categorical
        .iter()
        .map(|&c| {
            let set: BTreeSet<String> = records.iter().map(|(_, r)| r[c].trim().to_string()).collect();
            set.into_iter().collect()
        })
        .collect();
    let mut feature_names: Vec<String> = schema.numeric.clone();
    let numeric_features: Vec<usize> = (0..numeric.len()).collect();
    for (name, lv) in schema.categorical.iter().zip(&levels) {
        feature_names.extend(lv.iter().map(|l| format!("{name}={l}")));
    }
    let base_dim = feature_names.len();
    let dim = if schema.include_sensitive {
        base_dim + k
    } else {
        base_dim
    };
    if schema.include_sensitive {
        feature_names.extend(group_names.iter().map(|g| format!("{}={g}", schema.sensitive)));
    }

    let mut features = Vec::with_capacity(records.len() * dim);
    let mut labels = Vec::with_capacity(records.len());
    let mut sensitive = Vec::with_capacity(records.len());
    for (row, rec) in &records {
        let tok = rec[sens_col].trim();
        let mut s = sens_map.lookup(tok).ok_or_else(|| Error::ParseError {
            row: *row,
            column: schema.sensitive.clone(),
            message: format!("value '{tok}' matches no sensitive group"),
        })?;
        if let (Some(c), Some(m)) = (merge_col, &merge_map) {
            let t2 = rec[c].trim();
            let s2 = m.lookup(t2).ok_or_else(|| Error::ParseError {
                row: *row,
                column: headers[c].clone(),
                message: format!("value '{t2}' matches no group"),
            })?;
            s = 2 * s + s2;
        }
        for &c in &numeric {
            let tok = rec[c].trim();
            let v: f64 = tok.parse().map_err(|_| Error::ParseError {
                row: *row,
                column: headers[c].clone(),
                message: format!("'{tok}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseError {
                    row: *row,
                    column: headers[c].clone(),
                    message: format!("'{tok}' is not finite"),
                });
            }
            features.push(v);
        }
        for (&c, lv) in categorical.iter().zip(&levels) {
            let tok = rec[c].trim();
            features.extend(lv.iter().map(|l| if l == tok { 1.0 } else { 0.0 }));
        }
        if schema.include_sensitive {
            features.extend((0..k).map(|g| if g == s { 1.0 } else { 0.0 }));
        }
        labels.push((rec[label_col].trim() == schema.label_positive) as u8);
        sensitive.push(s);
    }
    let dataset = Dataset::new(features, dim, labels, sensitive, k)?;
    Ok(LoadedCsv {
        dataset,
        feature_names,
        numeric_features,
        dropped_rows: dropped,
        standardizer: None,
        group_names,
    })
}

/// Reads a CSV and, if the schema asks for it, standardizes the numeric
/// columns with statistics of the loaded rows.
pub fn load_csv(path: &Path, schema: &SchemaSpec) -> Result<LoadedCsv> {
    let mut loaded = load_csv_raw(path, schema)?;
    if schema.standardize {
        let st = Standardizer::fit(&loaded.dataset, &loaded.numeric_features);
        st.apply(&mut loaded.dataset);
        loaded.standardizer = Some(st);
    }
    Ok(loaded)
}

/// Fits a standardizer on `train` only and applies it to both splits.
pub fn standardize_split(train: &mut Dataset, test: &mut Dataset, columns: &[usize]) -> Standardizer {
    let st = Standardizer::fit(train, columns);
    st.apply(train);
    st.apply(test);
    st
}

/// Per-group sample counts for `n` samples with `ratio` in group 0 and the
/// rest split evenly over the other groups.
pub fn group_quota(n: usize, ratio: f64, k: usize) -> Vec<usize> {
    let first = ((ratio * n as f64).round() as usize).min(n);
    let rest = n - first;
    let others = k - 1;
    (0..k)
        .map(|g| {
            if g == 0 {
                first
            } else {
                rest / others + usize::from(g - 1 < rest % others)
            }
        })
        .collect()
}

/// Disjoint train/test subsamples, without replacement, with a fraction
/// `target_ratio` of each split drawn from group 0.
pub fn imbalance_subsample(
    data: &Dataset,
    target_ratio: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::InvalidParams(format!("ratio must be in (0, 1), got {target_ratio}")));
    }
    let k = data.num_groups();
    let train_q = group_quota(n_train, target_ratio, k);
    let test_q = group_quota(n_test, target_ratio, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::with_capacity(n_train);
    let mut test_idx = Vec::with_capacity(n_test);
    for g in 0..k {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.sensitive()[i] == g).collect();
        if idx.len() < train_q[g] + test_q[g] {
            return Err(Error::InsufficientData(format!(
                "group {g} has {} samples, need {}",
                idx.len(),
                train_q[g] + test_q[g]
            )));
        }
        idx.shuffle(&mut rng);
        train_idx.extend_from_slice(&idx[..train_q[g]]);
        test_idx.extend_from_slice(&idx[train_q[g]..train_q[g] + test_q[g]]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

/// Writes `f0..f{d-1},label,sensitive` with shortest round-trip decimals.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.extend(["label".to_string(), "sensitive".to_string()]);
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(data.labels()[i].to_string());
        rec.push(data.sensitive()[i].to_string());
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Schema that reloads a file written by [`write_csv`] unchanged.
pub fn roundtrip_schema(data: &Dataset) -> SchemaSpec {
    SchemaSpec {
        label: "label".into(),
        label_positive: "1".into(),
        sensitive: "sensitive".into(),
        sensitive_groups: Some(GroupMap {
            groups: (0..data.num_groups()).map(|g| vec![g.to_string()]).collect(),
        }),
        numeric: (0..data.dim()).map(|j| format!("f{j}")).collect(),
        categorical: Vec::new(),
        drop: Vec::new(),
        include_sensitive: false,
        standardize: false,
        merge_sensitive: None,
        merge_sensitive_groups: None,
    }
}

/// Parametric generator of `(x, y, s)`:
/// `s ∼ Cat(group_probs)`, `x₀ ∼ N(feature_shift[s], 1)`,
/// `x₁ ∼ N(group_separation·s, 1)`, remaining features `N(0, 1)`, and
/// `y ∼ Bern(σ(signal·x₀ + Σ_j extra_signal·x_j + label_shift[s]))` over
/// the trailing `informative` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularParams {
    pub n: usize,
    pub dim: usize,
    pub group_probs: Vec<f64>,
    pub signal: f64,
    pub label_shift: Vec<f64>,
    pub feature_shift: Vec<f64>,
    pub group_separation: f64,
    /// Number of additional features (after `x₁`) that carry label signal.
    pub informative: usize,
    pub extra_signal: f64,
}

impl TabularParams {
    fn validate(&self) -> Result<()> {
        let k = self.group_probs.len();
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n == 0 || self.dim < 2 {
            return bad("need n >= 1 and dim >= 2");
        }
        if k < 2 || self.label_shift.len() != k || self.feature_shift.len() != k {
            return bad("group_probs, label_shift and feature_shift must share a length >= 2");
        }
        if self.group_probs.iter().any(|&p| !(p > 0.0)) || (self.group_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("group_probs must be a positive distribution");
        }
        if 2 + self.informative > self.dim {
            return bad("informative features exceed dim");
        }
        let all = [self.signal, self.group_separation, self.extra_signal];
        if all.iter().chain(&self.label_shift).chain(&self.feature_shift).any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        Ok(())
    }

    /// Draws `n` samples; every group is guaranteed at least one sample by
    /// assigning the first `k` draws round-robin.
    pub fn sample(&self, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let k = self.group_probs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(self.n * self.dim);
        let mut labels = Vec::with_capacity(self.n);
        let mut sensitive = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let s = if i < k { i } else { sample_categorical(&mut rng, &self.group_probs) };
            let x0 = self.feature_shift[s] + rng.sample::<f64, _>(StandardNormal);
            let x1 = self.group_separation * s as f64 + rng.sample::<f64, _>(StandardNormal);
            features.push(x0);
            features.push(x1);
            let mut logit = self.signal * x0 + self.label_shift[s];
            for j in 2..self.dim {
                let v: f64 = rng.sample(StandardNormal);
                if j < 2 + self.informative {
                    logit += self.extra_signal * v;
                }
                features.push(v);
            }
            labels.push((rng.random::<f64>() < sigmoid(logit)) as u8);
            sensitive.push(s);
        }
        Dataset::new(features, self.dim, labels, sensitive, k)
    }
}

pub(crate) fn sample_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Named stand-ins calibrated to resemble the benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Recidivism-style pool: 12 features, S = 0 is the larger group.
    CompasLike,
    /// Income-style pool: 64 features, S = 1 (female) is the smaller group.
    AdultLike,
}

impl Preset {
    pub fn params(self) -> TabularParams {
        match self {
            Preset::CompasLike => TabularParams {
                n: 7000,
                dim: 12,
                group_probs: vec![0.6, 0.4],
                signal: 2.0,
                label_shift: vec![0.4, -2.2],
                feature_shift: vec![0.0, 0.0],
                group_separation: 1.5,
                informative: 3,
                extra_signal: 0.25,
            },
            Preset::AdultLike => TabularParams {
                n: 30000,
                dim: 64,
                group_probs: vec![0.65, 0.35],
                signal: 2.5,
                label_shift: vec![-0.5, -2.0],
                feature_shift: vec![0.3, -0.4],
                group_separation: 1.5,
                informative: 6,
                extra_signal: 0.35,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSpec {
    DiscreteJoint(RandomJointSpec),
    RatioJoint(RatioJointSpec),
    Tabular(TabularParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic {
    Joint(DiscreteJoint),
    RatioJoint(RatioJoint),
    Tabular(Dataset),
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic> {
    match spec {
        SyntheticSpec::DiscreteJoint(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_joint(s, &mut rng).map(Synthetic::Joint)
        }
        SyntheticSpec::RatioJoint(s) => make_ratio_joint(s, seed).map(Synthetic::RatioJoint),
        SyntheticSpec::Tabular(p) => p.sample(seed).map(Synthetic::Tabular),
    }
}
