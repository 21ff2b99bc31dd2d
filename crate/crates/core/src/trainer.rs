//! ERM, fairness-penalized and SA-DRO training by (projected) gradient
//! descent-ascent.
//!
//! One iteration is a w-step on `risk_q(w) + λ·penalty(w, q)` followed, when
//! DRO is on, by a q-step that ascends the same objective at the new `w`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::domain::project_chi2_simplex;
use crate::domain::{chi2_prox, Dataset, MetricsRecord, ModelKind, ScoreModel, SimplexWeights};
use crate::error::{invalid, Error, Result};
use crate::measures::{metrics, DependenceKind};
use crate::surrogate::{scaled_bandwidth, mean_risk, penalty, weighted_risk, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroMode {
    Off,
    /// q stays in the χ² ball of this radius around `p̂`.
    Constrained { delta: f64 },
    /// Inner objective gains `−ζ·χ²(q, p̂)`; q stays on the simplex.
    Lagrangian { zeta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    Full,
    Minibatch { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub dro: DroMode,
    pub kind: DependenceKind,
    pub steps: usize,
    pub step_w: f64,
    pub step_q: f64,
    pub batch: Batch,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub model: ModelKind,
    /// Penalty bandwidth is this fraction of the score standard deviation.
    pub bandwidth_scale: f64,
    /// Record metrics every this many iterations (and always at the end).
    pub record_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            dro: DroMode::Off,
            kind: DependenceKind::Ddp,
            steps: 2000,
            step_w: 0.05,
            step_q: 0.01,
            batch: Batch::Full,
            seed: 0,
            weight_mode: WeightMode::Ratio,
            model: ModelKind::Linear,
            bandwidth_scale: 0.1,
            record_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidParams("steps and record_every must be positive".into()));
        }
        if !(self.step_w > 0.0) || !(self.step_q > 0.0) {
            return Err(Error::InvalidParams("step sizes must be positive".into()));
        }
        if !(self.bandwidth_scale > 0.0) {
            return Err(Error::InvalidBandwidth(self.bandwidth_scale));
        }
        match self.dro {
            DroMode::Constrained { delta } if !(delta >= 0.0) => {
                return Err(Error::InvalidParams(format!("DRO radius must be >= 0, got {delta}")))
            }
            DroMode::Lagrangian { zeta } if !(zeta >= 0.0) => {
                return Err(Error::InvalidParams(format!("zeta must be >= 0, got {zeta}")))
            }
            _ => {}
        }
        if let Batch::Minibatch { size: 0 } = self.batch {
            return Err(Error::InvalidParams("minibatch size must be positive".into()));
        }
        if self.lambda > 0.0 && self.kind == DependenceKind::RhoTv {
            return Err(Error::UnsupportedKind(self.kind.to_string()));
        }
        Ok(())
    }

    /// True when λ lies outside the [0, 1] range of the reference sweeps.
    pub fn lambda_out_of_sweep_range(&self) -> bool {
        self.lambda > 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Iteration index (1-based) of every recorded row.
    pub epochs: Vec<usize>,
    pub train: Vec<MetricsRecord>,
    /// Empty when no held-out split was given.
    pub test: Vec<MetricsRecord>,
    pub q: Vec<Vec<f64>>,
    /// Training objective (weighted risk + λ·penalty) before each recorded step.
    pub objective: Vec<f64>,
    pub model: ScoreModel,
}

impl TrainTrace {
    pub fn final_train(&self) -> &MetricsRecord {
        self.train.last().expect("trace has at least one row")
    }
    pub fn final_test(&self) -> Option<&MetricsRecord> {
        self.test.last()
    }
    pub fn final_q(&self) -> &[f64] {
        self.q.last().expect("trace has at least one row")
    }
}

/// Hard predictions `score > 0`.
pub fn predict(model: &ScoreModel, data: &Dataset) -> Vec<u8> {
    (0..data.len()).map(|i| (model.score(data.row(i)) > 0.0) as u8).collect()
}

pub fn evaluate(model: &ScoreModel, data: &Dataset) -> Result<MetricsRecord> {
    metrics(&predict(model, data), data.labels(), data.sensitive(), data.num_groups())
}

/// Resumable training state; [`Trainer::step`] performs one GDA iteration.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    model: ScoreModel,
    q: SimplexWeights,
    rng: ChaCha8Rng,
    iteration: usize,
    /// Shuffled per-group index queues for minibatching.
    queues: Vec<(Vec<usize>, usize)>,
}

impl Trainer {
    /// Fresh model from `config.model` and `q = p̂` of `data`.
    pub fn new(data: &Dataset, config: TrainConfig) -> Result<Self> {
        let model = ScoreModel::init(config.model, data.dim(), config.seed);
        Self::with_model(data, config, model)
    }

    pub fn with_model(data: &Dataset, config: TrainConfig, model: ScoreModel) -> Result<Self> {
        config.validate()?;
        if model.dim() != data.dim() {
            return Err(invalid("model and data dimensions differ"));
        }
        let radius = match config.dro {
            DroMode::Constrained { delta } => delta,
            _ => f64::INFINITY,
        };
        let q = SimplexWeights::new(data.group_frequencies(), radius)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_d0fb_a7c4),
            config,
            model,
            q,
            iteration: 0,
            queues: Vec::new(),
        })
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }
    pub fn q(&self) -> &[f64] {
        self.q.q()
    }
    pub fn config(&self) -> &TrainConfig {
        &self.config
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn set_model(&mut self, model: ScoreModel) -> Result<()> {
        if model.kind() != self.model.kind() || model.dim() != self.model.dim() {
            return Err(invalid("replacement model has a different architecture"));
        }
        self.model = model;
        Ok(())
    }

    fn dro_on(&self) -> bool {
        self.config.dro != DroMode::Off
    }

    fn next_batch(&mut self, data: &Dataset) -> Result<Option<Dataset>> {
        let size = match self.config.batch {
            Batch::Full => return Ok(None),
            Batch::Minibatch { size } => size,
        };
        if size >= data.len() {
            return Ok(None);
        }
        let k = data.num_groups();
        if self.queues.is_empty() {
            for s in 0..k {
                let idx: Vec<usize> = (0..data.len()).filter(|&i| data.sensitive()[i] == s).collect();
                self.queues.push((idx, usize::MAX));
            }
        }
        // Stratified: each group contributes in proportion to its size, at least one.
        let freq = data.group_frequencies();
        let mut picked = Vec::with_capacity(size);
        for (s, (idx, pos)) in self.queues.iter_mut().enumerate() {
            let take = ((freq[s] * size as f64).round() as usize).clamp(1, idx.len());
            for _ in 0..take {
                if *pos >= idx.len() {
                    idx.shuffle(&mut self.rng);
                    *pos = 0;
                }
                picked.push(idx[*pos]);
                *pos += 1;
            }
        }
        picked.sort_unstable();
        data.subset(&picked).map(Some)
    }

    /// Objective value and w-gradient at the current state.
    fn objective_and_grad(&self, data: &Dataset) -> Result<(f64, Vec<f64>)> {
        let (mut value, mut grad) = if self.dro_on() {
            let r = weighted_risk(&self.model, data, &self.q, self.config.weight_mode)?;
            (r.value, r.grad_w)
        } else {
            mean_risk(&self.model, data)?
        };
        if self.config.lambda > 0.0 {
            let h = scaled_bandwidth(&self.model, data, self.config.bandwidth_scale);
            let q = self.dro_on().then_some(&self.q);
            let p = penalty(self.config.kind, &self.model, data, h, q)?;
            value += self.config.lambda * p.value;
            for (g, pg) in grad.iter_mut().zip(&p.grad_w) {
                *g += self.config.lambda * pg;
            }
        }
        Ok((value, grad))
    }

    fn q_gradient(&self, data: &Dataset) -> Result<Vec<f64>> {
        let r = weighted_risk(&self.model, data, &self.q, self.config.weight_mode)?;
        let mut g = r.grad_q;
        if self.config.lambda > 0.0 {
            let h = scaled_bandwidth(&self.model, data, self.config.bandwidth_scale);
            let p = penalty(self.config.kind, &self.model, data, h, Some(&self.q))?;
            for (gi, pi) in g.iter_mut().zip(p.grad_q.unwrap_or_default()) {
                *gi += self.config.lambda * pi;
            }
        }
        Ok(g)
    }

    /// One GDA iteration; returns the objective before the step.
    pub fn step(&mut self, data: &Dataset) -> Result<f64> {
        let batch = self.next_batch(data)?;
        let data = batch.as_ref().unwrap_or(data);
        let (value, grad) = self.objective_and_grad(data)?;
        self.iteration += 1;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergedTraining { epoch: self.iteration });
        }
        self.model.descend(&grad, self.config.step_w);
        if self.model.weights().iter().any(|w| !w.is_finite()) {
            return Err(Error::DivergedTraining { epoch: self.iteration });
        }
        if self.dro_on() {
            let g = self.q_gradient(data)?;
            let alpha = self.config.step_q;
            let v: Vec<f64> = self.q.q().iter().zip(&g).map(|(q, gi)| q + alpha * gi).collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::DivergedTraining { epoch: self.iteration });
            }
            match self.config.dro {
                DroMode::Constrained { .. } => self.q.project_from(&v)?,
                DroMode::Lagrangian { zeta } => {
                    let next = chi2_prox(&v, self.q.anchor(), alpha * zeta);
                    self.q.set_q(next)?;
                }
                DroMode::Off => {}
            }
        }
        Ok(value)
    }
}

/// Runs `config.steps` iterations, recording metrics on `data` and `test`.
pub fn train(data: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<TrainTrace> {
    let trainer = Trainer::new(data, config.clone())?;
    run(trainer, data, test)
}

pub(crate) fn run(mut trainer: Trainer, data: &Dataset, test: Option<&Dataset>) -> Result<TrainTrace> {
    let steps = trainer.config.steps;
    let every = trainer.config.record_every;
    let mut trace = TrainTrace {
        epochs: Vec::new(),
        train: Vec::new(),
        test: Vec::new(),
        q: Vec::new(),
        objective: Vec::new(),
        model: trainer.model.clone(),
    };
    for t in 1..=steps {
        let value = trainer.step(data)?;
        if t % every == 0 || t == steps {
            trace.epochs.push(t);
            trace.objective.push(value);
            trace.train.push(evaluate(&trainer.model, data)?);
            if let Some(test) = test {
                trace.test.push(evaluate(&trainer.model, test)?);
            }
            trace.q.push(trainer.q.q().to_vec());
        }
    }
    trace.model = trainer.model;
    Ok(trace)
}

/// Plain gradient descent on mean cross-entropy (λ and DRO ignored).
pub fn train_erm(data: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<TrainTrace> {
    let config = TrainConfig {
        lambda: 0.0,
        dro: DroMode::Off,
        ..config.clone()
    };
    train(data, test, &config)
}

/// Mean cross-entropy plus `λ·penalty`, without DRO.
pub fn train_fair(data: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<TrainTrace> {
    let config = TrainConfig {
        dro: DroMode::Off,
        ..config.clone()
    };
    train(data, test, &config)
}

/// Full SA-DRO loop; `config.dro` must not be `Off`.
pub fn train_sadro(data: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<TrainTrace> {
    if config.dro == DroMode::Off {
        return Err(Error::InvalidParams("train_sadro needs a DRO mode".into()));
    }
    train(data, test, config)
}
