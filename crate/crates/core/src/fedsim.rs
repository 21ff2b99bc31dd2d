//! Deterministic FedAvg-style simulation of fair training across clients
//! with different sensitive-attribute mixes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::group_quota;
use crate::domain::{Dataset, MetricsRecord, ScoreModel};
use crate::error::{Error, Result};
use crate::measures::DependenceKind;
use crate::trainer::{evaluate, train, DroMode, TrainConfig, Trainer};

/// Tolerance of the per-round convex-combination check.
pub const CONSERVATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub id: usize,
    pub train: Dataset,
    pub test: Dataset,
    /// Local replica after the latest round.
    pub model: Option<ScoreModel>,
    /// Local DRO weights after the latest round (SA-DRO mode only).
    pub q: Option<Vec<f64>>,
    /// Global model evaluated on the local train split, one row per round.
    pub train_history: Vec<MetricsRecord>,
    /// Same on the local test split.
    pub test_history: Vec<MetricsRecord>,
}

impl ClientState {
    pub fn new(id: usize, train: Dataset, test: Dataset) -> Result<Self> {
        if train.dim() != test.dim() || train.num_groups() != test.num_groups() {
            return Err(Error::InvalidInput(format!("client {id}: train and test shapes differ")));
        }
        Ok(Self {
            id,
            train,
            test,
            model: None,
            q: None,
            train_history: Vec::new(),
            test_history: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Uniform,
    #[default]
    SampleWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub rounds: usize,
    pub local_steps: usize,
    /// Step sizes, λ, DRO mode, model and batch for every client. `steps`
    /// is ignored.
    pub template: TrainConfig,
    pub aggregation: Aggregation,
    /// Global initialisation uses this seed; client `i` uses `seed + i`.
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            local_steps: 20,
            template: TrainConfig::default(),
            aggregation: Aggregation::SampleWeighted,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "kind")]
pub enum FedMode {
    /// Plain FedAvg on cross-entropy.
    FedAvg,
    /// Local objective `risk + λ·penalty` on local data.
    FedFair(DependenceKind),
    /// As `FedFair`, with a per-client q anchored at the local group mix.
    FedFairSadro(DependenceKind),
}

impl FedMode {
    pub fn name(&self) -> &'static str {
        match self {
            FedMode::FedAvg => "fedavg",
            FedMode::FedFair(_) => "fedfair",
            FedMode::FedFairSadro(_) => "fedsadro",
        }
    }

    /// Client training config for this mode.
    pub fn client_config(&self, template: &TrainConfig) -> Result<TrainConfig> {
        let mut c = template.clone();
        match *self {
            FedMode::FedAvg => {
                c.lambda = 0.0;
                c.dro = DroMode::Off;
            }
            FedMode::FedFair(kind) => {
                c.kind = kind;
                c.dro = DroMode::Off;
            }
            FedMode::FedFairSadro(kind) => {
                c.kind = kind;
                if c.dro == DroMode::Off {
                    return Err(Error::InvalidParams("fedsadro needs a DRO mode in the client template".into()));
                }
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedOutcome {
    pub clients: Vec<ClientState>,
    pub global: ScoreModel,
}

/// Splits `data` into `n_clients` disjoint clients of `n_train + n_test`
/// samples. Client 0 draws a `minority_client_ratio` share from the
/// network-minority group (the smallest group of `data`); the others draw
/// `majority_client_ratio` from it. Remaining samples are split evenly over
/// the other groups.
pub fn partition_clients(
    data: &Dataset,
    n_clients: usize,
    minority_client_ratio: f64,
    majority_client_ratio: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<Vec<ClientState>> {
    if n_clients == 0 || n_train == 0 || n_test == 0 {
        return Err(Error::InvalidParams("need at least one client and non-empty splits".into()));
    }
    for r in [minority_client_ratio, majority_client_ratio] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParams(format!("ratio must be in (0, 1), got {r}")));
        }
    }
    let k = data.num_groups();
    let counts = data.group_counts();
    let minority = (0..k).min_by_key(|&g| (counts[g], g)).unwrap_or(0);
    // group_quota puts the ratio on slot 0; rotate it onto the minority group.
    let quota = |n: usize, ratio: f64| {
        let q = group_quota(n, ratio, k);
        let mut out = vec![0; k];
        out[minority] = q[0];
        let mut rest = q[1..].iter();
        for (g, o) in out.iter_mut().enumerate() {
            if g != minority {
                *o = *rest.next().unwrap_or(&0);
            }
        }
        out
    };
    let plans: Vec<(Vec<usize>, Vec<usize>)> = (0..n_clients)
        .map(|c| {
            let r = if c == 0 { minority_client_ratio } else { majority_client_ratio };
            (quota(n_train, r), quota(n_test, r))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = (0..k)
        .map(|g| (0..data.len()).filter(|&i| data.sensitive()[i] == g).collect())
        .collect();
    for (g, pool) in pools.iter_mut().enumerate() {
        let need: usize = plans.iter().map(|(a, b)| a[g] + b[g]).sum();
        if pool.len() < need {
            return Err(Error::InsufficientData(format!("group {g} has {} samples, need {need}", pool.len())));
        }
        pool.shuffle(&mut rng);
    }
    let mut cursor = vec![0usize; k];
    let mut take = |g: usize, n: usize| {
        let out = pools[g][cursor[g]..cursor[g] + n].to_vec();
        cursor[g] += n;
        out
    };
    let mut clients = Vec::with_capacity(n_clients);
    for (id, (tr, te)) in plans.iter().enumerate() {
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for g in 0..k {
            train_idx.extend(take(g, tr[g]));
            test_idx.extend(take(g, te[g]));
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        clients.push(ClientState::new(id, data.subset(&train_idx)?, data.subset(&test_idx)?)?);
    }
    Ok(clients)
}

fn check_clients(clients: &[ClientState]) -> Result<()> {
    let first = clients.first().ok_or_else(|| Error::InvalidInput("no clients".into()))?;
    for c in clients {
        if c.train.dim() != first.train.dim() || c.train.num_groups() != first.train.num_groups() {
            return Err(Error::InvalidInput(format!("client {} has a different shape", c.id)));
        }
    }
    Ok(())
}

fn aggregation_weights(clients: &[ClientState], agg: Aggregation) -> Vec<f64> {
    match agg {
        Aggregation::Uniform => vec![1.0 / clients.len() as f64; clients.len()],
        Aggregation::SampleWeighted => {
            let total: usize = clients.iter().map(|c| c.train.len()).sum();
            clients.iter().map(|c| c.train.len() as f64 / total as f64).collect()
        }
    }
}

/// Weighted average in client order, followed by the convex-combination
/// check.
fn aggregate(models: &[ScoreModel], alpha: &[f64]) -> Result<ScoreModel> {
    let p = models[0].num_weights();
    let mut w = vec![0.0; p];
    for (m, a) in models.iter().zip(alpha) {
        for (wi, mi) in w.iter_mut().zip(m.weights()) {
            *wi += a * mi;
        }
    }
    for (j, &wj) in w.iter().enumerate() {
        let lo = models.iter().map(|m| m.weights()[j]).fold(f64::INFINITY, f64::min);
        let hi = models.iter().map(|m| m.weights()[j]).fold(f64::NEG_INFINITY, f64::max);
        let tol = CONSERVATION_TOL * (1.0 + lo.abs().max(hi.abs()));
        if wj < lo - tol || wj > hi + tol {
            return Err(Error::InvalidInput(format!("aggregate leaves the client hull at weight {j}")));
        }
    }
    ScoreModel::new(models[0].kind(), models[0].dim(), w)
}

/// Runs `rounds` of: every client takes `local_steps` trainer steps from
/// the current global model, then the server averages. Client updates are
/// computed in parallel and reduced in id order.
pub fn run_federation(clients: &[ClientState], cfg: &FedConfig, mode: FedMode) -> Result<FedOutcome> {
    if cfg.rounds == 0 || cfg.local_steps == 0 {
        return Err(Error::InvalidParams("rounds and local_steps must be >= 1".into()));
    }
    check_clients(clients)?;
    let base = mode.client_config(&cfg.template)?;
    let dim = clients[0].train.dim();
    let mut global = ScoreModel::init(base.model, dim, cfg.seed);
    let mut trainers = clients
        .iter()
        .map(|c| {
            let config = TrainConfig {
                seed: cfg.seed.wrapping_add(c.id as u64),
                steps: cfg.local_steps,
                ..base.clone()
            };
            Trainer::with_model(&c.train, config, global.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha = aggregation_weights(clients, cfg.aggregation);
    let mut out: Vec<ClientState> = clients.to_vec();
    for c in &mut out {
        c.train_history.clear();
        c.test_history.clear();
    }
    for round in 1..=cfg.rounds {
        let models = trainers
            .par_iter_mut()
            .zip(clients.par_iter())
            .map(|(t, c)| {
                t.set_model(global.clone())?;
                for _ in 0..cfg.local_steps {
                    t.step(&c.train)?;
                }
                Ok(t.model().clone())
            })
            .collect::<Vec<Result<ScoreModel>>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::DivergedTraining { .. } => Error::DivergedTraining { epoch: round },
                other => other,
            })?;
        global = aggregate(&models, &alpha)?;
        let evals = out
            .par_iter()
            .map(|c| Ok((evaluate(&global, &c.train)?, evaluate(&global, &c.test)?)))
            .collect::<Vec<Result<_>>>();
        for ((c, e), m) in out.iter_mut().zip(evals).zip(models) {
            let (tr, te) = e?;
            c.train_history.push(tr);
            c.test_history.push(te);
            c.model = Some(m);
        }
    }
    for (c, t) in out.iter_mut().zip(&trainers) {
        c.q = (t.config().dro != DroMode::Off).then(|| t.q().to_vec());
    }
    Ok(FedOutcome { clients: out, global })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub id: usize,
    pub train: MetricsRecord,
    pub test: MetricsRecord,
}

/// Independent per-client training for `rounds · local_steps` steps with
/// the same client config as `mode`; no communication. Client `i` is
/// seeded with `seed + i`.
pub fn local_baselines(clients: &[ClientState], cfg: &FedConfig, mode: FedMode) -> Result<Vec<LocalResult>> {
    check_clients(clients)?;
    let base = mode.client_config(&cfg.template)?;
    clients
        .par_iter()
        .map(|c| {
            let config = TrainConfig {
                seed: cfg.seed.wrapping_add(c.id as u64),
                steps: cfg.rounds * cfg.local_steps,
                record_every: cfg.rounds * cfg.local_steps,
                ..base.clone()
            };
            let trace = train(&c.train, Some(&c.test), &config)?;
            Ok(LocalResult {
                id: c.id,
                train: trace.final_train().clone(),
                test: trace.final_test().cloned().ok_or_else(|| Error::InvalidInput("missing test row".into()))?,
            })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect()
}

/// Centralized run equivalent to a one-client federation.
pub fn centralized_equivalent(client: &ClientState, cfg: &FedConfig, mode: FedMode) -> Result<crate::trainer::TrainTrace> {
    let base = mode.client_config(&cfg.template)?;
    let config = TrainConfig {
        seed: cfg.seed,
        steps: cfg.rounds * cfg.local_steps,
        record_every: cfg.local_steps,
        ..base
    };
    train(&client.train, Some(&client.test), &config)
}

/// `model` evaluated on the union of the chosen clients' train splits.
pub fn pooled_train_metrics(model: &ScoreModel, clients: &[&ClientState]) -> Result<MetricsRecord> {
    let parts: Vec<&Dataset> = clients.iter().map(|c| &c.train).collect();
    evaluate(model, &Dataset::concat(&parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::TabularParams;
    use crate::trainer::train_erm;

    fn pool(n: usize, seed: u64) -> Dataset {
        TabularParams {
            n,
            dim: 4,
            group_probs: vec![0.6, 0.4],
            signal: 2.0,
            label_shift: vec![0.0, -1.0],
            feature_shift: vec![0.0, 0.0],
            group_separation: 1.0,
            informative: 1,
            extra_signal: 0.5,
        }
        .sample(seed)
        .unwrap()
    }

    fn small_cfg(rounds: usize, local_steps: usize) -> FedConfig {
        FedConfig {
            rounds,
            local_steps,
            template: TrainConfig { lambda: 0.5, ..Default::default() },
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn partition_histograms() {
        let data = pool(4000, 1);
        let clients = partition_clients(&data, 4, 0.8, 0.2, 500, 100, 2).unwrap();
        assert_eq!(clients.len(), 4);
        // group 1 is the smaller group of the pool
        assert_eq!(clients[0].train.group_counts(), &[100, 400]);
        assert_eq!(clients[0].test.group_counts(), &[20, 80]);
        for c in &clients[1..] {
            assert_eq!(c.train.group_counts(), &[400, 100]);
            assert_eq!(c.test.group_counts(), &[80, 20]);
        }
    }

    #[test]
    fn partition_is_disjoint_and_seeded() {
        let data = pool(3000, 3);
        let a = partition_clients(&data, 3, 0.7, 0.3, 300, 100, 9).unwrap();
        let b = partition_clients(&data, 3, 0.7, 0.3, 300, 100, 9).unwrap();
        assert_eq!(a, b);
        let mut seen = std::collections::BTreeSet::new();
        for c in &a {
            for d in [&c.train, &c.test] {
                for i in 0..d.len() {
                    assert!(seen.insert(d.row(i)[0].to_bits()), "sample reused");
                }
            }
        }
        let c = partition_clients(&data, 3, 0.7, 0.3, 300, 100, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partition_shortfall() {
        let data = pool(500, 4);
        assert!(matches!(
            partition_clients(&data, 4, 0.8, 0.2, 300, 50, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn single_client_matches_centralized() {
        let data = pool(2000, 6);
        let clients = partition_clients(&data, 1, 0.3, 0.3, 400, 100, 1).unwrap();
        let cfg = small_cfg(6, 5);
        for mode in [FedMode::FedAvg, FedMode::FedFair(DependenceKind::Ddp)] {
            let fed = run_federation(&clients, &cfg, mode).unwrap();
            let cen = centralized_equivalent(&clients[0], &cfg, mode).unwrap();
            assert_eq!(fed.clients[0].train_history.len(), cen.train.len());
            for (a, b) in fed.clients[0].train_history.iter().zip(&cen.train) {
                assert!((a.accuracy - b.accuracy).abs() < 1e-10 && (a.ddp - b.ddp).abs() < 1e-10);
            }
            for (a, b) in fed.global.weights().iter().zip(cen.model.weights()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let cfg = FedConfig {
            template: TrainConfig { lambda: 0.5, dro: DroMode::Lagrangian { zeta: 0.5 }, ..Default::default() },
            ..cfg
        };
        let mode = FedMode::FedFairSadro(DependenceKind::Ddp);
        let fed = run_federation(&clients, &cfg, mode).unwrap();
        let cen = centralized_equivalent(&clients[0], &cfg, mode).unwrap();
        assert_eq!(fed.global.weights(), cen.model.weights());
        assert_eq!(fed.clients[0].q.as_deref(), Some(cen.final_q()));
    }

    #[test]
    fn identical_clients_one_step_equal_centralized() {
        let data = pool(600, 7);
        let c = ClientState::new(0, data.clone(), data.clone()).unwrap();
        let clients: Vec<ClientState> = (0..4).map(|id| ClientState { id, ..c.clone() }).collect();
        let cfg = small_cfg(10, 1);
        let mode = FedMode::FedFair(DependenceKind::Ddp);
        let fed = run_federation(&clients, &cfg, mode).unwrap();
        let cen = centralized_equivalent(&clients[0], &cfg, mode).unwrap();
        assert_eq!(fed.global.weights(), cen.model.weights());
    }

    #[test]
    fn federation_is_deterministic() {
        let data = pool(3000, 8);
        let clients = partition_clients(&data, 3, 0.7, 0.3, 300, 100, 2).unwrap();
        let cfg = small_cfg(4, 3);
        let mode = FedMode::FedFair(DependenceKind::Ddp);
        let a = run_federation(&clients, &cfg, mode).unwrap();
        let b = run_federation(&clients, &cfg, mode).unwrap();
        assert_eq!(a, b);
        assert!(a.clients.iter().all(|c| c.train_history.len() == 4 && c.q.is_none()));
    }

    #[test]
    fn zero_lambda_local_is_erm() {
        let data = pool(3000, 9);
        let clients = partition_clients(&data, 2, 0.6, 0.4, 300, 100, 3).unwrap();
        let cfg = FedConfig { template: TrainConfig::default(), ..small_cfg(5, 4) };
        let local = local_baselines(&clients, &cfg, FedMode::FedFair(DependenceKind::Ddp)).unwrap();
        for (r, c) in local.iter().zip(&clients) {
            let config = TrainConfig { steps: 20, seed: cfg.seed + c.id as u64, ..TrainConfig::default() };
            let erm = train_erm(&c.train, Some(&c.test), &config).unwrap();
            assert_eq!(&r.train, erm.final_train());
            assert_eq!(Some(&r.test), erm.final_test());
        }
    }

    #[test]
    fn sadro_mode_needs_dro() {
        let data = pool(2000, 10);
        let clients = partition_clients(&data, 2, 0.6, 0.4, 200, 50, 0).unwrap();
        let err = run_federation(&clients, &small_cfg(2, 2), FedMode::FedFairSadro(DependenceKind::Ddp));
        assert!(matches!(err, Err(Error::InvalidParams(_))));
        let bad = FedConfig { rounds: 0, ..small_cfg(1, 1) };
        assert!(run_federation(&clients, &bad, FedMode::FedAvg).is_err());
    }

    #[test]
    fn aggregate_is_convex_combination() {
        let a = ScoreModel::new(crate::domain::ModelKind::Linear, 2, vec![1.0, -2.0, 0.5]).unwrap();
        let b = ScoreModel::new(crate::domain::ModelKind::Linear, 2, vec![3.0, 2.0, 0.5]).unwrap();
        let g = aggregate(&[a, b], &[0.25, 0.75]).unwrap();
        assert_eq!(g.weights(), &[2.5, 1.0, 0.5]);
    }
}
