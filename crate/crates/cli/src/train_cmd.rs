use rayon::prelude::*;
use serde::Serialize;

use fairlab::dataio::{imbalance_subsample, standardize_split};
use fairlab::trainer::{train, DroMode, TrainConfig, TrainTrace};
use fairlab::{Error, MetricsRecord};

use crate::args::TrainArgs;
use crate::data::{base_config, dro_label, load, parse_dro, random_split};
use crate::manifest::{unix_seconds, write_manifest_file, RunManifest};
use crate::output::{ensure_dir, fmt17, metric_cells, nr_headers, write_csv, write_json};
use crate::{CliError, CliResult, SCHEMA_VERSION};

#[derive(Serialize)]
struct SplitInfo {
    n_train: usize,
    n_test: usize,
    train_group_counts: Vec<usize>,
    test_group_counts: Vec<usize>,
    dropped_rows: usize,
}

#[derive(Serialize)]
struct SettingResult {
    lambda: f64,
    dro: String,
    lambda_or_zeta: f64,
    train: MetricsRecord,
    test: MetricsRecord,
    q: Vec<f64>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    schema_version: u32,
    command: &'static str,
    manifest: &'a RunManifest,
    split: SplitInfo,
    settings: Vec<SettingResult>,
}

#[derive(Serialize)]
struct ResolvedTrain<'a> {
    args: &'a TrainArgs,
    settings: Vec<TrainConfig>,
}

pub fn run(a: &TrainArgs) -> CliResult<i32> {
    let started = unix_seconds();
    let (dros, zeta_sweep) = parse_dro(&a.dro)?;
    let lambdas = match (&a.lambda, &a.lambda_sweep) {
        (_, Some(l)) if l.is_empty() => return Err(CliError::usage("--lambda-sweep is empty")),
        (_, Some(l)) => l.clone(),
        (Some(l), None) => vec![*l],
        (None, None) => vec![0.0],
    };
    if zeta_sweep && lambdas.len() > 1 {
        return Err(CliError::usage("--lambda-sweep and --dro zeta-sweep cannot be combined"));
    }
    if a.steps == 0 || a.record_every == 0 {
        return Err(CliError::usage("--steps and --record-every must be positive"));
    }
    let base = base_config(&a.optim, a.seed)?;
    let mut settings = Vec::new();
    for &lambda in &lambdas {
        for &dro in &dros {
            let c = TrainConfig {
                lambda,
                dro,
                steps: a.steps,
                record_every: a.record_every.min(a.steps),
                ..base.clone()
            };
            c.validate()?;
            if c.lambda_out_of_sweep_range() {
                eprintln!("warning: lambda {lambda} is outside [0, 1]");
            }
            settings.push(c);
        }
    }

    let mut manifest = RunManifest::new("train", &ResolvedTrain { args: a, settings: settings.clone() }, a.seed)?;
    let src = load(&a.data, a.seed, &mut manifest)?;
    let (mut tr, mut te) = match a.ratio {
        Some(r) => imbalance_subsample(&src.pool, r, a.n_train, a.n_test, a.seed)?,
        None => random_split(&src.pool, a.test_fraction, a.seed)?,
    };
    if src.standardize {
        standardize_split(&mut tr, &mut te, &src.numeric);
    }

    let traces: Vec<TrainTrace> = settings
        .par_iter()
        .map(|c| train(&tr, Some(&te), c))
        .collect::<Vec<fairlab::Result<TrainTrace>>>()
        .into_iter()
        .collect::<fairlab::Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::DivergedTraining { .. } => CliError::compute(e.to_string()),
            other => other.into(),
        })?;

    ensure_dir(&a.out)?;
    let k = tr.num_groups();
    let mut outputs = Vec::new();
    let mut results = Vec::new();
    let mut sweep_test = Vec::new();
    let mut sweep_train = Vec::new();
    for (i, (c, t)) in settings.iter().zip(&traces).enumerate() {
        let x = match (zeta_sweep, c.dro) {
            (true, DroMode::Lagrangian { zeta }) => zeta,
            _ => c.lambda,
        };
        let train_m = t.final_train().clone();
        let test_m = t.final_test().cloned().unwrap_or_else(|| train_m.clone());
        let mut row = vec![fmt17(x)];
        row.extend(metric_cells(&test_m));
        sweep_test.push(row);
        let mut row = vec![fmt17(x)];
        row.extend(metric_cells(&train_m));
        sweep_train.push(row);
        outputs.push(write_trace(&a.out, i, t, k)?);
        results.push(SettingResult {
            lambda: c.lambda,
            dro: dro_label(&c.dro),
            lambda_or_zeta: x,
            train: train_m,
            test: test_m,
            q: t.final_q().to_vec(),
        });
    }
    let mut header = vec!["lambda_or_zeta".to_string(), "acc".into(), "ddp".into(), "deo".into()];
    header.extend(nr_headers(k));
    outputs.push(write_csv(&a.out, "sweep.csv", &header, &sweep_test)?);
    outputs.push(write_csv(&a.out, "sweep_train.csv", &header, &sweep_train)?);
    let report = TrainReport {
        schema_version: SCHEMA_VERSION,
        command: "train",
        manifest: &manifest,
        split: SplitInfo {
            n_train: tr.len(),
            n_test: te.len(),
            train_group_counts: tr.group_counts().to_vec(),
            test_group_counts: te.group_counts().to_vec(),
            dropped_rows: src.dropped_rows,
        },
        settings: results,
    };
    outputs.insert(0, write_json(&a.out, "metrics.json", &report)?);
    write_manifest_file(&a.out, &manifest, started, &outputs)?;
    for s in &report.settings {
        eprintln!(
            "lambda {:<6} dro {:<16} acc {:.4}  ddp {:.4}  nr {:.4?}",
            s.lambda, s.dro, s.test.accuracy, s.test.ddp, s.test.nr
        );
    }
    Ok(0)
}

fn write_trace(dir: &std::path::Path, i: usize, t: &TrainTrace, k: usize) -> CliResult<String> {
    let mut header: Vec<String> = ["epoch", "objective", "train_acc", "train_ddp", "test_acc", "test_ddp"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..k).map(|s| format!("q_{s}")));
    let rows: Vec<Vec<String>> = (0..t.epochs.len())
        .map(|r| {
            let test = t.test.get(r).unwrap_or(&t.train[r]);
            let mut row = vec![
                t.epochs[r].to_string(),
                fmt17(t.objective[r]),
                fmt17(t.train[r].accuracy),
                fmt17(t.train[r].ddp),
                fmt17(test.accuracy),
                fmt17(test.ddp),
            ];
            row.extend(t.q[r].iter().map(|&v| fmt17(v)));
            row
        })
        .collect();
    write_csv(dir, &format!("trace_{i}.csv"), &header, &rows)
}
