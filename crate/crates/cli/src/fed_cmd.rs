use serde::Serialize;

use fairlab::dataio::Standardizer;
use fairlab::fedsim::{
    local_baselines, partition_clients, pooled_train_metrics, run_federation, Aggregation, FedConfig, FedMode,
    LocalResult,
};
use fairlab::trainer::DroMode;
use fairlab::{Dataset, Error, MetricsRecord};

use crate::args::{AggregationName, FedArgs, FedModeName};
use crate::data::{base_config, load, parse_dro, parse_kind};
use crate::manifest::{unix_seconds, write_manifest_file, RunManifest};
use crate::output::{ensure_dir, metric_cells, nr_headers, write_csv, write_json};
use crate::{CliError, CliResult, SCHEMA_VERSION};

#[derive(Serialize)]
struct Split {
    train: MetricsRecord,
    test: MetricsRecord,
}

#[derive(Serialize)]
struct ClientEntry {
    id: usize,
    train_group_counts: Vec<usize>,
    test_group_counts: Vec<usize>,
    federated: Split,
    local: Option<Split>,
    q: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct FedReport<'a> {
    schema_version: u32,
    command: &'static str,
    manifest: &'a RunManifest,
    mode: &'static str,
    clients: Vec<ClientEntry>,
    /// Global model on the pooled train splits of clients 2..N.
    majority_pooled_train: Option<MetricsRecord>,
}

#[derive(Serialize)]
struct ResolvedFed<'a> {
    args: &'a FedArgs,
    config: &'a FedConfig,
    mode: FedMode,
}

pub fn run(a: &FedArgs) -> CliResult<i32> {
    let started = unix_seconds();
    let kind = parse_kind(&a.optim.kind)?;
    let mut template = base_config(&a.optim, a.seed)?;
    template.lambda = a.lambda;
    let mode = match a.mode {
        FedModeName::Fedavg => FedMode::FedAvg,
        FedModeName::Fedfair => FedMode::FedFair(kind),
        FedModeName::Fedsadro => {
            let (dros, sweep) = parse_dro(&a.dro)?;
            if sweep || dros[0] == DroMode::Off {
                return Err(CliError::usage("fedsadro needs --dro chi2:DELTA or lagrange:ZETA"));
            }
            template.dro = dros[0];
            FedMode::FedFairSadro(kind)
        }
    };
    let cfg = FedConfig {
        rounds: a.rounds,
        local_steps: a.local_steps,
        template: mode.client_config(&template)?,
        aggregation: match a.aggregation {
            AggregationName::Weighted => Aggregation::SampleWeighted,
            AggregationName::Uniform => Aggregation::Uniform,
        },
        seed: a.seed,
    };
    cfg.template.validate()?;
    if cfg.rounds == 0 || cfg.local_steps == 0 {
        return Err(CliError::usage("--rounds and --local-steps must be positive"));
    }

    let mut manifest = RunManifest::new("fedsim", &ResolvedFed { args: a, config: &cfg, mode }, a.seed)?;
    let src = load(&a.data, a.seed, &mut manifest)?;
    let mut clients = partition_clients(
        &src.pool,
        a.clients,
        a.minority_ratio,
        a.majority_ratio,
        a.n_train,
        a.n_test,
        a.seed,
    )?;
    if src.standardize && !src.numeric.is_empty() {
        // Statistics of the pooled training splits only.
        let parts: Vec<&Dataset> = clients.iter().map(|c| &c.train).collect();
        let st = Standardizer::fit(&Dataset::concat(&parts)?, &src.numeric);
        for c in &mut clients {
            st.apply(&mut c.train);
            st.apply(&mut c.test);
        }
    }

    let map_err = |e: Error| match e {
        Error::DivergedTraining { epoch } => CliError::compute(format!("training diverged at round {epoch}")),
        other => other.into(),
    };
    let outcome = run_federation(&clients, &cfg, mode).map_err(map_err)?;
    let locals: Option<Vec<LocalResult>> = if a.local_baselines {
        Some(local_baselines(&clients, &cfg, mode).map_err(map_err)?)
    } else {
        None
    };

    ensure_dir(&a.out)?;
    let k = src.pool.num_groups();
    let mut header = vec!["round".to_string(), "client".into(), "split".into(), "acc".into(), "ddp".into(), "deo".into()];
    header.extend(nr_headers(k));
    let mut rows = Vec::new();
    for r in 0..cfg.rounds {
        for c in &outcome.clients {
            for (split, hist) in [("train", &c.train_history), ("test", &c.test_history)] {
                let mut row = vec![(r + 1).to_string(), (c.id + 1).to_string(), split.to_string()];
                row.extend(metric_cells(&hist[r]));
                rows.push(row);
            }
        }
    }
    let mut outputs = vec![write_csv(&a.out, "rounds.csv", &header, &rows)?];

    let entries: Vec<ClientEntry> = outcome
        .clients
        .iter()
        .enumerate()
        .map(|(i, c)| ClientEntry {
            id: c.id + 1,
            train_group_counts: c.train.group_counts().to_vec(),
            test_group_counts: c.test.group_counts().to_vec(),
            federated: Split {
                train: c.train_history.last().cloned().expect("at least one round"),
                test: c.test_history.last().cloned().expect("at least one round"),
            },
            local: locals.as_ref().map(|l| Split {
                train: l[i].train.clone(),
                test: l[i].test.clone(),
            }),
            q: c.q.clone(),
        })
        .collect();
    let majority: Vec<_> = outcome.clients.iter().skip(1).collect();
    let majority_pooled_train = if majority.is_empty() {
        None
    } else {
        Some(pooled_train_metrics(&outcome.global, &majority)?)
    };
    let report = FedReport {
        schema_version: SCHEMA_VERSION,
        command: "fedsim",
        manifest: &manifest,
        mode: mode.name(),
        clients: entries,
        majority_pooled_train,
    };
    outputs.insert(0, write_json(&a.out, "comparison.json", &report)?);
    write_manifest_file(&a.out, &manifest, started, &outputs)?;
    for c in &report.clients {
        let local = c.local.as_ref().map_or(String::new(), |l| {
            format!("  local acc {:.4} ddp {:.4}", l.test.accuracy, l.test.ddp)
        });
        eprintln!(
            "client {}  acc {:.4}  ddp {:.4}{local}",
            c.id, c.federated.test.accuracy, c.federated.test.ddp
        );
    }
    Ok(0)
}
