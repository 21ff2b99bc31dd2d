use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fairlab::dataio::{load_csv_raw, Preset, SchemaSpec};
use fairlab::surrogate::WeightMode;
use fairlab::trainer::{Batch, DroMode, TrainConfig};
use fairlab::{Dataset, DependenceKind, ModelKind};

use crate::args::{DataArgs, OptimArgs, SyntheticName};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

/// Loaded sample pool plus the feature columns to standardize.
pub struct Source {
    pub pool: Dataset,
    pub numeric: Vec<usize>,
    pub standardize: bool,
    pub dropped_rows: usize,
}

pub fn load(args: &DataArgs, seed: u64, manifest: &mut RunManifest) -> CliResult<Source> {
    match (&args.data, &args.schema, args.synthetic) {
        (Some(data), Some(schema_path), None) => {
            manifest.add_input(data)?;
            manifest.add_input(schema_path)?;
            let schema = SchemaSpec::from_file(schema_path)?;
            let loaded = load_csv_raw(data, &schema)?;
            Ok(Source {
                pool: loaded.dataset,
                numeric: loaded.numeric_features,
                standardize: schema.standardize,
                dropped_rows: loaded.dropped_rows,
            })
        }
        (None, None, Some(name)) => {
            let preset = match name {
                SyntheticName::Compas => Preset::CompasLike,
                SyntheticName::Adult => Preset::AdultLike,
            };
            Ok(Source {
                pool: preset.params().sample(seed)?,
                numeric: Vec::new(),
                standardize: false,
                dropped_rows: 0,
            })
        }
        _ => Err(CliError::usage("give either --data with --schema, or --synthetic")),
    }
}

/// Seeded shuffle split with `round(n · test_fraction)` held out.
pub fn random_split(data: &Dataset, test_fraction: f64, seed: u64) -> CliResult<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CliError::usage(format!("--test-fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((data.len() as f64 * test_fraction).round() as usize).clamp(1, data.len() - 1);
    let (te, tr) = idx.split_at_mut(n_test);
    te.sort_unstable();
    tr.sort_unstable();
    Ok((data.subset(tr)?, data.subset(te)?))
}

pub fn parse_kind(s: &str) -> CliResult<DependenceKind> {
    let k: DependenceKind = s.parse()?;
    if k == DependenceKind::RhoTv {
        return Err(CliError::usage("--kind must be one of ddp, mi, ermi, mc"));
    }
    Ok(k)
}

pub fn parse_model(s: &str) -> CliResult<ModelKind> {
    if s == "linear" {
        return Ok(ModelKind::Linear);
    }
    if let Some(h) = s.strip_prefix("mlp1:") {
        if let Ok(hidden) = h.parse::<usize>() {
            if hidden > 0 {
                return Ok(ModelKind::Mlp1 { hidden });
            }
        }
    }
    Err(CliError::usage(format!("--model must be linear or mlp1:H, got '{s}'")))
}

fn parse_number(s: &str, flag: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::usage(format!("{flag}: '{s}' is not a number")))
}

/// DRO settings from `--dro`; `true` when the value is a ζ sweep.
pub fn parse_dro(s: &str) -> CliResult<(Vec<DroMode>, bool)> {
    if s == "off" {
        return Ok((vec![DroMode::Off], false));
    }
    if let Some(d) = s.strip_prefix("chi2:") {
        return Ok((vec![DroMode::Constrained { delta: parse_number(d, "--dro")? }], false));
    }
    if let Some(z) = s.strip_prefix("lagrange:") {
        return Ok((vec![DroMode::Lagrangian { zeta: parse_number(z, "--dro")? }], false));
    }
    if let Some(list) = s.strip_prefix("zeta-sweep:") {
        let zs = list
            .split(',')
            .map(|z| parse_number(z, "--dro").map(|zeta| DroMode::Lagrangian { zeta }))
            .collect::<CliResult<Vec<_>>>()?;
        return Ok((zs, true));
    }
    Err(CliError::usage(format!(
        "--dro must be off, chi2:DELTA, lagrange:ZETA or zeta-sweep:LIST, got '{s}'"
    )))
}

pub fn dro_label(d: &DroMode) -> String {
    match d {
        DroMode::Off => "off".into(),
        DroMode::Constrained { delta } => format!("chi2:{delta}"),
        DroMode::Lagrangian { zeta } => format!("lagrange:{zeta}"),
    }
}

pub fn base_config(o: &OptimArgs, seed: u64) -> CliResult<TrainConfig> {
    let weight_mode = match o.weight_mode.as_str() {
        "ratio" => WeightMode::Ratio,
        "literal" => WeightMode::Literal,
        other => return Err(CliError::usage(format!("--weight-mode must be ratio or literal, got '{other}'"))),
    };
    Ok(TrainConfig {
        kind: parse_kind(&o.kind)?,
        model: parse_model(&o.model)?,
        step_w: o.step_w,
        step_q: o.step_q,
        batch: o.batch.map_or(Batch::Full, |size| Batch::Minibatch { size }),
        weight_mode,
        bandwidth_scale: o.bandwidth_scale,
        seed,
        ..TrainConfig::default()
    })
}
