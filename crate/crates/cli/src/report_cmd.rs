use std::fs;
use std::path::Path;

use fairlab::MetricsRecord;
use serde::Deserialize;
use serde_json::Value;

use crate::args::{ReportArgs, ReportFormat, SplitName};
use crate::output::fmt17;
use crate::{CliError, CliResult, SCHEMA_VERSION};

struct Row {
    run: String,
    setting: String,
    m: MetricsRecord,
}

#[derive(Deserialize)]
struct TrainSetting {
    lambda: f64,
    dro: String,
    train: MetricsRecord,
    test: MetricsRecord,
}

#[derive(Deserialize)]
struct FedSplit {
    train: MetricsRecord,
    test: MetricsRecord,
}

#[derive(Deserialize)]
struct FedClient {
    id: usize,
    federated: FedSplit,
    local: Option<FedSplit>,
}

fn pick(split: SplitName, train: MetricsRecord, test: MetricsRecord) -> MetricsRecord {
    match split {
        SplitName::Train => train,
        SplitName::Test => test,
    }
}

fn read_run(dir: &Path, split: SplitName) -> CliResult<Vec<Row>> {
    let candidates = ["metrics.json", "comparison.json"];
    let path = candidates
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::usage(format!("{}: no metrics.json or comparison.json", dir.display())))?;
    let v: Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let version = v.get("schema_version").and_then(Value::as_u64);
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(CliError::usage(format!(
            "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            version.map_or("missing".to_string(), |n| n.to_string())
        )));
    }
    let run = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    let mut rows = Vec::new();
    match v.get("command").and_then(Value::as_str) {
        Some("train") => {
            let settings: Vec<TrainSetting> = serde_json::from_value(v["settings"].clone())?;
            for s in settings {
                rows.push(Row {
                    run: run.clone(),
                    setting: format!("lambda={} dro={}", s.lambda, s.dro),
                    m: pick(split, s.train, s.test),
                });
            }
        }
        Some("fedsim") => {
            let mode = v["mode"].as_str().unwrap_or("?").to_string();
            let clients: Vec<FedClient> = serde_json::from_value(v["clients"].clone())?;
            for c in clients {
                rows.push(Row {
                    run: run.clone(),
                    setting: format!("{mode} client {}", c.id),
                    m: pick(split, c.federated.train, c.federated.test),
                });
                if let Some(l) = c.local {
                    rows.push(Row {
                        run: run.clone(),
                        setting: format!("local client {}", c.id),
                        m: pick(split, l.train, l.test),
                    });
                }
            }
        }
        other => {
            return Err(CliError::usage(format!("{}: unknown command {other:?}", path.display())));
        }
    }
    Ok(rows)
}

fn render(rows: &[Row], format: ReportFormat) -> String {
    let k = rows.iter().map(|r| r.m.nr.len()).max().unwrap_or(0);
    let mut out = String::new();
    match format {
        ReportFormat::Md => {
            out.push_str("| Run | Setting | Acc | DDP |");
            for s in 0..k {
                out.push_str(&format!(" NR(s={s}) |"));
            }
            out.push_str("\n|---|---|---|---|");
            out.push_str(&"---|".repeat(k));
            out.push('\n');
            for r in rows {
                out.push_str(&format!("| {} | {} | {:.1}% | {:.3} |", r.run, r.setting, 100.0 * r.m.accuracy, r.m.ddp));
                for s in 0..k {
                    match r.m.nr.get(s) {
                        Some(v) => out.push_str(&format!(" {:.1}% |", 100.0 * v)),
                        None => out.push_str("  |"),
                    }
                }
                out.push('\n');
            }
        }
        ReportFormat::Csv => {
            out.push_str("run,setting,acc,ddp,deo");
            for s in 0..k {
                out.push_str(&format!(",nr_{s}"));
            }
            out.push('\n');
            for r in rows {
                out.push_str(&format!("{},{},{},{},{}", r.run, r.setting, fmt17(r.m.accuracy), fmt17(r.m.ddp), fmt17(r.m.deo)));
                for s in 0..k {
                    out.push(',');
                    if let Some(v) = r.m.nr.get(s) {
                        out.push_str(&fmt17(*v));
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn run(a: &ReportArgs) -> CliResult<i32> {
    let mut rows = Vec::new();
    for dir in &a.inputs {
        rows.extend(read_run(dir, a.split)?);
    }
    let text = render(&rows, a.format);
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
