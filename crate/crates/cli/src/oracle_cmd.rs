use std::fs;

use serde::Serialize;

use fairlab::oracle::{
    check_pinsker_lemmas, fuzz_ddp_bound, fuzz_perturbed_bound, fuzz_ratio_bound, fuzz_soft_bound, FuzzSummary,
    LemmaReport, RandomJointSpec,
};
use fairlab::DependenceKind;

use crate::args::OracleArgs;
use crate::manifest::{unix_seconds, write_manifest_file, RunManifest};
use crate::output::{ensure_dir, write_json};
use crate::{CliError, CliResult, SCHEMA_VERSION};

const LEMMA_TOL: f64 = -1e-9;

#[derive(Serialize)]
struct OracleReport<'a> {
    schema_version: u32,
    command: &'static str,
    manifest: &'a RunManifest,
    checks: Vec<CheckEntry>,
    lemmas: Option<LemmaEntry>,
    violations: usize,
    passed: bool,
}

#[derive(Serialize)]
struct CheckEntry {
    set: String,
    epsilon: Vec<f64>,
    not_applicable: usize,
    #[serde(flatten)]
    summary: FuzzSummary,
}

#[derive(Serialize)]
struct LemmaEntry {
    passed: bool,
    #[serde(flatten)]
    report: LemmaReport,
}

fn default_eps(set: &str) -> Vec<f64> {
    match set {
        "1" => vec![0.0, 0.05, 0.1, 0.2],
        "2" => vec![0.05],
        "3" => vec![0.0, 0.05, 0.1],
        _ => vec![0.2],
    }
}

pub fn run(a: &OracleArgs) -> CliResult<i32> {
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    if a.groups < 2 {
        return Err(CliError::usage("--groups must be at least 2"));
    }
    if let Some(e) = &a.eps {
        if e.is_empty() || e.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(CliError::usage("--eps entries must be finite and >= 0"));
        }
    }
    if a.theorem == "lemmas" && a.eps.is_some() {
        return Err(CliError::usage("--eps does not apply to --theorem lemmas"));
    }
    let started = unix_seconds();
    let sets: Vec<&str> = match a.theorem.as_str() {
        "all" => vec!["1", "2", "3", "4", "lemmas"],
        one => vec![one],
    };
    let spec = RandomJointSpec {
        ns: a.groups,
        ..Default::default()
    };
    let mut checks = Vec::new();
    let mut lemmas = None;
    for (i, set) in sets.iter().enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        if *set == "lemmas" {
            let report = check_pinsker_lemmas(a.trials, seed)?;
            let passed = report.min_slack.iter().all(|&s| s >= LEMMA_TOL);
            lemmas = Some(LemmaEntry { passed, report });
            continue;
        }
        let eps = a.eps.clone().unwrap_or_else(|| default_eps(set));
        let summaries = match *set {
            "1" => vec![fuzz_ddp_bound(&spec, a.trials, &eps, seed)?],
            "2" => [DependenceKind::MutualInformation, DependenceKind::Ermi, DependenceKind::MaximalCorrelation]
                .iter()
                .map(|&k| fuzz_soft_bound(&spec, k, a.trials, &eps, seed))
                .collect::<fairlab::Result<Vec<_>>>()?,
            "3" => vec![fuzz_ratio_bound(a.trials, &eps, seed)?],
            _ => vec![fuzz_perturbed_bound(a.trials, &eps, a.eta, seed)?],
        };
        for summary in summaries {
            checks.push(CheckEntry {
                set: set.to_string(),
                epsilon: eps.clone(),
                not_applicable: summary.instances - summary.applicable,
                summary,
            });
        }
    }
    let violations = checks.iter().map(|c| c.summary.violations).sum::<usize>()
        + lemmas.as_ref().map_or(0, |l| l.report.violations.iter().map(Vec::len).sum());
    let passed = violations == 0 && lemmas.as_ref().is_none_or(|l| l.passed);

    ensure_dir(&a.out)?;
    let mut outputs = Vec::new();
    let cx_dir = a.out.join("counterexamples");
    let mut written = 0;
    for c in &checks {
        for (j, cx) in c.summary.counterexamples.iter().enumerate() {
            fs::create_dir_all(&cx_dir)?;
            let name = format!("{}_{j}.txt", c.summary.check);
            fs::write(cx_dir.join(&name), cx.to_text())?;
            outputs.push(format!("counterexamples/{name}"));
            written += 1;
        }
    }
    if let Some(l) = &lemmas {
        for (i, v) in l.report.violations.iter().enumerate() {
            for (j, cx) in v.iter().enumerate() {
                fs::create_dir_all(&cx_dir)?;
                let name = format!("lemma{}_{j}.txt", i + 1);
                fs::write(cx_dir.join(&name), cx.to_text())?;
                outputs.push(format!("counterexamples/{name}"));
                written += 1;
            }
        }
    }
    let manifest = RunManifest::new("oracle-verify", a, a.seed)?;
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        command: "oracle-verify",
        manifest: &manifest,
        checks,
        lemmas,
        violations,
        passed,
    };
    outputs.insert(0, write_json(&a.out, "oracle_summary.json", &report)?);
    write_manifest_file(&a.out, &manifest, started, &outputs)?;

    for c in &report.checks {
        eprintln!(
            "{:<22} instances {:>5}  applicable {:>5}  violations {:>3}  min slack {:.3e}",
            c.summary.check, c.summary.instances, c.summary.applicable, c.summary.violations, c.summary.min_slack
        );
    }
    if let Some(l) = &report.lemmas {
        eprintln!("lemmas                 trials {:>5}  min slack {:?}", l.report.trials, l.report.min_slack);
    }
    if written > 0 {
        eprintln!("{written} counterexample(s) written to {}", cx_dir.display());
    }
    Ok(if passed { 0 } else { 1 })
}
