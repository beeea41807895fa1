//! Run orchestration: case construction, concurrent execution with a
//! fixed-order reduction, aggregation, and persistence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use editid_core::backends::BackendDescriptor;
use editid_core::metrics::fid;

use crate::canonical::{write_canonical, canonical_hash};
use crate::config::{Config, ALL_METRICS};
use crate::data::{load_group, load_prompts, pair, EvalCase, LoadedGroup, LoadedPrompts};
use crate::pipeline::{generate_case, score_case, CaseEvaluation, MetricValue};
use crate::suite::Suite;

/// One case's persisted record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub dataset: String,
    pub image_name: String,
    pub prompt_set: String,
    pub prompt_id: usize,
    pub prompt: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, MetricValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stat_features_with: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stat_features_without: Option<Vec<f64>>,
    pub image_with_id_path: String,
    pub image_without_id_path: String,
}

/// Aggregated report: per-case records plus per-metric means and null
/// counts, in a canonical-JSON-stable shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub cases: Vec<CaseRecord>,
    pub aggregates: BTreeMap<String, Option<f64>>,
    pub null_counts: BTreeMap<String, usize>,
    pub fid_regularized: Option<bool>,
    pub warnings: Vec<String>,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Config,
    pub config_hash: String,
    pub backends: Vec<BackendDescriptor>,
    pub case_ids: Vec<String>,
    pub code_version: String,
}

/// A finished run: manifest, report, and where they were written.
#[derive(Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub report: MetricReport,
    pub run_dir: PathBuf,
}

fn sanitize(component: &str) -> String {
    component
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

struct LoadedData {
    groups: BTreeMap<String, LoadedGroup>,
    prompts: BTreeMap<String, LoadedPrompts>,
    warnings: Vec<String>,
}

fn load_data(config: &Config) -> Result<LoadedData> {
    let mut groups = BTreeMap::new();
    let mut prompts = BTreeMap::new();
    let mut warnings = Vec::new();
    for section in &config.datasets {
        let group = load_group(section)
            .with_context(|| format!("loading dataset '{}'", section.name))?;
        warnings.extend(group.warnings.iter().cloned());
        groups.insert(section.name.clone(), group);
    }
    for section in &config.prompts {
        let set = load_prompts(section)
            .with_context(|| format!("loading prompt set '{}'", section.name))?;
        warnings.extend(set.warnings.iter().cloned());
        prompts.insert(section.name.clone(), set);
    }
    Ok(LoadedData {
        groups,
        prompts,
        warnings,
    })
}

struct CaseOutcome {
    evaluation: CaseEvaluation,
    branch_error: Option<String>,
    with_path: String,
    without_path: String,
}

fn execute_case(
    suite: &Suite,
    config: &Config,
    case: &EvalCase,
    groups: &BTreeMap<String, LoadedGroup>,
    cases_dir: &Path,
) -> Result<CaseOutcome> {
    let group = groups
        .get(&case.dataset)
        .with_context(|| format!("dataset '{}' disappeared", case.dataset))?;
    let id_image = &group
        .images
        .iter()
        .find(|img| img.name == case.image_name)
        .with_context(|| format!("image '{}' disappeared", case.image_name))?
        .image;

    let artifacts = generate_case(suite, config, case, id_image)?;
    let evaluation = score_case(suite, config, case, id_image, &artifacts)?;

    let case_dir = cases_dir.join(sanitize(&case.case_id()));
    std::fs::create_dir_all(&case_dir)?;
    let with_path = case_dir.join("image_with_id.json");
    let without_path = case_dir.join("image_without_id.json");
    write_canonical(&with_path, &artifacts.image_with_id)?;
    write_canonical(&without_path, &artifacts.image_without_id)?;

    Ok(CaseOutcome {
        evaluation,
        branch_error: artifacts.branch_error,
        with_path: with_path.display().to_string(),
        without_path: without_path.display().to_string(),
    })
}

fn aggregate(records: &[CaseRecord], fid_enabled: bool) -> (BTreeMap<String, Option<f64>>, BTreeMap<String, usize>, Option<bool>) {
    let mut aggregates = BTreeMap::new();
    let mut null_counts = BTreeMap::new();
    for metric in ALL_METRICS {
        if metric == "fid" {
            continue;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        let mut nulls = 0usize;
        let mut seen = false;
        for record in records {
            if let Some(v) = record.metrics.get(metric) {
                seen = true;
                match v.value {
                    Some(x) => {
                        sum += x;
                        n += 1;
                    }
                    None => nulls += 1,
                }
            }
        }
        if seen {
            aggregates.insert(
                metric.to_string(),
                if n > 0 { Some(sum / n as f64) } else { None },
            );
            null_counts.insert(metric.to_string(), nulls);
        }
    }
    let mut fid_regularized = None;
    if fid_enabled {
        let with: Vec<Vec<f64>> = records
            .iter()
            .filter_map(|r| r.stat_features_with.clone())
            .collect();
        let without: Vec<Vec<f64>> = records
            .iter()
            .filter_map(|r| r.stat_features_without.clone())
            .collect();
        let nulls = records.len().saturating_sub(with.len().min(without.len()));
        match fid(&with, &without) {
            Ok(result) => {
                aggregates.insert("fid".to_string(), Some(result.value));
                fid_regularized = Some(result.regularized);
            }
            Err(_) => {
                aggregates.insert("fid".to_string(), None);
            }
        }
        null_counts.insert("fid".to_string(), nulls);
    }
    (aggregates, null_counts, fid_regularized)
}

/// Run the full evaluation described by the config against a suite.
///
/// Cases execute concurrently up to `config.workers`, each case isolated;
/// results are reduced in fixed case order so reports are byte-stable.
pub fn run_with_suite(config: &Config, suite: &Suite) -> Result<RunOutput> {
    config.validate()?;
    let data = load_data(config)?;
    let cases = pair(&data.groups, &data.prompts, &config.pairing, config.seed)?;
    anyhow::ensure!(!cases.is_empty(), "pairing produced no cases");

    let config_hash = config.config_hash()?;
    let run_dir = config.output_dir.join(&config_hash);
    let cases_dir = run_dir.join("cases");
    std::fs::create_dir_all(&cases_dir)?;
    let log_path = run_dir.join("run.log");
    append_log(&log_path, "run started")?;

    // fixed-slot results so worker scheduling cannot reorder anything
    let results: Mutex<Vec<Option<Result<CaseOutcome>>>> =
        Mutex::new((0..cases.len()).map(|_| None).collect());
    let next: AtomicUsize = AtomicUsize::new(0);
    let workers = config.workers.min(cases.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= cases.len() {
                    break;
                }
                let outcome = execute_case(suite, config, &cases[index], &data.groups, &cases_dir);
                results.lock().expect("results lock")[index] = Some(outcome);
            });
        }
    });

    let outcomes = results.into_inner().expect("results lock");
    let mut records = Vec::with_capacity(cases.len());
    for (case, outcome) in cases.iter().zip(outcomes) {
        let record = match outcome.expect("every case executed") {
            Ok(outcome) => CaseRecord {
                case_id: case.case_id(),
                dataset: case.dataset.clone(),
                image_name: case.image_name.clone(),
                prompt_set: case.prompt_set.clone(),
                prompt_id: case.prompt_id,
                prompt: case.prompt.clone(),
                seed: case.seed,
                metrics: outcome.evaluation.metrics,
                branch_error: outcome.branch_error,
                stat_features_with: outcome.evaluation.stat_features_with,
                stat_features_without: outcome.evaluation.stat_features_without,
                image_with_id_path: outcome.with_path,
                image_without_id_path: outcome.without_path,
            },
            // an isolated case failure nulls that case's metrics and the
            // run continues
            Err(err) => CaseRecord {
                case_id: case.case_id(),
                dataset: case.dataset.clone(),
                image_name: case.image_name.clone(),
                prompt_set: case.prompt_set.clone(),
                prompt_id: case.prompt_id,
                prompt: case.prompt.clone(),
                seed: case.seed,
                metrics: ALL_METRICS
                    .iter()
                    .filter(|m| **m != "fid" && config.metrics.is_enabled(m))
                    .map(|m| (m.to_string(), MetricValue::null("case-failure")))
                    .collect(),
                branch_error: Some(err.to_string()),
                stat_features_with: None,
                stat_features_without: None,
                image_with_id_path: String::new(),
                image_without_id_path: String::new(),
            },
        };
        records.push(record);
    }

    let fid_enabled = config.metrics.is_enabled("fid");
    let (aggregates, null_counts, fid_regularized) = aggregate(&records, fid_enabled);
    let report = MetricReport {
        cases: records,
        aggregates,
        null_counts,
        fid_regularized,
        warnings: data.warnings,
    };
    let manifest = RunManifest {
        config: config.clone(),
        config_hash: config_hash.clone(),
        backends: suite.descriptors.clone(),
        case_ids: cases.iter().map(EvalCase::case_id).collect(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };

    // canonical forms exclude timestamps: those live only in run.log
    write_report_excluding_paths(&run_dir, &manifest, &report)?;
    append_log(&log_path, "run finished")?;

    Ok(RunOutput {
        manifest,
        report,
        run_dir,
    })
}

/// The canonical report strips absolute artifact paths so reruns from
/// different working directories stay byte-identical.
fn canonical_report(report: &MetricReport) -> MetricReport {
    let mut clean = report.clone();
    for case in &mut clean.cases {
        case.image_with_id_path = strip_to_relative(&case.image_with_id_path);
        case.image_without_id_path = strip_to_relative(&case.image_without_id_path);
    }
    clean
}

fn strip_to_relative(path: &str) -> String {
    match path.split_once("/cases/") {
        Some((_, rel)) => format!("cases/{rel}"),
        None => path.to_string(),
    }
}

fn write_report_excluding_paths(
    run_dir: &Path,
    manifest: &RunManifest,
    report: &MetricReport,
) -> Result<()> {
    let mut canonical_manifest = manifest.clone();
    canonical_manifest.config.output_dir = PathBuf::new();
    write_canonical(&run_dir.join("manifest.json"), &canonical_manifest)?;
    write_canonical(&run_dir.join("report.json"), &canonical_report(report))?;
    Ok(())
}

/// Hash of the canonical report (handy for byte-identity assertions).
pub fn report_hash(report: &MetricReport) -> Result<String> {
    canonical_hash(&canonical_report(report))
}

fn append_log(path: &Path, message: &str) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(
        file,
        "{} {message}",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0)
    )?;
    Ok(())
}

/// Convenience: build the toy suite from the config and run.
pub fn run(config: &Config) -> Result<RunOutput> {
    let suite = Suite::toy(config)?;
    run_with_suite(config, &suite)
}

/// Load a persisted report back from a run directory.
pub fn load_report(run_dir: &Path) -> Result<MetricReport> {
    let text = std::fs::read_to_string(run_dir.join("report.json"))
        .with_context(|| format!("reading report in {}", run_dir.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a persisted manifest back from a run directory.
pub fn load_manifest(run_dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(run_dir.join("manifest.json"))
        .with_context(|| format!("reading manifest in {}", run_dir.display()))?;
    Ok(serde_json::from_str(&text)?)
}
