//! Benchmark orchestration: run LLM analyses, import external SARIF, match,
//! score, and collect everything into one result.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, GroundTruthManifest, ProjectSource};
use crate::llm::{self, round3, AnalysisRun, ModelConfig};
use crate::matcher::{self, MatchPolicy, MatchReport, RawCounts};
use crate::metrics::{self, AggregateMetrics, MetricsRecord};
use crate::sarif;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config has no analyzers")]
    EmptyConfig,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Sarif(#[from] sarif::SarifError),
    #[error("malformed counts file: {0}")]
    MalformedCounts(String),
}

fn default_extensions() -> Vec<String> {
    vec!["cs".into(), "csproj".into(), "sln".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerKind {
    Llm,
    SarifImport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzerSpec {
    pub kind: AnalyzerKind,
    pub id: String,
    /// Required iff kind == llm.
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// Required iff kind == sarif_import; holds `<project_id>.sarif` files.
    #[serde(default)]
    pub sarif_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub corpus_root: PathBuf,
    #[serde(default = "default_extensions")]
    pub extensions: Vec<String>,
    pub analyzers: Vec<AnalyzerSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Per-analyzer policy overrides, keyed by analyzer id.
    #[serde(default)]
    pub match_overrides: HashMap<String, MatchPolicy>,
}

impl BenchmarkConfig {
    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg: BenchmarkConfig = serde_json::from_str(&text)
            .map_err(|e| RunnerError::InvalidConfig(e.to_string()))?;
        cfg.validated()
    }

    pub fn validated(self) -> Result<Self, RunnerError> {
        if self.analyzers.is_empty() {
            return Err(RunnerError::EmptyConfig);
        }
        let mut seen = std::collections::HashSet::new();
        for spec in &self.analyzers {
            if !seen.insert(spec.id.as_str()) {
                return Err(RunnerError::InvalidConfig(format!(
                    "duplicate analyzer id {:?}",
                    spec.id
                )));
            }
            match spec.kind {
                AnalyzerKind::Llm if spec.model.is_none() => {
                    return Err(RunnerError::InvalidConfig(format!(
                        "analyzer {:?} is llm but has no model config",
                        spec.id
                    )));
                }
                AnalyzerKind::SarifImport if spec.sarif_dir.is_none() => {
                    return Err(RunnerError::InvalidConfig(format!(
                        "analyzer {:?} is sarif_import but has no sarif_dir",
                        spec.id
                    )));
                }
                _ => {}
            }
        }
        if !self.corpus_root.exists() {
            return Err(RunnerError::InvalidConfig(format!(
                "corpus_root {:?} does not exist",
                self.corpus_root
            )));
        }
        Ok(self)
    }

    pub fn policy_for(&self, spec: &AnalyzerSpec) -> MatchPolicy {
        self.match_overrides
            .get(&spec.id)
            .cloned()
            .unwrap_or_else(|| match spec.kind {
                AnalyzerKind::Llm => MatchPolicy::llm_default(),
                AnalyzerKind::SarifImport => MatchPolicy::sarif_import_default(),
            })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchCell {
    pub analyzer_id: String,
    pub project_id: String,
    pub report: MatchReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingCell {
    pub analyzer_id: String,
    pub project_id: String,
    pub seconds: f64,
    pub measured: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub analyzer_id: String,
    pub project_id: String,
    pub error: String,
}

/// Everything one benchmark produced: per-cell runs, assignments, metrics,
/// per-analyzer aggregates, timings, and isolated failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub runs: Vec<AnalysisRun>,
    pub match_reports: Vec<MatchCell>,
    pub metrics: Vec<MetricsRecord>,
    pub aggregates: Vec<AggregateMetrics>,
    pub timings: Vec<TimingCell>,
    pub failures: Vec<CellFailure>,
}

/// Read an externally produced SARIF file as an analysis run. Wall time is
/// taken from a `<project_id>.time` sidecar when present, else 0.000
/// flagged as unmeasured.
pub fn import_external_sarif(
    path: &Path,
    analyzer_id: &str,
    project_id: &str,
) -> Result<AnalysisRun, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let log = sarif::parse_sarif(&text)?;

    let sidecar = path.with_extension("time");
    let (wall_time, measured) = match std::fs::read_to_string(&sidecar) {
        Ok(text) => match text.trim().parse::<f64>() {
            Ok(seconds) if seconds >= 0.0 => (round3(seconds), true),
            _ => (0.0, false),
        },
        Err(_) => (0.0, false),
    };

    let finding_count = log.runs.iter().map(|r| r.results.len()).sum();
    Ok(AnalysisRun {
        analyzer_id: analyzer_id.to_string(),
        project_id: project_id.to_string(),
        sarif: log,
        wall_time,
        draft_count: finding_count,
        rejected_draft_count: 0,
        timing_measured: measured,
    })
}

/// Discover corpus projects: immediate subdirectories of `corpus_root` that
/// contain a `groundtruth.json`, in lexicographic order.
pub fn discover_projects(
    corpus_root: &Path,
    extensions: &[String],
) -> Result<Vec<(ProjectSource, GroundTruthManifest)>, RunnerError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus_root)
        .map_err(|e| RunnerError::Io {
            path: corpus_root.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| p.is_dir() && p.join("groundtruth.json").is_file())
        .collect();
    dirs.sort();

    let mut projects = Vec::new();
    for dir in dirs {
        let src = corpus::load_project(&dir, extensions)?;
        let manifest = corpus::load_ground_truth(&dir.join("groundtruth.json"))?;
        manifest.verify_against(&src)?;
        projects.push((src, manifest));
    }
    Ok(projects)
}

fn produce_run(
    spec: &AnalyzerSpec,
    src: &ProjectSource,
) -> Result<AnalysisRun, String> {
    match spec.kind {
        AnalyzerKind::Llm => {
            let model = spec.model.as_ref().expect("validated: llm has model");
            llm::analyze_project(src, model).map_err(|e| e.to_string())
        }
        AnalyzerKind::SarifImport => {
            let dir = spec.sarif_dir.as_ref().expect("validated: import has dir");
            let path = dir.join(format!("{}.sarif", src.project_id));
            import_external_sarif(&path, &spec.id, &src.project_id).map_err(|e| e.to_string())
        }
    }
}

/// Run the full benchmark grid. Per-cell failures are recorded, not fatal.
/// Analyzers run concurrently (one worker each); within an analyzer the
/// configured model concurrency bounds in-flight requests.
pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    project_filter: Option<&str>,
    analyzer_filter: Option<&str>,
) -> Result<BenchmarkResult, RunnerError> {
    let projects = discover_projects(&cfg.corpus_root, &cfg.extensions)?;
    let projects: Vec<_> = projects
        .into_iter()
        .filter(|(src, _)| project_filter.is_none_or(|f| f == src.project_id))
        .collect();
    let specs: Vec<&AnalyzerSpec> = cfg
        .analyzers
        .iter()
        .filter(|s| analyzer_filter.is_none_or(|f| f == s.id))
        .collect();
    if specs.is_empty() {
        return Err(RunnerError::EmptyConfig);
    }

    // one worker per analyzer; cells are (analyzer, project) pairs
    let per_analyzer: Vec<Vec<Result<AnalysisRun, (String, String)>>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = specs
                .iter()
                .map(|spec| {
                    let projects = &projects;
                    let limit = match (&spec.kind, &spec.model) {
                        (AnalyzerKind::Llm, Some(m)) => m.concurrency.max(1),
                        _ => 1,
                    };
                    scope.spawn(move || {
                        let mut outcomes = Vec::with_capacity(projects.len());
                        for chunk in projects.chunks(limit) {
                            let chunk_outcomes: Vec<_> = std::thread::scope(|inner| {
                                chunk
                                    .iter()
                                    .map(|(src, _)| {
                                        inner.spawn(move || {
                                            produce_run(spec, src)
                                                .map_err(|e| (src.project_id.clone(), e))
                                        })
                                    })
                                    .collect::<Vec<_>>()
                                    .into_iter()
                                    .map(|h| h.join().unwrap())
                                    .collect()
                            });
                            outcomes.extend(chunk_outcomes);
                        }
                        outcomes
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

    let mut result = BenchmarkResult {
        runs: Vec::new(),
        match_reports: Vec::new(),
        metrics: Vec::new(),
        aggregates: Vec::new(),
        timings: Vec::new(),
        failures: Vec::new(),
    };

    for (spec, outcomes) in specs.iter().zip(per_analyzer) {
        let policy = cfg.policy_for(spec);
        let mut records = Vec::new();
        let mut totals = Vec::new();
        for (outcome, (_, manifest)) in outcomes.into_iter().zip(&projects) {
            match outcome {
                Ok(run) => {
                    let findings = sarif::findings_of(&run.sarif, &spec.id);
                    let report = matcher::match_findings(&findings, manifest, &policy);
                    let counts = matcher::confusion_counts(
                        &report,
                        findings.len(),
                        manifest.vulnerabilities.len(),
                    )
                    .expect("matcher pairs are bounded by construction");
                    let record =
                        metrics::compute_metrics(&counts, &spec.id, &run.project_id);

                    result.timings.push(TimingCell {
                        analyzer_id: spec.id.clone(),
                        project_id: run.project_id.clone(),
                        seconds: run.wall_time,
                        measured: run.timing_measured,
                    });
                    result.match_reports.push(MatchCell {
                        analyzer_id: spec.id.clone(),
                        project_id: run.project_id.clone(),
                        report,
                    });
                    result.metrics.push(record.clone());
                    records.push(record);
                    totals.push(counts);
                    result.runs.push(run);
                }
                Err((project_id, error)) => {
                    result.failures.push(CellFailure {
                        analyzer_id: spec.id.clone(),
                        project_id,
                        error,
                    });
                }
            }
        }
        if let Ok(agg) = metrics::aggregate(&records, &totals) {
            result.aggregates.push(agg);
        }
    }

    Ok(result)
}

/// Write the per-cell SARIF artifacts and result.json under `out_dir`.
pub fn write_artifacts(result: &BenchmarkResult, out_dir: &Path) -> Result<(), RunnerError> {
    let io_err = |path: &Path, e: std::io::Error| RunnerError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    for run in &result.runs {
        let dir = out_dir.join(&run.analyzer_id);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = dir.join(format!("{}.sarif", run.project_id));
        let bytes = sarif::emit_sarif(&run.sarif)?;
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    }
    let result_path = out_dir.join("result.json");
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let json = serde_json::to_vec_pretty(result)
        .map_err(|e| RunnerError::InvalidConfig(e.to_string()))?;
    std::fs::write(&result_path, json).map_err(|e| io_err(&result_path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Counts replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountsRow {
    pub analyzer: String,
    pub project: String,
    pub total: usize,
    pub tp: usize,
    pub known: usize,
}

/// Evaluate published (total, TP, known) triples directly, bypassing
/// findings. Analyzers keep first-appearance order; projects keep file order.
pub fn replay_counts(rows: &[CountsRow]) -> Result<BenchmarkResult, RunnerError> {
    let mut analyzer_order: Vec<&str> = Vec::new();
    for row in rows {
        if row.tp > row.total.min(row.known) {
            return Err(RunnerError::MalformedCounts(format!(
                "{} {}: tp {} exceeds min(total {}, known {})",
                row.analyzer, row.project, row.tp, row.total, row.known
            )));
        }
        if !analyzer_order.contains(&row.analyzer.as_str()) {
            analyzer_order.push(&row.analyzer);
        }
    }

    let mut result = BenchmarkResult {
        runs: Vec::new(),
        match_reports: Vec::new(),
        metrics: Vec::new(),
        aggregates: Vec::new(),
        timings: Vec::new(),
        failures: Vec::new(),
    };

    for analyzer in analyzer_order {
        let mut records = Vec::new();
        let mut totals = Vec::new();
        for row in rows.iter().filter(|r| r.analyzer == analyzer) {
            let counts = RawCounts {
                total_found: row.total,
                true_positives: row.tp,
                known_vulnerabilities: row.known,
            };
            let record = metrics::compute_metrics(&counts, analyzer, &row.project);
            result.metrics.push(record.clone());
            records.push(record);
            totals.push(counts);
        }
        if let Ok(agg) = metrics::aggregate(&records, &totals) {
            result.aggregates.push(agg);
        }
    }
    Ok(result)
}

pub fn replay_counts_file(path: &Path) -> Result<BenchmarkResult, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let rows: Vec<CountsRow> =
        serde_json::from_str(&text).map_err(|e| RunnerError::MalformedCounts(e.to_string()))?;
    replay_counts(&rows)
}

/// Re-run matching and metrics over SARIF artifacts already on disk
/// (written by a previous `analyze`, or imported).
pub fn evaluate_existing(
    cfg: &BenchmarkConfig,
    artifacts_dir: &Path,
) -> Result<BenchmarkResult, RunnerError> {
    let projects = discover_projects(&cfg.corpus_root, &cfg.extensions)?;
    let mut result = BenchmarkResult {
        runs: Vec::new(),
        match_reports: Vec::new(),
        metrics: Vec::new(),
        aggregates: Vec::new(),
        timings: Vec::new(),
        failures: Vec::new(),
    };

    for spec in &cfg.analyzers {
        let policy = cfg.policy_for(spec);
        let mut records = Vec::new();
        let mut totals = Vec::new();
        for (src, manifest) in &projects {
            let path = match spec.kind {
                AnalyzerKind::SarifImport => spec
                    .sarif_dir
                    .clone()
                    .expect("validated")
                    .join(format!("{}.sarif", src.project_id)),
                AnalyzerKind::Llm => artifacts_dir
                    .join(&spec.id)
                    .join(format!("{}.sarif", src.project_id)),
            };
            match import_external_sarif(&path, &spec.id, &src.project_id) {
                Ok(run) => {
                    let findings = sarif::findings_of(&run.sarif, &spec.id);
                    let report = matcher::match_findings(&findings, manifest, &policy);
                    let counts = matcher::confusion_counts(
                        &report,
                        findings.len(),
                        manifest.vulnerabilities.len(),
                    )
                    .expect("matcher pairs are bounded by construction");
                    let record = metrics::compute_metrics(&counts, &spec.id, &src.project_id);
                    result.timings.push(TimingCell {
                        analyzer_id: spec.id.clone(),
                        project_id: src.project_id.clone(),
                        seconds: run.wall_time,
                        measured: run.timing_measured,
                    });
                    result.match_reports.push(MatchCell {
                        analyzer_id: spec.id.clone(),
                        project_id: src.project_id.clone(),
                        report,
                    });
                    result.metrics.push(record.clone());
                    records.push(record);
                    totals.push(counts);
                    result.runs.push(run);
                }
                Err(e) => result.failures.push(CellFailure {
                    analyzer_id: spec.id.clone(),
                    project_id: src.project_id.clone(),
                    error: e.to_string(),
                }),
            }
        }
        if let Ok(agg) = metrics::aggregate(&records, &totals) {
            result.aggregates.push(agg);
        }
    }
    Ok(result)
}
