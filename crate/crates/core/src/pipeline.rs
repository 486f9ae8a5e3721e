//! Stage runner over an on-disk project.
//!
//! Every stage reads the previous stage's files under `output_dir` and
//! rewrites only its own directory:
//!
//! ```text
//! output_dir/
//!   docs/        cleaned documents, one JSON per source
//!   specs/       extraction results
//!   metrics/     scores against ground truth
//!   tools/       descriptors, {source}/{tool}.tool.json
//!   exports/     script functions and per-host OpenAPI documents
//!   validation/  reports.jsonl and the error tables
//!   kb/          knowledge base, inference outcomes, inferred descriptors
//!   reports/     the combined text report
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingProvider;
use crate::evaluate::{compute_metrics, render_metrics_table, MetricsReport};
use crate::extract::{extract_corpus, ExtractionBackend, ExtractionResult, OneShotExample, ReplayStore};
use crate::infer::{build_kb, infer_parameters, leave_one_api_out, llm_guess_baseline, InferOptions, InferenceError, InferenceOutcome, LooSummary};
use crate::ingest::{classify_document, filter_api_pages, heuristic_classification, heuristic_is_api_page, load_corpus, read_manifest, ApiDocument, IngestOptions};
use crate::judge::{HeuristicJudge, JudgeBackend};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::model::ApiSpec;
use crate::remote::{RemoteClient, RemoteConfig};
use crate::toolgen::{export_function_source, export_openapi_by_host, generate_tools, ToolDescriptor};
use crate::validate::{render_error_report, ErrorCounts, ErrorType, InvokerConfig, ValidationReport, Validator, ValidatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Ingest,
    Extract,
    Evaluate,
    Generate,
    Validate,
    Infer,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Ingest, Stage::Extract, Stage::Evaluate, Stage::Generate, Stage::Validate, Stage::Infer, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Evaluate => "evaluate",
            Stage::Generate => "generate",
            Stage::Validate => "validate",
            Stage::Infer => "infer",
            Stage::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name().eq_ignore_ascii_case(name.trim()))
    }

    /// Directory under `output_dir` owned by this stage.
    pub fn dir(self) -> &'static str {
        match self {
            Stage::Ingest => "docs",
            Stage::Extract => "specs",
            Stage::Evaluate => "metrics",
            Stage::Generate => "tools",
            Stage::Validate => "validation",
            Stage::Infer => "kb",
            Stage::Report => "reports",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage `{0}` is missing its input; run the previous stage first")]
    MissingStageInput(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{stage}: {message}")]
    StageFailed { stage: String, message: String },
    #[error("I/O error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    /// `heuristic`, `replay`, `remote-chat`, `remote-structured` for
    /// extraction; `heuristic` or `remote` for the judge; `lexical` or
    /// `remote` for embeddings.
    pub backend: String,
    pub endpoint_url: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub requests_per_second: f64,
    /// Replay store: a directory of `{source_id}.json` files or a JSONL file.
    pub replay_path: Option<PathBuf>,
    /// One-shot example for remote extraction: a document text file and
    /// its reference spec JSON file.
    pub one_shot_document: Option<PathBuf>,
    pub one_shot_spec: Option<PathBuf>,
    /// Embedding width for remote embeddings.
    pub dimension: Option<usize>,
    /// Extra error phrases for the heuristic judge.
    #[serde(default)]
    pub error_phrases: Vec<String>,
}

impl BackendSection {
    fn named(backend: &str) -> Self {
        BackendSection { backend: backend.to_string(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLimitSection {
    /// Requests per second per API host during validation; zero disables.
    #[serde(default = "default_rps")]
    pub per_host_rps: f64,
}

fn default_rps() -> f64 {
    1.0
}

impl Default for RateLimitSection {
    fn default() -> Self {
        RateLimitSection { per_host_rps: default_rps() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    /// Also run the model-guessing baseline; needs a remote backend here.
    #[serde(default)]
    pub baseline: Option<BackendSection>,
    /// Skip the leave-one-API-out evaluation.
    #[serde(default)]
    pub skip_leave_one_out: bool,
}

fn default_true() -> bool {
    true
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub corpus_manifest: PathBuf,
    pub output_dir: PathBuf,
    pub ground_truth_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub tls_verify: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Keep pages the API-page filter rejects.
    #[serde(default)]
    pub keep_non_api_pages: bool,
    /// JSON object of labelled error counts shown next to this run's row
    /// in the report, e.g. a hand-checked reference run.
    pub reference_counts: Option<PathBuf>,
    #[serde(default = "heuristic_section")]
    pub extraction: BackendSection,
    #[serde(default = "heuristic_section")]
    pub judge: BackendSection,
    #[serde(default = "lexical_section")]
    pub embedding: BackendSection,
    #[serde(default)]
    pub rate_limit: RateLimitSection,
    #[serde(default)]
    pub inference: InferenceSection,
}

fn heuristic_section() -> BackendSection {
    BackendSection::named("heuristic")
}

fn lexical_section() -> BackendSection {
    BackendSection::named("lexical")
}

impl ProjectConfig {
    /// Parses TOML and resolves relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: ProjectConfig = toml::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.corpus_manifest);
        resolve(&mut cfg.output_dir);
        for p in [&mut cfg.ground_truth_dir, &mut cfg.reference_counts].into_iter().flatten() {
            resolve(p);
        }
        for section in [&mut cfg.extraction, &mut cfg.judge, &mut cfg.embedding] {
            for p in [&mut section.replay_path, &mut section.one_shot_document, &mut section.one_shot_spec].into_iter().flatten() {
                resolve(p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::from_toml(&text, &base)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Referenced inputs exist and backend sections are complete.
    pub fn check(&self) -> Result<(), PipelineError> {
        let missing = |what: &str, p: &Path| PipelineError::ConfigInvalid(format!("{what} `{}` does not exist", p.display()));
        if !self.corpus_manifest.exists() {
            return Err(missing("corpus_manifest", &self.corpus_manifest));
        }
        if let Some(p) = &self.ground_truth_dir {
            if !p.is_dir() {
                return Err(missing("ground_truth_dir", p));
            }
        }
        if let Some(p) = &self.reference_counts {
            if !p.is_file() {
                return Err(missing("reference_counts", p));
            }
        }
        for p in [&self.extraction.replay_path, &self.extraction.one_shot_document, &self.extraction.one_shot_spec]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(missing("extraction input", p));
            }
        }
        if self.workers == 0 {
            return Err(PipelineError::ConfigInvalid("workers must be at least 1".into()));
        }
        match self.extraction.backend.as_str() {
            "heuristic" => {}
            "replay" if self.extraction.replay_path.is_some() => {}
            "replay" => return Err(PipelineError::ConfigInvalid("replay backend needs replay_path".into())),
            "remote-chat" | "remote-structured" => remote_config(&self.extraction, "extraction").map(|_| ())?,
            other => return Err(PipelineError::ConfigInvalid(format!("unknown extraction backend `{other}`"))),
        }
        match self.judge.backend.as_str() {
            "heuristic" => {}
            "remote" => remote_config(&self.judge, "judge").map(|_| ())?,
            other => return Err(PipelineError::ConfigInvalid(format!("unknown judge backend `{other}`"))),
        }
        match self.embedding.backend.as_str() {
            "lexical" => {}
            "remote" => remote_config(&self.embedding, "embedding").map(|_| ())?,
            other => return Err(PipelineError::ConfigInvalid(format!("unknown embedding backend `{other}`"))),
        }
        if let Some(b) = &self.inference.baseline {
            remote_config(b, "inference.baseline")?;
        }
        Ok(())
    }
}

fn remote_config(section: &BackendSection, name: &str) -> Result<RemoteConfig, PipelineError> {
    let (Some(url), Some(model)) = (&section.endpoint_url, &section.model) else {
        return Err(PipelineError::ConfigInvalid(format!("{name}: remote backends need endpoint_url and model")));
    };
    let mut cfg = RemoteConfig::new(url.clone(), model.clone());
    cfg.api_key_env = section.api_key_env.clone();
    if let Some(t) = section.timeout_secs {
        cfg.timeout_secs = t;
    }
    cfg.requests_per_second = section.requests_per_second;
    Ok(cfg)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Forbid every non-loopback request.
    pub offline: bool,
    /// Replaces the configured extraction backend.
    pub backend_override: Option<String>,
    /// Recorded in the run summary; no stage samples randomly at present.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub items: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestIndexEntry {
    pub source_id: String,
    pub origin: String,
    pub api_page: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub tool_name: String,
    pub source_id: String,
    pub method: String,
    pub outcome: Option<InferenceOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub records: Vec<InferenceRecord>,
    pub leave_one_out: Option<LooSummary>,
    pub leave_one_out_error: Option<String>,
}

pub struct Pipeline {
    pub config: ProjectConfig,
    pub options: RunOptions,
}

fn reset_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

impl Pipeline {
    pub fn new(config: ProjectConfig, options: RunOptions) -> Self {
        Pipeline { config, options }
    }

    pub fn from_config_file(path: &Path, options: RunOptions) -> Result<Self, PipelineError> {
        let mut config = ProjectConfig::load(path)?;
        if let Some(b) = &options.backend_override {
            config.extraction.backend = b.clone();
            config.check()?;
        }
        Ok(Pipeline::new(config, options))
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.config.output_dir.join(stage.dir())
    }

    fn require(&self, stage: Stage, path: &Path) -> Result<(), PipelineError> {
        if path.exists() {
            Ok(())
        } else {
            Err(PipelineError::MissingStageInput(stage.name().to_string()))
        }
    }

    fn remote_client(&self, section: &BackendSection, name: &str) -> Result<RemoteClient, PipelineError> {
        Ok(RemoteClient::new(remote_config(section, name)?).offline(self.options.offline))
    }

    pub fn judge_backend(&self) -> Result<JudgeBackend, PipelineError> {
        let heuristic = HeuristicJudge::default().with_extra_phrases(self.config.judge.error_phrases.clone());
        Ok(match self.config.judge.backend.as_str() {
            "remote" => JudgeBackend::Remote { client: self.remote_client(&self.config.judge, "judge")?, fallback: heuristic },
            _ => JudgeBackend::Heuristic(heuristic),
        })
    }

    pub fn embedding_provider(&self) -> Result<EmbeddingProvider, PipelineError> {
        Ok(match self.config.embedding.backend.as_str() {
            "remote" => {
                let dim = self.config.embedding.dimension.ok_or_else(|| {
                    PipelineError::ConfigInvalid("embedding: remote backend needs dimension".into())
                })?;
                EmbeddingProvider::remote(self.remote_client(&self.config.embedding, "embedding")?, dim)
            }
            _ => EmbeddingProvider::lexical(),
        })
    }

    pub fn extraction_backend(&self) -> Result<ExtractionBackend, PipelineError> {
        let section = &self.config.extraction;
        let one_shot = match (&section.one_shot_document, &section.one_shot_spec) {
            (Some(d), Some(s)) => Some(OneShotExample {
                document_text: fs::read_to_string(d).map_err(io_err(d))?,
                spec_json: fs::read_to_string(s).map_err(io_err(s))?,
            }),
            _ => None,
        };
        Ok(match section.backend.as_str() {
            "heuristic" => ExtractionBackend::Heuristic,
            "replay" => {
                let path = section.replay_path.as_ref().ok_or_else(|| PipelineError::ConfigInvalid("replay_path".into()))?;
                ExtractionBackend::Replay(ReplayStore::load(path).map_err(io_err(path))?)
            }
            "remote-chat" => ExtractionBackend::RemoteChat { client: self.remote_client(section, "extraction")?, one_shot },
            "remote-structured" => {
                ExtractionBackend::RemoteStructured { client: self.remote_client(section, "extraction")?, one_shot }
            }
            other => return Err(PipelineError::ConfigInvalid(format!("unknown extraction backend `{other}`"))),
        })
    }

    fn validator(&self) -> Result<Validator, PipelineError> {
        Ok(Validator::new(
            &ValidatorConfig {
                invoker: InvokerConfig { per_host_rps: self.config.rate_limit.per_host_rps, offline: self.options.offline },
                workers: self.config.workers,
            },
            self.judge_backend()?,
        ))
    }

    /// Runs the given stages in pipeline order.
    pub fn run(&self, stages: &[Stage]) -> Result<Vec<StageSummary>, PipelineError> {
        let mut ordered = stages.to_vec();
        ordered.sort();
        ordered.dedup();
        let mut out = Vec::new();
        for stage in ordered {
            if stage == Stage::Evaluate && self.config.ground_truth_dir.is_none() && stages.len() > 1 {
                log::info!("evaluate skipped: no ground_truth_dir configured");
                continue;
            }
            let summary = self.run_stage(stage)?;
            log::info!("{}: {} item(s). {}", stage.name(), summary.items, summary.note);
            out.push(summary);
        }
        Ok(out)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageSummary, PipelineError> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Extract => self.extract(),
            Stage::Evaluate => self.evaluate(),
            Stage::Generate => self.generate(),
            Stage::Validate => self.validate(),
            Stage::Infer => self.infer(),
            Stage::Report => self.report(),
        }
    }

    fn ingest(&self) -> Result<StageSummary, PipelineError> {
        let entries = read_manifest(&self.config.corpus_manifest).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        let opts = IngestOptions {
            offline: self.options.offline,
            base_dir: self.config.corpus_manifest.parent().map(Path::to_path_buf),
            timeout: Duration::from_secs(30),
            ..IngestOptions::default()
        };
        let judge = self.judge_backend()?;
        let dir = self.stage_dir(Stage::Ingest);
        reset_dir(&dir)?;
        let origins: HashMap<&str, &str> = entries.iter().map(|e| (e.source_id.as_str(), e.origin.as_str())).collect();
        let mut index = Vec::new();
        let mut kept = 0;
        for (source_id, result) in load_corpus(&entries, &opts, self.config.workers) {
            let origin = origins.get(source_id.as_str()).copied().unwrap_or_default().to_string();
            match result {
                Ok(mut doc) => {
                    let api_page = filter_api_pages(&doc, &judge).unwrap_or_else(|e| {
                        log::warn!("{source_id}: page filter fell back to heuristic ({e})");
                        heuristic_is_api_page(&doc.text)
                    });
                    let (category, analysis) = classify_document(&doc, &judge).unwrap_or_else(|e| {
                        log::warn!("{source_id}: classification fell back to heuristic ({e})");
                        heuristic_classification(&doc.text)
                    });
                    doc.category = Some(category);
                    doc.analysis = Some(analysis);
                    if api_page || self.config.keep_non_api_pages {
                        write_json(&dir.join(format!("{source_id}.json")), &doc)?;
                        kept += 1;
                    }
                    index.push(IngestIndexEntry { source_id, origin, api_page, error: None });
                }
                Err(e) => index.push(IngestIndexEntry { source_id, origin, api_page: false, error: Some(e.to_string()) }),
            }
        }
        write_json(&dir.join("index.json"), &index)?;
        Ok(StageSummary { stage: Stage::Ingest, items: kept, note: format!("{} manifest entries", index.len()) })
    }

    fn load_docs(&self) -> Result<Vec<ApiDocument>, PipelineError> {
        let dir = self.stage_dir(Stage::Ingest);
        let index_path = dir.join("index.json");
        self.require(Stage::Extract, &index_path)?;
        let index: Vec<IngestIndexEntry> = read_json(&index_path)?;
        let mut docs = Vec::new();
        for e in index {
            let p = dir.join(format!("{}.json", e.source_id));
            if p.exists() {
                docs.push(read_json(&p)?);
            }
        }
        Ok(docs)
    }

    fn extract(&self) -> Result<StageSummary, PipelineError> {
        let docs = self.load_docs()?;
        let backend = self.extraction_backend()?;
        let results = extract_corpus(&docs, &backend, self.config.workers);
        let dir = self.stage_dir(Stage::Extract);
        reset_dir(&dir)?;
        for r in &results {
            write_json(&dir.join(format!("{}.json", r.source_id)), r)?;
        }
        let valid = results.iter().filter(|r| r.valid).count();
        write_json(&dir.join("index.json"), &results.iter().map(|r| r.source_id.clone()).collect::<Vec<_>>())?;
        Ok(StageSummary { stage: Stage::Extract, items: results.len(), note: format!("{valid} valid") })
    }

    fn load_results(&self, stage: Stage) -> Result<Vec<ExtractionResult>, PipelineError> {
        let dir = self.stage_dir(Stage::Extract);
        let index_path = dir.join("index.json");
        self.require(stage, &index_path)?;
        let ids: Vec<String> = read_json(&index_path)?;
        ids.iter().map(|id| read_json(&dir.join(format!("{id}.json")))).collect()
    }

    fn evaluate(&self) -> Result<StageSummary, PipelineError> {
        let results = self.load_results(Stage::Evaluate)?;
        let truth_dir = self
            .config
            .ground_truth_dir
            .as_ref()
            .ok_or_else(|| PipelineError::ConfigInvalid("evaluate needs ground_truth_dir".into()))?;
        let mut truth = HashMap::new();
        for r in &results {
            let p = truth_dir.join(format!("{}.json", r.source_id));
            if p.exists() {
                let text = fs::read_to_string(&p).map_err(io_err(&p))?;
                let spec = ApiSpec::from_json_str(&text)
                    .map_err(|v| PipelineError::ConfigInvalid(format!("{}: {} schema violation(s)", p.display(), v.len())))?;
                truth.insert(r.source_id.clone(), spec);
            }
        }
        let emb = self.embedding_provider()?;
        let scored: Vec<ExtractionResult> = results.into_iter().filter(|r| truth.contains_key(&r.source_id)).collect();
        let metrics = compute_metrics(&scored, &truth, &emb)
            .map_err(|e| PipelineError::StageFailed { stage: "evaluate".into(), message: e.to_string() })?;
        let dir = self.stage_dir(Stage::Evaluate);
        reset_dir(&dir)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        let label = self.config.extraction.backend.clone();
        write_text(&dir.join("metrics.txt"), &render_metrics_table(&[(label.as_str(), &metrics)]))?;
        Ok(StageSummary { stage: Stage::Evaluate, items: scored.len(), note: format!("{} matched endpoints", metrics.matched_endpoints) })
    }

    fn generate(&self) -> Result<StageSummary, PipelineError> {
        let results = self.load_results(Stage::Generate)?;
        let dir = self.stage_dir(Stage::Generate);
        let export_dir = self.config.output_dir.join("exports");
        reset_dir(&dir)?;
        reset_dir(&export_dir)?;
        let mut all = Vec::new();
        for r in results.iter().filter(|r| r.valid) {
            let Some(spec) = &r.spec else { continue };
            for mut tool in generate_tools(spec, &r.source_id) {
                tool.verify_tls = self.config.tls_verify;
                write_json(&dir.join(&r.source_id).join(format!("{}.tool.json", tool.tool_name)), &tool)?;
                write_text(
                    &export_dir.join("functions").join(&r.source_id).join(format!("{}.py", tool.tool_name)),
                    &export_function_source(&tool),
                )?;
                all.push(tool);
            }
        }
        let (docs, skipped) = export_openapi_by_host(&all);
        for (host, yaml) in &docs {
            let name: String = host.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
            write_text(&export_dir.join("openapi").join(format!("{name}.openapi.yaml")), yaml)?;
        }
        write_json(&dir.join("index.json"), &all.iter().map(|t| (t.source_id.clone(), t.tool_name.clone())).collect::<Vec<_>>())?;
        Ok(StageSummary {
            stage: Stage::Generate,
            items: all.len(),
            note: format!("{} OpenAPI document(s), {} tool(s) without base URL", docs.len(), skipped.len()),
        })
    }

    pub fn load_tools(&self, stage: Stage) -> Result<Vec<ToolDescriptor>, PipelineError> {
        let dir = self.stage_dir(Stage::Generate);
        let index_path = dir.join("index.json");
        self.require(stage, &index_path)?;
        let index: Vec<(String, String)> = read_json(&index_path)?;
        index
            .iter()
            .map(|(source, name)| read_json(&dir.join(source).join(format!("{name}.tool.json"))))
            .collect()
    }

    fn validate(&self) -> Result<StageSummary, PipelineError> {
        let tools = self.load_tools(Stage::Validate)?;
        let reports = self.validator()?.validate_corpus(&tools);
        let dir = self.stage_dir(Stage::Validate);
        reset_dir(&dir)?;
        let path = dir.join("reports.jsonl");
        write_jsonl(&path, &reports).map_err(io_err(&path))?;
        let counts = ErrorCounts::from_reports(&reports);
        let table = render_error_report(&[("This run", counts)]).expect("counts are non-negative");
        write_text(&dir.join("errors.txt"), &table)?;
        Ok(StageSummary {
            stage: Stage::Validate,
            items: reports.len(),
            note: format!("{} passed", counts.passed_validation),
        })
    }

    pub fn load_reports(&self, stage: Stage) -> Result<Vec<ValidationReport>, PipelineError> {
        let path = self.stage_dir(Stage::Validate).join("reports.jsonl");
        self.require(stage, &path)?;
        read_jsonl(&path).map_err(io_err(&path))
    }

    fn infer(&self) -> Result<StageSummary, PipelineError> {
        let tools = self.load_tools(Stage::Infer)?;
        let reports = self.load_reports(Stage::Infer)?;
        let emb = self.embedding_provider()?;
        let validator = self.validator()?;
        let mut kb = build_kb(&reports, &tools, &emb);
        let dir = self.stage_dir(Stage::Infer);
        reset_dir(&dir)?;

        let by_key: HashMap<(&str, &str), &ToolDescriptor> =
            tools.iter().map(|t| ((t.source_id.as_str(), t.tool_name.as_str()), t)).collect();
        let baseline = match &self.config.inference.baseline {
            Some(section) => Some(self.remote_client(section, "inference.baseline")?),
            None => None,
        };
        let mut records = Vec::new();
        for report in &reports {
            if !matches!(report.error_type, ErrorType::NoParameterValue | ErrorType::WrongParameterValue) {
                continue;
            }
            let Some(tool) = by_key.get(&(report.source_id.as_str(), report.tool_name.as_str())) else { continue };
            let mut inferred = (*tool).clone();
            let result = infer_parameters(&mut inferred, &mut kb, &validator, &emb, &InferOptions::default());
            let (outcome, error) = split_outcome(result);
            if outcome.as_ref().is_some_and(|o| o.success) {
                write_json(
                    &dir.join("inferred_tools").join(&tool.source_id).join(format!("{}.tool.json", tool.tool_name)),
                    &inferred,
                )?;
            }
            records.push(InferenceRecord {
                tool_name: tool.tool_name.clone(),
                source_id: tool.source_id.clone(),
                method: "knowledge-base".into(),
                outcome,
                error,
            });
            if let Some(client) = &baseline {
                let mut guessed = (*tool).clone();
                let (outcome, error) = split_outcome(llm_guess_baseline(&mut guessed, &validator, client, None));
                records.push(InferenceRecord {
                    tool_name: tool.tool_name.clone(),
                    source_id: tool.source_id.clone(),
                    method: "model-guess".into(),
                    outcome,
                    error,
                });
            }
        }
        let (leave_one_out, leave_one_out_error) = if self.config.inference.skip_leave_one_out {
            (None, None)
        } else {
            match leave_one_api_out(&tools, &reports, &emb, &validator) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        let kb_path = dir.join("kb.jsonl");
        kb.save_jsonl(&kb_path).map_err(io_err(&kb_path))?;
        let summary = InferenceSummary { records, leave_one_out, leave_one_out_error };
        write_json(&dir.join("inference.json"), &summary)?;
        let successes = summary.records.iter().filter(|r| r.outcome.as_ref().is_some_and(|o| o.success)).count();
        Ok(StageSummary {
            stage: Stage::Infer,
            items: summary.records.len(),
            note: format!("{successes} inferred, knowledge base of {} entries", kb.len()),
        })
    }

    fn report(&self) -> Result<StageSummary, PipelineError> {
        let reports = self.load_reports(Stage::Report)?;
        let counts = ErrorCounts::from_reports(&reports);
        let mut text = String::new();
        let metrics_path = self.stage_dir(Stage::Evaluate).join("metrics.json");
        if metrics_path.exists() {
            let metrics: MetricsReport = read_json(&metrics_path)?;
            text.push_str("Extraction quality\n");
            text.push_str(&render_metrics_table(&[(self.config.extraction.backend.as_str(), &metrics)]));
            text.push('\n');
        }
        let reference: BTreeMap<String, ErrorCounts> = match &self.config.reference_counts {
            Some(p) => read_json(p)?,
            None => BTreeMap::new(),
        };
        let mut rows: Vec<(&str, ErrorCounts)> = reference.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        rows.push(("This run", counts));
        let tables = render_error_report(&rows).map_err(|e| PipelineError::ConfigInvalid(format!("reference_counts: {e}")))?;
        text.push_str(&tables);
        text.push_str(&format!(
            "\nValidated {} tool(s): {} passed.\n",
            counts.total(),
            counts.passed_validation
        ));
        let inference_path = self.stage_dir(Stage::Infer).join("inference.json");
        if inference_path.exists() {
            let inf: InferenceSummary = read_json(&inference_path)?;
            let mut rows: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
            for r in &inf.records {
                let row = rows.entry(r.method.clone()).or_default();
                row.0 += 1;
                if let Some(o) = &r.outcome {
                    row.1 += usize::from(o.success);
                    row.2 += o.attempts;
                }
            }
            if let Some(loo) = &inf.leave_one_out {
                rows.insert(
                    "leave-one-API-out".into(),
                    (loo.outcomes.len(), loo.successes, loo.outcomes.iter().map(|o| o.attempts).sum()),
                );
            }
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(m, (n, ok, att))| {
                    let mean = if *n == 0 { 0.0 } else { *att as f64 / *n as f64 };
                    vec![m.clone(), n.to_string(), ok.to_string(), format!("{mean:.2}")]
                })
                .collect();
            text.push_str("\nParameter inference\n");
            text.push_str(&crate::evaluate::render_table(&["Method", "Tools", "Succeeded", "Mean attempts"], &table));
        }
        let dir = self.stage_dir(Stage::Report);
        reset_dir(&dir)?;
        write_text(&dir.join("report.txt"), &text)?;
        write_json(&dir.join("counts.json"), &counts)?;
        Ok(StageSummary { stage: Stage::Report, items: reports.len(), note: "report.txt written".into() })
    }
}

fn split_outcome(result: Result<InferenceOutcome, InferenceError>) -> (Option<InferenceOutcome>, Option<String>) {
    match result {
        Ok(o) => (Some(o), None),
        Err(InferenceError::Exhausted(o)) => {
            let msg = format!("exhausted after {} attempt(s)", o.attempts);
            (Some(*o), Some(msg))
        }
        Err(e) => (None, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::parse(s.name()), Some(s));
        }
        assert_eq!(Stage::parse("nope"), None);
    }

    #[test]
    fn secrets_are_rejected() {
        let text = "corpus_manifest = \"m.json\"\noutput_dir = \"out\"\n[judge]\nbackend = \"remote\"\napi_key = \"sk-123\"\n";
        assert!(matches!(ProjectConfig::from_toml(text, Path::new(".")), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn missing_manifest_is_invalid() {
        let cfg = ProjectConfig::from_toml("corpus_manifest = \"/nonexistent/m.json\"\noutput_dir = \"out\"\n", Path::new(".")).unwrap();
        assert!(matches!(cfg.check(), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn extract_without_ingest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.json"), "[]").unwrap();
        let cfg = ProjectConfig::from_toml("corpus_manifest = \"m.json\"\noutput_dir = \"out\"\n", dir.path()).unwrap();
        let p = Pipeline::new(cfg, RunOptions::default());
        match p.run_stage(Stage::Extract) {
            Err(PipelineError::MissingStageInput(s)) => assert_eq!(s, "extract"),
            other => panic!("{other:?}"),
        }
    }
}
