//! Filling missing parameter values from a knowledge base of verified ones.
//!
//! Candidates come from two nearest-neighbour channels (parameter
//! description and parameter key). Value combinations across parameters are
//! ranked by the product of their similarities and tried in order until one
//! passes validation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::embed::{cosine_similarity, EmbeddingProvider};
use crate::extract::repair_json;
use crate::model::Scalar;
use crate::prompts;
use crate::remote::{json_schema_format, ChatMessage, RemoteClient, RemoteError};
use crate::toolgen::ToolDescriptor;
use crate::validate::{ErrorType, ValidationReport, Validator};

pub const CHANNEL_TOP_K: usize = 5;
pub const MIN_SIMILARITY: f64 = 0.5;
pub const MAX_COMBINATIONS: usize = 20;
pub const BASELINE_ROUNDS: usize = 10;
pub const HARVEST_MAX_DEPTH: usize = 3;
pub const HARVEST_MAX_KEY_LEN: usize = 40;
pub const HARVEST_MAX_PER_RESPONSE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FromDocumentation,
    FromResponseJson,
    /// Found by inference and confirmed by validation.
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterKbEntry {
    pub param_key: String,
    pub description: Option<String>,
    pub value: Scalar,
    pub source_id: String,
    pub key_embedding: Vec<f64>,
    pub description_embedding: Option<Vec<f64>>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    entries: Vec<ParameterKbEntry>,
    #[serde(skip)]
    seen: HashSet<(String, String, String)>,
}

fn entry_key(e: &ParameterKbEntry) -> (String, String, String) {
    (e.param_key.clone(), e.value.to_json().to_string(), e.source_id.clone())
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// False when an entry with the same key, value and source exists.
    pub fn insert(&mut self, entry: ParameterKbEntry) -> bool {
        if !self.seen.insert(entry_key(&entry)) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn entries(&self) -> &[ParameterKbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save_jsonl(&self, path: &Path) -> std::io::Result<()> {
        crate::jsonl::write_jsonl(path, &self.entries)
    }

    pub fn load_jsonl(path: &Path) -> std::io::Result<Self> {
        let mut kb = KnowledgeBase::new();
        for e in crate::jsonl::read_jsonl::<ParameterKbEntry>(path)? {
            kb.insert(e);
        }
        Ok(kb)
    }

    /// Embeds and inserts one entry. Embedding failures skip the entry.
    pub fn add(
        &mut self,
        emb: &EmbeddingProvider,
        key: &str,
        description: Option<&str>,
        value: Scalar,
        source_id: &str,
        provenance: Provenance,
    ) -> bool {
        let description = description.map(str::trim).filter(|d| !d.is_empty());
        let key_embedding = match emb.embed_one(key) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping knowledge-base entry `{key}`: {e}");
                return false;
            }
        };
        let description_embedding = match description.map(|d| emb.embed_one(d)).transpose() {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping knowledge-base entry `{key}`: {e}");
                return false;
            }
        };
        self.insert(ParameterKbEntry {
            param_key: key.to_string(),
            description: description.map(str::to_string),
            value,
            source_id: source_id.to_string(),
            key_embedding,
            description_embedding,
            provenance,
        })
    }
}

/// Scalar leaves of a JSON response, bounded in depth, key length and count.
pub fn harvest_response(body: &Value) -> Vec<(String, Scalar)> {
    fn walk(v: &Value, key: Option<&str>, depth: usize, out: &mut Vec<(String, Scalar)>) {
        if out.len() >= HARVEST_MAX_PER_RESPONSE || depth > HARVEST_MAX_DEPTH {
            return;
        }
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    walk(child, Some(k), depth + 1, out);
                }
            }
            Value::Array(items) => {
                for child in items {
                    walk(child, key, depth + 1, out);
                }
            }
            Value::Null => {}
            Value::String(s) if s.trim().is_empty() => {}
            leaf => {
                if let Some(k) = key.filter(|k| !k.is_empty() && k.chars().count() <= HARVEST_MAX_KEY_LEN) {
                    if let Some(s) = Scalar::from_json(leaf) {
                        if !out.iter().any(|(ok, ov)| ok == k && *ov == s) {
                            out.push((k.to_string(), s));
                        }
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(body, None, 0, &mut out);
    out
}

/// Knowledge base from passing tools: their bound argument values, plus the
/// scalar leaves of their JSON responses.
pub fn build_kb(reports: &[ValidationReport], tools: &[ToolDescriptor], emb: &EmbeddingProvider) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let by_name: HashMap<(&str, &str), &ToolDescriptor> =
        tools.iter().map(|t| ((t.source_id.as_str(), t.tool_name.as_str()), t)).collect();
    for report in reports.iter().filter(|r| r.passed) {
        let tool = by_name.get(&(report.source_id.as_str(), report.tool_name.as_str()));
        for (name, value) in &report.bindings {
            let description = tool.and_then(|t| t.arg(name)).and_then(|a| a.description.as_deref());
            kb.add(emb, name, description, value.clone(), &report.source_id, Provenance::FromDocumentation);
        }
        if let Some(body) = report.last_attempt().and_then(|r| r.json_body.as_ref()) {
            for (key, value) in harvest_response(body) {
                kb.add(emb, &key, None, value, &report.source_id, Provenance::FromResponseJson);
            }
        }
    }
    kb
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamQuery {
    pub key: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub param_key: String,
    pub value: Scalar,
    pub source_id: String,
    pub similarity: f64,
}

fn top_k(scored: &mut Vec<(usize, f64)>, k: usize) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
}

/// Up to five neighbours by description and five by key, merged on
/// (key, value), thresholded and sorted by similarity.
pub fn retrieve_candidates(
    query: &ParamQuery,
    kb: &KnowledgeBase,
    emb: &EmbeddingProvider,
    exclude_source: Option<&str>,
) -> Vec<Candidate> {
    let pool: Vec<(usize, &ParameterKbEntry)> = kb
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| exclude_source != Some(e.source_id.as_str()))
        .collect();
    if pool.is_empty() {
        return Vec::new();
    }
    let sim = |a: &[f64], b: &[f64]| cosine_similarity(a, b).unwrap_or(0.0);
    let mut best: HashMap<usize, f64> = HashMap::new();

    let description = query.description.as_deref().map(str::trim).filter(|d| !d.is_empty());
    if let Some(desc) = description {
        match emb.embed_one(desc) {
            Ok(q) => {
                let mut scored: Vec<(usize, f64)> = pool
                    .iter()
                    .filter_map(|(i, e)| e.description_embedding.as_deref().map(|d| (*i, sim(&q, d))))
                    .collect();
                top_k(&mut scored, CHANNEL_TOP_K);
                for (i, s) in scored {
                    let slot = best.entry(i).or_insert(s);
                    *slot = slot.max(s);
                }
            }
            Err(e) => log::warn!("description embedding failed for `{}`: {e}", query.key),
        }
    }
    match emb.embed_one(&query.key) {
        Ok(q) => {
            let mut scored: Vec<(usize, f64)> = pool.iter().map(|(i, e)| (*i, sim(&q, &e.key_embedding))).collect();
            top_k(&mut scored, CHANNEL_TOP_K);
            for (i, s) in scored {
                let slot = best.entry(i).or_insert(s);
                *slot = slot.max(s);
            }
        }
        Err(e) => log::warn!("key embedding failed for `{}`: {e}", query.key),
    }

    let mut ranked: Vec<(usize, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, s) in ranked {
        let e = &kb.entries()[i];
        if !seen.insert((e.param_key.clone(), e.value.to_json().to_string())) {
            continue;
        }
        if s < MIN_SIMILARITY {
            continue;
        }
        out.push(Candidate {
            param_key: e.param_key.clone(),
            value: e.value.clone(),
            source_id: e.source_id.clone(),
            similarity: s,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct HeapItem {
    score: f64,
    indices: Vec<usize>,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher score first, then lexicographically smaller indices
        self.score.total_cmp(&other.score).then_with(|| other.indices.cmp(&self.indices))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sum of natural logs, accumulated in coordinate order.
pub fn combination_score(lists: &[Vec<f64>], indices: &[usize]) -> f64 {
    lists.iter().zip(indices).map(|(l, &i)| l[i].ln()).sum()
}

/// The `k` best index vectors over lists sorted by non-increasing value,
/// ordered by score and then lexicographically. Lazy: a vector's only
/// parent is itself with its last non-zero coordinate decremented, so each
/// vector is pushed once and never before its parent is popped.
pub fn top_k_combinations(lists: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    if k == 0 || lists.is_empty() || lists.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut heap = BinaryHeap::new();
    let start = vec![0; lists.len()];
    heap.push(HeapItem { score: combination_score(lists, &start), indices: start });
    let mut out = Vec::with_capacity(k);
    while let Some(item) = heap.pop() {
        let last_nonzero = item.indices.iter().rposition(|&i| i > 0).unwrap_or(0);
        for pos in last_nonzero..lists.len() {
            if item.indices[pos] + 1 < lists[pos].len() {
                let mut next = item.indices.clone();
                next[pos] += 1;
                heap.push(HeapItem { score: combination_score(lists, &next), indices: next });
            }
        }
        out.push(item.indices);
        if out.len() == k {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: BTreeMap<String, Scalar>,
    pub sources: BTreeMap<String, String>,
    pub score: f64,
}

/// Best value combinations across parameters, at most [`MAX_COMBINATIONS`].
pub fn rank_combinations(per_param: &[(String, Vec<Candidate>)]) -> Result<Vec<Assignment>, InferenceError> {
    let mut sorted: Vec<(&str, Vec<&Candidate>)> = Vec::with_capacity(per_param.len());
    for (name, cands) in per_param {
        if cands.is_empty() {
            return Err(InferenceError::NoCandidates(name.clone()));
        }
        let mut c: Vec<&Candidate> = cands.iter().collect();
        c.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        sorted.push((name, c));
    }
    let lists: Vec<Vec<f64>> = sorted.iter().map(|(_, c)| c.iter().map(|x| x.similarity).collect()).collect();
    Ok(top_k_combinations(&lists, MAX_COMBINATIONS)
        .into_iter()
        .map(|idx| Assignment {
            score: combination_score(&lists, &idx),
            values: sorted.iter().zip(&idx).map(|((n, c), &i)| (n.to_string(), c[i].value.clone())).collect(),
            sources: sorted.iter().zip(&idx).map(|((n, c), &i)| (n.to_string(), c[i].source_id.clone())).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceAttempt {
    pub values: BTreeMap<String, Scalar>,
    pub error_type: ErrorType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutcome {
    pub tool_name: String,
    pub source_id: String,
    pub success: bool,
    pub assignment: Option<BTreeMap<String, Scalar>>,
    /// Validation calls made.
    pub attempts: usize,
    /// Candidates retrieved across all target parameters.
    pub candidates_considered: usize,
    pub candidates: BTreeMap<String, Vec<Candidate>>,
    pub tried: Vec<InferenceAttempt>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("no candidates for parameter `{0}`")]
    NoCandidates(String),
    #[error("all {} assignments failed validation", .0.attempts)]
    Exhausted(Box<InferenceOutcome>),
    #[error("inference backend unreachable: {0}")]
    BackendUnreachable(RemoteError),
    #[error("need at least two source documents, found {0}")]
    InsufficientCorpus(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferOptions {
    /// Knowledge-base source hidden from retrieval.
    pub exclude_source: Option<String>,
    /// Parameters to infer. Defaults to required arguments without a value,
    /// or every required argument when all have one.
    pub targets: Option<Vec<String>>,
}

fn default_targets(tool: &ToolDescriptor) -> Vec<String> {
    let missing: Vec<String> = tool.args.iter().filter(|a| a.value_missing()).map(|a| a.name.clone()).collect();
    if !missing.is_empty() {
        return missing;
    }
    tool.args.iter().filter(|a| a.required).map(|a| a.name.clone()).collect()
}

/// Tries ranked assignments until one validates. On success the values are
/// written into `tool` as examples and added to `kb`; on failure neither
/// changes.
pub fn infer_parameters(
    tool: &mut ToolDescriptor,
    kb: &mut KnowledgeBase,
    validator: &Validator,
    emb: &EmbeddingProvider,
    opts: &InferOptions,
) -> Result<InferenceOutcome, InferenceError> {
    let targets = opts.targets.clone().unwrap_or_else(|| default_targets(tool));
    let mut per_param = Vec::new();
    let mut candidates = BTreeMap::new();
    for name in &targets {
        let query = ParamQuery {
            key: name.clone(),
            description: tool.arg(name).and_then(|a| a.description.clone()),
        };
        let found = retrieve_candidates(&query, kb, emb, opts.exclude_source.as_deref());
        candidates.insert(name.clone(), found.clone());
        per_param.push((name.clone(), found));
    }
    let assignments = rank_combinations(&per_param)?;
    let mut outcome = InferenceOutcome {
        tool_name: tool.tool_name.clone(),
        source_id: tool.source_id.clone(),
        success: false,
        assignment: None,
        attempts: 0,
        candidates_considered: candidates.values().map(Vec::len).sum(),
        candidates,
        tried: Vec::new(),
    };
    let fixed: BTreeMap<String, Scalar> = tool
        .args
        .iter()
        .filter(|a| !targets.contains(&a.name))
        .filter_map(|a| a.value().map(|v| (a.name.clone(), v.clone())))
        .collect();
    for assignment in assignments {
        let mut bindings = fixed.clone();
        bindings.extend(assignment.values.clone());
        let report = validator.validate_with(tool, bindings);
        outcome.attempts += 1;
        outcome.tried.push(InferenceAttempt { values: assignment.values.clone(), error_type: report.error_type });
        if report.passed {
            for (name, value) in &assignment.values {
                let description = tool.arg(name).and_then(|a| a.description.clone());
                kb.add(emb, name, description.as_deref(), value.clone(), &tool.source_id, Provenance::Inferred);
                if let Some(arg) = tool.arg_mut(name) {
                    arg.example_value = Some(value.clone());
                }
            }
            outcome.success = true;
            outcome.assignment = Some(assignment.values);
            return Ok(outcome);
        }
    }
    Err(InferenceError::Exhausted(Box::new(outcome)))
}

fn parameter_list_format() -> Value {
    json_schema_format(
        "ParameterList",
        serde_json::json!({
            "type": "object",
            "properties": {
                "parameters": {
                    "type": "array",
                    "minItems": 1,
                    "description": "The list of parameters and their guesses.",
                    "items": {
                        "type": "object",
                        "properties": {
                            "parameter_key": {"type": "string"},
                            "parameter_guess": {"type": "string", "description": "The guessed values of the parameter."}
                        },
                        "required": ["parameter_key", "parameter_guess"],
                        "additionalProperties": false
                    }
                }
            },
            "required": ["parameters"],
            "additionalProperties": false
        }),
    )
}

/// The guessing prompt for one round. `history` holds earlier failed
/// guesses, one per line.
pub fn guess_prompt(tool: &ToolDescriptor, targets: &[String], history: &[String]) -> String {
    let description = format!(
        "{}: {}\n{} {}",
        tool.endpoint_name,
        tool.description,
        tool.method,
        tool.template.canonical()
    );
    let params: Vec<String> = targets
        .iter()
        .map(|name| {
            let arg = tool.arg(name);
            let ty = arg.and_then(|a| a.type_hint.as_deref()).unwrap_or("string");
            let desc = arg.and_then(|a| a.description.as_deref()).unwrap_or("");
            format!("- {name} ({ty}): {desc}")
        })
        .collect();
    prompts::render(
        prompts::PARAMETER_GUESS,
        &[
            ("history", &history.join("\n")),
            ("description", &description),
            ("param_description", &params.join("\n")),
        ],
    )
}

fn parse_guesses(reply: &str) -> BTreeMap<String, Scalar> {
    let Ok(v) = repair_json(reply) else { return BTreeMap::new() };
    v.get("parameters")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|p| {
                    let key = p.get("parameter_key")?.as_str()?;
                    let guess = Scalar::from_json(p.get("parameter_guess")?)?;
                    Some((key.to_string(), guess))
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Asks a model to guess the values, up to [`BASELINE_ROUNDS`] rounds, each
/// round seeing the previous failed guesses.
pub fn llm_guess_baseline(
    tool: &mut ToolDescriptor,
    validator: &Validator,
    client: &RemoteClient,
    targets: Option<Vec<String>>,
) -> Result<InferenceOutcome, InferenceError> {
    let targets = targets.unwrap_or_else(|| default_targets(tool));
    let fixed: BTreeMap<String, Scalar> = tool
        .args
        .iter()
        .filter(|a| !targets.contains(&a.name))
        .filter_map(|a| a.value().map(|v| (a.name.clone(), v.clone())))
        .collect();
    let mut outcome = InferenceOutcome {
        tool_name: tool.tool_name.clone(),
        source_id: tool.source_id.clone(),
        success: false,
        assignment: None,
        attempts: 0,
        candidates_considered: 0,
        candidates: BTreeMap::new(),
        tried: Vec::new(),
    };
    let mut history: Vec<String> = Vec::new();
    let format = parameter_list_format();
    for _ in 0..BASELINE_ROUNDS {
        let prompt = guess_prompt(tool, &targets, &history);
        let reply = client
            .chat(&[ChatMessage::user(prompt)], Some(&format))
            .map_err(InferenceError::BackendUnreachable)?;
        let guesses: BTreeMap<String, Scalar> =
            parse_guesses(&reply.content).into_iter().filter(|(k, _)| targets.contains(k)).collect();
        outcome.attempts += 1;
        outcome.candidates_considered += guesses.len();
        let mut bindings = fixed.clone();
        bindings.extend(guesses.clone());
        let report = validator.validate_with(tool, bindings);
        outcome.tried.push(InferenceAttempt { values: guesses.clone(), error_type: report.error_type });
        if report.passed {
            for (name, value) in &guesses {
                if let Some(arg) = tool.arg_mut(name) {
                    arg.example_value = Some(value.clone());
                }
            }
            outcome.success = true;
            outcome.assignment = Some(guesses);
            return Ok(outcome);
        }
        let line = guesses.iter().map(|(k, v)| format!("{k}={}", v.render())).collect::<Vec<_>>().join(", ");
        history.push(if line.is_empty() { "(no usable guess)".to_string() } else { line });
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub outcomes: Vec<InferenceOutcome>,
    pub successes: usize,
    pub mean_attempts: f64,
    /// Candidates whose source is the tool's own; zero by construction.
    pub isolation_violations: usize,
}

/// For each passing tool with required arguments: hide its values and its
/// own document's knowledge, then infer them back.
pub fn leave_one_api_out(
    tools: &[ToolDescriptor],
    reports: &[ValidationReport],
    emb: &EmbeddingProvider,
    validator: &Validator,
) -> Result<LooSummary, InferenceError> {
    let sources: HashSet<&str> = tools.iter().map(|t| t.source_id.as_str()).collect();
    if sources.len() < 2 {
        return Err(InferenceError::InsufficientCorpus(sources.len()));
    }
    let kb = build_kb(reports, tools, emb);
    let passed: HashSet<(&str, &str)> =
        reports.iter().filter(|r| r.passed).map(|r| (r.source_id.as_str(), r.tool_name.as_str())).collect();
    let mut outcomes = Vec::new();
    for tool in tools {
        if !passed.contains(&(tool.source_id.as_str(), tool.tool_name.as_str())) {
            continue;
        }
        let targets: Vec<String> = tool.args.iter().filter(|a| a.required).map(|a| a.name.clone()).collect();
        if targets.is_empty() {
            continue;
        }
        let mut hidden = tool.clone();
        for a in &mut hidden.args {
            a.example_value = None;
            a.default_value = None;
        }
        let mut local_kb = kb.clone();
        let opts = InferOptions { exclude_source: Some(tool.source_id.clone()), targets: Some(targets) };
        let outcome = match infer_parameters(&mut hidden, &mut local_kb, validator, emb, &opts) {
            Ok(o) => o,
            Err(InferenceError::Exhausted(o)) => *o,
            Err(InferenceError::NoCandidates(_)) => InferenceOutcome {
                tool_name: tool.tool_name.clone(),
                source_id: tool.source_id.clone(),
                success: false,
                assignment: None,
                attempts: 0,
                candidates_considered: 0,
                candidates: BTreeMap::new(),
                tried: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
    }
    let isolation_violations = outcomes
        .iter()
        .flat_map(|o| o.candidates.values().flatten().map(move |c| (o, c)))
        .filter(|(o, c)| c.source_id == o.source_id)
        .count();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let mean_attempts = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.attempts as f64).sum::<f64>() / outcomes.len() as f64
    };
    Ok(LooSummary { outcomes, successes, mean_attempts, isolation_violations })
}
