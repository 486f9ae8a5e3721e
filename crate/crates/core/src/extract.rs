//! Documentation text to [`ApiSpec`].
//!
//! Every backend produces raw text; the text is recovered into JSON with
//! [`repair_json`] and checked with [`validate_spec`]. Failures are recorded
//! on the [`ExtractionResult`] so a corpus run always completes.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::encoding::decode_query;
use crate::ingest::ApiDocument;
use crate::model::{normalize_method, validate_spec, ApiSpec, Endpoint, Parameter, Scalar, SchemaViolation, UrlField};
use crate::prompts::EXTRACTION_INSTRUCTION;
use crate::remote::{json_schema_format, ChatMessage, RemoteClient};

/// JSON schema of the extraction target, sent to structured-mode backends.
pub const EXTRACTION_SCHEMA: &str = include_str!("extraction_schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("could not recover JSON: {reason}")]
pub struct RepairFailure {
    pub reason: String,
}

fn repair_failure(reason: &str) -> RepairFailure {
    RepairFailure { reason: reason.to_string() }
}

fn strip_fences(raw: &str) -> &str {
    let Some(start) = raw.find("```") else {
        return raw;
    };
    let after = &raw[start + 3..];
    // skip the info string (`json`, `JSON`, ...)
    let body = match after.find('\n') {
        Some(nl) => &after[nl + 1..],
        None => after,
    };
    match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    }
}

/// End index (exclusive) of the balanced `{...}` span starting at `start`.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Recovers a JSON object from model output that may wrap it in code fences
/// or prose. Truncated output fails rather than being patched up.
pub fn repair_json(raw: &str) -> Result<Value, RepairFailure> {
    let text = strip_fences(raw).trim();
    if text.is_empty() {
        return Err(repair_failure("empty output"));
    }
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(text) {
        return Ok(v);
    }
    let mut saw_unbalanced = false;
    let mut search_from = 0;
    while let Some(offset) = text[search_from..].find('{') {
        let start = search_from + offset;
        match balanced_end(text, start) {
            Some(end) => {
                if let Ok(v) = serde_json::from_str::<Value>(&text[start..end]) {
                    return Ok(v);
                }
            }
            None => saw_unbalanced = true,
        }
        search_from = start + 1;
    }
    if saw_unbalanced {
        Err(repair_failure("unbalanced"))
    } else {
        Err(repair_failure("no parsable object"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    RemoteChat,
    RemoteStructured,
    Heuristic,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotExample {
    pub document_text: String,
    pub spec_json: String,
}

/// Recorded model outputs keyed by source id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayStore {
    records: HashMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReplayRecord {
    source_id: String,
    raw_output: String,
}

impl ReplayStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source_id: impl Into<String>, raw_output: impl Into<String>) {
        self.records.insert(source_id.into(), raw_output.into());
    }

    pub fn get(&self, source_id: &str) -> Option<&str> {
        self.records.get(source_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Loads `{source_id}.json` / `{source_id}.txt` files from a directory,
    /// or `{"source_id", "raw_output"}` lines from a `.jsonl` file.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let mut store = ReplayStore::new();
        if path.is_dir() {
            let mut entries: Vec<_> = fs::read_dir(path)?.collect::<Result<_, _>>()?;
            entries.sort_by_key(|e| e.path());
            for entry in entries {
                let p = entry.path();
                let ext = p.extension().and_then(|e| e.to_str()).unwrap_or_default();
                if ext == "json" || ext == "txt" {
                    if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                        store.insert(stem, fs::read_to_string(&p)?);
                    }
                }
            }
        } else {
            for line in BufReader::new(fs::File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ReplayRecord = serde_json::from_str(&line)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                store.insert(rec.source_id, rec.raw_output);
            }
        }
        Ok(store)
    }
}

#[derive(Debug, Clone)]
pub enum ExtractionBackend {
    RemoteChat { client: RemoteClient, one_shot: Option<OneShotExample> },
    RemoteStructured { client: RemoteClient, one_shot: Option<OneShotExample> },
    Heuristic,
    Replay(ReplayStore),
}

impl ExtractionBackend {
    pub fn kind(&self) -> BackendKind {
        match self {
            ExtractionBackend::RemoteChat { .. } => BackendKind::RemoteChat,
            ExtractionBackend::RemoteStructured { .. } => BackendKind::RemoteStructured,
            ExtractionBackend::Heuristic => BackendKind::Heuristic,
            ExtractionBackend::Replay(_) => BackendKind::Replay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub source_id: String,
    pub raw_output: String,
    pub spec: Option<ApiSpec>,
    pub valid: bool,
    pub violations: Vec<SchemaViolation>,
    /// Repair or transport failure, when the output never reached
    /// validation.
    pub failure: Option<String>,
    pub backend_kind: BackendKind,
    pub token_or_byte_cost: u64,
}

impl ExtractionResult {
    fn from_raw(source_id: &str, raw_output: String, kind: BackendKind, cost: u64) -> Self {
        let mut result = ExtractionResult {
            source_id: source_id.to_string(),
            raw_output,
            spec: None,
            valid: false,
            violations: Vec::new(),
            failure: None,
            backend_kind: kind,
            token_or_byte_cost: cost,
        };
        match repair_json(&result.raw_output) {
            Err(e) => result.failure = Some(e.to_string()),
            Ok(value) => match validate_spec(&value) {
                Ok(spec) => {
                    result.spec = Some(spec);
                    result.valid = true;
                }
                Err(violations) => result.violations = violations,
            },
        }
        result
    }

    fn failed(source_id: &str, kind: BackendKind, failure: String) -> Self {
        ExtractionResult {
            source_id: source_id.to_string(),
            raw_output: String::new(),
            spec: None,
            valid: false,
            violations: Vec::new(),
            failure: Some(failure),
            backend_kind: kind,
            token_or_byte_cost: 0,
        }
    }
}

fn chat_messages(doc: &ApiDocument, one_shot: Option<&OneShotExample>) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::system(EXTRACTION_INSTRUCTION)];
    if let Some(example) = one_shot {
        messages.push(ChatMessage::user(example.document_text.clone()));
        messages.push(ChatMessage::assistant(example.spec_json.clone()));
    }
    messages.push(ChatMessage::user(doc.text.clone()));
    messages
}

fn remote_extract(
    doc: &ApiDocument,
    client: &RemoteClient,
    one_shot: Option<&OneShotExample>,
    structured: bool,
) -> ExtractionResult {
    let kind = if structured { BackendKind::RemoteStructured } else { BackendKind::RemoteChat };
    let messages = chat_messages(doc, one_shot);
    let format = structured.then(|| {
        let schema: Value = serde_json::from_str(EXTRACTION_SCHEMA).expect("bundled schema is JSON");
        json_schema_format("API", schema)
    });
    match client.chat(&messages, format.as_ref()) {
        Ok(reply) => {
            let bytes: usize = messages.iter().map(|m| m.content.len()).sum::<usize>() + reply.content.len();
            let cost = reply.total_tokens.unwrap_or(bytes as u64);
            ExtractionResult::from_raw(&doc.source_id, reply.content, kind, cost)
        }
        Err(e) => ExtractionResult::failed(&doc.source_id, kind, format!("BackendUnreachable: {e}")),
    }
}

/// Runs one document through a backend.
pub fn extract_spec(doc: &ApiDocument, backend: &ExtractionBackend) -> ExtractionResult {
    match backend {
        ExtractionBackend::Heuristic => {
            let spec = heuristic_extract(&doc.text);
            let raw = serde_json::to_string_pretty(&spec).expect("spec serializes");
            let cost = doc.text.len() as u64;
            ExtractionResult::from_raw(&doc.source_id, raw, BackendKind::Heuristic, cost)
        }
        ExtractionBackend::Replay(store) => match store.get(&doc.source_id) {
            Some(raw) => ExtractionResult::from_raw(&doc.source_id, raw.to_string(), BackendKind::Replay, raw.len() as u64),
            None => ExtractionResult::failed(&doc.source_id, BackendKind::Replay, "no recorded response".into()),
        },
        ExtractionBackend::RemoteChat { client, one_shot } => remote_extract(doc, client, one_shot.as_ref(), false),
        ExtractionBackend::RemoteStructured { client, one_shot } => {
            remote_extract(doc, client, one_shot.as_ref(), true)
        }
    }
}

/// Extracts a corpus on `workers` threads; output order follows input order.
pub fn extract_corpus(docs: &[ApiDocument], backend: &ExtractionBackend, workers: usize) -> Vec<ExtractionResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| docs.par_iter().map(|d| extract_spec(d, backend)).collect())
}

static ENDPOINT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(GET|POST|PUT|PATCH|DELETE|HEAD|OPTIONS)\s+(https?://[^\s]+|/[^\s]*)").unwrap()
});

fn is_heading_like(line: &str) -> bool {
    let line = line.trim();
    !line.is_empty()
        && !line.ends_with('.')
        && !line.starts_with('|')
        && line.split_whitespace().count() <= 8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Name,
    Type,
    Required,
    Description,
    Default,
    Example,
    Other,
}

fn column_of(header: &str) -> Column {
    let h = header.trim().to_ascii_lowercase();
    match h.as_str() {
        "name" | "parameter" | "param" | "field" | "key" => Column::Name,
        "type" | "data type" => Column::Type,
        "required" | "required?" | "mandatory" => Column::Required,
        "description" | "desc" | "details" => Column::Description,
        "default" | "default value" => Column::Default,
        "example" | "example value" | "sample" => Column::Example,
        _ => Column::Other,
    }
}

fn table_cells(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_yes(cell: &str) -> bool {
    matches!(cell.trim().to_ascii_lowercase().as_str(), "yes" | "y" | "true" | "required" | "✓" | "x")
}

/// Interprets a table cell using the parameter's declared type.
fn typed_scalar(cell: &str, type_hint: Option<&str>) -> Option<Scalar> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    let ty = type_hint.map(crate::evaluate::canonical_type);
    match ty.as_deref() {
        Some("integer") | Some("number") => {
            if let Ok(n) = serde_json::from_str::<serde_json::Number>(cell) {
                return Some(Scalar::Number(n));
            }
        }
        Some("boolean") => match cell.to_ascii_lowercase().as_str() {
            "true" => return Some(Scalar::Bool(true)),
            "false" => return Some(Scalar::Bool(false)),
            _ => {}
        },
        _ => {}
    }
    Some(Scalar::String(cell.to_string()))
}

struct Draft {
    endpoint: Endpoint,
    columns: Option<Vec<Column>>,
    in_table: bool,
}

impl Draft {
    fn add_row(&mut self, line: &str) {
        let cells = table_cells(line);
        let Some(columns) = &self.columns else {
            self.columns = Some(cells.iter().map(|c| column_of(c)).collect());
            return;
        };
        if cells.iter().all(|c| c.chars().all(|ch| ch == '-' || ch == ':')) {
            return; // markdown separator row
        }
        let get = |col: Column| {
            columns
                .iter()
                .position(|c| *c == col)
                .and_then(|i| cells.get(i))
                .map(String::as_str)
                .filter(|s| !s.is_empty())
        };
        let Some(name) = get(Column::Name) else { return };
        let name = name.trim_matches('`').to_string();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return;
        }
        let type_hint = get(Column::Type).map(str::to_string);
        let required = get(Column::Required).is_some_and(is_yes);
        let param = Parameter {
            name,
            description: get(Column::Description).map(str::to_string),
            default_value: get(Column::Default).and_then(|c| typed_scalar(c, type_hint.as_deref())),
            example_value: get(Column::Example).and_then(|c| typed_scalar(c, type_hint.as_deref())),
            type_hint,
        };
        let ep = &mut self.endpoint;
        if let Some(existing) = ep
            .required_parameters
            .iter_mut()
            .chain(ep.optional_parameters.iter_mut())
            .find(|p| p.name == param.name)
        {
            // query-string parameter already seen in the URL: the table adds detail
            let example = existing.example_value.take();
            *existing = Parameter { example_value: param.example_value.clone().or(example), ..param };
        } else if required {
            ep.required_parameters.push(param);
        } else {
            ep.optional_parameters.push(param);
        }
    }
}

fn trim_url_token(token: &str) -> &str {
    token.trim_end_matches([',', ';', ')', '.', '"', '\''])
}

/// Offline extractor: finds `VERB URL` occurrences and the parameter tables
/// that follow them. The line before a verb line is taken as the endpoint
/// name (and the one before that, when the last ends in a period, as name
/// with the last as description).
pub fn heuristic_extract(text: &str) -> ApiSpec {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut endpoints: Vec<Endpoint> = Vec::new();
    let mut current: Option<Draft> = None;
    let mut pending: Vec<String> = Vec::new();
    let mut title: Option<String> = None;
    let mut first_pending: Option<Vec<String>> = None;

    for line in &lines {
        if let Some(m) = ENDPOINT.captures(line) {
            let whole = m.get(0).unwrap();
            let prefix = line[..whole.start()].trim();
            if !prefix.is_empty() {
                pending.push(prefix.to_string());
            }
            if let Some(done) = current.take() {
                endpoints.push(done.endpoint);
            }
            let method = normalize_method(&m[1]);
            let token = trim_url_token(&m[2]);
            let (url, query) = match token.split_once('?') {
                Some((u, q)) => (u.to_string(), Some(q.to_string())),
                None => (token.to_string(), None),
            };

            let (name, description) = name_and_description(&pending, &method, &url);
            if first_pending.is_none() {
                first_pending = Some(pending.clone());
            }
            pending.clear();

            let mut endpoint = Endpoint {
                name,
                description,
                method,
                url: UrlField::One(url),
                headers: Vec::new(),
                required_parameters: Vec::new(),
                optional_parameters: Vec::new(),
            };
            for (k, v) in query.as_deref().map(decode_query).unwrap_or_default() {
                if k.is_empty() || k.contains(char::is_whitespace) {
                    continue;
                }
                let mut p = Parameter::named(k);
                if !v.is_empty() {
                    p.example_value = Some(Scalar::String(v));
                }
                endpoint.required_parameters.push(p);
            }
            current = Some(Draft { endpoint, columns: None, in_table: false });
            continue;
        }
        if line.starts_with('|') {
            if let Some(draft) = current.as_mut() {
                if !draft.in_table {
                    draft.in_table = true;
                    draft.columns = None;
                }
                draft.add_row(line);
                continue;
            }
        }
        if let Some(draft) = current.as_mut() {
            draft.in_table = false;
        }
        pending.push(line.to_string());
    }
    if let Some(done) = current.take() {
        endpoints.push(done.endpoint);
    }

    let first_name_index = first_pending.as_ref().map(|p| {
        if p.last().is_some_and(|l| is_heading_like(l)) {
            p.len().saturating_sub(1)
        } else if p.len() >= 2 && is_heading_like(&p[p.len() - 2]) {
            p.len() - 2
        } else {
            p.len()
        }
    });
    let title_source = first_pending.as_deref().unwrap_or(&pending);
    if let Some(first) = title_source.first() {
        let is_name = first_name_index == Some(0);
        if is_heading_like(first) && !is_name {
            title = Some(first.clone());
        }
    }
    ApiSpec { title, endpoints }
}

fn name_and_description(pending: &[String], method: &str, url: &str) -> (String, Option<String>) {
    let derived = || {
        let path = crate::model::url_path(url);
        let path = if path.is_empty() { "/" } else { path };
        format!("{method} {path}")
    };
    match pending {
        [] => (derived(), None),
        [.., last] if is_heading_like(last) => (last.clone(), None),
        [.., name, last] if is_heading_like(name) => (name.clone(), Some(last.clone())),
        [.., last] => (derived(), Some(last.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn fenced_output() {
        let v = repair_json("```json\n{\"API\":{\"endpoints\":[]}}\n```").unwrap();
        assert_eq!(v, json!({"API": {"endpoints": []}}));
    }

    #[test]
    fn prose_wrapped_output() {
        let v = repair_json("Result: {\"API\":{\"endpoints\":[]}} Thanks").unwrap();
        assert_eq!(v, json!({"API": {"endpoints": []}}));
    }

    #[test]
    fn truncated_output_fails_closed() {
        let err = repair_json("{\"API\": {\"endpoints\": [").unwrap_err();
        assert_eq!(err.reason, "unbalanced");
        assert!(repair_json("").is_err());
        assert_eq!(repair_json("no json here").unwrap_err().reason, "no parsable object");
    }

    #[test]
    fn braces_inside_strings() {
        let v = repair_json("x {\"a\": \"}{\\\"\", \"b\": {}} y").unwrap();
        assert_eq!(v, json!({"a": "}{\"", "b": {}}));
    }

    #[test]
    fn heuristic_reads_verb_lines_and_tables() {
        let text = "Cards API\nSearch Cards\nFind cards by name.\nGET https://a.example/v1/cards?q=name:x\n| Name | Type | Required | Description |\n| q | string | yes | Query. |\n| page | integer | no | Page number. |";
        let spec = heuristic_extract(text);
        assert_eq!(spec.title.as_deref(), Some("Cards API"));
        let ep = &spec.endpoints[0];
        assert_eq!(ep.name, "Search Cards");
        assert_eq!(ep.description.as_deref(), Some("Find cards by name."));
        assert_eq!(ep.url.primary(), "https://a.example/v1/cards");
        assert_eq!(ep.required_parameters[0].name, "q");
        assert_eq!(ep.required_parameters[0].example_value, Some(Scalar::from("name:x")));
        assert_eq!(ep.required_parameters[0].description.as_deref(), Some("Query."));
        assert_eq!(ep.optional_parameters[0].name, "page");
    }

    #[test]
    fn heuristic_on_empty_page() {
        let spec = heuristic_extract("Nothing to call here.");
        assert!(spec.endpoints.is_empty());
    }

    #[test]
    fn replay_missing_record() {
        let doc = crate::ingest::document_from_raw("a", "a.txt", "text".into(), 1024).unwrap();
        let r = extract_spec(&doc, &ExtractionBackend::Replay(ReplayStore::new()));
        assert!(!r.valid);
        assert!(r.failure.is_some());
    }

    #[test]
    fn schema_constant_is_json() {
        let v: Value = serde_json::from_str(EXTRACTION_SCHEMA).unwrap();
        assert_eq!(v["definitions"]["Endpoint"]["required"], json!(["name", "method", "url"]));
    }
}
