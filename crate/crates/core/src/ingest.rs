//! Loading documentation pages and turning markup into clean text.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use log::warn;
use rayon::prelude::*;
use regex::Regex;
use scraper::{ElementRef, Html, Node};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::judge::{JudgeBackend, JudgeError};
use crate::net::{build_agent, is_loopback_url};
use crate::prompts;
use crate::remote::json_schema_format;

pub const DEFAULT_MAX_TEXT_BYTES: usize = 512 * 1024;
pub const MAX_ANALYSIS_CHARS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocCategory {
    FullyOrganized,
    SemiOrganized,
    Unorganized,
}

impl DocCategory {
    pub fn label(self) -> &'static str {
        match self {
            DocCategory::FullyOrganized => "Fully Organized",
            DocCategory::SemiOrganized => "Semi-Organized",
            DocCategory::Unorganized => "Unorganized",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "fullyorganized" => Some(DocCategory::FullyOrganized),
            "semiorganized" => Some(DocCategory::SemiOrganized),
            "unorganized" => Some(DocCategory::Unorganized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiDocument {
    pub source_id: String,
    pub origin: String,
    pub raw: String,
    pub text: String,
    pub category: Option<DocCategory>,
    pub analysis: Option<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to fetch `{origin}`: {cause}")]
    FetchFailed { origin: String, cause: String },
    #[error("`{0}` has no text after cleaning")]
    EmptyDocument(String),
    #[error("duplicate source id `{0}` in manifest")]
    DuplicateSourceId(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_id: String,
    pub origin: String,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub timeout: Duration,
    pub max_text_bytes: usize,
    pub offline: bool,
    /// Relative file origins resolve against this directory.
    pub base_dir: Option<PathBuf>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            timeout: Duration::from_secs(30),
            max_text_bytes: DEFAULT_MAX_TEXT_BYTES,
            offline: false,
            base_dir: None,
        }
    }
}

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "svg", "iframe", "canvas"];
const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "details", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "head", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "summary",
    "table", "tbody", "thead", "tfoot", "title", "ul", "caption",
];

fn walk(el: ElementRef<'_>, out: &mut String) {
    let name = el.value().name();
    if SKIPPED.contains(&name) {
        return;
    }
    if name == "tr" {
        let cells: Vec<String> = el
            .children()
            .filter_map(ElementRef::wrap)
            .filter(|c| matches!(c.value().name(), "td" | "th"))
            .map(|c| {
                let mut cell = String::new();
                walk(c, &mut cell);
                cell.split_whitespace().collect::<Vec<_>>().join(" ")
            })
            .collect();
        out.push('\n');
        out.push_str("| ");
        out.push_str(&cells.join(" | "));
        out.push_str(" |\n");
        return;
    }
    let block = BLOCKS.contains(&name);
    if block {
        out.push('\n');
    }
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(_) => {
                if let Some(c) = ElementRef::wrap(child) {
                    walk(c, out);
                }
            }
            _ => {}
        }
    }
    if name == "a" {
        if let Some(href) = el.value().attr("href") {
            let href = href.trim();
            let keep = href.starts_with("http://") || href.starts_with("https://") || href.starts_with('/');
            let label: String = el.text().collect();
            if keep && label.trim() != href {
                out.push_str(" (");
                out.push_str(href);
                out.push(')');
            }
        }
    }
    if block {
        out.push('\n');
    }
}

/// Collapses whitespace inside each line and drops empty lines.
pub fn collapse_whitespace(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Strips markup, keeping link targets inline and table rows as `| a | b |`
/// lines.
pub fn html_to_text(html: &str) -> String {
    let document = Html::parse_document(html);
    let mut out = String::new();
    walk(document.root_element(), &mut out);
    collapse_whitespace(&out)
}

fn looks_like_plain_text(origin: &str) -> bool {
    let lower = origin.to_ascii_lowercase();
    [".txt", ".md", ".markdown", ".rst"].iter().any(|ext| lower.ends_with(ext))
}

fn truncate_bytes(text: &mut String, max: usize) -> bool {
    if text.len() <= max {
        return false;
    }
    let mut cut = max;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    text.truncate(cut);
    true
}

/// A stable identifier derived from a file stem or URL.
pub fn derive_source_id(origin: &str) -> String {
    let base = if origin.starts_with("http://") || origin.starts_with("https://") {
        origin.split_once("://").map(|(_, r)| r).unwrap_or(origin).to_string()
    } else {
        Path::new(origin)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| origin.to_string())
    };
    let mut id = String::new();
    for c in base.chars() {
        if c.is_ascii_alphanumeric() {
            id.push(c.to_ascii_lowercase());
        } else if !id.ends_with('_') {
            id.push('_');
        }
    }
    let id = id.trim_matches('_').to_string();
    if id.is_empty() {
        "doc".to_string()
    } else {
        id
    }
}

fn read_origin(origin: &str, opts: &IngestOptions) -> Result<String, IngestError> {
    let fail = |cause: String| IngestError::FetchFailed { origin: origin.to_string(), cause };
    if origin.starts_with("http://") || origin.starts_with("https://") {
        if opts.offline && !is_loopback_url(origin) {
            return Err(fail("offline mode forbids non-loopback hosts".into()));
        }
        let agent = build_agent(opts.timeout, true);
        let mut response = agent.get(origin).call().map_err(|e| fail(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(fail(format!("HTTP {status}")));
        }
        response
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| fail(e.to_string()))
    } else {
        let path = match &opts.base_dir {
            Some(dir) if Path::new(origin).is_relative() => dir.join(origin),
            _ => PathBuf::from(origin),
        };
        let bytes = fs::read(&path).map_err(|e| fail(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Builds a document from markup already in memory.
pub fn document_from_raw(
    source_id: &str,
    origin: &str,
    raw: String,
    max_text_bytes: usize,
) -> Result<ApiDocument, IngestError> {
    let mut text = if looks_like_plain_text(origin) {
        collapse_whitespace(&raw)
    } else {
        html_to_text(&raw)
    };
    if text.is_empty() {
        return Err(IngestError::EmptyDocument(origin.to_string()));
    }
    if truncate_bytes(&mut text, max_text_bytes) {
        warn!("{source_id}: text truncated to {max_text_bytes} bytes");
    }
    Ok(ApiDocument {
        source_id: source_id.to_string(),
        origin: origin.to_string(),
        raw,
        text,
        category: None,
        analysis: None,
    })
}

/// Reads a local file or fetches a URL and cleans it.
pub fn load_and_clean(origin: &str, opts: &IngestOptions) -> Result<ApiDocument, IngestError> {
    load_entry(
        &ManifestEntry { source_id: derive_source_id(origin), origin: origin.to_string() },
        opts,
    )
}

pub fn load_entry(entry: &ManifestEntry, opts: &IngestOptions) -> Result<ApiDocument, IngestError> {
    let raw = read_origin(&entry.origin, opts)?;
    document_from_raw(&entry.source_id, &entry.origin, raw, opts.max_text_bytes)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::InvalidManifest(format!("{}: {e}", path.display())))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| IngestError::InvalidManifest(e.to_string()))?;
    let mut seen = HashSet::new();
    for e in &entries {
        if !seen.insert(e.source_id.as_str()) {
            return Err(IngestError::DuplicateSourceId(e.source_id.clone()));
        }
    }
    Ok(entries)
}

/// Loads every manifest entry on a pool of `workers` threads. Results come
/// back sorted by source id whatever the completion order.
pub fn load_corpus(
    entries: &[ManifestEntry],
    opts: &IngestOptions,
    workers: usize,
) -> Vec<(String, Result<ApiDocument, IngestError>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let mut results: Vec<_> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| (e.source_id.clone(), load_entry(e, opts)))
            .collect()
    });
    results.sort_by(|a, b| a.0.cmp(&b.0));
    results
}

static URL_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"https?://[^\s)]+|(?:^|\s)/[A-Za-z0-9_.~{}:<>-]+(?:/[^\s]*)?").unwrap());
static VERB: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(GET|POST|PUT|PATCH|DELETE)\b").unwrap());
static PARAM_KEYWORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(parameters?|params?|query string|request body|path variables?|endpoints?)\b").unwrap()
});
static ENDPOINT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(GET|POST|PUT|PATCH|DELETE)\s+(https?://\S+|/\S*)").unwrap());
static EXAMPLE_CODE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(\bcurl\s|import requests|requests\.(get|post)\(|fetch\(|\bexample (request|response|code|call)\b|\$ http\b|```)")
        .unwrap()
});

fn is_table_header(line: &str) -> bool {
    let lower = line.to_ascii_lowercase();
    line.starts_with('|') && (lower.contains("| name") || lower.contains("| parameter") || lower.contains("| field"))
}

/// Structural features the heuristic judges look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DocFeatures {
    pub endpoint_lines: usize,
    pub parameter_tables: usize,
    pub has_example_code: bool,
    pub has_url: bool,
    pub has_verb: bool,
    pub has_param_keyword: bool,
    pub words: usize,
}

pub fn doc_features(text: &str) -> DocFeatures {
    DocFeatures {
        endpoint_lines: ENDPOINT_LINE.find_iter(text).count(),
        parameter_tables: text.lines().filter(|l| is_table_header(l)).count(),
        has_example_code: EXAMPLE_CODE.is_match(text),
        has_url: URL_TOKEN.is_match(text),
        has_verb: VERB.is_match(text),
        has_param_keyword: PARAM_KEYWORD.is_match(text),
        words: text.split_whitespace().count(),
    }
}

/// True when the cleaned text plausibly documents a callable endpoint.
pub fn heuristic_is_api_page(text: &str) -> bool {
    let f = doc_features(text);
    f.has_url && (f.has_verb || f.has_param_keyword)
}

/// Decides whether a page documents endpoints. Remote judge failures are
/// returned to the caller, who may fall back to [`heuristic_is_api_page`].
pub fn filter_api_pages(doc: &ApiDocument, judge: &JudgeBackend) -> Result<bool, JudgeError> {
    let prompt = prompts::render(prompts::PAGE_FILTER, &[("page", &doc.text)]);
    match judge.ask(prompt, None) {
        None => Ok(heuristic_is_api_page(&doc.text)),
        Some(reply) => Ok(reply?.trim().to_ascii_lowercase().starts_with("yes")),
    }
}

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

pub fn heuristic_classification(text: &str) -> (DocCategory, String) {
    let f = doc_features(text);
    let category = if f.endpoint_lines == 0 {
        DocCategory::Unorganized
    } else if f.parameter_tables > 0 && f.has_example_code {
        DocCategory::FullyOrganized
    } else {
        DocCategory::SemiOrganized
    };
    let analysis = format!(
        "{} endpoint line(s), {} parameter table(s), example code {}, {} words.",
        f.endpoint_lines,
        f.parameter_tables,
        if f.has_example_code { "present" } else { "absent" },
        f.words
    );
    (category, truncate_chars(&analysis, MAX_ANALYSIS_CHARS))
}

/// Assigns one of the three documentation-quality categories with a short
/// analysis (at most 300 characters).
pub fn classify_document(doc: &ApiDocument, judge: &JudgeBackend) -> Result<(DocCategory, String), JudgeError> {
    let prompt = prompts::render(prompts::DOCUMENT_CLASSIFICATION, &[("API_DOC", &doc.text)]);
    let format = json_schema_format(
        "Classification",
        json!({
            "type": "object",
            "properties": {
                "analysis": {"type": "string", "description": "The analysis of the API documentation. Make it within 300 characters."},
                "category": {"type": "string", "enum": ["Fully Organized", "Semi-Organized", "Unorganized"]}
            },
            "required": ["analysis", "category"]
        }),
    );
    match judge.ask(prompt, Some(&format)) {
        None => Ok(heuristic_classification(&doc.text)),
        Some(reply) => {
            let reply = reply?;
            let parsed = crate::extract::repair_json(&reply).ok();
            let category = parsed
                .as_ref()
                .and_then(|v| v.get("category"))
                .and_then(|c| c.as_str())
                .and_then(DocCategory::from_label)
                .or_else(|| {
                    [DocCategory::FullyOrganized, DocCategory::SemiOrganized, DocCategory::Unorganized]
                        .into_iter()
                        .find(|c| reply.contains(c.label()))
                })
                .ok_or_else(|| {
                    JudgeError::JudgeUnavailable(crate::remote::RemoteError::BadResponse(format!(
                        "no category in reply: {}",
                        truncate_chars(&reply, 120)
                    )))
                })?;
            let analysis = parsed
                .as_ref()
                .and_then(|v| v.get("analysis"))
                .and_then(|a| a.as_str())
                .unwrap_or_default();
            Ok((category, truncate_chars(analysis, MAX_ANALYSIS_CHARS)))
        }
    }
}
