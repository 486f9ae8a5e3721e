//! Calling tools, judging their responses and labelling failures.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::encoding::encode_query;
use crate::evaluate::render_table;
use crate::judge::JudgeBackend;
use crate::model::{has_http_scheme, Scalar};
use crate::net::{build_agent, is_loopback_url, url_host};
use crate::prompts;
use crate::ratelimit::HostRateLimiter;
use crate::remote::json_schema_format;
use crate::toolgen::{ArgLocation, Header, ToolDescriptor};

/// Response text passed to a remote judge is cut to this many characters.
pub const JUDGE_RESPONSE_CHARS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorType {
    PassedValidation,
    MissingEndpointPath,
    MissingBaseUrl,
    FailedValidation,
    AbnormalResponse,
    NoParameterValue,
    WrongParameterValue,
}

impl ErrorType {
    pub const ALL: [ErrorType; 7] = [
        ErrorType::PassedValidation,
        ErrorType::MissingEndpointPath,
        ErrorType::MissingBaseUrl,
        ErrorType::FailedValidation,
        ErrorType::AbnormalResponse,
        ErrorType::NoParameterValue,
        ErrorType::WrongParameterValue,
    ];

    /// The six failure labels, in report column order.
    pub const FAILURES: [ErrorType; 6] = [
        ErrorType::MissingEndpointPath,
        ErrorType::MissingBaseUrl,
        ErrorType::FailedValidation,
        ErrorType::AbnormalResponse,
        ErrorType::NoParameterValue,
        ErrorType::WrongParameterValue,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorType::PassedValidation => "Passed Validation",
            ErrorType::MissingEndpointPath => "Missing Endpoint Path",
            ErrorType::MissingBaseUrl => "Missing Base URL",
            ErrorType::FailedValidation => "Failed Validation",
            ErrorType::AbnormalResponse => "Abnormal Response",
            ErrorType::NoParameterValue => "No Parameter Value",
            ErrorType::WrongParameterValue => "Wrong Parameter Value",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportKind {
    Connect,
    Dns,
    Timeout,
    Tls,
    Offline,
    Request,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub url: String,
    pub status_code: Option<u16>,
    pub text: String,
    pub json_body: Option<Value>,
    pub content: String,
    pub transport_error: Option<String>,
    pub transport_kind: Option<TransportKind>,
    pub retried_without_params: bool,
    /// Status of the first request when a retry happened.
    pub first_status: Option<u16>,
    pub requests_sent: u8,
    pub elapsed_ms: u64,
}

impl InvocationRecord {
    fn from_bytes(url: String, status: u16, bytes: &[u8]) -> Self {
        let text = String::from_utf8_lossy(bytes).into_owned();
        InvocationRecord {
            url,
            status_code: Some(status),
            json_body: serde_json::from_slice(bytes).ok(),
            content: text.clone(),
            text,
            transport_error: None,
            transport_kind: None,
            retried_without_params: false,
            first_status: None,
            requests_sent: 1,
            elapsed_ms: 0,
        }
    }

    fn failed(url: String, kind: TransportKind, message: String) -> Self {
        InvocationRecord {
            url,
            status_code: None,
            text: String::new(),
            json_body: None,
            content: String::new(),
            transport_error: Some(message),
            transport_kind: Some(kind),
            retried_without_params: false,
            first_status: None,
            requests_sent: 1,
            elapsed_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub pass: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tool_name: String,
    pub source_id: String,
    pub bindings: BTreeMap<String, Scalar>,
    pub attempts: Vec<InvocationRecord>,
    pub error_type: ErrorType,
    pub judge_verdict: Option<JudgeVerdict>,
    pub passed: bool,
    pub build_error: Option<String>,
}

impl ValidationReport {
    pub fn last_attempt(&self) -> Option<&InvocationRecord> {
        self.attempts.last()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BuildError {
    #[error("missing required parameter `{0}`")]
    MissingRequiredParameter(String),
    #[error("no value bound for path parameter `{0}`")]
    UnboundPathParam(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteRequest {
    pub method: String,
    /// Path parameters substituted; no query arguments.
    pub url: String,
    pub query: Vec<(String, String)>,
    pub body: Option<Value>,
    pub headers: Vec<(String, String)>,
}

impl ConcreteRequest {
    /// URL with the percent-encoded query arguments appended.
    pub fn full_url(&self) -> String {
        if self.query.is_empty() {
            return self.url.clone();
        }
        let sep = if self.url.contains('?') { '&' } else { '?' };
        format!("{}{sep}{}", self.url, encode_query(self.query.iter().map(|(k, v)| (k.as_str(), v.as_str()))))
    }

    pub fn has_params(&self) -> bool {
        !self.query.is_empty() || self.body.is_some()
    }
}

/// Binds arguments to the descriptor. Non-path arguments become query
/// pairs, or a JSON body for verbs that carry one.
pub fn build_request(tool: &ToolDescriptor, args: &BTreeMap<String, Scalar>) -> Result<ConcreteRequest, BuildError> {
    for a in &tool.args {
        if a.required && !args.contains_key(&a.name) {
            return Err(BuildError::MissingRequiredParameter(a.name.clone()));
        }
    }
    let url = tool
        .template
        .render(|name| args.get(name).map(Scalar::render))
        .map_err(|e| match e {
            crate::template::TemplateError::UnboundPathParam(n) => BuildError::UnboundPathParam(n),
            other => BuildError::UnboundPathParam(other.to_string()),
        })?;
    let mut query = Vec::new();
    let mut body = serde_json::Map::new();
    for a in &tool.args {
        if a.location != ArgLocation::Query {
            continue;
        }
        if let Some(v) = args.get(&a.name) {
            if tool.sends_body() {
                body.insert(a.name.clone(), v.to_json());
            } else {
                query.push((a.name.clone(), v.render()));
            }
        }
    }
    let headers = tool
        .headers
        .iter()
        .filter_map(|h| match h {
            Header::Pair { name, value } => Some((name.clone(), value.clone())),
            Header::Raw(_) => None,
        })
        .collect();
    Ok(ConcreteRequest {
        method: tool.method.clone(),
        url,
        query,
        body: (!body.is_empty()).then_some(Value::Object(body)),
        headers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvokerConfig {
    /// Requests per second per host; zero or less disables the limit.
    pub per_host_rps: f64,
    /// Refuse every non-loopback request.
    pub offline: bool,
}

impl Default for InvokerConfig {
    fn default() -> Self {
        InvokerConfig { per_host_rps: 1.0, offline: false }
    }
}

/// Sends concrete requests with per-host politeness.
pub struct Invoker {
    limiter: HostRateLimiter,
    offline: bool,
    agents: Mutex<HashMap<(u64, bool), ureq::Agent>>,
}

impl Invoker {
    pub fn new(config: &InvokerConfig) -> Self {
        Invoker {
            limiter: HostRateLimiter::new(config.per_host_rps),
            offline: config.offline,
            agents: Mutex::new(HashMap::new()),
        }
    }

    fn agent(&self, timeout_seconds: u64, verify_tls: bool) -> ureq::Agent {
        let mut agents = self.agents.lock().unwrap_or_else(|e| e.into_inner());
        agents
            .entry((timeout_seconds, verify_tls))
            .or_insert_with(|| build_agent(Duration::from_secs(timeout_seconds), verify_tls))
            .clone()
    }

    fn send(&self, agent: &ureq::Agent, req: &ConcreteRequest, with_params: bool) -> InvocationRecord {
        let url = if with_params { req.full_url() } else { req.url.clone() };
        if self.offline && !is_loopback_url(&url) {
            return InvocationRecord::failed(url.clone(), TransportKind::Offline, format!("offline: refusing {url}"));
        }
        if let Some(host) = url_host(&url) {
            self.limiter.acquire(&host);
        }
        let mut builder = ureq::http::Request::builder().method(req.method.as_str()).uri(url.as_str());
        for (k, v) in &req.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        let result = match (&req.body, with_params) {
            (Some(body), true) => builder
                .header("content-type", "application/json")
                .body(serde_json::to_vec(body).unwrap_or_default())
                .map_err(ureq::Error::from)
                .and_then(|r| agent.run(r)),
            _ => builder.body(()).map_err(ureq::Error::from).and_then(|r| agent.run(r)),
        };
        match result {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                match resp.body_mut().read_to_vec() {
                    Ok(bytes) => InvocationRecord::from_bytes(url, status, &bytes),
                    Err(e) => {
                        let (kind, msg) = transport_error(&e);
                        InvocationRecord::failed(url, kind, msg)
                    }
                }
            }
            Err(e) => {
                let (kind, msg) = transport_error(&e);
                InvocationRecord::failed(url, kind, msg)
            }
        }
    }

    /// At most two requests: the call with parameters and, when it returns
    /// a non-200 status and parameters were sent, one retry without them
    /// whose response replaces the first.
    pub fn invoke(&self, tool: &ToolDescriptor, req: &ConcreteRequest) -> InvocationRecord {
        let start = Instant::now();
        let agent = self.agent(tool.timeout_seconds, tool.verify_tls);
        let mut record = self.send(&agent, req, true);
        if matches!(record.status_code, Some(s) if s != 200) && req.has_params() {
            let first = record.status_code;
            record = self.send(&agent, req, false);
            record.retried_without_params = true;
            record.first_status = first;
            record.requests_sent = 2;
        }
        record.elapsed_ms = start.elapsed().as_millis() as u64;
        record
    }
}

fn transport_error(e: &ureq::Error) -> (TransportKind, String) {
    use std::io::ErrorKind;
    let kind = match e {
        ureq::Error::Timeout(_) => TransportKind::Timeout,
        ureq::Error::HostNotFound => TransportKind::Dns,
        ureq::Error::ConnectionFailed => TransportKind::Connect,
        ureq::Error::Tls(_) => TransportKind::Tls,
        ureq::Error::Io(io) => match io.kind() {
            ErrorKind::ConnectionRefused | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted | ErrorKind::NotConnected | ErrorKind::AddrNotAvailable => TransportKind::Connect,
            ErrorKind::TimedOut | ErrorKind::WouldBlock => TransportKind::Timeout,
            _ => TransportKind::Request,
        },
        _ => TransportKind::Request,
    };
    let word = match kind {
        TransportKind::Connect => "connect",
        TransportKind::Dns => "dns",
        TransportKind::Timeout => "timeout",
        TransportKind::Tls => "tls",
        TransportKind::Offline => "offline",
        TransportKind::Request => "request",
    };
    (kind, format!("{word}: {e}"))
}

fn status_like(text: &str) -> bool {
    text.split(|c: char| !c.is_ascii_digit())
        .any(|tok| tok.len() == 3 && tok.starts_with('4'))
}

/// Local verdict on a 200 response.
pub fn heuristic_verdict(judge: &crate::judge::HeuristicJudge, record: &InvocationRecord) -> JudgeVerdict {
    let fail = |why: String| JudgeVerdict { pass: false, rationale: why };
    if record.text.trim().is_empty() {
        return fail("empty body".into());
    }
    match &record.json_body {
        Some(Value::Object(map)) if map.is_empty() => fail("empty JSON object".into()),
        Some(Value::Array(items)) if items.is_empty() => fail("empty JSON array".into()),
        Some(Value::Null) => fail("null JSON body".into()),
        Some(Value::Object(map)) => {
            for key in ["error", "errors"] {
                match map.get(key) {
                    None | Some(Value::Null) | Some(Value::Bool(false)) => {}
                    Some(Value::Array(a)) if a.is_empty() => {}
                    Some(Value::String(s)) if s.is_empty() => {}
                    Some(v) => return fail(format!("`{key}` field present: {}", truncate(&v.to_string(), 120))),
                }
            }
            if let Some(Value::String(msg)) = map.get("message") {
                if status_like(msg) {
                    return fail(format!("`message` carries an error status: {}", truncate(msg, 120)));
                }
                if let Some(p) = judge.matches_error_phrase(msg) {
                    return fail(format!("`message` matches error phrase `{p}`"));
                }
            }
            for key in ["status", "code", "status_code"] {
                if let Some(n) = map.get(key).and_then(Value::as_u64) {
                    if (400..600).contains(&n) {
                        return fail(format!("`{key}` is {n}"));
                    }
                }
            }
            JudgeVerdict { pass: true, rationale: "JSON body without error markers".into() }
        }
        Some(_) => JudgeVerdict { pass: true, rationale: "JSON body without error markers".into() },
        None => match judge.matches_error_phrase(&record.text) {
            Some(p) => fail(format!("body matches error phrase `{p}`")),
            None => JudgeVerdict { pass: true, rationale: "non-empty body without error phrases".into() },
        },
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

fn verdict_schema() -> Value {
    json_schema_format(
        "ResponseValidation",
        serde_json::json!({
            "type": "object",
            "properties": {
                "category": {"type": "string", "enum": ["information", "error"]},
                "reason": {"type": "string"}
            },
            "required": ["category", "reason"],
            "additionalProperties": false
        }),
    )
}

fn parse_remote_verdict(reply: &str) -> Option<JudgeVerdict> {
    if let Ok(v) = crate::extract::repair_json(reply) {
        if let Some(cat) = v.get("category").and_then(Value::as_str) {
            let reason = v.get("reason").and_then(Value::as_str).unwrap_or_default();
            return Some(JudgeVerdict { pass: cat.eq_ignore_ascii_case("information"), rationale: reason.to_string() });
        }
    }
    let lower = reply.to_lowercase();
    match (lower.contains("information"), lower.contains("error")) {
        (true, false) => Some(JudgeVerdict { pass: true, rationale: truncate(reply, 200) }),
        (false, true) => Some(JudgeVerdict { pass: false, rationale: truncate(reply, 200) }),
        _ => None,
    }
}

/// Decides whether a 200 response carries information or an error message.
/// A remote judge that fails falls back to the heuristic, noted in the
/// rationale.
pub fn judge_response(tool_description: &str, record: &InvocationRecord, judge: &JudgeBackend) -> JudgeVerdict {
    let heuristic = heuristic_verdict(judge.heuristic_judge(), record);
    if !heuristic.pass && record.text.trim().is_empty() {
        return heuristic;
    }
    let prompt = prompts::render(
        prompts::RESPONSE_VALIDATION,
        &[("description", tool_description), ("response", &truncate(&record.text, JUDGE_RESPONSE_CHARS))],
    );
    match judge.ask(prompt, Some(&verdict_schema())) {
        None => heuristic,
        Some(Ok(reply)) => parse_remote_verdict(&reply).unwrap_or_else(|| JudgeVerdict {
            pass: heuristic.pass,
            rationale: format!("unparsable judge reply; heuristic fallback: {}", heuristic.rationale),
        }),
        Some(Err(e)) => JudgeVerdict {
            pass: heuristic.pass,
            rationale: format!("{e}; heuristic fallback: {}", heuristic.rationale),
        },
    }
}

fn has_placeholder_syntax(url: &str) -> bool {
    let path = crate::model::url_path(url);
    path.contains(['{', '}', '<', '>'])
        || path.split('/').any(|seg| seg.starts_with(':') && seg[1..].starts_with(|c: char| c.is_ascii_alphabetic() || c == '_'))
}

/// What a validation attempt produced, for [`classify_outcome`].
#[derive(Debug, Clone, Copy)]
pub struct Observed<'a> {
    pub bindings: &'a BTreeMap<String, Scalar>,
    pub build_error: Option<&'a BuildError>,
    pub record: Option<&'a InvocationRecord>,
    pub verdict: Option<&'a JudgeVerdict>,
}

/// Assigns exactly one label, checking in order: base URL, endpoint path,
/// parameter values, then the response.
pub fn classify_outcome(tool: &ToolDescriptor, observed: Observed<'_>) -> ErrorType {
    if !has_http_scheme(&tool.template.raw) {
        return ErrorType::MissingBaseUrl;
    }
    let path = tool.template.path_shape();
    let empty_path = path == "/";
    if empty_path && !tool.args.is_empty() {
        return ErrorType::MissingEndpointPath;
    }
    for flag in &tool.flags {
        if let crate::toolgen::ToolFlag::UnboundPathParam(name) = flag {
            if !observed.bindings.contains_key(name) {
                return ErrorType::MissingEndpointPath;
            }
        }
    }
    if observed.record.is_some_and(|r| has_placeholder_syntax(&r.url)) {
        return ErrorType::MissingEndpointPath;
    }
    if tool.args.iter().any(|a| a.required && !observed.bindings.contains_key(&a.name)) {
        return ErrorType::NoParameterValue;
    }
    if observed.build_error.is_some() {
        return ErrorType::WrongParameterValue;
    }
    let Some(record) = observed.record else {
        return ErrorType::WrongParameterValue;
    };
    match record.status_code {
        Some(200) => match observed.verdict {
            Some(v) if v.pass => ErrorType::PassedValidation,
            _ => ErrorType::FailedValidation,
        },
        Some(_) => ErrorType::AbnormalResponse,
        None => match record.transport_kind {
            Some(TransportKind::Timeout) | Some(TransportKind::Offline) => ErrorType::AbnormalResponse,
            _ => ErrorType::WrongParameterValue,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorConfig {
    pub invoker: InvokerConfig,
    /// Tools validated concurrently by [`Validator::validate_corpus`].
    pub workers: usize,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig { invoker: InvokerConfig::default(), workers: 4 }
    }
}

/// Build, invoke, judge, classify.
pub struct Validator {
    pub invoker: Invoker,
    pub judge: JudgeBackend,
    pub workers: usize,
}

impl Validator {
    pub fn new(config: &ValidatorConfig, judge: JudgeBackend) -> Self {
        Validator { invoker: Invoker::new(&config.invoker), judge, workers: config.workers.max(1) }
    }

    /// Validates with the descriptor's own example or default values.
    pub fn validate_tool(&self, tool: &ToolDescriptor) -> ValidationReport {
        let bindings = tool
            .args
            .iter()
            .filter_map(|a| a.value().map(|v| (a.name.clone(), v.clone())))
            .collect();
        self.validate_with(tool, bindings)
    }

    pub fn validate_with(&self, tool: &ToolDescriptor, bindings: BTreeMap<String, Scalar>) -> ValidationReport {
        let mut report = ValidationReport {
            tool_name: tool.tool_name.clone(),
            source_id: tool.source_id.clone(),
            bindings,
            attempts: Vec::new(),
            error_type: ErrorType::WrongParameterValue,
            judge_verdict: None,
            passed: false,
            build_error: None,
        };
        let pre = classify_outcome(
            tool,
            Observed { bindings: &report.bindings, build_error: None, record: None, verdict: None },
        );
        if matches!(pre, ErrorType::MissingBaseUrl | ErrorType::MissingEndpointPath | ErrorType::NoParameterValue) {
            report.error_type = pre;
            return report;
        }
        let build_error = match build_request(tool, &report.bindings) {
            Ok(req) => {
                let record = self.invoker.invoke(tool, &req);
                if record.status_code == Some(200) {
                    report.judge_verdict = Some(judge_response(&tool.description, &record, &self.judge));
                }
                report.attempts.push(record);
                None
            }
            Err(e) => Some(e),
        };
        report.error_type = classify_outcome(
            tool,
            Observed {
                bindings: &report.bindings,
                build_error: build_error.as_ref(),
                record: report.attempts.last(),
                verdict: report.judge_verdict.as_ref(),
            },
        );
        report.build_error = build_error.map(|e| e.to_string());
        report.passed = report.error_type == ErrorType::PassedValidation;
        report
    }

    /// Validates tools concurrently, at most `workers` at a time. Output
    /// order follows the input.
    pub fn validate_corpus(&self, tools: &[ToolDescriptor]) -> Vec<ValidationReport> {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(|| tools.par_iter().map(|t| self.validate_tool(t)).collect()),
            Err(_) => tools.iter().map(|t| self.validate_tool(t)).collect(),
        }
    }
}

/// Validates one tool with default politeness settings.
pub fn validate_tool(tool: &ToolDescriptor, judge: &JudgeBackend) -> ValidationReport {
    Validator::new(&ValidatorConfig::default(), judge.clone()).validate_tool(tool)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorCounts {
    pub passed_validation: i64,
    pub missing_endpoint_path: i64,
    pub missing_base_url: i64,
    pub failed_validation: i64,
    pub abnormal_response: i64,
    pub no_parameter_value: i64,
    pub wrong_parameter_value: i64,
}

impl ErrorCounts {
    /// Failure counts in report column order: missing endpoint path,
    /// missing base URL, failed validation, abnormal response, no parameter
    /// value, wrong parameter value.
    pub fn from_failures(mep: i64, mbu: i64, fv: i64, ar: i64, npv: i64, wpv: i64) -> Self {
        ErrorCounts {
            passed_validation: 0,
            missing_endpoint_path: mep,
            missing_base_url: mbu,
            failed_validation: fv,
            abnormal_response: ar,
            no_parameter_value: npv,
            wrong_parameter_value: wpv,
        }
    }

    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a ValidationReport>) -> Self {
        let mut c = ErrorCounts::default();
        for r in reports {
            *c.get_mut(r.error_type) += 1;
        }
        c
    }

    pub fn get(&self, t: ErrorType) -> i64 {
        match t {
            ErrorType::PassedValidation => self.passed_validation,
            ErrorType::MissingEndpointPath => self.missing_endpoint_path,
            ErrorType::MissingBaseUrl => self.missing_base_url,
            ErrorType::FailedValidation => self.failed_validation,
            ErrorType::AbnormalResponse => self.abnormal_response,
            ErrorType::NoParameterValue => self.no_parameter_value,
            ErrorType::WrongParameterValue => self.wrong_parameter_value,
        }
    }

    pub fn get_mut(&mut self, t: ErrorType) -> &mut i64 {
        match t {
            ErrorType::PassedValidation => &mut self.passed_validation,
            ErrorType::MissingEndpointPath => &mut self.missing_endpoint_path,
            ErrorType::MissingBaseUrl => &mut self.missing_base_url,
            ErrorType::FailedValidation => &mut self.failed_validation,
            ErrorType::AbnormalResponse => &mut self.abnormal_response,
            ErrorType::NoParameterValue => &mut self.no_parameter_value,
            ErrorType::WrongParameterValue => &mut self.wrong_parameter_value,
        }
    }

    pub fn total(&self) -> i64 {
        ErrorType::ALL.iter().map(|t| self.get(*t)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseRange {
    pub conservative: i64,
    pub aggressive: i64,
}

impl std::fmt::Display for CauseRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.conservative, self.aggressive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseEstimate {
    /// C1
    pub missing_doc_details: CauseRange,
    /// C2
    pub incorrect_url_path: CauseRange,
    /// C3
    pub incorrect_parameter_values: CauseRange,
    /// C4
    pub server_side: CauseRange,
}

impl CauseEstimate {
    pub fn categories(&self) -> [(&'static str, CauseRange); 4] {
        [
            ("Missing API Doc Details", self.missing_doc_details),
            ("Incorrect URL Path", self.incorrect_url_path),
            ("Incorrect Parameter Values", self.incorrect_parameter_values),
            ("Server-Side Issues", self.server_side),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CauseError {
    #[error("negative count {1} for {0:?}")]
    NegativeCount(ErrorType, i64),
}

/// Maps failure counts to conservative and aggressive ranges over four
/// root causes.
pub fn estimate_causes(counts: &ErrorCounts) -> Result<CauseEstimate, CauseError> {
    for t in ErrorType::ALL {
        if counts.get(t) < 0 {
            return Err(CauseError::NegativeCount(t, counts.get(t)));
        }
    }
    let mep = counts.missing_endpoint_path;
    let mbu = counts.missing_base_url;
    let fv = counts.failed_validation;
    let ar = counts.abnormal_response;
    let npv = counts.no_parameter_value;
    let wpv = counts.wrong_parameter_value;
    Ok(CauseEstimate {
        missing_doc_details: CauseRange { conservative: 0, aggressive: mbu + npv },
        incorrect_url_path: CauseRange { conservative: mep, aggressive: mep + mbu },
        incorrect_parameter_values: CauseRange { conservative: wpv + fv, aggressive: wpv + fv + npv + ar },
        server_side: CauseRange { conservative: 0, aggressive: fv + ar },
    })
}

/// Two tables: failure counts per run, then cause ranges per run.
pub fn render_error_report(rows: &[(&str, ErrorCounts)]) -> Result<String, CauseError> {
    let mut header = vec!["Run"];
    header.extend(ErrorType::FAILURES.iter().map(|t| t.label()));
    let count_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, c)| {
            let mut row = vec![name.to_string()];
            row.extend(ErrorType::FAILURES.iter().map(|t| c.get(*t).to_string()));
            row
        })
        .collect();
    let mut cause_rows = Vec::new();
    for (name, c) in rows {
        let est = estimate_causes(c)?;
        let mut row = vec![name.to_string()];
        row.extend(est.categories().iter().map(|(_, r)| r.to_string()));
        cause_rows.push(row);
    }
    let cause_header = ["Run", "Missing API Doc Details", "Incorrect URL Path", "Incorrect Parameter Values", "Server-Side Issues"];
    Ok(format!(
        "Tool errors\n{}\nEstimated error causes\n{}",
        render_table(&header, &count_rows),
        render_table(&cause_header, &cause_rows)
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::HeuristicJudge;
    use crate::model::{Endpoint, Parameter};
    use crate::toolgen::generate_tool;

    fn record(status: u16, body: &str) -> InvocationRecord {
        InvocationRecord::from_bytes("https://a/x".into(), status, body.as_bytes())
    }

    fn tool(url: &str, required: &[(&str, Option<&str>)]) -> ToolDescriptor {
        let mut e = Endpoint::new("T", "GET", url);
        for (n, ex) in required {
            let mut p = Parameter::named(*n);
            p.example_value = ex.map(Scalar::from);
            e.required_parameters.push(p);
        }
        generate_tool(&e, "s")
    }

    #[test]
    fn ground_truth_causes() {
        let est = estimate_causes(&ErrorCounts::from_failures(0, 4, 9, 23, 14, 10)).unwrap();
        let r: Vec<String> = est.categories().iter().map(|(_, r)| r.to_string()).collect();
        assert_eq!(r, vec!["0-18", "0-4", "19-56", "0-32"]);
    }

    #[test]
    fn one_shot_row_causes() {
        let est = estimate_causes(&ErrorCounts::from_failures(0, 1, 4, 5, 0, 1)).unwrap();
        let r: Vec<String> = est.categories().iter().map(|(_, r)| r.to_string()).collect();
        assert_eq!(r, vec!["0-1", "0-1", "5-10", "0-9"]);
    }

    #[test]
    fn zero_and_negative_counts() {
        let est = estimate_causes(&ErrorCounts::default()).unwrap();
        assert!(est.categories().iter().all(|(_, r)| r.conservative == 0 && r.aggressive == 0));
        let c = ErrorCounts { failed_validation: -1, ..ErrorCounts::default() };
        assert_eq!(estimate_causes(&c), Err(CauseError::NegativeCount(ErrorType::FailedValidation, -1)));
    }

    #[test]
    fn request_building() {
        let t = tool("https://api.pokemontcg.io/v2/cards", &[("q", Some("name:gardevoir"))]);
        let mut args = BTreeMap::new();
        args.insert("q".to_string(), Scalar::from("name:gardevoir"));
        let req = build_request(&t, &args).unwrap();
        assert_eq!(req.method, "GET");
        assert_eq!(req.url, "https://api.pokemontcg.io/v2/cards");
        assert_eq!(req.query, vec![("q".to_string(), "name:gardevoir".to_string())]);
        args.insert("q".to_string(), Scalar::from("a+b"));
        assert!(build_request(&t, &args).unwrap().full_url().ends_with("?q=a%2Bb"));
        assert_eq!(build_request(&t, &BTreeMap::new()), Err(BuildError::MissingRequiredParameter("q".into())));
    }

    #[test]
    fn body_verbs_send_json() {
        let mut e = Endpoint::new("Create", "POST", "https://a/items/{id}");
        e.required_parameters.push(Parameter::named("id"));
        e.required_parameters.push(Parameter::named("name"));
        let t = generate_tool(&e, "s");
        let args = BTreeMap::from([("id".to_string(), Scalar::from("7")), ("name".to_string(), Scalar::from("x"))]);
        let req = build_request(&t, &args).unwrap();
        assert_eq!(req.url, "https://a/items/7");
        assert!(req.query.is_empty());
        assert_eq!(req.body, Some(serde_json::json!({"name": "x"})));
    }

    #[test]
    fn heuristic_judge_cases() {
        let h = HeuristicJudge::default();
        assert!(heuristic_verdict(&h, &record(200, r#"{"data":[1]}"#)).pass);
        assert!(!heuristic_verdict(&h, &record(200, r#"{"error":"invalid query"}"#)).pass);
        assert!(!heuristic_verdict(&h, &record(200, "")).pass);
        assert!(!heuristic_verdict(&h, &record(200, "{}")).pass);
        assert!(!heuristic_verdict(&h, &record(200, r#"{"message":"404 page"}"#)).pass);
        assert!(heuristic_verdict(&h, &record(200, r#"{"message":"ok","error":null}"#)).pass);
        assert!(!heuristic_verdict(&h, &record(200, "Resource not found")).pass);
        assert!(heuristic_verdict(&h, &record(200, "hello")).pass);
    }

    fn classify(t: &ToolDescriptor, rec: Option<&InvocationRecord>, verdict: Option<&JudgeVerdict>) -> ErrorType {
        let b = t.example_bindings().into_iter().map(|(k, v)| (k, Scalar::from(v))).collect();
        classify_outcome(t, Observed { bindings: &b, build_error: None, record: rec, verdict })
    }

    #[test]
    fn classification_order() {
        assert_eq!(classify(&tool("/v2/cards", &[]), None, None), ErrorType::MissingBaseUrl);
        assert_eq!(classify(&tool("https://a.example", &[("q", Some("x"))]), None, None), ErrorType::MissingEndpointPath);
        assert_eq!(classify(&tool("https://a/x/:id", &[]), None, None), ErrorType::MissingEndpointPath);
        assert_eq!(classify(&tool("https://a/x", &[("q", None)]), None, None), ErrorType::NoParameterValue);
        let t = tool("https://a/x", &[("q", Some("v"))]);
        assert_eq!(classify(&t, Some(&record(404, "nope")), None), ErrorType::AbnormalResponse);
        let fail = JudgeVerdict { pass: false, rationale: String::new() };
        let pass = JudgeVerdict { pass: true, rationale: String::new() };
        assert_eq!(classify(&t, Some(&record(200, "{}")), Some(&fail)), ErrorType::FailedValidation);
        assert_eq!(classify(&t, Some(&record(200, "[1]")), Some(&pass)), ErrorType::PassedValidation);
        let conn = InvocationRecord::failed("https://a/x".into(), TransportKind::Connect, "connect".into());
        assert_eq!(classify(&t, Some(&conn), None), ErrorType::WrongParameterValue);
        let slow = InvocationRecord::failed("https://a/x".into(), TransportKind::Timeout, "timeout".into());
        assert_eq!(classify(&t, Some(&slow), None), ErrorType::AbnormalResponse);
    }

    #[test]
    fn unroutable_host_records_connect_error() {
        let validator = Validator::new(
            &ValidatorConfig { invoker: InvokerConfig { per_host_rps: 0.0, offline: false }, workers: 1 },
            JudgeBackend::heuristic(),
        );
        let t = tool("http://127.0.0.1:1/x", &[]);
        let report = validator.validate_tool(&t);
        let rec = report.last_attempt().unwrap();
        assert!(rec.status_code.is_none());
        assert!(rec.transport_error.as_deref().unwrap().starts_with("connect"), "{rec:?}");
        assert_eq!(rec.requests_sent, 1);
    }

    #[test]
    fn offline_refuses_remote_hosts() {
        let validator = Validator::new(
            &ValidatorConfig { invoker: InvokerConfig { per_host_rps: 0.0, offline: true }, workers: 1 },
            JudgeBackend::heuristic(),
        );
        let report = validator.validate_tool(&tool("https://api.example.com/x", &[]));
        assert_eq!(report.last_attempt().unwrap().transport_kind, Some(TransportKind::Offline));
    }

    #[test]
    fn report_tables() {
        let text = render_error_report(&[("Ground Truth", ErrorCounts::from_failures(0, 4, 9, 23, 14, 10))]).unwrap();
        assert!(text.contains("19-56"));
        assert!(text.contains("Missing Endpoint Path"));
    }
}
