//! Endpoint to executable tool descriptor, plus the two export formats:
//! a script function and an OpenAPI document per host.
//!
//! The descriptor is what the validation runtime executes. The exports are
//! serializations of it and are never run by this crate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::canonical_type;
use crate::model::{resolve_url, ApiSpec, Endpoint, Scalar};
use crate::template::{parse_url_template, UrlTemplate};

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArgLocation {
    Path,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolArg {
    pub name: String,
    pub location: ArgLocation,
    pub required: bool,
    pub type_hint: Option<String>,
    pub description: Option<String>,
    pub example_value: Option<Scalar>,
    pub default_value: Option<Scalar>,
}

impl ToolArg {
    /// Example value, falling back to the default.
    pub fn value(&self) -> Option<&Scalar> {
        self.example_value.as_ref().or(self.default_value.as_ref())
    }

    /// A required argument with nothing to call it with.
    pub fn value_missing(&self) -> bool {
        self.required && self.value().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Header {
    Pair { name: String, value: String },
    Raw(String),
}

impl Header {
    pub fn parse(raw: &str) -> Header {
        match raw.split_once(':') {
            Some((name, value)) if !name.trim().is_empty() && !name.trim().contains(char::is_whitespace) => {
                Header::Pair { name: name.trim().to_string(), value: value.trim().to_string() }
            }
            _ => Header::Raw(raw.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToolFlag {
    /// The URL has a placeholder no documented parameter binds; a required
    /// argument was synthesized for it.
    UnboundPathParam(String),
    NonStandardMethod(String),
    MalformedUrl(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub tool_name: String,
    pub endpoint_name: String,
    pub description: String,
    pub method: String,
    pub template: UrlTemplate,
    pub args: Vec<ToolArg>,
    pub headers: Vec<Header>,
    pub source_id: String,
    pub timeout_seconds: u64,
    pub verify_tls: bool,
    pub flags: Vec<ToolFlag>,
}

impl ToolDescriptor {
    pub fn arg(&self, name: &str) -> Option<&ToolArg> {
        self.args.iter().find(|a| a.name == name)
    }

    pub fn arg_mut(&mut self, name: &str) -> Option<&mut ToolArg> {
        self.args.iter_mut().find(|a| a.name == name)
    }

    /// Name → rendered value for every argument that has one.
    pub fn example_bindings(&self) -> BTreeMap<String, String> {
        self.args
            .iter()
            .filter_map(|a| a.value().map(|v| (a.name.clone(), v.render())))
            .collect()
    }

    pub fn has_unbound_placeholder(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, ToolFlag::UnboundPathParam(_)))
    }

    /// Whether non-path arguments travel as a JSON body for this method.
    pub fn sends_body(&self) -> bool {
        method_sends_body(&self.method)
    }
}

pub fn method_sends_body(method: &str) -> bool {
    matches!(method, "POST" | "PUT" | "PATCH" | "DELETE")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolgenError {
    #[error("tools span several hosts: {0:?}")]
    MixedHosts(Vec<String>),
    #[error("tool `{0}` has no base URL")]
    MissingBaseUrl(String),
    #[error("no tools to export")]
    Empty,
    #[error("YAML serialization failed: {0}")]
    Yaml(String),
}

/// Lowercase identifier: non-alphanumerics become `_`, runs collapse, edges
/// are stripped and a leading digit gets an `f_` prefix.
pub fn sanitize_identifier(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "tool".to_string()
    } else if trimmed.starts_with(|c: char| c.is_ascii_digit()) {
        format!("f_{trimmed}")
    } else {
        trimmed.to_string()
    }
}

/// Builds the descriptor for one endpoint. Total: problems with the URL are
/// recorded as flags and left for validation to label.
pub fn generate_tool(endpoint: &Endpoint, source_id: &str) -> ToolDescriptor {
    let resolved = resolve_url(endpoint);
    let mut flags = Vec::new();
    let template = match parse_url_template(&resolved.primary) {
        Ok(t) => t,
        Err(e) => {
            flags.push(ToolFlag::MalformedUrl(e.to_string()));
            UrlTemplate::literal(&resolved.primary)
        }
    };
    if !endpoint.method_is_standard() {
        flags.push(ToolFlag::NonStandardMethod(endpoint.method.clone()));
    }
    let path_params: Vec<&str> = template.path_params();

    let mut seen = HashSet::new();
    let mut args: Vec<ToolArg> = Vec::new();
    for (p, required) in endpoint.parameters() {
        if !seen.insert(p.name.clone()) {
            continue;
        }
        let in_path = path_params.contains(&p.name.as_str());
        args.push(ToolArg {
            name: p.name.clone(),
            location: if in_path { ArgLocation::Path } else { ArgLocation::Query },
            required: required || in_path,
            type_hint: p.type_hint.clone(),
            description: p.description.clone(),
            example_value: p.example_value.clone(),
            default_value: p.default_value.clone(),
        });
    }
    for name in &path_params {
        if !seen.contains(*name) {
            flags.push(ToolFlag::UnboundPathParam(name.to_string()));
            args.push(ToolArg {
                name: name.to_string(),
                location: ArgLocation::Path,
                required: true,
                type_hint: None,
                description: None,
                example_value: None,
                default_value: None,
            });
        }
    }
    args.sort_by_key(|a| !a.required);

    ToolDescriptor {
        tool_name: sanitize_identifier(&endpoint.name),
        endpoint_name: endpoint.name.clone(),
        description: endpoint.description.clone().unwrap_or_else(|| endpoint.name.clone()),
        method: endpoint.method.clone(),
        template,
        args,
        headers: endpoint.headers.iter().map(|h| Header::parse(h)).collect(),
        source_id: source_id.to_string(),
        timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
        verify_tls: true,
        flags,
    }
}

/// Descriptors for every endpoint of a spec. Repeated tool names get `_2`,
/// `_3`, ... suffixes.
pub fn generate_tools(spec: &ApiSpec, source_id: &str) -> Vec<ToolDescriptor> {
    let mut used: HashMap<String, usize> = HashMap::new();
    let mut taken: HashSet<String> = HashSet::new();
    spec.endpoints
        .iter()
        .map(|e| {
            let mut tool = generate_tool(e, source_id);
            let base = tool.tool_name.clone();
            if !taken.insert(base.clone()) {
                let n = used.entry(base.clone()).or_insert(1);
                loop {
                    *n += 1;
                    let candidate = format!("{base}_{n}");
                    if taken.insert(candidate.clone()) {
                        tool.tool_name = candidate;
                        break;
                    }
                }
            }
            tool
        })
        .collect()
}

const PY_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
    "yield", "requests", "json", "api_url", "querystring", "payload", "headers", "response",
    "response2",
];

fn py_identifiers(args: &[ToolArg]) -> Vec<String> {
    let mut taken = HashSet::new();
    args.iter()
        .map(|a| {
            let mut id: String = a
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                .collect();
            if id.is_empty() || id.starts_with(|c: char| c.is_ascii_digit()) {
                id.insert_str(0, "p_");
            }
            if PY_KEYWORDS.contains(&id.as_str()) {
                id.push('_');
            }
            let base = id.clone();
            let mut n = 2;
            while !taken.insert(id.clone()) {
                id = format!("{base}_{n}");
                n += 1;
            }
            id
        })
        .collect()
}

fn py_single_quoted(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn py_value(v: &Scalar) -> String {
    match v {
        Scalar::Bool(true) => "True".into(),
        Scalar::Bool(false) => "False".into(),
        Scalar::Number(n) => n.to_string(),
        Scalar::String(s) if !s.contains("'''") && !s.contains('\\') && !s.ends_with('\'') => {
            format!("'''{s}'''")
        }
        Scalar::String(s) => py_single_quoted(s),
    }
}

/// The URL as a Python f-string body: literal braces doubled, placeholders
/// replaced by the argument identifiers.
fn py_url(tool: &ToolDescriptor, ids: &HashMap<&str, &str>) -> String {
    let escape = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"").replace('{', "{{").replace('}', "}}");
    let mut out = escape(&tool.template.origin);
    for seg in &tool.template.segments {
        match seg {
            crate::template::Segment::Literal(t) => out.push_str(&escape(t)),
            crate::template::Segment::PathParam(n) => {
                let _ = write!(out, "{{{}}}", ids.get(n.as_str()).copied().unwrap_or(n.as_str()));
            }
        }
    }
    if let Some(q) = &tool.template.query_base {
        out.push('?');
        out.push_str(&escape(q));
    }
    out
}

/// Renders the descriptor as a self-contained script function: URL
/// construction, a parameter mapping, one assertion per required argument,
/// the request, the retry without parameters, and a `__main__` block that
/// calls it with the example values and collects the result fields.
pub fn export_function_source(tool: &ToolDescriptor) -> String {
    let ids = py_identifiers(&tool.args);
    let id_of: HashMap<&str, &str> = tool.args.iter().map(|a| a.name.as_str()).zip(ids.iter().map(String::as_str)).collect();
    let verb = tool.method.to_ascii_lowercase();
    let dict_name = if tool.sends_body() { "payload" } else { "querystring" };
    let send_kw = if tool.sends_body() { "json" } else { "params" };
    let verify = if tool.verify_tls { "True" } else { "False" };

    let mut s = String::new();
    s.push_str("import requests\n\n\n");
    let signature: Vec<String> = ids.iter().map(|id| format!("{id}=None")).collect();
    let _ = writeln!(s, "def {}({}):", tool.tool_name, signature.join(", "));
    let _ = writeln!(s, "    api_url = f\"{}\"", py_url(tool, &id_of));
    let mut entries = String::new();
    for (arg, id) in tool.args.iter().zip(&ids) {
        if arg.location == ArgLocation::Query {
            let _ = write!(entries, "{}: {id}, ", py_single_quoted(&arg.name));
        }
    }
    let _ = writeln!(s, "    {dict_name} = {{{entries}}}");
    let headers: Vec<String> = tool
        .headers
        .iter()
        .filter_map(|h| match h {
            Header::Pair { name, value } => Some(format!("{}: {}", py_single_quoted(name), py_single_quoted(value))),
            Header::Raw(_) => None,
        })
        .collect();
    if !headers.is_empty() {
        let _ = writeln!(s, "    headers = {{{}}}", headers.join(", "));
    }
    for (arg, id) in tool.args.iter().zip(&ids) {
        if arg.required {
            let _ = writeln!(
                s,
                "    assert {id} is not None, {}",
                py_single_quoted(&format!("Missing required parameter: {}", arg.name))
            );
        }
    }
    s.push_str("    \n");
    let header_kw = if headers.is_empty() { "" } else { "headers=headers, " };
    let retry_verify = if tool.verify_tls { String::new() } else { format!(", verify={verify}") };
    let _ = writeln!(
        s,
        "    response = requests.{verb}(url=api_url, {send_kw}={dict_name}, {header_kw}timeout={}, verify={verify})",
        tool.timeout_seconds
    );
    s.push_str("    if response.status_code != 200:\n");
    let _ = writeln!(
        s,
        "        response2 = requests.{verb}(url=api_url, {header_kw}timeout={}{retry_verify}) # in case API can't handle redundant params",
        tool.timeout_seconds
    );
    s.push_str("        response = response2\n");
    s.push_str("    return response\n");
    s.push_str("    # print(response.json())\n\n");
    s.push_str("if __name__ == '__main__':\n");
    let call_args: Vec<String> = tool
        .args
        .iter()
        .zip(&ids)
        .filter_map(|(a, id)| a.value().map(|v| format!("{id}={}", py_value(v))))
        .collect();
    let _ = writeln!(s, "    r = {}({})", tool.tool_name, call_args.join(", "));
    s.push_str(
        "    r_json = None
    try:
        r_json = r.json()
    except:
        pass
    import json
    result_dict = dict()
    result_dict['status_code'] = r.status_code
    result_dict['text'] = r.text
    result_dict['json'] = r_json
    result_dict['content'] = r.content.decode(\"utf-8\")
",
    );
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiDocument {
    pub openapi: String,
    pub info: OpenApiInfo,
    pub servers: Vec<OpenApiServer>,
    pub paths: BTreeMap<String, BTreeMap<String, OpenApiOperation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiInfo {
    pub title: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiServer {
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiOperation {
    #[serde(rename = "operationId")]
    pub operation_id: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub parameters: Vec<OpenApiParameter>,
    #[serde(rename = "requestBody", default, skip_serializing_if = "Option::is_none")]
    pub request_body: Option<serde_json::Value>,
    pub responses: BTreeMap<String, OpenApiResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiParameter {
    pub name: String,
    #[serde(rename = "in")]
    pub location: String,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub schema: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiResponse {
    pub description: String,
}

fn openapi_schema(arg: &ToolArg) -> serde_json::Value {
    let ty = match arg.type_hint.as_deref().map(canonical_type).as_deref() {
        Some("integer") => "integer",
        Some("number") => "number",
        Some("boolean") => "boolean",
        Some("array") | Some("list") => "array",
        Some("object") | Some("dict") => "object",
        _ => "string",
    };
    let mut schema = serde_json::json!({"type": ty});
    if ty == "array" {
        schema["items"] = serde_json::json!({"type": "string"});
    }
    if let Some(v) = &arg.example_value {
        schema["example"] = v.to_json();
    }
    if let Some(v) = &arg.default_value {
        schema["default"] = v.to_json();
    }
    schema
}

/// Builds the OpenAPI document for tools that share one scheme and host.
pub fn openapi_document(tools: &[ToolDescriptor]) -> Result<OpenApiDocument, ToolgenError> {
    let first = tools.first().ok_or(ToolgenError::Empty)?;
    for t in tools {
        if !t.template.has_scheme() {
            return Err(ToolgenError::MissingBaseUrl(t.tool_name.clone()));
        }
    }
    let origins: BTreeMap<&str, ()> = tools.iter().map(|t| (t.template.origin.as_str(), ())).collect();
    if origins.len() > 1 {
        return Err(ToolgenError::MixedHosts(origins.keys().map(|s| s.to_string()).collect()));
    }
    let mut paths: BTreeMap<String, BTreeMap<String, OpenApiOperation>> = BTreeMap::new();
    for t in tools {
        let mut path = t.template.canonical_path();
        if path.is_empty() {
            path = "/".into();
        }
        let mut parameters = Vec::new();
        let mut body_props = serde_json::Map::new();
        let mut body_required = Vec::new();
        for a in &t.args {
            match a.location {
                ArgLocation::Path => parameters.push(OpenApiParameter {
                    name: a.name.clone(),
                    location: "path".into(),
                    required: true,
                    description: a.description.clone(),
                    schema: openapi_schema(a),
                }),
                ArgLocation::Query if t.sends_body() => {
                    let mut schema = openapi_schema(a);
                    if let Some(d) = &a.description {
                        schema["description"] = d.clone().into();
                    }
                    body_props.insert(a.name.clone(), schema);
                    if a.required {
                        body_required.push(serde_json::Value::String(a.name.clone()));
                    }
                }
                ArgLocation::Query => parameters.push(OpenApiParameter {
                    name: a.name.clone(),
                    location: "query".into(),
                    required: a.required,
                    description: a.description.clone(),
                    schema: openapi_schema(a),
                }),
            }
        }
        for h in &t.headers {
            if let Header::Pair { name, value } = h {
                parameters.push(OpenApiParameter {
                    name: name.clone(),
                    location: "header".into(),
                    required: false,
                    description: None,
                    schema: serde_json::json!({"type": "string", "default": value}),
                });
            }
        }
        let request_body = (!body_props.is_empty()).then(|| {
            serde_json::json!({
                "required": !body_required.is_empty(),
                "content": {"application/json": {"schema": {
                    "type": "object",
                    "properties": body_props,
                    "required": body_required,
                }}}
            })
        });
        let op = OpenApiOperation {
            operation_id: t.tool_name.clone(),
            summary: t.endpoint_name.clone(),
            description: Some(t.description.clone()),
            parameters,
            request_body,
            responses: BTreeMap::from([("200".to_string(), OpenApiResponse { description: "Successful response".into() })]),
        };
        let ops = paths.entry(path).or_default();
        let verb = t.method.to_ascii_lowercase();
        if ops.contains_key(&verb) {
            log::warn!("{}: duplicate {} operation on one path, keeping the first", t.tool_name, t.method);
            continue;
        }
        ops.insert(verb, op);
    }
    Ok(OpenApiDocument {
        openapi: "3.0.3".into(),
        info: OpenApiInfo {
            title: first.template.host().unwrap_or_default().to_string(),
            version: "1.0.0".into(),
        },
        servers: vec![OpenApiServer { url: first.template.origin.clone() }],
        paths,
    })
}

/// YAML for tools that share one scheme and host.
pub fn export_openapi(tools: &[ToolDescriptor]) -> Result<String, ToolgenError> {
    let doc = openapi_document(tools)?;
    serde_yaml::to_string(&doc).map_err(|e| ToolgenError::Yaml(e.to_string()))
}

/// Groups tools by origin and exports one document per host. Tools without
/// a base URL are returned by name instead.
pub fn export_openapi_by_host(tools: &[ToolDescriptor]) -> (BTreeMap<String, String>, Vec<String>) {
    let mut groups: BTreeMap<String, Vec<ToolDescriptor>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for t in tools {
        match t.template.host() {
            Some(host) => groups.entry(host.to_string()).or_default().push(t.clone()),
            None => skipped.push(t.tool_name.clone()),
        }
    }
    let mut out = BTreeMap::new();
    for (host, group) in groups {
        // one host may still be served over two schemes
        let mut by_origin: BTreeMap<String, Vec<ToolDescriptor>> = BTreeMap::new();
        for t in group {
            by_origin.entry(t.template.origin.clone()).or_default().push(t);
        }
        for (i, (_, tools)) in by_origin.into_iter().enumerate() {
            let key = if i == 0 { host.clone() } else { format!("{host}_{}", i + 1) };
            match export_openapi(&tools) {
                Ok(yaml) => {
                    out.insert(key, yaml);
                }
                Err(e) => log::warn!("{host}: {e}"),
            }
        }
    }
    (out, skipped)
}
