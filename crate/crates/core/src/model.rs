//! Typed form of the extraction schema: an API is a title plus a list of
//! endpoints, each endpoint a method, URL and two parameter lists.
//!
//! Documents coming out of extractors are noisy, so [`validate_spec`] works
//! on an untyped [`serde_json::Value`] tree and reports every violation with
//! the path at which it was found instead of stopping at the first one.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// A default or example value. Stored as typed JSON scalars and rendered as
/// strings when a request is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(serde_json::Number),
    String(String),
}

impl Scalar {
    /// Converts an arbitrary JSON value. `null` maps to `None`; arrays and
    /// objects are kept as their compact JSON text.
    pub fn from_json(value: &Value) -> Option<Scalar> {
        match value {
            Value::Null => None,
            Value::Bool(b) => Some(Scalar::Bool(*b)),
            Value::Number(n) => Some(Scalar::Number(n.clone())),
            Value::String(s) => Some(Scalar::String(s.clone())),
            other => Some(Scalar::String(other.to_string())),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Scalar::Bool(b) => Value::Bool(*b),
            Scalar::Number(n) => Value::Number(n.clone()),
            Scalar::String(s) => Value::String(s.clone()),
        }
    }

    /// The request-time string form.
    pub fn render(&self) -> String {
        match self {
            Scalar::Bool(b) => b.to_string(),
            Scalar::Number(n) => n.to_string(),
            Scalar::String(s) => s.clone(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::String(s.to_string())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::String(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    #[serde(rename = "type")]
    pub type_hint: Option<String>,
    pub description: Option<String>,
    #[serde(rename = "default")]
    pub default_value: Option<Scalar>,
    #[serde(rename = "example")]
    pub example_value: Option<Scalar>,
}

impl Parameter {
    pub fn named(name: impl Into<String>) -> Self {
        Parameter {
            name: name.into(),
            type_hint: None,
            description: None,
            default_value: None,
            example_value: None,
        }
    }
}

/// The `url` field may hold one URL or several alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UrlField {
    One(String),
    Many(Vec<String>),
}

impl UrlField {
    pub fn primary(&self) -> &str {
        match self {
            UrlField::One(u) => u,
            UrlField::Many(us) => us.first().map(String::as_str).unwrap_or(""),
        }
    }

    pub fn alternates(&self) -> &[String] {
        match self {
            UrlField::One(_) => &[],
            UrlField::Many(us) if us.len() > 1 => &us[1..],
            UrlField::Many(_) => &[],
        }
    }
}

impl From<&str> for UrlField {
    fn from(s: &str) -> Self {
        UrlField::One(s.to_string())
    }
}

pub const STANDARD_METHODS: &[&str] = &[
    "GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS", "TRACE", "CONNECT",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub name: String,
    pub description: Option<String>,
    pub method: String,
    pub url: UrlField,
    #[serde(default)]
    pub headers: Vec<String>,
    #[serde(default)]
    pub required_parameters: Vec<Parameter>,
    #[serde(default)]
    pub optional_parameters: Vec<Parameter>,
}

impl Endpoint {
    pub fn new(name: impl Into<String>, method: &str, url: &str) -> Self {
        Endpoint {
            name: name.into(),
            description: None,
            method: normalize_method(method),
            url: UrlField::One(url.to_string()),
            headers: Vec::new(),
            required_parameters: Vec::new(),
            optional_parameters: Vec::new(),
        }
    }

    /// False for verbs outside the standard HTTP set. Such verbs are kept.
    pub fn method_is_standard(&self) -> bool {
        STANDARD_METHODS.contains(&self.method.as_str())
    }

    /// Required parameters first, then optional ones.
    pub fn parameters(&self) -> impl Iterator<Item = (&Parameter, bool)> {
        self.required_parameters
            .iter()
            .map(|p| (p, true))
            .chain(self.optional_parameters.iter().map(|p| (p, false)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub title: Option<String>,
    pub endpoints: Vec<Endpoint>,
}

impl ApiSpec {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("ApiSpec is always representable as JSON")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ApiSpec is always representable as JSON")
    }

    /// Parses and validates a JSON document.
    pub fn from_json_str(text: &str) -> Result<ApiSpec, Vec<SchemaViolation>> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            vec![SchemaViolation::InvalidValue {
                path: String::new(),
                reason: format!("not JSON: {e}"),
            }]
        })?;
        validate_spec(&value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SchemaViolation {
    #[error("missing required field `{path}`")]
    MissingRequiredField { path: String },
    #[error("`{path}` should be {expected}")]
    WrongValueKind { path: String, expected: String },
    #[error("document root is not an object")]
    NotAnObject,
    #[error("invalid value at `{path}`: {reason}")]
    InvalidValue { path: String, reason: String },
}

impl SchemaViolation {
    pub fn path(&self) -> &str {
        match self {
            SchemaViolation::MissingRequiredField { path }
            | SchemaViolation::WrongValueKind { path, .. }
            | SchemaViolation::InvalidValue { path, .. } => path,
            SchemaViolation::NotAnObject => "",
        }
    }
}

pub fn normalize_method(method: &str) -> String {
    method.trim().to_ascii_uppercase()
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn index(parent: &str, i: usize) -> String {
    format!("{parent}[{i}]")
}

struct Checker {
    violations: Vec<SchemaViolation>,
}

impl Checker {
    fn wrong(&mut self, path: String, expected: &str) {
        self.violations.push(SchemaViolation::WrongValueKind {
            path,
            expected: expected.to_string(),
        });
    }

    fn missing(&mut self, path: String) {
        self.violations
            .push(SchemaViolation::MissingRequiredField { path });
    }

    fn invalid(&mut self, path: String, reason: impl Into<String>) {
        self.violations.push(SchemaViolation::InvalidValue {
            path,
            reason: reason.into(),
        });
    }

    fn optional_string(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Option<String> {
        match obj.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.wrong(join(parent, key), "a string");
                None
            }
        }
    }

    fn required_string(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Option<String> {
        match obj.get(key) {
            None | Some(Value::Null) => {
                self.missing(join(parent, key));
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.wrong(join(parent, key), "a string");
                None
            }
        }
    }

    fn api(&mut self, obj: &Map<String, Value>, path: &str) -> Option<ApiSpec> {
        let title = self.optional_string(obj, path, "title");
        let endpoints = match obj.get("endpoints") {
            None => {
                self.missing(join(path, "endpoints"));
                return None;
            }
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.wrong(join(path, "endpoints"), "an array");
                return None;
            }
        };
        let base = join(path, "endpoints");
        let parsed: Vec<Option<Endpoint>> = endpoints
            .iter()
            .enumerate()
            .map(|(i, e)| self.endpoint(e, &index(&base, i)))
            .collect();
        let endpoints = parsed.into_iter().collect::<Option<Vec<_>>>()?;
        Some(ApiSpec { title, endpoints })
    }

    fn endpoint(&mut self, value: &Value, path: &str) -> Option<Endpoint> {
        let Value::Object(obj) = value else {
            self.wrong(path.to_string(), "an object");
            return None;
        };
        let before = self.violations.len();
        let name = self.required_string(obj, path, "name");
        let description = self.optional_string(obj, path, "description");
        let method = self.required_string(obj, path, "method").and_then(|m| {
            let m = normalize_method(&m);
            if m.is_empty() {
                self.invalid(join(path, "method"), "empty method");
                None
            } else {
                Some(m)
            }
        });
        let url = match obj.get("url") {
            None | Some(Value::Null) => {
                self.missing(join(path, "url"));
                None
            }
            Some(Value::String(s)) => Some(UrlField::One(s.clone())),
            Some(Value::Array(items)) => {
                let mut urls = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::String(s) => urls.push(s.clone()),
                        _ => self.wrong(index(&join(path, "url"), i), "a string"),
                    }
                }
                if items.is_empty() {
                    self.invalid(join(path, "url"), "empty URL list");
                }
                Some(UrlField::Many(urls))
            }
            Some(_) => {
                self.wrong(join(path, "url"), "a string or an array of strings");
                None
            }
        };
        let headers = match obj.get("headers") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::String(s) => out.push(s.clone()),
                        _ => self.wrong(index(&join(path, "headers"), i), "a string"),
                    }
                }
                out
            }
            Some(_) => {
                self.wrong(join(path, "headers"), "an array of strings");
                Vec::new()
            }
        };
        let required_parameters = self.parameter_list(obj, path, "required_parameters");
        let optional_parameters = self.parameter_list(obj, path, "optional_parameters");

        let required_names: HashSet<&str> =
            required_parameters.iter().map(|p| p.name.as_str()).collect();
        for (i, p) in optional_parameters.iter().enumerate() {
            if required_names.contains(p.name.as_str()) {
                self.invalid(
                    join(&index(&join(path, "optional_parameters"), i), "name"),
                    format!("`{}` is also listed as required", p.name),
                );
            }
        }

        if self.violations.len() > before {
            return None;
        }
        Some(Endpoint {
            name: name?,
            description,
            method: method?,
            url: url?,
            headers,
            required_parameters,
            optional_parameters,
        })
    }

    fn parameter_list(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Vec<Parameter> {
        let path = join(parent, key);
        match obj.get(key) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| self.parameter(v, &index(&path, i)))
                .collect(),
            Some(_) => {
                self.wrong(path, "an array");
                Vec::new()
            }
        }
    }

    fn parameter(&mut self, value: &Value, path: &str) -> Option<Parameter> {
        let Value::Object(obj) = value else {
            self.wrong(path.to_string(), "an object");
            return None;
        };
        let name = self.required_string(obj, path, "name").and_then(|n| {
            let n = n.trim().to_string();
            if n.is_empty() {
                self.invalid(join(path, "name"), "empty parameter name");
                None
            } else if n.chars().any(char::is_whitespace) {
                self.invalid(join(path, "name"), "parameter name contains whitespace");
                None
            } else {
                Some(n)
            }
        });
        let type_hint = self.optional_string(obj, path, "type");
        let description = self.optional_string(obj, path, "description");
        let default_value = obj.get("default").and_then(Scalar::from_json);
        let example_value = obj.get("example").and_then(Scalar::from_json);
        Some(Parameter {
            name: name?,
            type_hint,
            description,
            default_value,
            example_value,
        })
    }
}

/// Validates an untyped document against the extraction schema.
///
/// Both the bare API object (`{"title": .., "endpoints": [..]}`) and the
/// wrapped form (`{"API": {..}}`) are accepted. Unknown fields are dropped.
pub fn validate_spec(document: &Value) -> Result<ApiSpec, Vec<SchemaViolation>> {
    let Value::Object(root) = document else {
        return Err(vec![SchemaViolation::NotAnObject]);
    };
    let mut checker = Checker {
        violations: Vec::new(),
    };
    let spec = match root.get("API") {
        Some(Value::Object(api)) => checker.api(api, "API"),
        Some(_) => {
            checker.wrong("API".to_string(), "an object");
            None
        }
        None => checker.api(root, ""),
    };
    match spec {
        Some(spec) if checker.violations.is_empty() => Ok(spec),
        _ => Err(checker.violations),
    }
}

/// Normalized endpoint URL with the signals used by outcome classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedUrl {
    pub primary: String,
    pub alternates: Vec<String>,
    pub has_scheme: bool,
    pub path_is_empty: bool,
}

pub fn has_http_scheme(url: &str) -> bool {
    let lower = url.trim_start().to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://")
}

fn collapse_slashes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev_slash = false;
    for c in s.chars() {
        if c == '/' {
            if !prev_slash {
                out.push(c);
            }
            prev_slash = true;
        } else {
            out.push(c);
            prev_slash = false;
        }
    }
    out
}

/// Collapses repeated slashes in the path (the query and fragment are left
/// alone) and trims surrounding whitespace.
pub fn normalize_url(url: &str) -> String {
    let url = url.trim();
    let (scheme, rest) = match url.find("://") {
        Some(pos) if has_http_scheme(url) => (&url[..pos + 3], &url[pos + 3..]),
        _ => ("", url),
    };
    let split = rest.find(['?', '#']).unwrap_or(rest.len());
    let (path, tail) = rest.split_at(split);
    format!("{scheme}{}{tail}", collapse_slashes(path))
}

/// Path component of a normalized URL, without query or fragment.
pub fn url_path(url: &str) -> &str {
    let rest = if has_http_scheme(url) {
        let after = &url[url.find("://").map(|p| p + 3).unwrap_or(0)..];
        match after.find(['/', '?', '#']) {
            Some(p) => &after[p..],
            None => "",
        }
    } else {
        url
    };
    let end = rest.find(['?', '#']).unwrap_or(rest.len());
    &rest[..end]
}

pub fn resolve_url_str(url: &str) -> ResolvedUrl {
    let primary = normalize_url(url);
    let path = url_path(&primary);
    ResolvedUrl {
        has_scheme: has_http_scheme(&primary),
        path_is_empty: path.is_empty() || path == "/",
        primary,
        alternates: Vec::new(),
    }
}

pub fn resolve_url(endpoint: &Endpoint) -> ResolvedUrl {
    let mut resolved = resolve_url_str(endpoint.url.primary());
    resolved.alternates = endpoint
        .url
        .alternates()
        .iter()
        .map(|u| normalize_url(u))
        .collect();
    resolved
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    pub(crate) fn pokemon_json() -> Value {
        json!({
            "title": "Pok\u{e9}mon TCG API Documentation",
            "endpoints": [{
                "name": "Search Cards",
                "description": "Perform advanced search queries to find cards by name, type, release date, legality, and more.",
                "method": "GET",
                "url": "https://api.pokemontcg.io/v2/cards",
                "headers": [],
                "required_parameters": [{
                    "name": "q",
                    "type": "string",
                    "description": "The search query using Lucene-like syntax.",
                    "default": null,
                    "example": "name:gardevoir"
                }],
                "optional_parameters": []
            }]
        })
    }

    #[test]
    fn pokemon_document_validates() {
        let spec = validate_spec(&pokemon_json()).unwrap();
        assert_eq!(spec.endpoints.len(), 1);
        let ep = &spec.endpoints[0];
        assert_eq!(ep.name, "Search Cards");
        assert_eq!(ep.method, "GET");
        assert_eq!(ep.required_parameters.len(), 1);
        assert_eq!(ep.required_parameters[0].name, "q");
        assert_eq!(
            ep.required_parameters[0].example_value,
            Some(Scalar::from("name:gardevoir"))
        );
        assert_eq!(ep.required_parameters[0].default_value, None);
    }

    #[test]
    fn missing_method_is_reported_with_path() {
        let doc = json!({"endpoints": [{"name": "x", "url": "https://a.example/x"}]});
        let errs = validate_spec(&doc).unwrap_err();
        assert_eq!(
            errs,
            vec![SchemaViolation::MissingRequiredField {
                path: "endpoints[0].method".into()
            }]
        );
    }

    #[test]
    fn wrapped_empty_api_is_valid() {
        let spec = validate_spec(&json!({"API": {"endpoints": []}})).unwrap();
        assert!(spec.endpoints.is_empty());
        assert_eq!(spec.title, None);
    }

    #[test]
    fn wrapped_paths_carry_prefix() {
        let doc = json!({"API": {"endpoints": [{"name": "x", "method": "GET"}]}});
        let errs = validate_spec(&doc).unwrap_err();
        assert_eq!(errs[0].path(), "API.endpoints[0].url");
    }

    #[test]
    fn root_must_be_object() {
        assert_eq!(
            validate_spec(&json!([1, 2])).unwrap_err(),
            vec![SchemaViolation::NotAnObject]
        );
    }

    #[test]
    fn missing_endpoints_field() {
        let errs = validate_spec(&json!({"title": "x"})).unwrap_err();
        assert_eq!(errs[0].path(), "endpoints");
    }

    #[test]
    fn collects_every_violation() {
        let doc = json!({"endpoints": [
            {"name": 3, "method": "GET", "url": "u"},
            {"method": "GET", "url": ["a", 7]},
        ]});
        let errs = validate_spec(&doc).unwrap_err();
        let paths: Vec<_> = errs.iter().map(|e| e.path().to_string()).collect();
        assert_eq!(paths, vec!["endpoints[0].name", "endpoints[1].name", "endpoints[1].url[1]"]);
    }

    #[test]
    fn parameter_in_both_lists_rejected() {
        let doc = json!({"endpoints": [{
            "name": "x", "method": "get", "url": "https://a/x",
            "required_parameters": [{"name": "id"}],
            "optional_parameters": [{"name": "id"}],
        }]});
        let errs = validate_spec(&doc).unwrap_err();
        assert_eq!(errs[0].path(), "endpoints[0].optional_parameters[0].name");
    }

    #[test]
    fn parameter_name_rules() {
        let doc = json!({"endpoints": [{
            "name": "x", "method": "get", "url": "https://a/x",
            "required_parameters": [{"name": "  id "}, {"name": "a b"}, {"name": ""}],
        }]});
        let errs = validate_spec(&doc).unwrap_err();
        assert_eq!(errs.len(), 2);
        let doc = json!({"endpoints": [{
            "name": "x", "method": "get", "url": "https://a/x",
            "required_parameters": [{"name": "  id "}],
        }]});
        let spec = validate_spec(&doc).unwrap();
        assert_eq!(spec.endpoints[0].required_parameters[0].name, "id");
    }

    #[test]
    fn extras_dropped_and_method_normalized() {
        let doc = json!({"title": "t", "extra": 1, "endpoints": [{
            "name": "x", "method": " fetch ", "url": ["https://a/x", "https://b/x"],
            "weird": true,
            "optional_parameters": [{"name": "n", "example": 5, "default": [1, 2]}],
        }]});
        let spec = validate_spec(&doc).unwrap();
        let ep = &spec.endpoints[0];
        assert_eq!(ep.method, "FETCH");
        assert!(!ep.method_is_standard());
        let p = &ep.optional_parameters[0];
        assert_eq!(p.example_value, Some(Scalar::Number(5.into())));
        assert_eq!(p.default_value, Some(Scalar::from("[1,2]")));
        let again = validate_spec(&spec.to_json()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn resolve_flags() {
        let r = resolve_url_str("https://api.pokemontcg.io/v2/cards");
        assert!(r.has_scheme);
        assert!(!r.path_is_empty);
        let r = resolve_url_str("/v2/cards");
        assert!(!r.has_scheme);
        assert!(!r.path_is_empty);
        let r = resolve_url_str("https://a.example//v2");
        assert_eq!(r.primary, "https://a.example/v2");
        let r = resolve_url_str("https://a.example/");
        assert!(r.path_is_empty);
        let r = resolve_url_str("https://a.example?x=1//2");
        assert!(r.path_is_empty);
        assert_eq!(r.primary, "https://a.example?x=1//2");
    }

    #[test]
    fn url_array_uses_first_as_primary() {
        let mut ep = Endpoint::new("x", "GET", "");
        ep.url = UrlField::Many(vec!["https://a//x".into(), "https://b//y".into()]);
        let r = resolve_url(&ep);
        assert_eq!(r.primary, "https://a/x");
        assert_eq!(r.alternates, vec!["https://b/y".to_string()]);
    }
}
