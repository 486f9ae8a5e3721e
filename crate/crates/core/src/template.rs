//! URL templates with path placeholders.
//!
//! Documentation writes path parameters as `{id}`, `:id` or `<id>`. All three
//! parse to the same [`Segment::PathParam`] and render back in the `{id}`
//! form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::encode_component;
use crate::model::has_http_scheme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Segment {
    Literal(String),
    PathParam(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlTemplate {
    pub raw: String,
    /// Scheme and authority, e.g. `https://api.example.com:8080`. Empty when
    /// the URL has no scheme.
    pub origin: String,
    pub segments: Vec<Segment>,
    pub query_base: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("malformed URL `{url}`: {reason}")]
    MalformedUrl { url: String, reason: String },
    #[error("no value bound for path parameter `{0}`")]
    UnboundPathParam(String),
}

fn malformed(url: &str, reason: &str) -> TemplateError {
    TemplateError::MalformedUrl {
        url: url.to_string(),
        reason: reason.to_string(),
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn push_literal(segments: &mut Vec<Segment>, text: &str) {
    if text.is_empty() {
        return;
    }
    if let Some(Segment::Literal(prev)) = segments.last_mut() {
        prev.push_str(text);
    } else {
        segments.push(Segment::Literal(text.to_string()));
    }
}

fn check_name(url: &str, name: &str) -> Result<String, TemplateError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(malformed(url, "empty placeholder"));
    }
    if name.contains(['/', '{', '}', '<', '>', '?']) {
        return Err(malformed(url, "placeholder spans a path separator"));
    }
    Ok(name.to_string())
}

pub fn parse_url_template(url: &str) -> Result<UrlTemplate, TemplateError> {
    let trimmed = url.trim();
    if trimmed.is_empty() {
        return Err(malformed(url, "empty URL"));
    }
    let without_fragment = trimmed.split('#').next().unwrap_or_default();
    let (base, query_base) = match without_fragment.split_once('?') {
        Some((b, q)) => (b, Some(q.to_string())),
        None => (without_fragment, None),
    };
    let (origin, path) = if has_http_scheme(base) {
        let after_scheme = base.find("://").map(|p| p + 3).unwrap_or(0);
        match base[after_scheme..].find('/') {
            Some(p) => base.split_at(after_scheme + p),
            None => (base, ""),
        }
    } else {
        ("", base)
    };

    let mut segments = Vec::new();
    let chars: Vec<char> = path.chars().collect();
    let mut literal = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '{' | '<' => {
                let close = if c == '{' { '}' } else { '>' };
                let end = chars[i + 1..]
                    .iter()
                    .position(|&d| d == close)
                    .ok_or_else(|| malformed(url, "unbalanced placeholder"))?;
                let name: String = chars[i + 1..i + 1 + end].iter().collect();
                let name = check_name(url, &name)?;
                push_literal(&mut segments, &literal);
                literal.clear();
                segments.push(Segment::PathParam(name));
                i += end + 2;
            }
            '}' | '>' => return Err(malformed(url, "unbalanced placeholder")),
            ':' if (i == 0 || chars[i - 1] == '/')
                && chars.get(i + 1).copied().is_some_and(is_name_start) =>
            {
                let len = chars[i + 1..]
                    .iter()
                    .take_while(|&&d| is_name_char(d))
                    .count();
                let name: String = chars[i + 1..i + 1 + len].iter().collect();
                push_literal(&mut segments, &literal);
                literal.clear();
                segments.push(Segment::PathParam(name));
                i += len + 1;
            }
            _ => {
                literal.push(c);
                i += 1;
            }
        }
    }
    push_literal(&mut segments, &literal);

    Ok(UrlTemplate {
        raw: url.to_string(),
        origin: origin.to_string(),
        segments,
        query_base,
    })
}

impl UrlTemplate {
    /// A literal-only template; used when the raw URL cannot be parsed.
    pub fn literal(url: &str) -> UrlTemplate {
        UrlTemplate {
            raw: url.to_string(),
            origin: String::new(),
            segments: if url.is_empty() {
                Vec::new()
            } else {
                vec![Segment::Literal(url.to_string())]
            },
            query_base: None,
        }
    }

    /// Placeholder names, deduplicated, in order of first appearance.
    pub fn path_params(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.segments {
            if let Segment::PathParam(n) = s {
                if !out.contains(&n.as_str()) {
                    out.push(n);
                }
            }
        }
        out
    }

    pub fn has_scheme(&self) -> bool {
        !self.origin.is_empty()
    }

    /// Host and port, when the template carries a scheme.
    pub fn host(&self) -> Option<&str> {
        let pos = self.origin.find("://")?;
        Some(&self.origin[pos + 3..])
    }

    /// The path in `{name}` placeholder form.
    pub fn canonical_path(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Literal(t) => t.clone(),
                Segment::PathParam(n) => format!("{{{n}}}"),
            })
            .collect()
    }

    /// The whole URL with every placeholder in `{name}` form.
    pub fn canonical(&self) -> String {
        let mut out = format!("{}{}", self.origin, self.canonical_path());
        if let Some(q) = &self.query_base {
            out.push('?');
            out.push_str(q);
        }
        out
    }

    /// Path with placeholder names erased and trailing slashes dropped, so
    /// `/users/:id/` and `/users/{user_id}` compare equal.
    pub fn path_shape(&self) -> String {
        let shape: String = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Literal(t) => t.as_str(),
                Segment::PathParam(_) => "{}",
            })
            .collect();
        let trimmed = shape.trim_end_matches('/');
        if trimmed.is_empty() {
            "/".to_string()
        } else if trimmed.starts_with('/') {
            trimmed.to_string()
        } else {
            format!("/{trimmed}")
        }
    }

    /// Substitutes every placeholder. Values are percent-encoded; the
    /// template's own query string is kept verbatim.
    pub fn render<F>(&self, mut lookup: F) -> Result<String, TemplateError>
    where
        F: FnMut(&str) -> Option<String>,
    {
        let mut out = self.origin.clone();
        for s in &self.segments {
            match s {
                Segment::Literal(t) => out.push_str(t),
                Segment::PathParam(n) => {
                    let v = lookup(n).ok_or_else(|| TemplateError::UnboundPathParam(n.clone()))?;
                    out.push_str(&encode_component(&v));
                }
            }
        }
        if let Some(q) = &self.query_base {
            out.push('?');
            out.push_str(q);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_syntaxes_agree() {
        let a = parse_url_template("https://a.example/users/{id}/posts").unwrap();
        let b = parse_url_template("https://a.example/users/:id/posts").unwrap();
        let c = parse_url_template("https://a.example/users/<id>/posts").unwrap();
        assert_eq!(a.path_params(), vec!["id"]);
        assert_eq!(a.segments, b.segments);
        assert_eq!(a.segments, c.segments);
        assert_eq!(b.canonical(), "https://a.example/users/{id}/posts");
    }

    #[test]
    fn no_params() {
        let t = parse_url_template("https://a.example/v2/cards").unwrap();
        assert!(t.path_params().is_empty());
        assert_eq!(t.host(), Some("a.example"));
        assert_eq!(t.canonical_path(), "/v2/cards");
    }

    #[test]
    fn port_and_scheme_colons_are_not_params() {
        let t = parse_url_template("http://127.0.0.1:8080/v1/x:y/:id?q=a:b").unwrap();
        assert_eq!(t.path_params(), vec!["id"]);
        assert_eq!(t.origin, "http://127.0.0.1:8080");
        assert_eq!(t.query_base.as_deref(), Some("q=a:b"));
    }

    #[test]
    fn duplicate_names_deduplicated() {
        let t = parse_url_template("https://a/{id}/x/{id}").unwrap();
        assert_eq!(t.path_params(), vec!["id"]);
    }

    #[test]
    fn malformed() {
        assert!(parse_url_template("").is_err());
        assert!(parse_url_template("https://a/{id").is_err());
        assert!(parse_url_template("https://a/id}").is_err());
        assert!(parse_url_template("https://a/{}").is_err());
    }

    #[test]
    fn schemeless_template() {
        let t = parse_url_template("/v2/cards/:id").unwrap();
        assert!(!t.has_scheme());
        assert_eq!(t.path_params(), vec!["id"]);
    }

    #[test]
    fn render_encodes_values() {
        let t = parse_url_template("https://a/items/{id}").unwrap();
        let url = t.render(|_| Some("a b/c".to_string())).unwrap();
        assert_eq!(url, "https://a/items/a%20b%2Fc");
        assert_eq!(
            t.render(|_| None),
            Err(TemplateError::UnboundPathParam("id".into()))
        );
    }

    #[test]
    fn path_shape_ignores_names() {
        let a = parse_url_template("/users/:id/").unwrap();
        let b = parse_url_template("https://x/users/{user_id}").unwrap();
        assert_eq!(a.path_shape(), b.path_shape());
        assert_eq!(parse_url_template("https://x").unwrap().path_shape(), "/");
    }
}
