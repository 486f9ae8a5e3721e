//! Scoring extracted specs against ground truth.
//!
//! Three groups of metrics: structural (valid ratio), semantic (embedding
//! similarity of names and descriptions) and functional (method accuracy,
//! parameter precision/recall, parameter type accuracy). Endpoint-level
//! metrics are computed over matched endpoint pairs only.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_similarity, EmbedError, EmbeddingProvider};
use crate::extract::ExtractionResult;
use crate::model::{normalize_url, ApiSpec, Endpoint};
use crate::template::{parse_url_template, UrlTemplate};

/// Name-similarity threshold for matching endpoints whose URLs differ.
pub const MATCH_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no extraction results to score")]
    EmptyCorpus,
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

/// Maps type spellings onto one name per class: `str`/`string`,
/// `int`/`integer`, `float`/`double`/`number`, `bool`/`boolean`. Anything
/// else is lowercased and compared verbatim.
pub fn canonical_type(type_hint: &str) -> String {
    let t = type_hint.trim().to_ascii_lowercase();
    match t.as_str() {
        "str" | "string" => "string".into(),
        "int" | "integer" => "integer".into(),
        "number" | "float" | "double" => "number".into(),
        "bool" | "boolean" => "boolean".into(),
        _ => t,
    }
}

fn match_key(endpoint: &Endpoint) -> String {
    let url = normalize_url(endpoint.url.primary());
    let template = parse_url_template(&url).unwrap_or_else(|_| UrlTemplate::literal(&url));
    format!("{} {}", endpoint.method, template.path_shape())
}

/// One-to-one endpoint matching. Equal method + path shape scores 1.0;
/// otherwise the cosine of the endpoint-name embeddings is used, and pairs
/// below [`MATCH_THRESHOLD`] are never matched. Pairs are taken greedily in
/// descending score order.
pub fn match_endpoints(
    pred: &ApiSpec,
    truth: &ApiSpec,
    emb: &EmbeddingProvider,
) -> Result<Vec<(usize, usize)>, EmbedError> {
    if pred.endpoints.is_empty() || truth.endpoints.is_empty() {
        return Ok(Vec::new());
    }
    let pred_names: Vec<&str> = pred.endpoints.iter().map(|e| e.name.as_str()).collect();
    let truth_names: Vec<&str> = truth.endpoints.iter().map(|e| e.name.as_str()).collect();
    let pred_vecs = emb.embed(&pred_names)?;
    let truth_vecs = emb.embed(&truth_names)?;
    let pred_keys: Vec<String> = pred.endpoints.iter().map(match_key).collect();
    let truth_keys: Vec<String> = truth.endpoints.iter().map(match_key).collect();

    let mut scored = Vec::new();
    for (i, pk) in pred_keys.iter().enumerate() {
        for (j, tk) in truth_keys.iter().enumerate() {
            let score = if pk == tk {
                1.0
            } else {
                cosine_similarity(&pred_vecs[i], &truth_vecs[j])?
            };
            if score >= MATCH_THRESHOLD {
                scored.push((score, i, j));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pred = vec![false; pred.endpoints.len()];
    let mut used_truth = vec![false; truth.endpoints.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in scored {
        if !used_pred[i] && !used_truth[j] {
            used_pred[i] = true;
            used_truth[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointScore {
    pub source_id: String,
    pub pred_index: usize,
    pub truth_index: usize,
    pub true_positive_params: usize,
    pub predicted_params: usize,
    pub truth_params: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub valid_ratio: f64,
    pub matched_endpoints: usize,
    pub name_similarity: f64,
    pub description_similarity: f64,
    pub method_accuracy: f64,
    pub param_precision: f64,
    pub param_recall: f64,
    pub param_description_similarity: f64,
    pub type_accuracy: f64,
    /// Per matched pair, so macro averages can be derived.
    pub per_endpoint: Vec<EndpointScore>,
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn value(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Ratio with an empty denominator defined as 1 when the numerator's
/// counterpart is also empty, else 0.
fn ratio(num: usize, den: usize, other_den: usize) -> f64 {
    if den == 0 {
        if other_den == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

fn param_names(e: &Endpoint) -> BTreeSet<&str> {
    e.parameters().map(|(p, _)| p.name.as_str()).collect()
}

fn cos_text(emb: &EmbeddingProvider, a: &str, b: &str) -> Result<f64, EmbedError> {
    let v = emb.embed(&[a, b])?;
    cosine_similarity(&v[0], &v[1])
}

/// Scores extraction results against ground truth keyed by source id.
/// Results are reduced in source-id order, so the report does not depend
/// on the order they are passed in.
pub fn compute_metrics(
    results: &[ExtractionResult],
    truth: &HashMap<String, ApiSpec>,
    emb: &EmbeddingProvider,
) -> Result<MetricsReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut ordered: Vec<&ExtractionResult> = results.iter().collect();
    ordered.sort_by(|a, b| a.source_id.cmp(&b.source_id).then_with(|| a.raw_output.cmp(&b.raw_output)));

    let valid = ordered.iter().filter(|r| r.valid).count();
    let mut name_sim = Mean::default();
    let mut desc_sim = Mean::default();
    let mut method = Mean::default();
    let mut param_desc = Mean::default();
    let mut types = Mean::default();
    let (mut tp, mut n_pred, mut n_truth) = (0usize, 0usize, 0usize);
    let mut per_endpoint = Vec::new();

    for result in ordered {
        let (Some(pred), Some(gold)) = (result.spec.as_ref().filter(|_| result.valid), truth.get(&result.source_id)) else {
            continue;
        };
        for (pi, ti) in match_endpoints(pred, gold, emb)? {
            let p = &pred.endpoints[pi];
            let t = &gold.endpoints[ti];
            name_sim.push(cos_text(emb, &p.name, &t.name)?);
            if let Some(td) = &t.description {
                desc_sim.push(cos_text(emb, p.description.as_deref().unwrap_or(""), td)?);
            }
            method.push(if p.method == t.method { 1.0 } else { 0.0 });

            let pn = param_names(p);
            let tn = param_names(t);
            let hits = pn.intersection(&tn).count();
            tp += hits;
            n_pred += pn.len();
            n_truth += tn.len();
            per_endpoint.push(EndpointScore {
                source_id: result.source_id.clone(),
                pred_index: pi,
                truth_index: ti,
                true_positive_params: hits,
                predicted_params: pn.len(),
                truth_params: tn.len(),
                precision: ratio(hits, pn.len(), tn.len()),
                recall: ratio(hits, tn.len(), pn.len()),
            });

            for (tp_param, _) in t.parameters() {
                let Some((pp, _)) = p.parameters().find(|(pp, _)| pp.name == tp_param.name) else {
                    continue;
                };
                if let Some(td) = &tp_param.description {
                    param_desc.push(cos_text(emb, pp.description.as_deref().unwrap_or(""), td)?);
                }
                if let Some(tt) = &tp_param.type_hint {
                    let same = pp.type_hint.as_deref().map(canonical_type) == Some(canonical_type(tt));
                    types.push(if same { 1.0 } else { 0.0 });
                }
            }
        }
    }

    Ok(MetricsReport {
        valid_ratio: valid as f64 / results.len() as f64,
        matched_endpoints: per_endpoint.len(),
        name_similarity: name_sim.value(),
        description_similarity: desc_sim.value(),
        method_accuracy: method.value(),
        param_precision: ratio(tp, n_pred, n_truth),
        param_recall: ratio(tp, n_truth, n_pred),
        param_description_similarity: param_desc.value(),
        type_accuracy: types.value(),
        per_endpoint,
    })
}

const METRIC_COLUMNS: [&str; 10] = [
    "Model",
    "Valid Ratio",
    "# Matched",
    "Name Similarity",
    "Description Similarity",
    "Method Accuracy",
    "Precision",
    "Recall",
    "Param Description Similarity",
    "Type Accuracy",
];

/// Plain-text table, one row per labelled report.
pub fn render_metrics_table(rows: &[(&str, &MetricsReport)]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, r)| {
            vec![
                label.to_string(),
                format!("{:.2}", r.valid_ratio),
                r.matched_endpoints.to_string(),
                format!("{:.2}", r.name_similarity),
                format!("{:.2}", r.description_similarity),
                format!("{:.2}", r.method_accuracy),
                format!("{:.2}", r.param_precision),
                format!("{:.2}", r.param_recall),
                format!("{:.2}", r.param_description_similarity),
                format!("{:.2}", r.type_accuracy),
            ]
        })
        .collect();
    render_table(&METRIC_COLUMNS, &cells)
}

/// Left-aligned columns separated by two spaces, with a dashed rule under
/// the header.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<width$}", width = widths[i]);
        }
        s.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::BackendKind;
    use crate::model::Parameter;

    fn endpoint(name: &str, url: &str, params: &[&str]) -> Endpoint {
        let mut e = Endpoint::new(name, "GET", url);
        e.required_parameters = params.iter().map(|p| Parameter::named(*p)).collect();
        e
    }

    fn result(id: &str, spec: Option<ApiSpec>) -> ExtractionResult {
        ExtractionResult {
            source_id: id.into(),
            raw_output: String::new(),
            valid: spec.is_some(),
            spec,
            violations: Vec::new(),
            failure: None,
            backend_kind: BackendKind::Replay,
            token_or_byte_cost: 0,
        }
    }

    #[test]
    fn canonical_types() {
        assert_eq!(canonical_type("str"), canonical_type("String"));
        assert_eq!(canonical_type("int"), canonical_type("integer"));
        assert_ne!(canonical_type("int"), canonical_type("number"));
        assert_eq!(canonical_type("double"), canonical_type("float"));
        assert_eq!(canonical_type("bool"), canonical_type("boolean"));
        assert_eq!(canonical_type("Array"), "array");
    }

    #[test]
    fn identical_specs_fully_match() {
        let spec = ApiSpec {
            title: None,
            endpoints: vec![
                endpoint("List users", "https://a/users", &[]),
                endpoint("Get user", "https://a/users/{id}", &["id"]),
                endpoint("Search", "https://a/search", &["q"]),
            ],
        };
        let pairs = match_endpoints(&spec, &spec, &EmbeddingProvider::lexical()).unwrap();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn extra_prediction_is_left_unmatched() {
        let truth = ApiSpec { title: None, endpoints: vec![endpoint("Get user", "https://a/users/{id}", &[])] };
        let mut pred = truth.clone();
        pred.endpoints.push(endpoint("Delete everything", "https://a/nuke", &[]));
        let pairs = match_endpoints(&pred, &truth, &EmbeddingProvider::lexical()).unwrap();
        assert_eq!(pairs.len(), truth.endpoints.len());
    }

    #[test]
    fn placeholder_syntax_does_not_block_matching() {
        for url in ["/users/:id", "https://other.host/users/<id>", "https://a/users/{user_id}/"] {
            let pred = ApiSpec { title: None, endpoints: vec![endpoint("Fetch", url, &[])] };
            let truth = ApiSpec { title: None, endpoints: vec![endpoint("Get user by id", "https://a/users/{id}", &[])] };
            let pairs = match_endpoints(&pred, &truth, &EmbeddingProvider::lexical()).unwrap();
            assert_eq!(pairs, vec![(0, 0)], "{url}");
        }
    }

    #[test]
    fn unrelated_endpoints_do_not_match() {
        let pred = ApiSpec { title: None, endpoints: vec![endpoint("Weather forecast", "https://a/w", &[])] };
        let truth = ApiSpec { title: None, endpoints: vec![endpoint("Card search", "https://a/c", &[])] };
        assert!(match_endpoints(&pred, &truth, &EmbeddingProvider::lexical()).unwrap().is_empty());
    }

    #[test]
    fn valid_ratio_counts() {
        let spec = ApiSpec { title: None, endpoints: vec![] };
        let results = vec![
            result("a", Some(spec.clone())),
            result("b", None),
            result("c", Some(spec)),
            result("d", None),
        ];
        let report = compute_metrics(&results, &HashMap::new(), &EmbeddingProvider::lexical()).unwrap();
        assert_eq!(report.valid_ratio, 0.5);
        assert_eq!(report.matched_endpoints, 0);
    }

    #[test]
    fn precision_recall_set_arithmetic() {
        let truth = ApiSpec { title: None, endpoints: vec![endpoint("Search", "https://a/s", &["q", "limit"])] };
        let pred = ApiSpec { title: None, endpoints: vec![endpoint("Search", "https://a/s", &["q", "page"])] };
        let mut gold = HashMap::new();
        gold.insert("a".to_string(), truth);
        let report = compute_metrics(&[result("a", Some(pred))], &gold, &EmbeddingProvider::lexical()).unwrap();
        assert_eq!(report.param_precision, 0.5);
        assert_eq!(report.param_recall, 0.5);
        assert_eq!(report.method_accuracy, 1.0);
        assert!((report.name_similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn type_accuracy_uses_canonical_table() {
        let mut t = endpoint("Search", "https://a/s", &["q", "n"]);
        t.required_parameters[0].type_hint = Some("string".into());
        t.required_parameters[1].type_hint = Some("integer".into());
        let mut p = t.clone();
        p.required_parameters[0].type_hint = Some("str".into());
        p.required_parameters[1].type_hint = Some("number".into());
        let mut gold = HashMap::new();
        gold.insert("a".to_string(), ApiSpec { title: None, endpoints: vec![t] });
        let pred = ApiSpec { title: None, endpoints: vec![p] };
        let report = compute_metrics(&[result("a", Some(pred))], &gold, &EmbeddingProvider::lexical()).unwrap();
        assert_eq!(report.type_accuracy, 0.5);
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(
            compute_metrics(&[], &HashMap::new(), &EmbeddingProvider::lexical()),
            Err(EvalError::EmptyCorpus)
        );
    }

    #[test]
    fn table_renders_aligned() {
        let spec = ApiSpec { title: None, endpoints: vec![] };
        let report = compute_metrics(&[result("a", Some(spec))], &HashMap::new(), &EmbeddingProvider::lexical()).unwrap();
        let table = render_metrics_table(&[("heuristic", &report)]);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[2].starts_with("heuristic  1.00"));
    }
}
