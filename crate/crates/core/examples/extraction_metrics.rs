//! Scores the heuristic extractor on the synthetic corpus against its
//! reference specs.
//!
//!     cargo run --example extraction_metrics

use std::collections::HashMap;

use doc2tool::embed::EmbeddingProvider;
use doc2tool::evaluate::{compute_metrics, render_metrics_table};
use doc2tool::extract::{extract_corpus, ExtractionBackend};
use doc2tool::fixtures::SYNTHETIC_CORPUS;
use doc2tool::ingest::document_from_raw;

const BASE: &str = "https://api.example.com";

fn main() {
    let docs: Vec<_> = SYNTHETIC_CORPUS
        .iter()
        .map(|d| document_from_raw(d.source_id, "doc.html", d.html_for(BASE), 1 << 20).unwrap())
        .collect();
    let truth: HashMap<_, _> = SYNTHETIC_CORPUS.iter().map(|d| (d.source_id.to_string(), d.truth_for(BASE))).collect();
    let results = extract_corpus(&docs, &ExtractionBackend::Heuristic, 2);
    for r in &results {
        let n = r.spec.as_ref().map_or(0, |s| s.endpoints.len());
        println!("{:<10} valid={} endpoints={n}", r.source_id, r.valid);
    }
    let metrics = compute_metrics(&results, &truth, &EmbeddingProvider::lexical()).expect("non-empty corpus");
    println!("\n{}", render_metrics_table(&[("heuristic", &metrics)]));
}
