//! Reads a manifest of local pages, cleans them, filters non-API pages and
//! assigns a documentation-quality category.
//!
//!     cargo run --example corpus_ingest -- [manifest.json]
//!
//! Without an argument a small corpus is written to a temporary directory.

use std::path::PathBuf;

use doc2tool::fixtures::write_synthetic_project;
use doc2tool::ingest::{classify_document, filter_api_pages, load_corpus, read_manifest, IngestOptions};
use doc2tool::judge::JudgeBackend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let manifest = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let project = write_synthetic_project(tmp.path(), "https://api.example.com")?;
            std::fs::write(tmp.path().join("corpus/about.html"), "<html><body><h1>About us</h1><p>We love glycans.</p></body></html>")?;
            let mut entries: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&project.manifest)?)?;
            entries.push(serde_json::json!({"source_id": "about", "origin": "corpus/about.html"}));
            std::fs::write(&project.manifest, serde_json::to_string(&entries)?)?;
            project.manifest
        }
    };
    let entries = read_manifest(&manifest)?;
    let opts = IngestOptions { offline: true, base_dir: manifest.parent().map(PathBuf::from), ..IngestOptions::default() };
    let judge = JudgeBackend::heuristic();
    for (id, doc) in load_corpus(&entries, &opts, 4) {
        match doc {
            Ok(doc) => {
                let api = filter_api_pages(&doc, &judge)?;
                let (category, analysis) = classify_document(&doc, &judge)?;
                println!("{id:<10} api_page={api:<5} {:<15} {} bytes\n           {analysis}", category.label(), doc.text.len());
            }
            Err(e) => println!("{id:<10} failed: {e}"),
        }
    }
    Ok(())
}
