//! Replays a recorded model output for the bundled trading-card document,
//! validates it and prints the generated tool function.
//!
//!     cargo run --example golden_extraction

use doc2tool::extract::{extract_spec, ExtractionBackend, ReplayStore};
use doc2tool::fixtures::{POKEMON_HTML, POKEMON_REPLAY_OUTPUT, POKEMON_SOURCE_ID};
use doc2tool::ingest::document_from_raw;
use doc2tool::toolgen::{export_function_source, generate_tools};

fn main() {
    let doc = document_from_raw(POKEMON_SOURCE_ID, "pokemontcg.html", POKEMON_HTML.to_string(), 1 << 20)
        .expect("bundled page has text");
    println!("cleaned text ({} bytes):\n{}\n", doc.text.len(), doc.text);

    let mut store = ReplayStore::new();
    store.insert(POKEMON_SOURCE_ID, POKEMON_REPLAY_OUTPUT);
    let result = extract_spec(&doc, &ExtractionBackend::Replay(store));
    let spec = result.spec.expect("recorded output validates");
    println!("valid: {}\n{}\n", result.valid, spec.to_json_pretty());

    for tool in generate_tools(&spec, POKEMON_SOURCE_ID) {
        println!("{}", export_function_source(&tool));
    }
}
