//! Tool descriptors to OpenAPI 3 YAML, one document per host.
//!
//!     cargo run --example openapi_export

use doc2tool::fixtures::{pokemon_golden_spec, SYNTHETIC_CORPUS};
use doc2tool::toolgen::{export_openapi_by_host, generate_tools};

fn main() {
    let mut tools = generate_tools(&pokemon_golden_spec(), "pokemontcg");
    for doc in &SYNTHETIC_CORPUS {
        tools.extend(generate_tools(&doc.truth_for("https://glyco.example.org"), doc.source_id));
    }
    let (docs, skipped) = export_openapi_by_host(&tools);
    for (host, yaml) in docs {
        println!("# ---- {host} ----\n{yaml}");
    }
    if !skipped.is_empty() {
        println!("# tools without a base URL: {}", skipped.join(", "));
    }
}
