//! Chat-model extraction and judging over an OpenAI-compatible endpoint.
//!
//!     DOC2TOOL_CHAT_URL=https://host/v1/chat/completions DOC2TOOL_MODEL=name \
//!     DOC2TOOL_API_KEY=... cargo run --example remote_backends
//!
//! Without `DOC2TOOL_CHAT_URL` the loopback mock answers with a scripted
//! reply. The key is read from the environment variable named in the
//! config, never stored.

use doc2tool::extract::{extract_spec, ExtractionBackend};
use doc2tool::fixtures::{POKEMON_HTML, POKEMON_REPLAY_OUTPUT, POKEMON_SOURCE_ID};
use doc2tool::ingest::{classify_document, document_from_raw};
use doc2tool::judge::JudgeBackend;
use doc2tool::mock::MockApiServer;
use doc2tool::remote::{RemoteClient, RemoteConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = MockApiServer::start()?;
    let config = match std::env::var("DOC2TOOL_CHAT_URL") {
        Ok(url) => {
            let mut c = RemoteConfig::new(url, std::env::var("DOC2TOOL_MODEL").unwrap_or_else(|_| "gpt-4o".into()));
            c.api_key_env = Some("DOC2TOOL_API_KEY".into());
            c.requests_per_second = 1.0;
            c
        }
        Err(_) => {
            server.push_chat_reply(POKEMON_REPLAY_OUTPUT);
            server.push_chat_reply(r#"{"analysis": "Short page with one example call.", "category": "Semi-Organized"}"#);
            RemoteConfig::new(server.url("/v1/chat/completions"), "scripted")
        }
    };
    let client = RemoteClient::new(config);
    let doc = document_from_raw(POKEMON_SOURCE_ID, "pokemontcg.html", POKEMON_HTML.to_string(), 1 << 20)?;

    let result = extract_spec(&doc, &ExtractionBackend::RemoteChat { client: client.clone(), one_shot: None });
    println!("valid={} cost={} failure={:?}", result.valid, result.token_or_byte_cost, result.failure);
    if let Some(spec) = &result.spec {
        println!("{}", spec.to_json_pretty());
    }
    let (category, analysis) = classify_document(&doc, &JudgeBackend::remote(client))?;
    println!("category: {} ({analysis})", category.label());
    Ok(())
}
