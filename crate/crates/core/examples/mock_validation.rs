//! Validates the synthetic corpus's tools against the loopback mock API and
//! prints each outcome with the error and cause tables.
//!
//!     cargo run --example mock_validation

use doc2tool::fixtures::SYNTHETIC_CORPUS;
use doc2tool::judge::JudgeBackend;
use doc2tool::mock::MockApiServer;
use doc2tool::toolgen::generate_tools;
use doc2tool::validate::{render_error_report, ErrorCounts, InvokerConfig, Validator, ValidatorConfig};

fn main() -> std::io::Result<()> {
    let server = MockApiServer::start()?;
    let tools: Vec<_> = SYNTHETIC_CORPUS
        .iter()
        .flat_map(|d| generate_tools(&d.truth_for(server.base_url()), d.source_id))
        .collect();
    let config = ValidatorConfig { invoker: InvokerConfig { per_host_rps: 0.0, offline: true }, workers: 4 };
    let reports = Validator::new(&config, JudgeBackend::heuristic()).validate_corpus(&tools);
    for r in &reports {
        let last = r.last_attempt();
        println!(
            "{:<10} {:<18} {:<24} status={:<4} retried={}",
            r.source_id,
            r.tool_name,
            r.error_type.label(),
            last.and_then(|a| a.status_code).map_or("-".to_string(), |s| s.to_string()),
            last.is_some_and(|a| a.retried_without_params),
        );
    }
    let counts = ErrorCounts::from_reports(&reports);
    println!("\n{}", render_error_report(&[("Synthetic corpus", counts)]).unwrap());
    println!("requests per route: {:?}", server.requests_by_path());
    Ok(())
}
