//! Fills a missing path parameter from values verified in other documents,
//! then runs the leave-one-API-out protocol.
//!
//!     cargo run --example parameter_inference

use doc2tool::embed::EmbeddingProvider;
use doc2tool::fixtures::SYNTHETIC_CORPUS;
use doc2tool::infer::{build_kb, infer_parameters, leave_one_api_out, InferOptions};
use doc2tool::judge::JudgeBackend;
use doc2tool::mock::MockApiServer;
use doc2tool::toolgen::generate_tools;
use doc2tool::validate::{ErrorType, InvokerConfig, Validator, ValidatorConfig};

fn main() -> std::io::Result<()> {
    let server = MockApiServer::start()?;
    let tools: Vec<_> = SYNTHETIC_CORPUS
        .iter()
        .flat_map(|d| generate_tools(&d.truth_for(server.base_url()), d.source_id))
        .collect();
    let config = ValidatorConfig { invoker: InvokerConfig { per_host_rps: 0.0, offline: true }, workers: 4 };
    let validator = Validator::new(&config, JudgeBackend::heuristic());
    let reports = validator.validate_corpus(&tools);
    let emb = EmbeddingProvider::lexical();
    let mut kb = build_kb(&reports, &tools, &emb);
    println!("knowledge base: {} entries", kb.len());
    for e in kb.entries().iter().take(8) {
        println!("  {:<14} = {:<12} from {}", e.param_key, e.value, e.source_id);
    }

    for (tool, report) in tools.iter().zip(&reports) {
        if report.error_type != ErrorType::NoParameterValue {
            continue;
        }
        let mut tool = tool.clone();
        match infer_parameters(&mut tool, &mut kb, &validator, &emb, &InferOptions::default()) {
            Ok(o) => println!("\n{}: inferred {:?} in {} attempt(s)", o.tool_name, o.assignment.unwrap(), o.attempts),
            Err(e) => println!("\n{}: {e}", tool.tool_name),
        }
    }

    let loo = leave_one_api_out(&tools, &reports, &emb, &validator).expect("corpus has several sources");
    println!("\nleave-one-API-out: {}/{} recovered, mean attempts {:.2}, isolation violations {}",
        loo.successes, loo.outcomes.len(), loo.mean_attempts, loo.isolation_violations);
    for o in &loo.outcomes {
        println!("  {:<10} {:<16} success={} attempts={}", o.source_id, o.tool_name, o.success, o.attempts);
    }
    Ok(())
}
