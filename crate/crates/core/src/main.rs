use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use doc2tool::pipeline::{Pipeline, RunOptions, Stage};

#[derive(Parser)]
#[command(name = "doc2tool", version, about = "Turn REST API documentation into validated, callable tools")]
struct Cli {
    /// Project configuration file.
    #[arg(long, global = true, default_value = "doc2tool.toml")]
    config: PathBuf,
    /// Comma-separated stages to keep when running the whole pipeline.
    #[arg(long, global = true, value_delimiter = ',')]
    stage_filter: Vec<String>,
    /// Extraction backend override: heuristic, replay, remote-chat, remote-structured.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Refuse every non-loopback network request.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fetch and clean the documents listed in the corpus manifest.
    Ingest,
    /// Extract structured specs from ingested documents.
    Extract,
    /// Score extracted specs against ground truth.
    Evaluate,
    /// Build tool descriptors and exports from valid specs.
    Generate,
    /// Invoke every tool and classify the outcome.
    Validate,
    /// Infer missing parameter values from the knowledge base.
    Infer,
    /// Render metrics, error and cause tables.
    Report,
    /// Run every stage in order.
    Run,
}

fn stages(cli: &Cli) -> Result<Vec<Stage>, String> {
    let single = match cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Extract => Some(Stage::Extract),
        Command::Evaluate => Some(Stage::Evaluate),
        Command::Generate => Some(Stage::Generate),
        Command::Validate => Some(Stage::Validate),
        Command::Infer => Some(Stage::Infer),
        Command::Report => Some(Stage::Report),
        Command::Run => None,
    };
    if let Some(s) = single {
        return Ok(vec![s]);
    }
    if cli.stage_filter.is_empty() {
        return Ok(Stage::ALL.to_vec());
    }
    cli.stage_filter
        .iter()
        .map(|name| Stage::parse(name).ok_or_else(|| format!("unknown stage `{name}`")))
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stages = match stages(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let options = RunOptions { offline: cli.offline, backend_override: cli.backend.clone(), seed: cli.seed };
    let result = Pipeline::from_config_file(&cli.config, options).and_then(|p| p.run(&stages));
    match result {
        Ok(summaries) => {
            for s in summaries {
                println!("{:<9} {:>4}  {}", s.stage.name(), s.items, s.note);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
