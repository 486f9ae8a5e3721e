//! Every stage over a generated project directory, served by the loopback
//! mock API. Prints the final report and leaves the project on disk.
//!
//!     cargo run --example full_pipeline -- [project_dir]

use std::path::PathBuf;

use doc2tool::fixtures::write_synthetic_project;
use doc2tool::mock::MockApiServer;
use doc2tool::pipeline::{Pipeline, RunOptions, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("doc2tool-demo"));
    let server = MockApiServer::start()?;
    let project = write_synthetic_project(&root, server.base_url())?;
    let pipeline = Pipeline::from_config_file(&project.config, RunOptions { offline: true, ..RunOptions::default() })?;
    for s in pipeline.run(&Stage::ALL)? {
        println!("{:<9} {:>3}  {}", s.stage.name(), s.items, s.note);
    }
    println!("\n{}", std::fs::read_to_string(project.output_dir.join("reports/report.txt"))?);
    println!("artifacts under {}", project.output_dir.display());
    Ok(())
}
