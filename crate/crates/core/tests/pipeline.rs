use std::fs;

use doc2tool::fixtures::write_synthetic_project;
use doc2tool::jsonl::read_jsonl;
use doc2tool::mock::MockApiServer;
use doc2tool::pipeline::{Pipeline, PipelineError, RunOptions, Stage};
use doc2tool::validate::{ErrorCounts, ErrorType, ValidationReport};

fn offline() -> RunOptions {
    RunOptions { offline: true, ..RunOptions::default() }
}

#[test]
fn full_run_on_synthetic_corpus() {
    let server = MockApiServer::start().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), server.base_url()).unwrap();
    let pipeline = Pipeline::from_config_file(&project.config, offline()).unwrap();
    let summaries = pipeline.run(&Stage::ALL).unwrap();
    assert_eq!(summaries.len(), 7);

    for sub in ["docs", "specs", "metrics", "tools", "exports", "validation", "kb", "reports"] {
        assert!(project.output_dir.join(sub).is_dir(), "{sub} missing");
    }
    let reports: Vec<ValidationReport> = read_jsonl(&project.output_dir.join("validation/reports.jsonl")).unwrap();
    assert!(reports.iter().any(|r| r.error_type == ErrorType::PassedValidation));
    let report = fs::read_to_string(project.output_dir.join("reports/report.txt")).unwrap();
    assert!(report.contains("Estimated error causes"));
    assert!(report.contains("Parameter inference"));
    assert!(project.output_dir.join("kb/kb.jsonl").is_file());
    let yaml_count = fs::read_dir(project.output_dir.join("exports/openapi")).unwrap().count();
    assert!(yaml_count >= 1);
}

#[test]
fn rerunning_a_stage_is_deterministic() {
    let server = MockApiServer::start().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), server.base_url()).unwrap();
    let pipeline = Pipeline::from_config_file(&project.config, offline()).unwrap();
    pipeline.run(&[Stage::Ingest, Stage::Extract, Stage::Generate]).unwrap();
    let read_specs = || {
        let mut all = Vec::new();
        let mut entries: Vec<_> = fs::read_dir(project.output_dir.join("specs")).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            all.push(fs::read_to_string(p).unwrap());
        }
        all
    };
    let first = read_specs();
    let tool_index = fs::read_to_string(project.output_dir.join("tools/index.json")).unwrap();
    pipeline.run(&[Stage::Extract, Stage::Generate]).unwrap();
    assert_eq!(first, read_specs());
    assert_eq!(tool_index, fs::read_to_string(project.output_dir.join("tools/index.json")).unwrap());
}

#[test]
fn stage_without_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), "http://127.0.0.1:9").unwrap();
    let pipeline = Pipeline::from_config_file(&project.config, offline()).unwrap();
    for (stage, name) in [(Stage::Extract, "extract"), (Stage::Generate, "generate"), (Stage::Validate, "validate"), (Stage::Report, "report")] {
        match pipeline.run(&[stage]) {
            Err(PipelineError::MissingStageInput(s)) => assert_eq!(s, name),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn report_with_reference_counts_prints_ground_truth_causes() {
    let server = MockApiServer::start().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), server.base_url()).unwrap();
    let reference = serde_json::json!({ "Ground Truth": ErrorCounts::from_failures(0, 4, 9, 23, 14, 10) });
    fs::write(dir.path().join("reference.json"), reference.to_string()).unwrap();
    let config = fs::read_to_string(&project.config).unwrap();
    let config = config.replace("workers = 4\n", "workers = 4\nreference_counts = \"reference.json\"\n");
    fs::write(&project.config, config).unwrap();

    let pipeline = Pipeline::from_config_file(&project.config, offline()).unwrap();
    pipeline.run(&[Stage::Ingest, Stage::Extract, Stage::Generate, Stage::Validate, Stage::Report]).unwrap();
    let report = fs::read_to_string(project.output_dir.join("reports/report.txt")).unwrap();
    let row = report.lines().find(|l| l.contains("Ground Truth") && l.contains("19-56")).expect("cause row");
    for cell in ["0-18", "0-4", "19-56", "0-32"] {
        assert!(row.contains(cell), "{row}");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), "http://127.0.0.1:9").unwrap();
    let base = fs::read_to_string(&project.config).unwrap();
    let cases = [
        base.replace("backend = \"heuristic\"\n\n[judge]", "backend = \"replay\"\n\n[judge]"),
        base.replace("manifest.json", "missing.json"),
        base.replace("[embedding]\nbackend = \"lexical\"", "[embedding]\nbackend = \"remote\"\napi_key = \"secret\""),
        base.replace("[judge]\nbackend = \"heuristic\"", "[judge]\nbackend = \"remote\""),
        base.replace("workers = 4", "workers = 0"),
    ];
    for (i, text) in cases.iter().enumerate() {
        fs::write(&project.config, text).unwrap();
        match Pipeline::from_config_file(&project.config, offline()) {
            Err(PipelineError::ConfigInvalid(_)) => {}
            Err(other) => panic!("case {i}: {other}"),
            Ok(_) => panic!("case {i} accepted"),
        }
    }
}

#[test]
fn offline_mode_blocks_remote_hosts() {
    let dir = tempfile::tempdir().unwrap();
    let project = write_synthetic_project(dir.path(), "http://api.example.invalid").unwrap();
    let pipeline = Pipeline::from_config_file(&project.config, offline()).unwrap();
    pipeline.run(&[Stage::Ingest, Stage::Extract, Stage::Generate, Stage::Validate]).unwrap();
    let reports: Vec<ValidationReport> = read_jsonl(&project.output_dir.join("validation/reports.jsonl")).unwrap();
    assert!(!reports.is_empty());
    for r in &reports {
        assert_ne!(r.error_type, ErrorType::PassedValidation);
        if let Some(a) = r.last_attempt() {
            assert!(a.status_code.is_none(), "{} reached the network", r.tool_name);
        }
    }
}
