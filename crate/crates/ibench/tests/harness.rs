//! Harness-level integration tests: fixtures feeding a real run through the
//! config file, environment overrides, rendered artifacts, and worker-count
//! independence of the results.

use std::sync::Mutex;

use ibench::config::{Config, ENV_OUTPUT_DIR, ENV_WORKERS};
use ibench::fixtures::{generate_fixtures, FixtureOptions};
use ibench::report::write_run_renderings;
use ibench::runner::{load_manifest, load_report, report_hash, run};

// config loading reads process-global env vars, so tests that touch either
// side serialize on this lock
static ENV_LOCK: Mutex<()> = Mutex::new(());

#[test]
fn fixture_config_runs_and_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = generate_fixtures(tmp.path(), FixtureOptions::default()).unwrap();
    let mut config = {
        let _env = ENV_LOCK.lock().unwrap();
        Config::from_file(&fixtures.config_file).unwrap()
    };
    // swap in a two-line prompt set so the run stays fast
    let short = tmp.path().join("short2.txt");
    std::fs::write(&short, "a [person] near a canal\na painter at work\n").unwrap();
    config.prompts[0].file = short;
    config.prompts[0].expected_count = Some(2);
    config.output_dir = tmp.path().join("out");

    let output = run(&config).unwrap();
    assert_eq!(output.report.cases.len(), 6); // 3 fixture images x 2 prompts
    write_run_renderings(&output.run_dir, &output.report).unwrap();
    assert!(output.run_dir.join("report.csv").is_file());
    assert!(output.run_dir.join("report.txt").is_file());
    assert!(output.run_dir.join("run.log").is_file());

    // persisted artifacts load back
    let report = load_report(&output.run_dir).unwrap();
    assert_eq!(report.cases.len(), 6);
    let manifest = load_manifest(&output.run_dir).unwrap();
    assert_eq!(manifest.case_ids.len(), 6);
    assert_eq!(manifest.config_hash, config.config_hash().unwrap());
    // canonical form strips machine-specific paths
    for case in &report.cases {
        assert!(case.image_with_id_path.starts_with("cases/"));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = generate_fixtures(tmp.path(), FixtureOptions::default()).unwrap();
    let mut config = {
        let _env = ENV_LOCK.lock().unwrap();
        Config::from_file(&fixtures.config_file).unwrap()
    };
    let short = tmp.path().join("short2.txt");
    std::fs::write(&short, "a [person] near a canal\na painter at work\n").unwrap();
    config.prompts[0].file = short;
    config.prompts[0].expected_count = Some(2);

    config.output_dir = tmp.path().join("out-serial");
    config.workers = 1;
    let serial = run(&config).unwrap();
    config.output_dir = tmp.path().join("out-parallel");
    config.workers = 4;
    let parallel = run(&config).unwrap();
    assert_eq!(
        report_hash(&serial.report).unwrap(),
        report_hash(&parallel.report).unwrap(),
        "worker count changed the canonical report"
    );
}

#[test]
fn environment_overrides_output_dir_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = {
        let _env = ENV_LOCK.lock().unwrap();
        std::env::set_var(ENV_OUTPUT_DIR, tmp.path().join("env-out"));
        std::env::set_var(ENV_WORKERS, "3");
        let config = Config::from_toml("seed = 5").unwrap();
        std::env::remove_var(ENV_OUTPUT_DIR);
        std::env::remove_var(ENV_WORKERS);
        config
    };
    assert_eq!(config.output_dir, tmp.path().join("env-out"));
    assert_eq!(config.workers, 3);

    let plain = Config::from_toml("seed = 5").unwrap();
    assert_eq!(plain.workers, 1);
    // the overrides never affect the numeric identity of a run
    assert_eq!(config.config_hash().unwrap(), plain.config_hash().unwrap());
}
