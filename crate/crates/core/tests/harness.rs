use tempfile::TempDir;
use ura::harness::{parse_dat, run_with, ExperimentConfig, Runner, Schema};

fn genie_frame(seed: u64, trials: usize) -> String {
    format!(
        r#"
seed = {seed}
trials = {trials}
output = "unused"

[experiment]
kind = "simulate-frame"
frame_length = 800
slots = 4
active_users = 8
max_per_slot = 2
payload_bits = 100
ebn0_db = [10.0]

[experiment.decoder]
type = "genie"
miss = [0.05, 0.2]
"#
    )
}

fn run_in(text: &str, dir: &std::path::Path, workers: usize) -> ura::harness::ResultRecord {
    let cfg = ExperimentConfig { output: dir.to_path_buf(), ..ExperimentConfig::from_toml(text).unwrap() };
    run_with(&cfg, &Runner::new(Some(workers), None).unwrap()).unwrap()
}

#[test]
fn same_config_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let text = genie_frame(4, 500);
    run_in(&text, &dir.path().join("a"), 1);
    run_in(&text, &dir.path().join("b"), 3);
    let a = std::fs::read(dir.path().join("a/frame.dat")).unwrap();
    let b = std::fs::read(dir.path().join("b/frame.dat")).unwrap();
    assert_eq!(a, b);
    let (header, rows) = parse_dat(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(header, Schema::EbnoPupe.columns());
    assert_eq!(rows.len(), 1);
}

#[test]
fn doubling_trials_shrinks_the_standard_error() {
    let dir = TempDir::new().unwrap();
    let mut ratios = Vec::new();
    for seed in 0..8 {
        let se = |trials: usize| {
            let record = run_in(&genie_frame(seed, trials), &dir.path().join(format!("{seed}-{trials}")), 1);
            record.series[0].points[0].std_error().unwrap()
        };
        ratios.push(se(4000) / se(2000));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratios:?}");
}

#[test]
fn asymptotic_sweep_has_one_row_per_density() {
    let dir = TempDir::new().unwrap();
    let text = r#"
seed = 1
trials = 1
output = "unused"
label = "sweep"

[experiment]
kind = "bound-asymptotic"
log2_m1 = 100.0
target_pupe = 0.1
user_density = [0.01, 0.05, 0.1]
curves = ["converse"]
"#;
    let record = run_in(text, dir.path(), 2);
    assert!(!record.has_infeasible());
    let dat = std::fs::read_to_string(dir.path().join("sweep.dat")).unwrap();
    let (header, rows) = parse_dat(&dat).unwrap();
    assert_eq!(header, Schema::EpsMu.columns());
    assert_eq!(rows.iter().map(|r| r.1).collect::<Vec<_>>(), vec![0.01, 0.05, 0.1]);
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
