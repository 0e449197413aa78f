use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;
use ura::ldpc::LdpcCode;

const SLOT: &str = r#"
seed = 3
trials = 6
output = "unused"
label = "tiny"

[experiment]
kind = "simulate-slot"
code = "ldpc_32_16"
users = 1
mode = "known-k"
ebn0_db = [5.0, 10.0]
"#;

const UNREACHABLE: &str = r#"
seed = 1
trials = 200
output = "unused"

[experiment]
kind = "optimize-aloha"
frame_length = 30000
payload_bits = 100
max_per_slot = 4
target_pupe = 0.1
active_users = [5000]
ebn0_min_db = 0.0
ebn0_max_db = 2.0

[experiment.model]
type = "normal-approx"
"#;

fn ura(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ura")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn slot_run_writes_identical_files_twice() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "slot.toml", SLOT);
    let mut files = Vec::new();
    for (run, sub) in [("a", "simulate-slot"), ("b", "run")] {
        let out_dir = dir.path().join(run);
        let out = ura(&[sub, "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--workers", "2"]);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(std::fs::read(out_dir.join("tiny.dat")).unwrap());
        assert!(out_dir.join("tiny.record.json").exists());
        assert!(!out_dir.join("tiny.checkpoint.json").exists());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert!(text.starts_with("EBNO FER\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn command_line_overrides_reach_the_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "slot.toml", SLOT);
    let out_dir = dir.path().join("o");
    let out = ura(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "99", "--trials", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let record: String = std::fs::read_to_string(out_dir.join("tiny.record.json")).unwrap();
    assert!(record.contains("\"seed\": 99") || record.contains("\"seed\":99"), "{record}");
}

#[test]
fn unknown_key_is_named_and_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SLOT.replace("users = 1", "users = 1\nbogus_knob = 4"));
    let out = ura(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus_knob"), "{}", stderr(&out));
}

#[test]
fn invalid_value_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SLOT.replace("trials = 6", "trials = 0"));
    assert_eq!(ura(&["run", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "code.toml", &SLOT.replace("ldpc_32_16", "no_such_code"));
    let out_dir = dir.path().join("o");
    assert_eq!(ura(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn subcommand_must_match_kind() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "slot.toml", SLOT);
    let out = ura(&["simulate-frame", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kind"), "{}", stderr(&out));
}

#[test]
fn unreachable_target_exits_3_with_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "aloha.toml", UNREACHABLE);
    let out_dir = dir.path().join("o");
    let out = ura(&["optimize-aloha", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(out_dir.join("aloha.dat")).unwrap(), "KA EBNO\n");
}

#[test]
fn unknown_figure_exits_2() {
    assert_eq!(ura(&["figure", "fig9"]).status.code(), Some(2));
    assert_eq!(ura(&["figure", "fig1", "--scale", "huge"]).status.code(), Some(2));
}

#[test]
fn make_code_writes_a_loadable_code() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("code.alist");
    let out = ura(&["make-code", "--n", "64", "--k", "32", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let code = LdpcCode::load(path.to_str().unwrap()).unwrap();
    assert_eq!((code.n(), code.k()), (64, 32));
}
