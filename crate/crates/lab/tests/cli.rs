use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtlab")).args(args).output().expect("spawn mtlab")
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const GHZ: &str = r#"{
  "experiment": "ghz-suite",
  "seed": 4,
  "params": {"sizes": [4]}
}"#;

#[test]
fn run_writes_csv_json_and_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", GHZ);
    let out = tmp.path().join("out");
    let o = mtlab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("ghz-suite.csv")).unwrap();
    assert!(csv.starts_with("# schema=mtlab.v1 experiment=ghz-suite seed=4 config_hash="));
    assert!(csv.lines().nth(1).unwrap().starts_with("experiment,case,quantity,unit,relation,lhs,lhs_bits"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ghz-suite.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "ghz-suite");
    assert!(out.join("ghz-suite.timing.json").exists());
}

#[test]
fn output_dir_defaults_next_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let text = GHZ.replace("\"seed\": 4,", "\"seed\": 4, \"name\": \"here\", \"output\": {\"dir\": \"res\"},");
    let cfg = write(tmp.path(), "g.json", &text);
    let o = mtlab(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("res/here.csv").exists());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = manifest("goldens/thm1-small/config.json");
    let mut csvs = Vec::new();
    for (k, w) in ["1", "2", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("o{k}"));
        let o = mtlab(&["run", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(std::fs::read(out.join("thm1-certify.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn seed_override_changes_header_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", GHZ);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(mtlab(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    assert!(mtlab(&["run", cfg.to_str().unwrap(), "--seed", "9", "--out", b.to_str().unwrap()]).status.success());
    let ha = std::fs::read_to_string(a.join("ghz-suite.csv")).unwrap().lines().next().unwrap().to_string();
    let hb = std::fs::read_to_string(b.join("ghz-suite.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(hb.contains("seed=9"));
    assert_ne!(ha.split("config_hash=").nth(1), hb.split("config_hash=").nth(1));
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_param = write(tmp.path(), "p.json", &GHZ.replace("\"sizes\"", "\"sizez\""));
    let o = mtlab(&["run", bad_param.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p.json:4:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("sizez"));

    let bad_key = write(tmp.path(), "k.json", &GHZ.replace("\"seed\"", "\"sead\""));
    let o = mtlab(&["run", bad_key.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let bad_preset = write(tmp.path(), "m.json", r#"{"experiment": "cmi-decay",
 "model": {"preset": "potts", "n": 4}}"#);
    let o = mtlab(&["run", bad_preset.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m.json:2:") && stderr(&o).contains("known presets"), "{}", stderr(&o));

    let o = mtlab(&["run", tmp.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_point_exits_1_and_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    // B of one site is rejected by the recovery map; the point becomes a failed row.
    let cfg = write(
        tmp.path(),
        "r.json",
        r#"{"experiment": "recover-single", "model": {"preset": "tfim", "n": 6},
  "params": {"markov_seeds": 1, "widths": [1, 2], "sweep_b": 2, "sweep_c": [1]}}"#,
    );
    let o = mtlab(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL width/b1 completed"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(tmp.path().join("recover-single.csv")).unwrap();
    assert!(csv.contains("width/b1,completed,flag,ge,"));
}

fn copy_golden(name: &str, into: &Path) -> PathBuf {
    let dst = into.join(name);
    std::fs::create_dir_all(&dst).unwrap();
    for f in ["config.json", "expected.csv", "tolerances.json"] {
        std::fs::copy(manifest(&format!("goldens/{name}/{f}")), dst.join(f)).unwrap();
    }
    dst
}

#[test]
fn verify_golden_names_perturbed_column_and_lists_skips() {
    let tmp = tempfile::tempdir().unwrap();
    let g = copy_golden("ghz-small", tmp.path());
    std::fs::create_dir_all(tmp.path().join("no-expected")).unwrap();
    std::fs::copy(g.join("config.json"), tmp.path().join("no-expected/config.json")).unwrap();

    let o = mtlab(&["verify-golden", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS ghz-small"));
    assert!(stdout(&o).contains("skip list: no-expected"));

    // Nudge one lhs value beyond the default tolerance.
    let path = g.join("expected.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let perturbed = text.replacen("6.931471805599e-1", "6.931471905599e-1", 1);
    assert_ne!(text, perturbed);
    std::fs::write(&path, perturbed).unwrap();
    let o = mtlab(&["verify-golden", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = stdout(&o);
    assert!(s.contains("FAIL ghz-small (1 cells differ)"), "{s}");
    assert!(s.contains("column lhs"), "{s}");

    // Loosening that column's tolerance lets it through.
    std::fs::write(g.join("tolerances.json"), r#"{"columns": {"lhs": {"abs": 1e-6, "rel": 0}}}"#).unwrap();
    let o = mtlab(&["verify-golden", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // --update restores the file and reports the change.
    std::fs::remove_file(g.join("tolerances.json")).unwrap();
    let o = mtlab(&["verify-golden", tmp.path().to_str().unwrap(), "--update"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("UPDATED ghz-small (1 cells changed)"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn checked_in_goldens_pass() {
    let o = mtlab(&["verify-golden", manifest("goldens").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("SKIP"), "{}", stdout(&o));
}

#[test]
fn preset_list_names_every_preset() {
    let o = mtlab(&["preset", "list"]);
    assert!(o.status.success());
    for p in mtlab_core::thermal::PRESETS {
        assert!(stdout(&o).contains(p));
    }
}
