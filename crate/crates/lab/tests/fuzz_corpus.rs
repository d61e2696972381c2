//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, so the seeds stay meaningful without a nightly toolchain.

use std::path::{Path, PathBuf};

use mtlab::config::ExperimentConfig;
use mtlab::golden::{diff_csv, parse_csv, Tolerances};
use mtlab_core::io;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn matrix_binary_seeds() {
    let mut decoded = 0;
    for (_, b) in seeds("matrix_binary") {
        if let Ok(m) = io::decode_matrix(&b) {
            assert_eq!(io::encode_matrix(&m), b);
            decoded += 1;
        }
    }
    assert!(decoded >= 2);
}

#[test]
fn matrix_json_seeds() {
    for (p, b) in seeds("matrix_json") {
        let s = String::from_utf8(b).unwrap();
        let r = io::matrix_from_json_str(&s);
        assert_eq!(r.is_ok(), !p.ends_with("ragged.json"), "{}", p.display());
    }
}

#[test]
fn hamiltonian_json_seeds() {
    for (p, b) in seeds("hamiltonian_json") {
        let s = String::from_utf8(b).unwrap();
        let r = io::hamiltonian_from_json(&s, 64);
        assert_eq!(r.is_ok(), !p.ends_with("bad_site.json"), "{}: {:?}", p.display(), r.err());
    }
}

#[test]
fn experiment_config_seeds() {
    for (p, b) in seeds("experiment_config") {
        let s = String::from_utf8(b).unwrap();
        // Unknown params keys surface when the experiment reads them, not at parse time.
        let cfg = ExperimentConfig::parse(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(cfg.hash().len(), 64);
    }
}

#[test]
fn golden_csv_seeds() {
    for (p, b) in seeds("golden_csv") {
        let s = String::from_utf8(b).unwrap();
        match parse_csv(&s) {
            Ok(_) => assert!(diff_csv(&s, &s, &Tolerances::default()).unwrap().is_empty()),
            Err(_) => assert!(p.ends_with("no_header.csv")),
        }
    }
}
