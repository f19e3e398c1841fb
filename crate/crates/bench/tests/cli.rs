use std::path::Path;
use std::process::{Command, Output};

use hera_core::{
    compute_errors, generate_truncated_normal, hera_dequantize, hera_quantize, load_matrix, Matrix,
    PqConfig, TruncNormalSpec,
};

fn hera(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hera")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.herm");
    let art = dir.path().join("data.herq");
    let back = dir.path().join("back.herm");

    let out = hera(&["gen", "--rows", "128", "--cols", "16", "--seed", "5", "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = hera(&[
        "quantize", "--input", s(&data), "--out", s(&art), "--subspaces", "4", "--ks", "4",
        "--levels", "2", "--seed", "9",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(hera(&["dequantize", "--input", s(&art), "--out", s(&back)]).status.success());
    let out = hera(&["eval", "--original", s(&data), "--reconstructed", s(&back)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mae,mre,mse"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();

    let original: Matrix = generate_truncated_normal(&TruncNormalSpec::standard(5), 128, 16).unwrap();
    assert!(original.bit_eq(&load_matrix(&data).unwrap()));
    let h = hera_quantize(&original, 2, &PqConfig::new(4, 4, 9)).unwrap();
    let lib = compute_errors(&original, &hera_dequantize(&h).unwrap()).unwrap();
    assert_eq!(values, vec![lib.mae, lib.mre.unwrap(), lib.mse]);
}

#[test]
fn eval_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.herm");
    assert!(hera(&["gen", "--rows", "4", "--cols", "4", "--out", s(&data)]).status.success());
    let out = hera(&["eval", "--original", s(&data), "--reconstructed", s(&data)]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "mae,mre,mse\n0,0,0\n");
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let csv = dir.path().join("r.csv");
    std::fs::write(
        &cfg,
        "n = 64\nd = 8\nsubspaces = [2, 4]\nlevels = [0, 1, 2]\nbaseline_ks = 8\nrepetitions = 2\n",
    )
    .unwrap();
    let out = hera(&["bench", "--config", s(&cfg), "--out", s(&csv), "--charge-fm", "off"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "method,m,ks,levels,seed,mae,mre,mse,total_bits");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert!(lines.iter().all(|l| l.split(',').count() == 9));
    let summary = std::fs::read_to_string(dir.path().join("r.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), summary);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage
    assert_eq!(hera(&["bench"]).status.code(), Some(1));
    assert_eq!(hera(&["gen", "--rows", "2"]).status.code(), Some(1));
    assert_eq!(hera(&["bench", "--config", "x", "--charge-fm", "maybe"]).status.code(), Some(1));
    // i/o
    let missing = dir.path().join("missing.herm");
    assert_eq!(
        hera(&["eval", "--original", s(&missing), "--reconstructed", s(&missing)]).status.code(),
        Some(2)
    );
    assert_eq!(hera(&["bench", "--config", s(&missing), "--out", "x.csv"]).status.code(), Some(2));
    let junk = dir.path().join("junk.herq");
    std::fs::write(&junk, b"not an artifact at all, just some bytes here").unwrap();
    let out = dir.path().join("o.herm");
    assert_eq!(hera(&["dequantize", "--input", s(&junk), "--out", s(&out)]).status.code(), Some(2));
    // every cell infeasible
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "n = 64\nd = 8\nsubspaces = [2]\nlevels = [1, 2]\nbaseline_ks = 1\nrepetitions = 1\n",
    )
    .unwrap();
    let csv = dir.path().join("r.csv");
    assert_eq!(hera(&["bench", "--config", s(&cfg), "--out", s(&csv)]).status.code(), Some(3));
    assert!(std::fs::read_to_string(&csv).unwrap().contains("infeasible"));
}
