//! Exit-code and flag contract of the `imac` binary. Commands that need
//! MNIST are exercised by the acceptance suite instead.

use std::path::PathBuf;
use std::process::{Command, Output};

fn imac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imac"))
        .args(args)
        .env("RUST_LOG", "info")
        .env_remove("IMAC_MNIST_DIR")
        .output()
        .expect("run imac")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn weights() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/mnist_seed42.imacw")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn map_tile_counts() {
    let w = weights();
    let o = imac(&["map", "--weights", &w, "--subarray", "32x32"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for tiles in ["tiles=104", "tiles=24", "tiles=3"] {
        assert!(text.contains(tiles), "{text}");
    }
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 131);

    let text = stdout(&imac(&["map", "--weights", &w, "--subarray", "256x256"]));
    for tiles in ["tiles=2", "tiles=1\n"] {
        assert!(text.contains(tiles), "{text}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let w = weights();
    let odd = imac(&["map", "--weights", &w, "--subarray", "32x31"]);
    assert_eq!(odd.status.code(), Some(2));
    assert!(stderr(&odd).contains("columns must be even"));

    assert_eq!(imac(&["map", "--weights", "/nonexistent.imacw"]).status.code(), Some(2));
    assert_eq!(imac(&["snr", "--tech", "unobtainium"]).status.code(), Some(2));
    assert_eq!(imac(&["snr", "--subarray", "big"]).status.code(), Some(2));
    assert_eq!(imac(&["frobnicate"]).status.code(), Some(2));

    let no_data = imac(&["train", "--out", "/tmp/never.imacw"]);
    assert_eq!(no_data.status.code(), Some(2));
    assert!(stderr(&no_data).contains("IMAC_MNIST_DIR"));
    assert_eq!(imac(&["train", "--data", "/nonexistent", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(
        imac(&["infer", "--weights", &w, "--data", "/nonexistent"]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_weights_report_offset() {
    let bad = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed/weights_bad_byte.imacw");
    let o = imac(&["map", "--weights", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("byte offset 17"), "{}", stderr(&o));
}

#[test]
fn snr_closed_form() {
    let o = imac(&["snr", "--subarray", "32x32", "--tech", "MRAM", "--bitcell", "0t1r", "--no-parasitics"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "32x32");
    assert_eq!(row[11], "113.777778");
    assert_eq!(row[12], "1.000000");
}

#[test]
fn sweep_covers_all_axes() {
    let o = imac(&["sweep", "--sizes", "32x32,64x64,128x128,256x256"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 25);
    assert!(text.starts_with("size,tech,bitcell,parasitics,accuracy"));
    assert!(!text.contains("error"));
    assert_eq!(imac(&["sweep", "--images", "5"]).status.code(), Some(2));
}

#[test]
fn logs_resolved_config_and_seed() {
    let o = imac(&["snr", "--seed", "11", "--jobs", "2"]);
    let log = stderr(&o);
    assert!(log.contains("seed 11 jobs 2"), "{log}");
    assert!(log.contains("fabric FabricConfig"), "{log}");
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imac.toml");
    std::fs::write(
        &path,
        "[fabric]\nrows = 64\ncols = 64\ntechnology = \"CBRAM\"\nbitcell = \"0t1r\"\nparasitics = false\n\n\
         [technology.CBRAM]\nsigma_noise = 0.001\n",
    )
    .unwrap();
    let cfg = path.to_str().unwrap();

    let text = stdout(&imac(&["snr", "--config", cfg]));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["64x64", "CBRAM", "0T1R", "false"]);

    let text = stdout(&imac(&["snr", "--config", cfg, "--subarray", "32x32", "--tech", "MRAM"]));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["32x32", "MRAM", "0T1R", "false"]);

    std::fs::write(&path, "[fabric]\nrowz = 3\n").unwrap();
    assert_eq!(imac(&["snr", "--config", cfg]).status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imac.toml");
    std::fs::write(&path, "[solver]\nmax_iter = 1\npreconditioner = \"jacobi\"\n").unwrap();
    let o = imac(&["snr", "--config", path.to_str().unwrap(), "--subarray", "64x64"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
