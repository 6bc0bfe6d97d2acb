use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cnnma::mnist::{encode_idx_images, encode_idx_labels};
use cnnma::{ImageSet, LabelSet};

fn cnnma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnnma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Writes tiny MNIST-shaped IDX files; each class brightens its own band of rows.
fn write_idx(dir: &Path, train: usize, test: usize) {
    let make = |n: usize| {
        let labels: Vec<u8> = (0..n).map(|i| (i * 7 % 10) as u8).collect();
        let mut pixels = vec![0u8; n * 784];
        for (i, &l) in labels.iter().enumerate() {
            for p in 0..784 {
                if (p / 28 / 3) as u8 == l {
                    pixels[i * 784 + p] = 200 + (p % 50) as u8;
                }
            }
        }
        let images = ImageSet {
            count: n,
            rows: 28,
            cols: 28,
            pixels,
        };
        (
            encode_idx_images(&images),
            encode_idx_labels(&LabelSet { labels }),
        )
    };
    let (ti, tl) = make(train);
    let (si, sl) = make(test);
    fs::write(dir.join("train-images-idx3-ubyte"), ti).unwrap();
    fs::write(dir.join("train-labels-idx1-ubyte"), tl).unwrap();
    fs::write(dir.join("t10k-images-idx3-ubyte"), si).unwrap();
    fs::write(dir.join("t10k-labels-idx1-ubyte"), sl).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_subcommands() {
    let out = cnnma(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["train", "anneal", "sweep", "compare", "bench"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn train_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write_idx(&data, 120, 40);
    let out_dir = tmp.path().join("out");
    let out = cnnma(&[
        "train",
        "--data-dir",
        s(&data),
        "--repeats",
        "2",
        "--epochs",
        "2",
        "--no-wall-time",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("epochs.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["label"], "baseline");
    assert_eq!(results["arms"][0]["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn anneal_compare_and_sweep_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write_idx(&data, 100, 30);
    let common = [
        "--data-dir",
        s(&data),
        "--repeats",
        "1",
        "--no-wall-time",
        "--iterations",
        "2",
    ];

    let out_dir = tmp.path().join("anneal");
    let mut args = vec!["anneal", "--out", s(&out_dir)];
    args.extend(common);
    assert_eq!(code(&cnnma(&args)), 0);
    assert!(out_dir.join("traces/cnn_ma_r00_e01.csv").is_file());

    let out_dir = tmp.path().join("compare");
    let mut args = vec!["compare", "--out", s(&out_dir)];
    args.extend(common);
    assert_eq!(code(&cnnma(&args)), 0);
    let cmp = fs::read_to_string(out_dir.join("comparisons.csv")).unwrap();
    assert!(cmp.contains("cnn_sa,cnn_ma"));

    let out_dir = tmp.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--param",
        "neighborhood",
        "--values",
        "1,3",
        "--out",
        s(&out_dir),
    ];
    args.extend(common);
    assert_eq!(code(&cnnma(&args)), 0);
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(out_dir.join("neighborhood_3/results.json").is_file());
}

#[test]
fn config_file_is_honored_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write_idx(&data, 60, 20);
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "epochs = 3\nrepeats = 4\nrecord_wall_time = false\n[data]\ndir = {:?}\n[anneal]\nmax_iterations = 1\n",
            s(&data)
        ),
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = cnnma(&[
        "anneal",
        "--config",
        s(&cfg),
        "--repeats",
        "1",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["config"]["epochs"], 3);
    assert_eq!(results["config"]["repeats"], 1);
    assert_eq!(results["config"]["anneal"]["max_iterations"], 1);
}

#[test]
fn bench_runs_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cnnma(&[
        "bench",
        "--functions",
        "sphere,rosenbrock",
        "--runs",
        "4",
        "--iterations",
        "100",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let summary = fs::read_to_string(tmp.path().join("bench_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn exit_codes_follow_error_category() {
    let tmp = tempfile::tempdir().unwrap();
    // usage and validation errors
    assert_eq!(code(&cnnma(&["sweep", "--param", "momentum"])), 2);
    assert_eq!(code(&cnnma(&["train", "--epochs", "0"])), 2);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "epoch = 3\n").unwrap();
    assert_eq!(code(&cnnma(&["train", "--config", s(&bad)])), 2);
    assert_eq!(code(&cnnma(&["bench", "--functions", "ackley"])), 2);
    // missing data
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&cnnma(&["train", "--data-dir", s(&empty)])), 3);
    // corrupt data
    let data = tmp.path().join("corrupt");
    fs::create_dir(&data).unwrap();
    write_idx(&data, 20, 10);
    fs::write(
        data.join("t10k-labels-idx1-ubyte"),
        [0u8, 0, 8, 1, 0, 0, 0, 1],
    )
    .unwrap();
    assert_eq!(code(&cnnma(&["train", "--data-dir", s(&data)])), 3);
    // output path blocked by a file
    let data = tmp.path().join("ok");
    fs::create_dir(&data).unwrap();
    write_idx(&data, 20, 10);
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = cnnma(&[
        "train",
        "--data-dir",
        s(&data),
        "--repeats",
        "1",
        "--out",
        s(&blocker.join("sub")),
    ]);
    assert_eq!(code(&out), 5);
}
