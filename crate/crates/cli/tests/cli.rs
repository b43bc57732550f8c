use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mlsh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlsh")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mlsh(args);
    assert!(
        out.status.success(),
        "mlsh {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gaussian(dir: &TempDir, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = p(dir, name);
    ok(&["generate", "gaussian-sign", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(&path)]);
    path
}

fn train_small(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train", "--data", s(data), "--out", s(out), "--bits", "64", "--batches", "2", "--steps", "20",
        "--pairs", "200", "--stddev", "0.05", "--sampling", "randomhit-randommiss", "--no-preprocess",
        "--seed", "7",
    ];
    args.extend_from_slice(extra);
    mlsh(&args)
}

#[test]
fn same_train_command_gives_identical_model_files() {
    let dir = TempDir::new().unwrap();
    let data = gaussian(&dir, "d.csv", 120, 1);
    let (a, b, c) = (p(&dir, "a.json"), p(&dir, "b.json"), p(&dir, "c.json"));
    assert!(train_small(&data, &a, &[]).status.success());
    assert!(train_small(&data, &b, &["--threads", "3"]).status.success());
    assert!(train_small(&data, &c, &["--threads", "1"]).status.success());
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes, fs::read(&c).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.contains("\"format_version\": 1"));
    assert!(text.contains("\"steps_per_batch\": 20"));
}

#[test]
fn ratio_without_negatives_reports_error() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "one.csv");
    let rows: String = (0..20).map(|i| format!("same,{},{},1\n", i as f64 * 0.1 - 1.0, (i % 3) as f64)).collect();
    fs::write(&data, rows).unwrap();
    let out = train_small(&data, &p(&dir, "m.json"), &["--objective", "ratio"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no negative pair exists"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(mlsh(&["train"]).status.code(), Some(1));
    assert_eq!(mlsh(&["generate", "gaussian-sign", "--out", "x.csv"]).status.code(), Some(1));
    let dir = TempDir::new().unwrap();
    let data = gaussian(&dir, "d.csv", 50, 2);
    let out = train_small(&data, &p(&dir, "m.json"), &["--bits", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = mlsh(&["train", "--data", s(&data), "--out", "m.json", "--seed", "1", "--sampling", "farhit-randommiss"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_files_are_data_errors() {
    let out = mlsh(&["train", "--data", "/nonexistent/d.csv", "--out", "/tmp/x.json", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

fn parse_curves(text: &str) -> Vec<(f64, f64, f64, String)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("acquisition,precision,recall,method"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].to_string())
        })
        .collect()
}

#[test]
fn evaluate_emits_three_methods_and_consistent_ratios() {
    let dir = TempDir::new().unwrap();
    let train = gaussian(&dir, "train.csv", 150, 10);
    let searched = gaussian(&dir, "searched.csv", 150, 11);
    let queries = gaussian(&dir, "queries.csv", 40, 12);
    let model = p(&dir, "m.json");
    assert!(train_small(&train, &model, &[]).status.success());
    let (curves, scaled) = (p(&dir, "curves.csv"), p(&dir, "scaled.csv"));
    let out = ok(&[
        "evaluate", "--model", s(&model), "--searched", s(&searched), "--queries", s(&queries), "--seed", "99",
        "--out", s(&curves), "--scaled-out", s(&scaled),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("precision@0.1"));

    let rows = parse_curves(&fs::read_to_string(&curves).unwrap());
    let mut methods: Vec<&str> = rows.iter().map(|r| r.3.as_str()).collect();
    methods.dedup();
    assert_eq!(methods, ["mlsh", "lsh", "l2"]);
    assert_eq!(rows.len(), 3 * 19);
    assert!(rows.iter().any(|r| (r.0 - 0.1).abs() < 1e-12));

    let get = |m: &str, acq: f64| rows.iter().find(|r| r.3 == m && r.0 == acq).unwrap().clone();
    let scaled_text = fs::read_to_string(&scaled).unwrap();
    let mut lines = scaled_text.lines();
    assert_eq!(lines.next(), Some("acquisition,precision_ratio,recall_ratio,method"));
    let mut checked = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let acq: f64 = f[0].parse().unwrap();
        let (m, base) = (get(f[3], acq), get("lsh", acq));
        for (cell, num, den) in [(f[1], m.1, base.1), (f[2], m.2, base.2)] {
            if den == 0.0 {
                assert_eq!(cell, "undefined");
            } else {
                let r: f64 = cell.parse().unwrap();
                assert!((r - num / den).abs() <= 1e-12 * r.abs().max(1.0));
                checked += 1;
            }
        }
    }
    assert!(checked >= 2 * 2 * 19 - 4);
}

#[test]
fn encode_then_search_matches_model_codes() {
    let dir = TempDir::new().unwrap();
    let data = gaussian(&dir, "d.csv", 80, 3);
    let model = p(&dir, "m.json");
    assert!(train_small(&data, &model, &["--track-best"]).status.success());
    let codes = p(&dir, "codes.bin");
    ok(&["encode", "--model", s(&model), "--data", s(&data), "--out", s(&codes)]);
    let bytes = fs::read(&codes).unwrap();
    assert_eq!(&bytes[..8], b"MLSHCODE");
    assert_eq!(bytes.len(), 32 + 80 * 8);

    let hits = p(&dir, "hits.csv");
    ok(&["search", "--model", s(&model), "--codes", s(&codes), "--queries", s(&data), "--k", "3", "--out", s(&hits)]);
    let text = fs::read_to_string(&hits).unwrap();
    let rows: Vec<Vec<usize>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 80 * 3);
    // Each record is at Hamming distance 0 from itself.
    for q in 0..80 {
        let first = &rows[q * 3];
        assert_eq!((first[0], first[1], first[3]), (q, 0, 0));
    }

    ok(&["encode", "--model", s(&model), "--data", s(&data), "--out", s(&p(&dir, "best.bin")), "--best"]);
}

#[test]
fn preprocess_writes_model_and_transformed_data() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "blobs.csv");
    ok(&["generate", "clusters", "--classes", "4", "--dim", "6", "--per-class", "20", "--seed", "5", "--out", s(&data)]);
    let (model, transformed) = (p(&dir, "pre.json"), p(&dir, "t.csv"));
    let out = ok(&["preprocess", "--data", s(&data), "--out", s(&model), "--transformed", s(&transformed)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("of 6 components"));
    let json = fs::read_to_string(&model).unwrap();
    assert!(json.contains("\"projection\""));
    let rows = fs::read_to_string(&transformed).unwrap();
    assert_eq!(rows.lines().count(), 80);
}

fn histogram(path: &Path, component: usize) -> Vec<usize> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == component.to_string())
        .map(|f| f[3].parse().unwrap())
        .collect()
}

#[test]
fn diagnose_separates_trained_from_random_normals() {
    let dir = TempDir::new().unwrap();
    let data = gaussian(&dir, "d.csv", 300, 4);
    let model = p(&dir, "m.json");
    ok(&[
        "train", "--data", s(&data), "--out", s(&model), "--bits", "128", "--batches", "5", "--steps", "100",
        "--pairs", "2000", "--stddev", "0.01", "--sampling", "randomhit-randommiss", "--no-preprocess", "--seed", "4",
    ]);
    let (cos, hist) = (p(&dir, "cos.csv"), p(&dir, "hist.csv"));
    ok(&["diagnose", "--model", s(&model), "--cosine-out", s(&cos), "--histogram-out", s(&hist), "--bins", "10"]);
    let matrix: Vec<Vec<f64>> = fs::read_to_string(&cos)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(matrix.len(), 128);
    assert!(matrix.iter().enumerate().all(|(i, r)| r.len() == 128 && r[i] == 0.0));
    let trained = histogram(&hist, 0);
    assert_eq!(trained.iter().sum::<usize>(), 128);
    let edge = |h: &[usize]| (h[0] + h[9]) as f64 / 128.0;
    assert!(edge(&trained) > 0.6, "{trained:?}");

    let (rcos, rhist) = (p(&dir, "rcos.csv"), p(&dir, "rhist.csv"));
    ok(&[
        "diagnose", "--random-bits", "128", "--random-dim", "3", "--seed", "4", "--cosine-out", s(&rcos),
        "--histogram-out", s(&rhist), "--bins", "10",
    ]);
    let random = histogram(&rhist, 0);
    assert!(edge(&random) < 0.3, "{random:?}");
    // Uniform normals: the x-component is uniform on [-1, 1].
    assert!(random.iter().all(|&c| c > 0));
}
