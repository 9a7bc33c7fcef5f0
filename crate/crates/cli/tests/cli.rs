use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use foodnet::dataset::PackedDataset;
use foodnet::metrics::load_report;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foodnet")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Synthetic 32×32 data, split 50/50.
    fn new(per_class: usize, classes: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let (pc, cl) = (per_class.to_string(), classes.to_string());
        ok(&["synth", "--per-class", &pc, "--classes", &cl, "--size", "32", "--out", s(&f.p("all.fimg"))]);
        ok(&[
            "split", "--in", s(&f.p("all.fimg")), "--train-out", s(&f.p("train.fimg")), "--test-out",
            s(&f.p("test.fimg")), "--frac", "0.5",
        ]);
        f
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn synth_writes_requested_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.fimg");
    ok(&["synth", "--per-class", "5", "--classes", "4", "--size", "16", "--out", s(&out)]);
    let d = PackedDataset::load(&out).unwrap();
    assert_eq!(d.len(), 20);
    assert_eq!(d.class_names.len(), 4);
    assert_eq!((d.height, d.width), (16, 16));
}

#[test]
fn split_is_a_disjoint_cover() {
    let f = Fixture::new(6, 3);
    let all = PackedDataset::load(&f.p("all.fimg")).unwrap();
    let tr = PackedDataset::load(&f.p("train.fimg")).unwrap();
    let te = PackedDataset::load(&f.p("test.fimg")).unwrap();
    assert_eq!(tr.len() + te.len(), all.len());
    assert_eq!(tr.len(), 9);
    for r in &tr.records {
        assert!(!te.records.contains(r));
    }
}

#[test]
fn bad_values_are_usage_errors() {
    let f = Fixture::new(2, 2);
    let out = run(&[
        "split", "--in", s(&f.p("all.fimg")), "--train-out", s(&f.p("a")), "--test-out", s(&f.p("b")), "--frac", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["synth", "--out"]).status.code(), Some(2));
}

#[test]
fn ingest_of_empty_tree_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ingest", "--root", s(dir.path()), "--out", s(&dir.path().join("x.fimg"))]);
    assert!(!out.status.success());
}

#[test]
fn ingest_reads_class_folders() {
    let dir = tempfile::tempdir().unwrap();
    for class in ["ramen", "sushi"] {
        let sub = dir.path().join("root").join(class);
        std::fs::create_dir_all(&sub).unwrap();
        for i in 0..2u8 {
            image::RgbImage::from_pixel(20, 10, image::Rgb([i * 100, 50, 50]))
                .save(sub.join(format!("{i}.png")))
                .unwrap();
        }
    }
    let out = dir.path().join("d.fimg");
    ok(&["ingest", "--root", s(&dir.path().join("root")), "--out", s(&out), "--size", "8"]);
    let d = PackedDataset::load(&out).unwrap();
    assert_eq!(d.class_names, vec!["ramen", "sushi"]);
    assert_eq!(d.len(), 4);
}

#[test]
fn train_cnn_then_eval() {
    let f = Fixture::new(2, 3);
    ok(&[
        "--threads", "1", "train-cnn", "--train", s(&f.p("train.fimg")), "--test", s(&f.p("test.fimg")),
        "--checkpoint-out", s(&f.p("m.cnck")), "--curves-out", s(&f.p("c.csv")), "--chart-out", s(&f.p("c.svg")),
        "--max-epochs", "2", "--batch-size", "2",
    ]);
    let csv = std::fs::read_to_string(f.p("c.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(std::fs::read_to_string(f.p("c.svg")).unwrap().contains("<svg"));

    ok(&["eval", "--model", s(&f.p("m.cnck")), "--test", s(&f.p("test.fimg")), "--report-out", s(&f.p("r.json"))]);
    let report = load_report(&f.p("r.json")).unwrap();
    assert_eq!(report.classes.len(), 3);
    assert_eq!(report.matrix.iter().flatten().sum::<u64>(), 3);
}

#[test]
fn config_file_fills_unset_flags_and_flags_win() {
    let f = Fixture::new(2, 2);
    let cfg = f.p("run.toml");
    std::fs::write(&cfg, "max-epochs = 3\nbatch-size = 2\n").unwrap();
    let (tr, te, ck) = (f.p("train.fimg"), f.p("test.fimg"), f.p("m.cnck"));
    let train = |extra: &[&str], name: &str| {
        let curves = f.p(name);
        let mut args = vec![
            "--config", s(&cfg), "train-cnn", "--train", s(&tr), "--test", s(&te), "--checkpoint-out", s(&ck),
            "--curves-out", s(&curves),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read_to_string(curves).unwrap().lines().count() - 1
    };
    assert_eq!(train(&[], "a.csv"), 3);
    assert_eq!(train(&["--max-epochs", "1"], "b.csv"), 1);

    std::fs::write(&cfg, "bogus-key = 1\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "gradcheck"]).status.code(), Some(2));
}

#[test]
fn train_bof_then_eval() {
    let f = Fixture::new(4, 2);
    ok(&[
        "train-bof", "--train", s(&f.p("train.fimg")), "--model-out", s(&f.p("m.bofm")), "--k", "8", "--svm-epochs",
        "10",
    ]);
    ok(&["eval", "--model", s(&f.p("m.bofm")), "--test", s(&f.p("test.fimg")), "--report-out", s(&f.p("r.json"))]);
    assert_eq!(load_report(&f.p("r.json")).unwrap().matrix.iter().flatten().sum::<u64>(), 4);
}

#[test]
fn train_bof_rejects_oversized_vocabulary() {
    let f = Fixture::new(2, 2);
    let out = run(&[
        "train-bof", "--train", s(&f.p("train.fimg")), "--model-out", s(&f.p("m.bofm")), "--k", "100000",
    ]);
    assert!(!out.status.success());
    assert!(!f.p("m.bofm").exists());
}

#[test]
fn eval_rejects_unknown_model_files() {
    let f = Fixture::new(2, 2);
    std::fs::write(f.p("junk"), b"NOTAMODEL").unwrap();
    let out = run(&["eval", "--model", s(&f.p("junk")), "--test", s(&f.p("test.fimg")), "--report-out", s(&f.p("r"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_exit_status() {
    let good = ok(&["gradcheck"]);
    assert!(String::from_utf8_lossy(&good.stdout).contains("max relative error"));
    assert_eq!(run(&["gradcheck", "--corrupt"]).status.code(), Some(1));
}

#[test]
fn augment_preview_writes_pairs() {
    let f = Fixture::new(2, 2);
    let out = f.p("preview");
    ok(&["augment-preview", "--dataset", s(&f.p("all.fimg")), "--n", "3", "--count", "2", "--out-dir", s(&out)]);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2 * (1 + 3));

    let still = f.p("still");
    ok(&[
        "augment-preview", "--dataset", s(&f.p("all.fimg")), "--n", "1", "--out-dir", s(&still), "--max-rotation",
        "0", "--max-translate", "0", "--scale-min", "1", "--scale-max", "1",
    ]);
    let orig = image::open(still.join("img0_orig.png")).unwrap().to_rgb8();
    let aug = image::open(still.join("img0_aug0.png")).unwrap().to_rgb8();
    assert_eq!(orig, aug);
}
