use std::path::Path;
use std::process::{Command, Output};

use unioncut::distill::{save_head, LogisticHead};
use unioncut::synthetic::two_feature_grid;
use unioncut::tensor_io::{load_mask, save_feature_grid, save_mask, BinaryMask};

fn unioncut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unioncut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn block(h: usize, w: usize, r0: usize, c0: usize, size: usize) -> BinaryMask {
    BinaryMask::from_fn(h, w, |r, c| {
        (r0..r0 + size).contains(&r) && (c0..c0 + size).contains(&c)
    })
}

/// Writes `n` two-feature scenes with their ground truth and a manifest.
fn dataset(dir: &Path, n: usize) -> std::path::PathBuf {
    let mut text = String::new();
    for k in 0..n {
        let gt = block(10, 10, 1 + k % 3, 2 + k % 4, 3 + k % 2);
        save_feature_grid(
            dir.join(format!("i{k}.ucft")),
            &two_feature_grid(&gt, 4).unwrap(),
        )
        .unwrap();
        save_mask(dir.join(format!("i{k}.gt.ucmk")), &gt).unwrap();
        text.push_str(&format!("i{k}\ti{k}.ucft\ti{k}.gt.ucmk\n"));
    }
    let m = dir.join("manifest.tsv");
    std::fs::write(&m, text).unwrap();
    m
}

#[test]
fn run_writes_mask_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let gt = block(10, 10, 2, 3, 4);
    let feat = dir.path().join("a.ucft");
    save_feature_grid(&feat, &two_feature_grid(&gt, 4).unwrap()).unwrap();
    let out = dir.path().join("a.ucmk");
    let heat = dir.path().join("a.ucht");
    let o = unioncut(&[
        "run",
        "--features",
        s(&feat),
        "--out",
        s(&out),
        "--heatmap",
        s(&heat),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(load_mask(&out).unwrap(), gt);
    assert!(heat.exists());
    assert!(stdout(&o).contains("union_patches=16"));
}

#[test]
fn run_input_errors_exit_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.ucmk");
    let missing = dir.path().join("missing.ucft");
    let o = unioncut(&["run", "--features", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.ucft"));

    let corrupt = dir.path().join("corrupt.ucft");
    std::fs::write(&corrupt, b"XXXX\x01\x00\x00\x00").unwrap();
    let o = unioncut(&["run", "--features", s(&corrupt), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    assert_eq!(
        unioncut(&["run", "--bandwidth", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(unioncut(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), 3);
    for w in ["1", "3"] {
        let d = dir.path().join(format!("w{w}"));
        std::fs::create_dir(&d).unwrap();
        let o = unioncut(&[
            "--workers",
            w,
            "run",
            "--manifest",
            s(&m),
            "--out-dir",
            s(&d),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for k in 0..3 {
        for ext in ["ucmk", "ucht"] {
            let a = std::fs::read(dir.path().join(format!("w1/i{k}.{ext}"))).unwrap();
            let b = std::fs::read(dir.path().join(format!("w3/i{k}.{ext}"))).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn distill_then_predict_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), 4);
    let head = dir.path().join("head.ucwt");
    let o = unioncut(&[
        "distill",
        "--manifest",
        s(&m),
        "--out",
        s(&head),
        "--iterations",
        "120",
        "--batch-size",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|v| v.strip_prefix('='))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("final_loss") < value("initial_loss"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iter    50"));

    let pred = dir.path().join("pred");
    std::fs::create_dir(&pred).unwrap();
    for k in 0..4 {
        let o = unioncut(&[
            "predict",
            "--head",
            s(&head),
            "--features",
            s(&dir.path().join(format!("i{k}.ucft"))),
            "--out",
            s(&pred.join(format!("i{k}.ucmk"))),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let o = unioncut(&["eval", "--manifest", s(&m), "--pred-dir", s(&pred)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let sweep: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("corunion@"))
        .collect();
    assert_eq!(
        sweep,
        [
            "corunion@0.50=1.0000",
            "corunion@0.60=1.0000",
            "corunion@0.70=1.0000",
            "corunion@0.80=1.0000",
            "corunion@0.90=1.0000",
        ]
    );
    assert!(text.contains("mean_iou=1.0000"));

    std::fs::remove_file(pred.join("i3.ucmk")).unwrap();
    let o = unioncut(&["eval", "--manifest", s(&m), "--pred-dir", s(&pred)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
}

#[test]
fn distill_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let head = dir.path().join("head.ucwt");
    let o = unioncut(&["distill", "--manifest", s(&empty), "--out", s(&head)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!head.exists());

    let m = dataset(dir.path(), 2);
    let o = unioncut(&[
        "distill",
        "--manifest",
        s(&m),
        "--out",
        s(&head),
        "--iterations",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let pred = dir.path().join("p.ucmk");
    let o = unioncut(&[
        "predict",
        "--head",
        s(&head),
        "--features",
        s(&dir.path().join("i0.ucft")),
        "--out",
        s(&pred),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(load_mask(&pred).unwrap().count_ones(), 0);
}

#[test]
fn predict_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let head = dir.path().join("h.ucwt");
    save_head(&head, &LogisticHead::zeros(7)).unwrap();
    let out = dir.path().join("p.ucmk");
    let o = unioncut(&[
        "predict",
        "--head",
        s(&head),
        "--features",
        s(&dir.path().join("i0.ucft")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn mce_on_ideal_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), 3);
    let o = unioncut(&["mce", "--manifest", s(&m)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in [
        "a=0.0000",
        "b=1.0000",
        "c=1.0000",
        "d=0.0000",
        "images_used=3",
        "solution=greater 0.5000",
    ] {
        assert!(
            text.lines().any(|l| l == line),
            "{line} missing from {text}"
        );
    }
    let o = unioncut(&[
        "mce",
        "--manifest",
        s(&m),
        "--classifier",
        "cosine",
        "--subsample-seeds",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        unioncut(&["mce", "--manifest", s(&m), "--classifier", "bogus"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn solve_prints_comparator_and_threshold() {
    let o = unioncut(&["solve", "0.1215", "0.5496", "0.1981", "0.0563"]);
    assert_eq!(stdout(&o), "greater 0.1344\n");
    let o = unioncut(&["solve", "0.0308", "0.7270", "0.1927", "0.0198"]);
    assert_eq!(stdout(&o), "greater 0.1862\n");
    assert_eq!(
        stdout(&unioncut(&["solve", "0.5", "0.5", "0.25", "0.25"])),
        "always\n"
    );
    assert_eq!(
        unioncut(&["solve", "1.5", "0", "0", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn corner_audit_rates() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), 2);
    let o = unioncut(&["corner-audit", "--manifest", s(&m)]);
    assert!(stdout(&o).contains("success_rate=1.0000"));

    save_mask(dir.path().join("i1.gt.ucmk"), &BinaryMask::ones(10, 10)).unwrap();
    let o = unioncut(&["corner-audit", "--manifest", s(&m)]);
    assert!(stdout(&o).contains("success_rate=0.5000"));

    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "\n").unwrap();
    assert_eq!(
        unioncut(&["corner-audit", "--manifest", s(&empty)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn judge_applies_theta_and_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let union = dir.path().join("u.ucmk");
    save_mask(&union, &BinaryMask::from_fn(1, 10, |_, c| c < 5)).unwrap();
    let a = dir.path().join("a.ucmk");
    let b = dir.path().join("b.ucmk");
    save_mask(&a, &BinaryMask::from_fn(1, 10, |_, c| c < 4)).unwrap();
    save_mask(&b, &BinaryMask::from_fn(1, 10, |_, c| c >= 4)).unwrap();
    let o = unioncut(&["judge", "--union", s(&union), "--candidates", s(&a), s(&b)]);
    assert_eq!(
        stdout(&o),
        "candidate0.foreground=true\ncandidate1.foreground=false\ncoverage=0.8000\nstop=true\n"
    );
    let o = unioncut(&[
        "judge",
        "--union",
        s(&union),
        "--candidates",
        s(&a),
        "--gamma",
        "0.9",
    ]);
    assert!(stdout(&o).ends_with("stop=false\n"));
    assert_eq!(
        unioncut(&[
            "judge",
            "--union",
            s(&union),
            "--candidates",
            s(&a),
            "--theta",
            "2"
        ])
        .status
        .code(),
        Some(1)
    );
}
