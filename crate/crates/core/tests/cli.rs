use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use splitseg::field::{read_pgm, write_pgm, ScalarField};

fn splitseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitseg"))
        .args(args)
        .env("SPLITSEG_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn synth(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let (img, truth) = (dir.join("img.pgm"), dir.join("truth.pgm"));
    let mut args = vec![
        "gen-synthetic",
        "--image-out",
        s(&img),
        "--truth-out",
        s(&truth),
    ];
    args.extend_from_slice(extra);
    let out = splitseg(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (img, truth)
}

fn mask(w: usize, h: usize, on: impl Fn(usize) -> bool) -> ScalarField {
    ScalarField::new(
        w,
        h,
        (0..w * h).map(|k| if on(k) { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap()
}

#[test]
fn help_and_unknown_command() {
    assert_eq!(code(&splitseg(&["--help"])), 0);
    assert_eq!(code(&splitseg(&["frobnicate"])), 2);
    assert_eq!(code(&splitseg(&[])), 2);
}

#[test]
fn segment_model1_writes_binary_mask_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (img, truth) = synth(dir.path(), &[]);
    let (m, e) = (dir.path().join("m.pgm"), dir.path().join("e.csv"));
    let out = splitseg(&[
        "segment",
        "--model",
        "1",
        "--steps",
        "30",
        "--input",
        s(&img),
        "--mask-out",
        s(&m),
        "--energy-trace",
        s(&e),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&m).unwrap();
    let raster = &bytes[bytes.len() - 256 * 192..];
    assert!(raster.iter().all(|&b| b == 0 || b == 255));
    let csv = std::fs::read_to_string(&e).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,t,total,data,reg");
    assert_eq!(lines.count(), 31);

    let out = splitseg(&["metrics", "--pred", s(&m), "--truth", s(&truth)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let dice: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("dice "))
        .expect("dice line")
        .trim()
        .parse()
        .unwrap();
    assert!(dice > 0.95, "{text}");
}

#[test]
fn segment_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = synth(
        dir.path(),
        &[
            "--noise-sd",
            "0.2",
            "--seed",
            "5",
            "--width",
            "64",
            "--height",
            "48",
            "--radius",
            "12",
        ],
    );
    let mut outputs = vec![];
    for threads in ["1", "4"] {
        let (m, u, e) = (
            dir.path().join("m.pgm"),
            dir.path().join("u.pgm"),
            dir.path().join("e.csv"),
        );
        let out = Command::new(env!("CARGO_BIN_EXE_splitseg"))
            .args([
                "segment",
                "--model",
                "2",
                "--steps",
                "15",
                "--input",
                s(&img),
                "--mask-out",
                s(&m),
                "--u-out",
                s(&u),
                "--energy-trace",
                s(&e),
            ])
            .env("SPLITSEG_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push([m, u, e].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn gen_synthetic_is_deterministic_per_seed() {
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = synth(dir.path(), &["--noise-sd", "0.3", "--seed", seed]);
        std::fs::read(img).unwrap()
    };
    assert_eq!(read("9"), read("9"));
    assert_ne!(read("9"), read("10"));
}

#[test]
fn gen_synthetic_shapes_have_expected_areas() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = synth(dir.path(), &["--shape", "half-plane"]);
    let t = read_pgm(&std::fs::read(truth).unwrap()).unwrap();
    assert_eq!(t.values().iter().filter(|&&v| v == 1.0).count(), 128 * 192);
    let (_, truth) = synth(dir.path(), &["--shape", "square", "--radius", "10"]);
    let t = read_pgm(&std::fs::read(truth).unwrap()).unwrap();
    assert_eq!(t.values().iter().filter(|&&v| v == 1.0).count(), 21 * 21);
}

#[test]
fn metrics_reports_known_values() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    std::fs::write(&a, write_pgm(&mask(100, 10, |k| k < 100)).unwrap()).unwrap();
    std::fs::write(
        &b,
        write_pgm(&mask(100, 10, |k| (50..150).contains(&k))).unwrap(),
    )
    .unwrap();
    let out = splitseg(&["metrics", "--pred", s(&a), "--truth", s(&b)]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "accuracy 0.900000000000\ndice 0.500000000000\n"
    );
}

#[test]
fn approx_perimeter_is_complement_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = synth(dir.path(), &[]);
    let t = read_pgm(&std::fs::read(&truth).unwrap()).unwrap();
    let inv = dir.path().join("inv.pgm");
    std::fs::write(&inv, write_pgm(&t.map(|v| 1.0 - v)).unwrap()).unwrap();
    let a = stdout(&splitseg(&["approx-perimeter", "--mask", s(&truth)]));
    let b = stdout(&splitseg(&["approx-perimeter", "--mask", s(&inv)]));
    assert_eq!(a, b);
    let p: f64 = a.trim().parse().unwrap();
    assert!((p - 60.0 * std::f64::consts::PI).abs() < 0.05 * 60.0 * std::f64::consts::PI);
}

#[test]
fn verify_order_prints_slope_in_band() {
    for problem in ["lie-linear", "parallel-linear"] {
        let out = splitseg(&["verify-order", "--problem", problem]);
        assert_eq!(code(&out), 0);
        let text = stdout(&out);
        let slope: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix("slope "))
            .and_then(|rest| rest.split_whitespace().next())
            .expect("slope line")
            .parse()
            .unwrap();
        assert!((0.9..=1.1).contains(&slope), "{text}");
    }
    assert_eq!(code(&splitseg(&["verify-order", "--problem", "nope"])), 2);
}

#[test]
fn export_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scheme-sequential.json", "scheme-parallel.json"] {
        let cfg = examples().join(name);
        let net = dir.path().join("net.json");
        let out = splitseg(&[
            "export-net",
            "--config",
            s(&cfg),
            "--out",
            s(&net),
            "--check",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let u = dir.path().join("u.pgm");
        let out = splitseg(&[
            "eval-net",
            "--net",
            s(&net),
            "--config",
            s(&cfg),
            "--out",
            s(&u),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(u.exists());
    }
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = synth(
        dir.path(),
        &["--width", "32", "--height", "32", "--radius", "8"],
    );
    let m = dir.path().join("m.pgm");
    let missing = dir.path().join("missing.pgm");
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "1",
            "--input",
            s(&missing),
            "--mask-out",
            s(&m)
        ])),
        3
    );

    let garbage = dir.path().join("garbage.pgm");
    std::fs::write(&garbage, b"P5\n4 4\n255\nshort").unwrap();
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "1",
            "--input",
            s(&garbage),
            "--mask-out",
            s(&m)
        ])),
        3
    );

    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "3",
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "1",
            "--delta",
            "2",
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "1",
            "--dt",
            "-1",
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );

    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--config",
            s(&bad_json),
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );

    // One sweep is not enough once noise breaks the saturation.
    let (img, _) = synth(
        dir.path(),
        &[
            "--width",
            "32",
            "--height",
            "32",
            "--radius",
            "8",
            "--noise-sd",
            "0.3",
        ],
    );
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--model",
            "2",
            "--steps",
            "2",
            "--fp-max-iters",
            "1",
            "--input",
            s(&img),
            "--mask-out",
            s(&m),
        ])),
        4
    );
    assert!(!m.exists(), "no mask is left behind by failed runs");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = synth(
        dir.path(),
        &["--width", "40", "--height", "32", "--radius", "9"],
    );
    let cfg = dir.path().join("seg.json");
    std::fs::write(&cfg, r#"{"model": "II", "steps": 5, "delta": 1.0}"#).unwrap();
    let e = dir.path().join("e.csv");
    let m = dir.path().join("m.pgm");
    let out = splitseg(&[
        "segment",
        "--config",
        s(&cfg),
        "--steps",
        "7",
        "--input",
        s(&img),
        "--mask-out",
        s(&m),
        "--energy-trace",
        s(&e),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&e).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,t,total,data,entropy,interaction"
    );
    assert_eq!(csv.lines().count(), 1 + 8);

    std::fs::write(&cfg, r#"{"model": "II", "bogus": 1}"#).unwrap();
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--config",
            s(&cfg),
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );
    std::fs::write(&cfg, r#"{"model": "I"}"#).unwrap();
    assert_eq!(
        code(&splitseg(&[
            "segment",
            "--config",
            s(&cfg),
            "--model",
            "2",
            "--input",
            s(&img),
            "--mask-out",
            s(&m)
        ])),
        2
    );
}

#[test]
fn shipped_segment_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (img, truth) = synth(
        dir.path(),
        &["--width", "96", "--height", "80", "--radius", "20"],
    );
    let m = dir.path().join("m.pgm");
    let cfg = examples().join("segment-model2.json");
    let out = splitseg(&[
        "segment",
        "--config",
        s(&cfg),
        "--input",
        s(&img),
        "--mask-out",
        s(&m),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_pgm(&std::fs::read(&m).unwrap()).unwrap();
    let want = read_pgm(&std::fs::read(&truth).unwrap()).unwrap();
    assert_eq!(pred, want);
}
