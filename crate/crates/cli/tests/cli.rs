use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn dps(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dps"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

fn gen_test(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec![
        "gen-test", "--k", "5", "--size", "20", "--seed", "7", "--out", name,
    ];
    args.extend_from_slice(extra);
    let out = dps(&args, dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_test_is_deterministic_and_requires_out() {
    let dir = tempfile::tempdir().unwrap();
    gen_test(dir.path(), "a.dat", &[]);
    gen_test(dir.path(), "b.dat", &[]);
    assert_eq!(
        digest(&dir.path().join("a.dat")),
        digest(&dir.path().join("b.dat"))
    );
    assert_eq!(code(&dps(&["gen-test", "--n", "128"], dir.path())), 2);
}

#[test]
fn train_eval_bench_export_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_test(d, "test.dat", &[]);
    let out = dps(
        &[
            "train",
            "--sampler",
            "dps",
            "--recon",
            "lista",
            "--factor",
            "4",
            "--seed",
            "17",
            "--iters",
            "200",
            "--out",
            "run1",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["checkpoint.txt", "manifest.txt", "loss_history.csv"] {
        assert!(d.join("run1").join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(d.join("run1/loss_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 201);

    let out = dps(
        &["eval", "--run", "run1", "--test", "test.dat", "--out", "ev"],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(d.join("ev/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("dps,lista,4,"));
    assert_eq!(
        fs::read_to_string(d.join("ev/eval.csv"))
            .unwrap()
            .lines()
            .count(),
        21
    );

    let out = dps(
        &[
            "eval",
            "--run",
            "run1",
            "--test",
            "test.dat",
            "--out",
            "ev2",
            "--recon",
            "ista",
            "--ista-iters",
            "300",
            "--pattern-mode",
            "sample",
            "--pattern-seed",
            "3",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pattern:"));
    assert!(fs::read_to_string(d.join("ev2/summary.csv"))
        .unwrap()
        .contains("dps,ista,4,"));

    let out = dps(
        &[
            "bench", "--run", "run1", "--test", "test.dat", "--out", "b", "--reps", "3",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("speedup"));
    assert_eq!(
        fs::read_to_string(d.join("b/timing.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let out = dps(
        &[
            "export",
            "--run",
            "run1",
            "--summaries",
            "ev/summary.csv",
            "ev2/summary.csv",
            "--out",
            "exp",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pi = fs::read_to_string(d.join("exp/distributions.csv")).unwrap();
    assert_eq!(pi.lines().count(), 32);
    for line in pi.lines() {
        let sum: f64 = line.split(',').map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    assert!(d.join("exp/mse_vs_factor.svg").exists());
}

#[test]
fn uniform_run_exports_stride_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = dps(
        &[
            "train",
            "--sampler",
            "uniform",
            "--factor",
            "4",
            "--iters",
            "5",
            "--out",
            "u",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&dps(&["pattern", "--run", "u", "--out", "pat"], d)), 0);
    let csv = fs::read_to_string(d.join("pat/pattern_0.csv")).unwrap();
    let idx: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(idx, (0..32).map(|i| 4 * i).collect::<Vec<_>>());
}

#[test]
fn untrained_distributions_hug_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&dps(
            &["train", "--factor", "4", "--iters", "1", "--out", "r"],
            d
        )),
        0
    );
    assert_eq!(code(&dps(&["export", "--run", "r", "--out", "exp"], d)), 0);
    let pi = fs::read_to_string(d.join("exp/distributions.csv")).unwrap();
    let centers: Vec<f64> = pi
        .lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .map(|(n, c)| n as f64 * c.parse::<f64>().unwrap())
                .sum()
        })
        .collect();
    assert_eq!(centers.len(), 32);
    assert!(centers.windows(2).all(|w| w[1] > w[0]), "{centers:?}");
    for (m, c) in centers.iter().enumerate() {
        assert!(
            (c - (4 * m + 3) as f64).abs() < 16.0,
            "row {m} centered at {c}"
        );
    }
}

#[test]
fn non_divisible_length_is_adjusted_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = dps(
        &[
            "train",
            "--sampler",
            "uniform",
            "--factor",
            "3",
            "--iters",
            "5",
            "--out",
            "u3",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("adjusted from 128 to 129"));
    let manifest = fs::read_to_string(d.join("u3/manifest.txt")).unwrap();
    assert!(manifest.contains("n = 129\nm = 43"));
}

#[test]
fn flags_override_config_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.txt"),
        "# short run\niters = 3\nbatch = 4\nsampler = random\n",
    )
    .unwrap();
    let out = dps(
        &[
            "train", "--config", "cfg.txt", "--batch", "2", "--factor", "4", "--out", "r",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ck = fs::read_to_string(d.join("r/checkpoint.txt")).unwrap();
    assert!(ck.contains("iters = 3\n"));
    assert!(ck.contains("batch = 2\n"));
    assert!(ck.contains("sampler = random\n"));
    assert!(ck.contains("lr_theta = 1e-3\n"));
    let manifest = fs::read_to_string(d.join("r/manifest.txt")).unwrap();
    assert!(!manifest.contains("config_file_sha256 = none"));

    let out = dps(
        &[
            "train",
            "--config",
            "cfg.txt",
            "--profile",
            "desk",
            "--iters",
            "2",
            "--factor",
            "4",
            "--out",
            "r2",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(d.join("r2/checkpoint.txt"))
        .unwrap()
        .contains("iters = 2\n"));
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        assert_eq!(
            code(&dps(
                &["train", "--factor", "4", "--seed", "5", "--iters", "30", "--out", name],
                d
            )),
            0
        );
    }
    assert_eq!(
        digest(&d.join("a/checkpoint.txt")),
        digest(&d.join("b/checkpoint.txt"))
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&dps(&["train", "--factor", "5", "--out", "x"], d)), 2);
    assert_eq!(
        code(&dps(&["train", "--sampler", "nope", "--out", "x"], d)),
        2
    );
    assert_eq!(
        code(&dps(
            &[
                "eval",
                "--run",
                "missing",
                "--test",
                "missing.dat",
                "--out",
                "e"
            ],
            d
        )),
        2
    );
    fs::write(d.join("cfg.txt"), "unknown_key = 1\n").unwrap();
    assert_eq!(
        code(&dps(&["train", "--config", "cfg.txt", "--out", "x"], d)),
        2
    );
}

#[test]
fn divergence_exits_with_three_and_keeps_partial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.txt"), "amplitude_std = 1e200\niters = 20\n").unwrap();
    let out = dps(
        &[
            "train", "--config", "cfg.txt", "--factor", "4", "--out", "div",
        ],
        d,
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("div/checkpoint.txt").exists());
}

#[test]
fn gradcheck_passes_and_catches_a_sign_fault() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dps(&["gradcheck"], dir.path());
    assert_eq!(code(&ok), 0);
    assert_eq!(String::from_utf8_lossy(&ok.stdout).lines().count(), 6);
    assert_eq!(
        code(&dps(&["gradcheck", "--flip-entropy-sign"], dir.path())),
        1
    );
}
