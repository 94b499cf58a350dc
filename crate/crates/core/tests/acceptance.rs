//! End-to-end acceptance checks at desk scale. Prints one line per
//! criterion and exits non-zero if any fails.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::process::ExitCode;
use std::time::Instant;

use dps_core::analysis::{
    evaluate, grating_lobe_angle, resolve_pattern, rip_rank_check, timing_benchmark,
    GratingLobeQuery, PatternMode, Recovery,
};
use dps_core::checkpoint;
use dps_core::dps::{
    draw_pattern, entropy_penalty, init_logits, sample_gumbel, uniform_pattern, LogitsMatrix,
    TemperatureSchedule,
};
use dps_core::gradcheck::grad_check_all;
use dps_core::reconstruction::IstaConfig;
use dps_core::signals::{make_test_set, SignalBatch, SparseSignalConfig};
use dps_core::streams::{stream, Stream};
use dps_core::training::{
    anneal_tau, initial_artifacts, train, RunArtifacts, SamplerKind, TrainConfig,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEEDS: [u64; 3] = [1, 2, 3];
const TEST_SEED: u64 = 1000;
const TEST_SIZE: usize = 1000;
const ISTA_THRESHOLDS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn desk(sampler: SamplerKind, factor: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        sampler,
        factor,
        seed,
        ..TrainConfig::desk()
    }
}

fn trained(cfg: TrainConfig) -> RunArtifacts {
    let start = Instant::now();
    let run = train(&cfg).expect("training succeeds");
    eprintln!(
        "  trained {} x{} seed {} in {:.1} s",
        cfg.sampler,
        cfg.factor,
        cfg.seed,
        start.elapsed().as_secs_f64()
    );
    run
}

fn lista_mse(run: &RunArtifacts, testset: &SignalBatch) -> f64 {
    evaluate(run, testset, PatternMode::Map, Recovery::Lista)
        .unwrap()
        .mean_mse
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.2e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Runs {
    dps4: Vec<RunArtifacts>,
    random4: Vec<RunArtifacts>,
    uniform4: RunArtifacts,
    dps8: RunArtifacts,
    testset: SignalBatch,
}

fn shared_runs() -> Runs {
    let dir = tempfile::tempdir().unwrap();
    let testset = make_test_set(
        &SparseSignalConfig::new(128, 5),
        TEST_SIZE,
        TEST_SEED,
        &dir.path().join("test.dat"),
    )
    .unwrap();
    Runs {
        dps4: SEEDS
            .iter()
            .map(|&s| trained(desk(SamplerKind::Dps, 4, s)))
            .collect(),
        random4: SEEDS
            .iter()
            .map(|&s| trained(desk(SamplerKind::Random, 4, s)))
            .collect(),
        uniform4: trained(desk(SamplerKind::Uniform, 4, SEEDS[0])),
        dps8: trained(desk(SamplerKind::Dps, 8, SEEDS[0])),
        testset,
    }
}

fn aliasing(r: &Runs) -> Outcome {
    let uniform = lista_mse(&r.uniform4, &r.testset);
    let dps = lista_mse(&r.dps4[0], &r.testset);
    let ratio = uniform / dps;
    outcome(
        ratio >= 3.0,
        format!("uniform {uniform:.3e} / dps {dps:.3e} = {ratio:.1} (need >= 3)"),
    )
}

fn on_par_with_random(r: &Runs) -> Outcome {
    let dps: Vec<f64> = r
        .dps4
        .iter()
        .map(|run| lista_mse(run, &r.testset))
        .collect();
    let random: Vec<f64> = r
        .random4
        .iter()
        .map(|run| lista_mse(run, &r.testset))
        .collect();
    let ratio = mean(&dps) / mean(&random);
    outcome(
        (1.0 / 1.5..=1.5).contains(&ratio),
        format!(
            "dps {:.3e} vs random {:.3e} over 3 seeds, ratio {ratio:.3} (need within 1.5x either way); per seed dps [{}] random [{}]",
            mean(&dps),
            mean(&random),
            list(&dps),
            list(&random)
        ),
    )
}

fn speed(r: &Runs) -> Outcome {
    let run = &r.dps4[0];
    let pattern = resolve_pattern(run, PatternMode::Map).unwrap();
    let report =
        timing_benchmark(&run.theta, &pattern, &IstaConfig::default(), &r.testset, 5).unwrap();
    outcome(
        report.speedup >= 100.0,
        format!(
            "lista {:.3e} s, ista(300) {:.3e} s, speedup {:.0} (need >= 100)",
            report.lista_seconds, report.ista_seconds, report.speedup
        ),
    )
}

fn high_factor_quality(r: &Runs) -> Outcome {
    let lista = lista_mse(&r.dps8, &r.testset);
    let mut best = (f64::INFINITY, 0.0);
    for threshold in ISTA_THRESHOLDS {
        let cfg = IstaConfig {
            threshold,
            ..IstaConfig::default()
        };
        let mse = evaluate(&r.dps8, &r.testset, PatternMode::Map, Recovery::Ista(cfg))
            .unwrap()
            .mean_mse;
        if mse < best.0 {
            best = (mse, threshold);
        }
    }
    outcome(
        lista <= best.0,
        format!(
            "factor 8: lista {lista:.3e} vs best ista {:.3e} (threshold {})",
            best.0, best.1
        ),
    )
}

fn rip(r: &Runs) -> Outcome {
    let learned = resolve_pattern(&r.dps4[0], PatternMode::Map).unwrap();
    let good = rip_rank_check(&learned, 5, 10_000, 1e-6, SEEDS[0]).unwrap();
    let bad = rip_rank_check(
        &uniform_pattern(128, 32).unwrap(),
        5,
        10_000,
        1e-6,
        SEEDS[0],
    )
    .unwrap();
    outcome(
        good.pass && !bad.pass,
        format!(
            "learned min sv {:.3e} over {} subsets; uniform min sv {:.1e}",
            good.min_singular, good.tested, bad.min_singular
        ),
    )
}

fn grating() -> Outcome {
    let q = GratingLobeQuery {
        order: 1,
        wavelength: 0.3,
        pitch: 0.151,
        factor: 4.0,
    };
    let angle = grating_lobe_angle(&q)
        .unwrap()
        .degrees()
        .unwrap_or(f64::NAN);
    outcome(
        (angle - 29.8).abs() <= 0.05,
        format!("first lobe at {angle:.4} deg (need 29.8 +- 0.05)"),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let report = grad_check_all(1e-5);
    let worst = report
        .blocks
        .iter()
        .map(|b| b.max_rel_error)
        .fold(0.0, f64::max);
    outcome(
        report.pass() && start.elapsed().as_secs() < 60,
        format!(
            "{} blocks, worst relative error {worst:.2e} (need < 1e-4)",
            report.blocks.len()
        ),
    )
}

fn gumbel_distribution() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let phi =
        LogitsMatrix::new(Array2::from_shape_fn((1, 8), |_| normal.sample(&mut rng))).unwrap();
    let expected = phi.probabilities();
    let mut counts = [0usize; 8];
    let mut gumbel = stream(8, Stream::Gumbel);
    for _ in 0..DRAWS {
        let noise = sample_gumbel(&mut gumbel, 1, 8);
        counts[draw_pattern(&phi, &noise).unwrap().0.indices()[0]] += 1;
    }
    let tv = 0.5
        * counts
            .iter()
            .zip(expected.iter())
            .map(|(&c, p)| (c as f64 / DRAWS as f64 - p).abs())
            .sum::<f64>();
    outcome(
        tv < 0.01,
        format!("total variation {tv:.2e} over {DRAWS} draws (need < 0.01)"),
    )
}

fn no_replacement() -> Outcome {
    const PATTERNS: usize = 100_000;
    let mut rng = stream(9, Stream::Init);
    let phi = init_logits(32, 128, &mut rng).unwrap();
    let mut gumbel = stream(9, Stream::Gumbel);
    let mut duplicates = 0;
    for _ in 0..PATTERNS {
        let noise = sample_gumbel(&mut gumbel, 32, 128);
        let (pattern, _) = draw_pattern(&phi, &noise).unwrap();
        let mut seen = [false; 128];
        for &i in pattern.indices() {
            if std::mem::replace(&mut seen[i], true) {
                duplicates += 1;
            }
        }
    }
    outcome(
        duplicates == 0,
        format!("{duplicates} duplicate indices in {PATTERNS} patterns"),
    )
}

fn schedule_and_determinism() -> Outcome {
    let schedule = TemperatureSchedule::new(TrainConfig::desk().n_iter);
    let first = anneal_tau(&schedule, 1).unwrap();
    let last = anneal_tau(&schedule, schedule.n_iter).unwrap();
    let cfg = TrainConfig {
        n_iter: 300,
        ..desk(SamplerKind::Dps, 4, 11)
    };
    let hash = |run: &RunArtifacts| {
        let mut h = DefaultHasher::new();
        checkpoint::render(run).hash(&mut h);
        h.finish()
    };
    let a = hash(&train(&cfg).unwrap());
    let b = hash(&train(&cfg).unwrap());
    outcome(
        first == 5.0 && last == 0.5 && a == b,
        format!("tau(1) = {first}, tau(end) = {last}, checkpoint hashes {a:016x} / {b:016x}"),
    )
}

fn entropy_trend(r: &Runs) -> Outcome {
    let run = &r.dps4[0];
    let initial = entropy_penalty(&initial_artifacts(&run.config).unwrap().phi).0;
    let last = entropy_penalty(&run.phi).0;
    outcome(
        last < 0.5 * initial,
        format!(
            "summed row entropy {initial:.3} -> {last:.3} (need < {:.3})",
            0.5 * initial
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    eprintln!("training shared desk-profile runs");
    let runs = shared_runs();
    let checks: Vec<(&str, Outcome)> = vec![
        ("1 uniform aliasing", aliasing(&runs)),
        ("2 dps on par with random", on_par_with_random(&runs)),
        ("3 lista speedup", speed(&runs)),
        ("4 lista vs ista at factor 8", high_factor_quality(&runs)),
        ("5 rank check", rip(&runs)),
        ("6 grating lobe", grating()),
        ("7 gradient check", gradients()),
        ("8 gumbel-max distribution", gumbel_distribution()),
        ("9 no replacement", no_replacement()),
        ("10 schedule and determinism", schedule_and_determinism()),
        ("11 entropy trend", entropy_trend(&runs)),
    ];
    let mut failed = 0;
    for (name, o) in &checks {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} - {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
