use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dps_core::analysis::{
    evaluate, export_distributions, export_pattern, read_summary_csv, resolve_pattern,
    timing_benchmark, write_eval_csv, write_history_csv, write_summary_csv, PatternMode, Recovery,
    SummaryRow,
};
use dps_core::checkpoint;
use dps_core::dps::entropy_penalty;
use dps_core::gradcheck::{grad_check_all, grad_check_all_with};
use dps_core::plot;
use dps_core::reconstruction::IstaConfig;
use dps_core::signals::{effective_length, load_test_set, make_test_set, SparseSignalConfig};
use dps_core::training::{train_with_progress, RunArtifacts};
use dps_core::Error;
use sha2::{Digest, Sha256};

use crate::args::*;
use crate::{settings, Failure};

const CHECKPOINT_FILE: &str = "checkpoint.txt";

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenTest(a) => gen_test(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Pattern(a) => pattern(a),
        Command::Export(a) => export(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn gen_test(a: GenTestArgs) -> Result<(), Failure> {
    let n = match a.factor {
        Some(f) => effective_length(a.n, f)?,
        None => a.n,
    };
    if n != a.n {
        eprintln!("signal length adjusted from {} to {n}", a.n);
    }
    let cfg = SparseSignalConfig {
        n,
        k: a.k,
        amplitude_std: a.amplitude_std,
        seed: a.seed,
    };
    cfg.validate()?;
    make_test_set(&cfg, a.size, a.seed, &a.out)?;
    eprintln!(
        "wrote {} signals of length {n} to {}",
        a.size,
        a.out.display()
    );
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body)
        .map_err(|e| Failure::check(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

fn save_run(run: &RunArtifacts, dir: &Path) -> Result<(), Failure> {
    checkpoint::save(run, &dir.join(CHECKPOINT_FILE))?;
    Ok(write_history_csv(
        &run.history,
        &dir.join("loss_history.csv"),
    )?)
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let (cfg, file_text) = settings::resolve(&a)?;
    let n = cfg.n()?;
    let mut manifest = String::new();
    let command: Vec<String> = std::env::args().collect();
    let _ = writeln!(manifest, "command = {}", command.join(" "));
    let _ = writeln!(manifest, "version = {}", env!("CARGO_PKG_VERSION"));
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(manifest, "started_unix = {started}");
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    let file_hash = file_text
        .as_deref()
        .map_or("none".to_string(), |t| sha256_hex(t.as_bytes()));
    let _ = writeln!(manifest, "config_file_sha256 = {file_hash}");
    let mut effective = String::new();
    for (k, v) in cfg.entries() {
        let _ = writeln!(effective, "{k} = {v}");
    }
    let _ = writeln!(
        manifest,
        "effective_config_sha256 = {}",
        sha256_hex(effective.as_bytes())
    );
    if n != cfg.n_nominal {
        let note = format!(
            "signal length adjusted from {} to {n} for factor {}",
            cfg.n_nominal, cfg.factor
        );
        eprintln!("{note}");
        let _ = writeln!(manifest, "note = {note}");
    }
    let _ = writeln!(manifest, "n = {n}\nm = {}", cfg.m()?);
    manifest.push_str("[config]\n");
    manifest.push_str(&effective);

    create_dir(&a.out)?;
    write_file(&a.out.join("manifest.txt"), &manifest)?;
    let every = a.log_every.max(1);
    let result = train_with_progress(&cfg, |r| {
        if r.iteration % every == 0 || r.iteration == cfg.n_iter {
            eprintln!(
                "iter {:>6}  loss {:.6e}  mse {:.6e}  entropy {:.4}",
                r.iteration, r.total, r.mse, r.entropy
            );
        }
    });
    match result {
        Ok(run) => {
            save_run(&run, &a.out)?;
            eprintln!("saved {}", a.out.join(CHECKPOINT_FILE).display());
            Ok(())
        }
        Err(Error::Diverged {
            iteration,
            what,
            partial,
        }) => {
            save_run(&partial, &a.out)?;
            Err(Failure {
                code: Failure::DIVERGED,
                message: format!(
                    "training diverged at iteration {iteration} ({what}); partial checkpoint saved after {} iterations",
                    partial.iterations_completed()
                ),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn load_run(path: &Path) -> Result<RunArtifacts, Failure> {
    let file: PathBuf = if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_path_buf()
    };
    if !file.exists() {
        return Err(Failure::usage(format!(
            "no checkpoint at {}",
            file.display()
        )));
    }
    Ok(checkpoint::load(&file)?)
}

fn pattern_mode(mode: PatternModeArg, seed: u64) -> PatternMode {
    match mode {
        PatternModeArg::Map => PatternMode::Map,
        PatternModeArg::Sample => PatternMode::Sample { seed },
        PatternModeArg::Fixed => PatternMode::Fixed,
    }
}

fn ista_config(a: &IstaArgs) -> Result<IstaConfig, Failure> {
    let cfg = IstaConfig {
        n_iter: a.ista_iters,
        step: a.ista_step,
        threshold: a.ista_threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn indices_line(p: &dps_core::dps::SamplingPattern) -> String {
    p.indices()
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let run = load_run(&a.run)?;
    let (_, testset) = load_test_set(&a.test)?;
    let recovery = match a.recon {
        ReconArg::Lista => Recovery::Lista,
        ReconArg::Ista => Recovery::Ista(ista_config(&a.ista)?),
    };
    let report = evaluate(
        &run,
        &testset,
        pattern_mode(a.pattern_mode, a.pattern_seed),
        recovery,
    )?;
    eprintln!("pattern: {}", indices_line(&report.pattern));
    create_dir(&a.out)?;
    write_eval_csv(&report.per_signal, &a.out.join("eval.csv"))?;
    export_pattern(&report.pattern, &a.out.join("pattern.csv"))?;
    let row = SummaryRow {
        sampler: run.config.sampler.to_string(),
        recon: match a.recon {
            ReconArg::Lista => "lista".into(),
            ReconArg::Ista => "ista".into(),
        },
        factor: run.config.factor,
        mean_mse: report.mean_mse,
        baseline_mse: report.baseline_mse,
        seconds: report.seconds,
    };
    write_summary_csv(std::slice::from_ref(&row), &a.out.join("summary.csv"))?;
    println!(
        "{},{},{},{:e},{:e},{:e}",
        row.sampler, row.recon, row.factor, row.mean_mse, row.baseline_mse, row.seconds
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let run = load_run(&a.run)?;
    let (_, testset) = load_test_set(&a.test)?;
    let pattern = resolve_pattern(&run, PatternMode::Map)?;
    let report = timing_benchmark(
        &run.theta,
        &pattern,
        &ista_config(&a.ista)?,
        &testset,
        a.reps,
    )?;
    let mut csv = String::from("rep,lista_seconds,ista_seconds\n");
    for (i, (l, s)) in report
        .lista_samples
        .iter()
        .zip(&report.ista_samples)
        .enumerate()
    {
        let _ = writeln!(csv, "{i},{l:e},{s:e}");
    }
    let _ = writeln!(
        csv,
        "median,{:e},{:e}",
        report.lista_seconds, report.ista_seconds
    );
    create_dir(&a.out)?;
    write_file(&a.out.join("timing.csv"), &csv)?;
    println!(
        "lista {:.4e} s  ista {:.4e} s  speedup {:.1}",
        report.lista_seconds, report.ista_seconds, report.speedup
    );
    Ok(())
}

fn run_label(run: &RunArtifacts) -> String {
    format!("{} x{}", run.config.sampler, run.config.factor)
}

fn pattern(a: PatternArgs) -> Result<(), Failure> {
    create_dir(&a.out)?;
    let mut strips = Vec::new();
    for (i, path) in a.run.iter().enumerate() {
        let run = load_run(path)?;
        let p = resolve_pattern(&run, pattern_mode(a.pattern_mode, a.pattern_seed))?;
        let file = a.out.join(format!("pattern_{i}.csv"));
        export_pattern(&p, &file)?;
        eprintln!("{}: {}", run_label(&run), indices_line(&p));
        strips.push((run_label(&run), p));
    }
    write_file(
        &a.out.join("patterns.svg"),
        &plot::pattern_strips_svg(&strips),
    )
}

fn export(a: ExportArgs) -> Result<(), Failure> {
    if a.run.is_none() && a.summaries.is_empty() {
        return Err(Failure::usage("export needs --run and/or --summaries"));
    }
    create_dir(&a.out)?;
    if let Some(path) = &a.run {
        let run = load_run(path)?;
        export_distributions(&run.phi, &a.out.join("distributions"))?;
        let p = resolve_pattern(&run, PatternMode::Map)?;
        export_pattern(&p, &a.out.join("pattern.csv"))?;
        let (h, _) = entropy_penalty(&run.phi);
        eprintln!("summed row entropy {h:.4}");
    }
    if !a.summaries.is_empty() {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for path in &a.summaries {
            for row in read_summary_csv(path)? {
                let (label, factor, mse) = (
                    format!("{}+{}", row.sampler, row.recon),
                    row.factor as f64,
                    row.mean_mse,
                );
                match series.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, pts)) => pts.push((factor, mse)),
                    None => series.push((label, vec![(factor, mse)])),
                }
            }
        }
        for (_, pts) in &mut series {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let svg = plot::line_plot_svg("Test MSE", "sub-sampling factor", "MSE", &series);
        write_file(&a.out.join("mse_vs_factor.svg"), &svg)?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let report = if a.flip_entropy_sign {
        grad_check_all_with(a.epsilon, |phi| -entropy_penalty(phi).1)
    } else {
        grad_check_all(a.epsilon)
    };
    print!("{report}");
    if report.pass() {
        Ok(())
    } else {
        Err(Failure::check("gradient check failed"))
    }
}
