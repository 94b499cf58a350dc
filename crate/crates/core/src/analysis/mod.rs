//! Evaluation and diagnostics of trained runs.

mod export;
mod grating;
mod rip;
mod timing;

pub use export::{
    export_distributions, export_pattern, load_distributions, read_summary_csv, write_eval_csv,
    write_history_csv, write_summary_csv, SummaryRow,
};
pub use grating::{grating_lobe_angle, GratingLobe, GratingLobeQuery};
pub use rip::{rip_rank_check, smallest_singular_value, RipReport};
pub use timing::{timing_benchmark, TimingReport};

use std::time::Instant;

use ndarray::{Array2, ArrayView2};

use crate::dps::{draw_pattern, map_pattern, sample_gumbel, SamplingPattern};
use crate::reconstruction::{build_sensing_matrix, ista_batch, realify_measurements, IstaConfig};
use crate::signals::{row_energy, SignalBatch};
use crate::streams::{self, Stream};
use crate::training::RunArtifacts;
use crate::{Complex, Error, Result};

/// Which realization of a learned sampler to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternMode {
    /// Greedy masked argmax of the logits.
    Map,
    /// One Gumbel-max realization drawn from `seed`.
    Sample { seed: u64 },
    /// The run's fixed uniform or random pattern.
    Fixed,
}

/// Decoder applied to the measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recovery {
    Lista,
    Ista(IstaConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `‖ẑ − z‖² / N` per test signal.
    pub per_signal: Vec<f64>,
    pub mean_mse: f64,
    /// MSE of always predicting zero.
    pub baseline_mse: f64,
    /// Wall-clock time of the recovery step.
    pub seconds: f64,
    pub pattern: SamplingPattern,
}

/// Pattern used by `run` under `mode`. Fixed-pattern runs always use their
/// stored pattern, since their logits are not part of the model.
pub fn resolve_pattern(run: &RunArtifacts, mode: PatternMode) -> Result<SamplingPattern> {
    if let Some(p) = &run.fixed_pattern {
        return Ok(p.clone());
    }
    match mode {
        PatternMode::Map => Ok(map_pattern(&run.phi)),
        PatternMode::Sample { seed } => {
            let mut rng = streams::stream(seed, Stream::Gumbel);
            let noise = sample_gumbel(&mut rng, run.m, run.n);
            Ok(draw_pattern(&run.phi, &noise)?.0)
        }
        PatternMode::Fixed => Err(Error::config(
            "a learned sampler has no fixed pattern; use map or sample mode",
        )),
    }
}

/// Reconstructs the whole test set with the run's decoder (or ISTA on the
/// run's pattern) and scores it.
pub fn evaluate(
    run: &RunArtifacts,
    testset: &SignalBatch,
    mode: PatternMode,
    recovery: Recovery,
) -> Result<EvalReport> {
    if testset.n() != run.n {
        return Err(Error::config(format!(
            "test signals have length {}, the run was trained on {}",
            testset.n(),
            run.n
        )));
    }
    let pattern = resolve_pattern(run, mode)?;
    match recovery {
        Recovery::Lista => evaluate_with(&pattern, testset, |y| {
            Ok(run.theta.predict(realify_measurements(y).view()))
        }),
        Recovery::Ista(cfg) => {
            let psi = build_sensing_matrix(&pattern);
            evaluate_with(&pattern, testset, |y| {
                ista_batch(realify_measurements(y).view(), &psi, &cfg)
            })
        }
    }
}

/// Scores an arbitrary decoder on `pattern`-subsampled test signals.
pub fn evaluate_with(
    pattern: &SamplingPattern,
    testset: &SignalBatch,
    recover: impl FnOnce(ArrayView2<Complex>) -> Result<Array2<f64>>,
) -> Result<EvalReport> {
    if pattern.n() != testset.n() {
        return Err(Error::config(format!(
            "pattern is over {} positions, signals have {}",
            pattern.n(),
            testset.n()
        )));
    }
    let y = crate::dps::apply_pattern(pattern, testset.x.view())?;
    let start = Instant::now();
    let z_hat = recover(y.view())?;
    let seconds = start.elapsed().as_secs_f64();
    if z_hat.dim() != testset.z.dim() {
        return Err(Error::Invariant(format!(
            "decoder returned shape {:?}, expected {:?}",
            z_hat.dim(),
            testset.z.dim()
        )));
    }
    let n = testset.n() as f64;
    let per_signal: Vec<f64> = row_energy((&z_hat - &testset.z).view())
        .into_iter()
        .map(|e| e / n)
        .collect();
    let baseline: Vec<f64> = row_energy(testset.z.view())
        .into_iter()
        .map(|e| e / n)
        .collect();
    Ok(EvalReport {
        mean_mse: ordered_mean(&per_signal),
        baseline_mse: ordered_mean(&baseline),
        per_signal,
        seconds,
        pattern: pattern.clone(),
    })
}

/// Left-to-right mean, so the report is reproducible bit for bit.
fn ordered_mean(v: &[f64]) -> f64 {
    let mut sum = 0.0;
    for x in v {
        sum += x;
    }
    sum / v.len() as f64
}
