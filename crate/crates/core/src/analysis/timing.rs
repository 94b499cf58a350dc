use std::time::Instant;

use crate::dps::{apply_pattern, SamplingPattern};
use crate::reconstruction::{
    build_sensing_matrix, ista_realified, realify_measurements, IstaConfig, ListaParams,
};
use crate::signals::SignalBatch;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    /// Median over repetitions, whole test set.
    pub lista_seconds: f64,
    pub ista_seconds: f64,
    /// `ista_seconds / lista_seconds`.
    pub speedup: f64,
    pub lista_samples: Vec<f64>,
    pub ista_samples: Vec<f64>,
}

/// Times both decoders on the same realified measurements: LISTA as one
/// batched forward pass, ISTA as an iterative solve per signal.
/// Subsampling and realification happen once, outside the timed region.
pub fn timing_benchmark(
    theta: &ListaParams,
    pattern: &SamplingPattern,
    ista_cfg: &IstaConfig,
    testset: &SignalBatch,
    reps: usize,
) -> Result<TimingReport> {
    if reps == 0 {
        return Err(Error::config("timing needs at least one repetition"));
    }
    if theta.input_len() != 2 * pattern.m()
        || theta.n() != pattern.n()
        || testset.n() != pattern.n()
    {
        return Err(Error::config(
            "decoder, pattern and test set disagree on shape",
        ));
    }
    ista_cfg.validate()?;
    let y = apply_pattern(pattern, testset.x.view())?;
    let y_r = realify_measurements(y.view());
    let psi = build_sensing_matrix(pattern);

    let mut lista_samples = Vec::with_capacity(reps);
    let mut ista_samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        std::hint::black_box(theta.predict(y_r.view()));
        lista_samples.push(start.elapsed().as_secs_f64());

        let start = Instant::now();
        for b in 0..y_r.nrows() {
            std::hint::black_box(ista_realified(y_r.row(b), &psi, ista_cfg)?);
        }
        ista_samples.push(start.elapsed().as_secs_f64());
    }
    let lista_seconds = median(&lista_samples);
    let ista_seconds = median(&ista_samples);
    Ok(TimingReport {
        lista_seconds,
        ista_seconds,
        speedup: ista_seconds / lista_seconds,
        lista_samples,
        ista_samples,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[mid - 1] + s[mid])
    } else {
        s[mid]
    }
}
