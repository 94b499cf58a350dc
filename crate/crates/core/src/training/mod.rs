//! Joint optimization of the sampling logits and the LISTA weights.

mod adam;
mod config;

pub use adam::{adam_step, AdamHyper, AdamState, ParamSlot};
pub use config::{ReconKind, SamplerKind, TrainConfig, CONFIG_KEYS, DESK_ITERS};

use ndarray::{s, Array2, ArrayView2, Zip};

use crate::dps::{
    draw_pattern, entropy_penalty, init_logits, map_pattern, random_pattern, sample_gumbel,
    selection_grad, soft_rows, st_grad_logits, uniform_pattern, LogitsMatrix, SamplingPattern,
    TemperatureSchedule,
};
use crate::reconstruction::{
    build_sensing_matrix, init_lista, lista_backward, lista_forward_batch, realify_measurements,
    ListaGrads, ListaParams,
};
use crate::signals::{gen_sparse_targets, Dft};
use crate::streams::{self, Stream};
use crate::{Complex, Error, Result};

/// Loss value and its parts. `total = mse + l2 + entropy_mu · entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub total: f64,
    /// Batch mean of the per-signal squared ℓ2 error.
    pub mse: f64,
    /// `λ‖θ‖²`.
    pub l2: f64,
    /// Unweighted summed row entropy of the logits (0 for fixed patterns).
    pub entropy: f64,
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub total: f64,
    pub mse: f64,
    pub entropy: f64,
}

/// Everything a finished (or aborted) run leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub config: TrainConfig,
    pub n: usize,
    pub m: usize,
    pub phi: LogitsMatrix,
    pub theta: ListaParams,
    /// The pattern used throughout a uniform or random run.
    pub fixed_pattern: Option<SamplingPattern>,
    pub history: Vec<LossRecord>,
}

impl RunArtifacts {
    pub fn iterations_completed(&self) -> usize {
        self.history.len()
    }
}

/// Mean squared reconstruction error plus penalties.
pub fn total_loss(
    z_hat: ArrayView2<f64>,
    z: ArrayView2<f64>,
    theta: &ListaParams,
    phi: Option<&LogitsMatrix>,
    cfg: &TrainConfig,
) -> LossComponents {
    let entropy = phi.map_or(0.0, |p| entropy_penalty(p).0);
    components(z_hat, z, theta, entropy, cfg)
}

fn components(
    z_hat: ArrayView2<f64>,
    z: ArrayView2<f64>,
    theta: &ListaParams,
    entropy: f64,
    cfg: &TrainConfig,
) -> LossComponents {
    assert_eq!(z_hat.dim(), z.dim(), "prediction and target shapes differ");
    let mut sq = 0.0;
    Zip::from(&z_hat)
        .and(&z)
        .for_each(|a, b| sq += (a - b) * (a - b));
    let mse = sq / z.nrows() as f64;
    let l2 = if cfg.l2_lambda > 0.0 {
        cfg.l2_lambda * theta.l2_norm_sq()
    } else {
        0.0
    };
    LossComponents {
        total: mse + l2 + cfg.entropy_mu * entropy,
        mse,
        l2,
        entropy,
    }
}

/// Linearly annealed temperature for 1-based iteration `i`.
///
/// Written as a convex combination so that both endpoints are exact.
pub fn anneal_tau(schedule: &TemperatureSchedule, i: usize) -> Result<f64> {
    schedule.validate()?;
    if i == 0 || i > schedule.n_iter {
        return Err(Error::config(format!(
            "iteration {i} outside 1..={}",
            schedule.n_iter
        )));
    }
    if schedule.n_iter == 1 {
        return Ok(schedule.tau_init);
    }
    let frac = (i - 1) as f64 / (schedule.n_iter - 1) as f64;
    Ok((1.0 - frac) * schedule.tau_init + frac * schedule.tau_end)
}

/// Runs the full training loop.
pub fn train(cfg: &TrainConfig) -> Result<RunArtifacts> {
    train_with_progress(cfg, |_| {})
}

/// Pattern fixed for the whole run, when the sampler is not learned.
fn fixed_pattern_for(cfg: &TrainConfig, n: usize, m: usize) -> Result<Option<SamplingPattern>> {
    Ok(match cfg.sampler {
        SamplerKind::Dps => None,
        SamplerKind::Uniform => Some(uniform_pattern(n, m)?),
        SamplerKind::Random => {
            let mut rng = streams::stream(cfg.seed, Stream::Pattern);
            Some(random_pattern(n, m, &mut rng)?)
        }
    })
}

/// Initial state of a run: logits, LISTA weights and the fixed pattern.
pub fn initial_artifacts(cfg: &TrainConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let n = cfg.n()?;
    let m = cfg.m()?;
    let mut init_rng = streams::stream(cfg.seed, Stream::Init);
    let phi = init_logits(m, n, &mut init_rng)?;
    let fixed_pattern = fixed_pattern_for(cfg, n, m)?;
    let start = fixed_pattern.clone().unwrap_or_else(|| map_pattern(&phi));
    let mut theta = init_lista(&build_sensing_matrix(&start), &mut init_rng);
    theta.slope = cfg.shrink_slope;
    Ok(RunArtifacts {
        config: cfg.clone(),
        n,
        m,
        phi,
        theta,
        fixed_pattern,
        history: Vec::with_capacity(cfg.n_iter),
    })
}

/// [`train`] with a callback after every iteration.
///
/// On a non-finite loss or gradient the run stops with
/// [`Error::Diverged`], carrying the last finite parameters.
pub fn train_with_progress(
    cfg: &TrainConfig,
    mut progress: impl FnMut(&LossRecord),
) -> Result<RunArtifacts> {
    if cfg.recon != ReconKind::Lista {
        return Err(Error::config(
            "only the LISTA reconstructor has trainable parameters",
        ));
    }
    let mut run = initial_artifacts(cfg)?;
    let signal_cfg = cfg.signal_config()?;
    let (n, m) = (run.n, run.m);
    let dft = Dft::new(n);
    let schedule = cfg.schedule();
    let mut data_rng = streams::stream(cfg.seed, Stream::Data);
    let mut gumbel_rng = streams::stream(cfg.seed, Stream::Gumbel);

    let learn_phi = cfg.sampler == SamplerKind::Dps;
    let mut sizes: Vec<usize> = theta_tensors(&run.theta).iter().map(|t| t.len()).collect();
    if learn_phi {
        sizes.push(m * n);
    }
    let mut adam = AdamState::new(&sizes);

    for iteration in 1..=cfg.n_iter {
        let z = gen_sparse_targets(&signal_cfg, cfg.batch, &mut data_rng)?;
        let x = dft.forward_real(z.view());

        let (pattern, relax) = match &run.fixed_pattern {
            Some(p) => (p.clone(), None),
            None => {
                let noise = sample_gumbel(&mut gumbel_rng, m, n);
                let (p, mask) = draw_pattern(&run.phi, &noise)?;
                (p, Some((noise, mask)))
            }
        };
        let y_r = measure(&pattern, &x);
        let (z_hat, cache) = lista_forward_batch(&run.theta, y_r.view());

        let (entropy, entropy_grad) = if learn_phi {
            let (h, g) = entropy_penalty(&run.phi);
            (h, Some(g))
        } else {
            (0.0, None)
        };
        let loss = components(z_hat.view(), z.view(), &run.theta, entropy, cfg);
        if !loss.total.is_finite() {
            return Err(diverged(run, iteration, "loss"));
        }

        let grad_out = (&z_hat - &z) * (2.0 / cfg.batch as f64);
        let (mut theta_grads, grad_yr) = lista_backward(&run.theta, &cache, grad_out.view());
        if cfg.l2_lambda > 0.0 {
            add_l2(&mut theta_grads, &run.theta, cfg.l2_lambda);
        }

        let phi_grad = match (relax, entropy_grad) {
            (Some((noise, mask)), Some(eg)) => {
                let tau = anneal_tau(&schedule, iteration)?;
                let grad_y = complex_measurement_grad(grad_yr.view(), m);
                let upstream = selection_grad(grad_y.view(), x.view());
                let soft = soft_rows(&run.phi, &noise, &mask, tau)?;
                let mut g = st_grad_logits(upstream.view(), soft.view(), tau, &mask);
                g.scaled_add(cfg.entropy_mu, &eg);
                Some(g)
            }
            _ => None,
        };

        let previous = (run.theta.clone(), run.phi.clone());
        let step = apply_adam(&mut adam, &mut run, &theta_grads, phi_grad.as_ref(), cfg);
        if step.is_err() || !run.theta.all_finite() || run.phi.view().iter().any(|v| !v.is_finite())
        {
            run.theta = previous.0;
            run.phi = previous.1;
            return Err(diverged(run, iteration, "gradient"));
        }
        run.theta.clamp_thresholds();

        let record = LossRecord {
            iteration,
            total: loss.total,
            mse: loss.mse,
            entropy: loss.entropy,
        };
        progress(&record);
        run.history.push(record);
    }
    Ok(run)
}

fn diverged(run: RunArtifacts, iteration: usize, what: &str) -> Error {
    Error::Diverged {
        iteration,
        what: what.to_string(),
        partial: Box::new(run),
    }
}

/// Realified measurements `[Re y | Im y]` of the selected coefficients.
fn measure(pattern: &SamplingPattern, x: &Array2<Complex>) -> Array2<f64> {
    let y = x.select(ndarray::Axis(1), pattern.indices());
    realify_measurements(y.view())
}

/// Splits a gradient w.r.t. `[Re y | Im y]` back into complex form.
fn complex_measurement_grad(grad_yr: ArrayView2<f64>, m: usize) -> Array2<Complex> {
    let re = grad_yr.slice(s![.., ..m]);
    let im = grad_yr.slice(s![.., m..]);
    Zip::from(&re)
        .and(&im)
        .map_collect(|&a, &b| Complex::new(a, b))
}

fn add_l2(grads: &mut ListaGrads, theta: &ListaParams, lambda: f64) {
    for (g, p) in grads
        .w
        .iter_mut()
        .zip(&theta.w)
        .chain(grads.s.iter_mut().zip(&theta.s))
    {
        g.scaled_add(2.0 * lambda, p);
    }
    grads.t.scaled_add(2.0 * lambda, &theta.t);
}

fn theta_tensors(theta: &ListaParams) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for a in theta.w.iter().chain(&theta.s) {
        out.push(a.as_slice().expect("standard layout"));
    }
    out.push(theta.t.as_slice().expect("standard layout"));
    out
}

fn apply_adam(
    adam: &mut AdamState,
    run: &mut RunArtifacts,
    grads: &ListaGrads,
    phi_grad: Option<&Array2<f64>>,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut slots: Vec<ParamSlot<'_>> = Vec::new();
    let theta = &mut run.theta;
    for (p, g) in theta
        .w
        .iter_mut()
        .zip(&grads.w)
        .chain(theta.s.iter_mut().zip(&grads.s))
    {
        slots.push(ParamSlot {
            values: p.as_slice_mut().expect("standard layout"),
            grads: g.as_slice().expect("standard layout"),
            multiplier: 1.0,
        });
    }
    slots.push(ParamSlot {
        values: theta.t.as_slice_mut().expect("standard layout"),
        grads: grads.t.as_slice().expect("standard layout"),
        multiplier: 1.0,
    });
    if let Some(g) = phi_grad {
        slots.push(ParamSlot {
            values: run
                .phi
                .values_mut()
                .as_slice_mut()
                .expect("standard layout"),
            grads: g.as_slice().expect("standard layout"),
            multiplier: cfg.phi_multiplier(),
        });
    }
    adam_step(adam, &mut slots, cfg.lr_theta, &cfg.adam)
}
