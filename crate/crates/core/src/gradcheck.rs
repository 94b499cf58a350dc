//! Finite-difference audit of every hand-written gradient.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::dps::{
    draw_pattern, entropy_penalty, init_logits_with_jitter, random_pattern, sample_gumbel,
    soft_rows, st_grad_logits, LogitsMatrix,
};
use crate::reconstruction::{
    build_sensing_matrix, init_lista, lista_backward, lista_forward_batch, sigmoid_shrink,
    sigmoid_shrink_grad, ListaParams, SHRINK_SLOPE,
};

/// Largest acceptable relative error of any block.
pub const GRAD_TOLERANCE: f64 = 1e-4;

const CHECK_N: usize = 8;
const CHECK_M: usize = 3;
const CHECK_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub name: String,
    /// `max |analytic − numeric| / max |numeric|`.
    pub max_rel_error: f64,
}

impl BlockResult {
    pub fn pass(&self) -> bool {
        self.max_rel_error < GRAD_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub blocks: Vec<BlockResult>,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.blocks.iter().all(BlockResult::pass)
    }

    pub fn block(&self, name: &str) -> Option<&BlockResult> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            let verdict = if b.pass() { "ok" } else { "FAIL" };
            writeln!(f, "{:<24} {:.3e} {verdict}", b.name, b.max_rel_error)?;
        }
        Ok(())
    }
}

/// Gradient of the summed row entropies with respect to the logits.
pub type EntropyGrad = fn(&LogitsMatrix) -> Array2<f64>;

pub fn grad_check_all(epsilon: f64) -> GradCheckReport {
    grad_check_all_with(epsilon, |phi| entropy_penalty(phi).1)
}

/// As [`grad_check_all`], with the analytic entropy gradient swapped out.
pub fn grad_check_all_with(epsilon: f64, entropy_grad: EntropyGrad) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    let phi = init_logits_with_jitter(CHECK_M, CHECK_N, 0.5, &mut rng).expect("valid shape");
    let mut blocks = Vec::new();
    for tau in [5.0, 1.0, 0.5] {
        blocks.push(BlockResult {
            name: format!("st-softmax tau={tau}"),
            max_rel_error: check_st_softmax(&phi, tau, epsilon, &mut rng),
        });
    }
    let numeric = central_diff(
        phi.view().to_owned(),
        |p| entropy_penalty(&LogitsMatrix::new(p.clone()).unwrap()).0,
        epsilon,
    );
    blocks.push(BlockResult {
        name: "entropy".into(),
        max_rel_error: rel_error(entropy_grad(&phi).iter(), numeric.iter()),
    });
    blocks.push(BlockResult {
        name: "sigmoid-shrink".into(),
        max_rel_error: check_shrink(epsilon),
    });
    blocks.push(BlockResult {
        name: "lista".into(),
        max_rel_error: check_lista(epsilon, &mut rng),
    });
    GradCheckReport { epsilon, blocks }
}

fn check_st_softmax(phi: &LogitsMatrix, tau: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let noise = sample_gumbel(rng, CHECK_M, CHECK_N);
    let (_, mask) = draw_pattern(phi, &noise).expect("valid logits");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let upstream = Array2::from_shape_fn((CHECK_M, CHECK_N), |_| normal.sample(rng));
    let loss = |p: &Array2<f64>| {
        let soft = soft_rows(&LogitsMatrix::new(p.clone()).unwrap(), &noise, &mask, tau).unwrap();
        (&soft * &upstream).sum()
    };
    let soft = soft_rows(phi, &noise, &mask, tau).unwrap();
    let analytic = st_grad_logits(upstream.view(), soft.view(), tau, &mask);
    let numeric = central_diff(phi.view().to_owned(), loss, h);
    rel_error(analytic.iter(), numeric.iter())
}

fn check_shrink(h: f64) -> f64 {
    let a = SHRINK_SLOPE;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for v in [-1.3, -0.4, -0.11, -0.02, 0.03, 0.09, 0.1, 0.25, 0.8, 2.0] {
        for t in [0.05, 0.1, 0.3] {
            let (dv, dt) = sigmoid_shrink_grad(v, t, a);
            analytic.extend([dv, dt]);
            numeric.push((sigmoid_shrink(v + h, t, a) - sigmoid_shrink(v - h, t, a)) / (2.0 * h));
            numeric.push((sigmoid_shrink(v, t + h, a) - sigmoid_shrink(v, t - h, a)) / (2.0 * h));
        }
    }
    rel_error(analytic.iter(), numeric.iter())
}

fn check_lista(h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let pattern = random_pattern(CHECK_N, CHECK_M, rng).expect("valid shape");
    let psi = build_sensing_matrix(&pattern);
    let params = init_lista(&psi, rng);
    let batch = 4;
    let spread = Uniform::new(-1.0, 1.0).unwrap();
    let y_r = Array2::from_shape_fn((batch, 2 * CHECK_M), |_| spread.sample(rng));
    let target = Array2::from_shape_fn((batch, CHECK_N), |_| spread.sample(rng));
    let loss = |p: &ListaParams, y: &Array2<f64>| {
        let (z, _) = lista_forward_batch(p, y.view());
        (&z - &target).mapv(|d| d * d).sum()
    };
    let (z, cache) = lista_forward_batch(&params, y_r.view());
    let grad_out = (&z - &target) * 2.0;
    let (grads, grad_y) = lista_backward(&params, &cache, grad_out.view());

    let mut worst: f64 = 0.0;
    for l in 0..params.folds() {
        let numeric = central_diff(
            params.w[l].clone(),
            |w| {
                let mut p = params.clone();
                p.w[l] = w.clone();
                loss(&p, &y_r)
            },
            h,
        );
        worst = worst.max(rel_error(grads.w[l].iter(), numeric.iter()));
    }
    for l in 0..params.s.len() {
        let numeric = central_diff(
            params.s[l].clone(),
            |s| {
                let mut p = params.clone();
                p.s[l] = s.clone();
                loss(&p, &y_r)
            },
            h,
        );
        worst = worst.max(rel_error(grads.s[l].iter(), numeric.iter()));
    }
    let t_numeric: Array1<f64> = (0..params.folds())
        .map(|l| {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.t[l] += h;
            minus.t[l] -= h;
            (loss(&plus, &y_r) - loss(&minus, &y_r)) / (2.0 * h)
        })
        .collect();
    worst = worst.max(rel_error(grads.t.iter(), t_numeric.iter()));
    let y_numeric = central_diff(y_r.clone(), |y| loss(&params, y), h);
    worst.max(rel_error(grad_y.iter(), y_numeric.iter()))
}

fn central_diff(x: Array2<f64>, f: impl Fn(&Array2<f64>) -> f64, h: f64) -> Array2<f64> {
    let mut out = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for (idx, o) in out.indexed_iter_mut() {
        probe[idx] = x[idx] + h;
        let plus = f(&probe);
        probe[idx] = x[idx] - h;
        let minus = f(&probe);
        probe[idx] = x[idx];
        *o = (plus - minus) / (2.0 * h);
    }
    out
}

fn rel_error<'a>(
    analytic: impl Iterator<Item = &'a f64>,
    numeric: impl Iterator<Item = &'a f64>,
) -> f64 {
    let (diff, scale) = analytic
        .zip(numeric)
        .fold((0.0f64, 0.0f64), |(d, s), (a, n)| {
            (d.max((a - n).abs()), s.max(n.abs()))
        });
    diff / scale.max(1e-12)
}
