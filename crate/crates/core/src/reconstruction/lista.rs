use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::shrink::{sigmoid_shrink, sigmoid_shrink_grad};
use super::{realify_measurements, SensingMatrix};
use crate::Complex;

pub const LISTA_FOLDS: usize = 3;
/// Fixed slope of the sigmoid shrinkage.
pub const SHRINK_SLOPE: f64 = 20.0;
pub const LISTA_INIT_THRESHOLD: f64 = 0.1;
const LATERAL_INIT_NOISE: f64 = 0.01;

/// Untied weights of an unrolled ISTA network.
///
/// Fold `l` computes `z_l = shrink(W_l y + S_l z_{l-1}; t_l)`, where the
/// first fold has no lateral term. `s[l - 1]` holds the lateral weights of
/// fold `l` for `l >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListaParams {
    /// Input weights, `N × 2M` each.
    pub w: Vec<Array2<f64>>,
    /// Lateral weights, `N × N` each, one fewer than `w`.
    pub s: Vec<Array2<f64>>,
    /// Shrinkage thresholds, one per fold.
    pub t: Array1<f64>,
    /// Sigmoid slope (not trained).
    pub slope: f64,
}

/// Gradients with the same layout as [`ListaParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ListaGrads {
    pub w: Vec<Array2<f64>>,
    pub s: Vec<Array2<f64>>,
    pub t: Array1<f64>,
}

/// Intermediates of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ListaCache {
    y_r: Array2<f64>,
    pre: Vec<Array2<f64>>,
    out: Vec<Array2<f64>>,
}

impl ListaParams {
    pub fn zeros(n: usize, two_m: usize, folds: usize, slope: f64) -> Self {
        Self {
            w: vec![Array2::zeros((n, two_m)); folds],
            s: vec![Array2::zeros((n, n)); folds.saturating_sub(1)],
            t: Array1::zeros(folds),
            slope,
        }
    }

    pub fn folds(&self) -> usize {
        self.w.len()
    }

    pub fn n(&self) -> usize {
        self.w[0].nrows()
    }

    /// Length of the realified measurement vector (`2M`).
    pub fn input_len(&self) -> usize {
        self.w[0].ncols()
    }

    /// `‖θ‖²` over all trainable entries.
    pub fn l2_norm_sq(&self) -> f64 {
        let sq = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
        self.w.iter().map(sq).sum::<f64>()
            + self.s.iter().map(sq).sum::<f64>()
            + self.t.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn all_finite(&self) -> bool {
        self.w
            .iter()
            .chain(&self.s)
            .all(|a| a.iter().all(|v| v.is_finite()))
            && self.t.iter().all(|v| v.is_finite())
    }

    pub fn clamp_thresholds(&mut self) {
        self.t.mapv_inplace(|v| v.max(0.0));
    }

    /// Batched inference on realified measurements (`batch × 2M`).
    pub fn predict(&self, y_r: ArrayView2<f64>) -> Array2<f64> {
        let mut z: Option<Array2<f64>> = None;
        for l in 0..self.folds() {
            let mut u = y_r.dot(&self.w[l].t());
            if let Some(prev) = &z {
                u += &prev.dot(&self.s[l - 1].t());
            }
            let (t, a) = (self.t[l], self.slope);
            u.mapv_inplace(|v| sigmoid_shrink(v, t, a));
            z = Some(u);
        }
        z.expect("at least one fold")
    }
}

impl ListaGrads {
    pub fn zeros_like(p: &ListaParams) -> Self {
        Self {
            w: p.w.iter().map(|a| Array2::zeros(a.dim())).collect(),
            s: p.s.iter().map(|a| Array2::zeros(a.dim())).collect(),
            t: Array1::zeros(p.t.len()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.w
            .iter()
            .chain(&self.s)
            .all(|a| a.iter().all(|v| v.is_finite()))
            && self.t.iter().all(|v| v.is_finite())
    }
}

/// Batched forward pass keeping the intermediates needed by
/// [`lista_backward`].
pub fn lista_forward_batch(
    params: &ListaParams,
    y_r: ArrayView2<f64>,
) -> (Array2<f64>, ListaCache) {
    let mut pre = Vec::with_capacity(params.folds());
    let mut out: Vec<Array2<f64>> = Vec::with_capacity(params.folds());
    for l in 0..params.folds() {
        let mut u = y_r.dot(&params.w[l].t());
        if l > 0 {
            u += &out[l - 1].dot(&params.s[l - 1].t());
        }
        let (t, a) = (params.t[l], params.slope);
        let z = u.mapv(|v| sigmoid_shrink(v, t, a));
        pre.push(u);
        out.push(z);
    }
    let z = out.last().expect("at least one fold").clone();
    let cache = ListaCache {
        y_r: y_r.to_owned(),
        pre,
        out,
    };
    (z, cache)
}

/// Single complex measurement vector through the network.
pub fn lista_forward(params: &ListaParams, y: ArrayView1<Complex>) -> (Array1<f64>, ListaCache) {
    let y_r = realify_measurements(y.insert_axis(Axis(0)));
    let (z, cache) = lista_forward_batch(params, y_r.view());
    (z.row(0).to_owned(), cache)
}

/// Reverse-mode pass: parameter gradients and the gradient w.r.t. the
/// realified input, given `grad_out = ∂L/∂ẑ` (`batch × N`).
pub fn lista_backward(
    params: &ListaParams,
    cache: &ListaCache,
    grad_out: ArrayView2<f64>,
) -> (ListaGrads, Array2<f64>) {
    let folds = params.folds();
    let mut grads = ListaGrads::zeros_like(params);
    let mut grad_y = Array2::zeros(cache.y_r.dim());
    let mut g = grad_out.to_owned();
    for l in (0..folds).rev() {
        let (t, a) = (params.t[l], params.slope);
        let mut du = Array2::zeros(g.dim());
        let mut dt = 0.0;
        Zip::from(&mut du)
            .and(&g)
            .and(&cache.pre[l])
            .for_each(|du, &gz, &u| {
                let (dv, dth) = sigmoid_shrink_grad(u, t, a);
                *du = gz * dv;
                dt += gz * dth;
            });
        grads.t[l] = dt;
        grads.w[l] = standard(du.t().dot(&cache.y_r));
        grad_y += &du.dot(&params.w[l]);
        if l > 0 {
            grads.s[l - 1] = standard(du.t().dot(&cache.out[l - 1]));
            g = du.dot(&params.s[l - 1]);
        }
    }
    (grads, grad_y)
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// ISTA-shaped initialization: `W = Ψᵣᵀ`, `S = I − ΨᵣᵀΨᵣ` plus small
/// Gaussian noise, thresholds 0.1.
pub fn init_lista<R: Rng + ?Sized>(psi: &SensingMatrix, rng: &mut R) -> ListaParams {
    let n = psi.n();
    let a = &psi.realified;
    let w = a.t().as_standard_layout().into_owned();
    let lateral = Array2::<f64>::eye(n) - a.t().dot(a);
    let noise = Normal::new(0.0, LATERAL_INIT_NOISE).expect("valid std");
    let s = (1..LISTA_FOLDS)
        .map(|_| lateral.mapv(|v| v + noise.sample(rng)))
        .collect();
    ListaParams {
        w: vec![w; LISTA_FOLDS],
        s,
        t: Array1::from_elem(LISTA_FOLDS, LISTA_INIT_THRESHOLD),
        slope: SHRINK_SLOPE,
    }
}
