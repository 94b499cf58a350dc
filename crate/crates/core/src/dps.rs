//! The probabilistic sub-sampling layer.
//!
//! Every measurement slot `m` owns a categorical distribution over the `N`
//! candidate positions, parameterized by one row of a logits matrix. A hard
//! pattern is drawn row by row with the Gumbel-max trick; positions already
//! taken by earlier rows are masked out, so the `M` draws are without
//! replacement. Gradients flow to the logits through the Jacobian of a
//! temperature-`τ` softmax evaluated at the same noise and mask
//! (straight-through estimator).
//!
//! Indices are 0-based throughout.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Complex, Error, Result};

/// Finite stand-in for `-inf` in the no-replacement mask.
pub const MASK_NEG: f64 = -1e9;

/// Quartic coefficient of the diagonal-prior initialization.
pub const INIT_ALPHA: f64 = -2.73e-7;
/// Quadratic coefficient of the diagonal-prior initialization.
pub const INIT_BETA: f64 = -2.73e-3;
/// Variance of the Gaussian jitter added at initialization.
pub const INIT_GAMMA_VAR: f64 = 0.01;

/// Trainable `M × N` matrix of unnormalized log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsMatrix {
    phi: Array2<f64>,
}

impl LogitsMatrix {
    pub fn new(phi: Array2<f64>) -> Result<Self> {
        let (m, n) = phi.dim();
        if m == 0 || m > n {
            return Err(Error::config(format!(
                "logits must have 0 < M <= N, got {m}x{n}"
            )));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("logits contain non-finite entries"));
        }
        Ok(Self { phi })
    }

    /// Uniform distributions (all logits zero).
    pub fn uniform(m: usize, n: usize) -> Result<Self> {
        Self::new(Array2::zeros((m, n)))
    }

    pub fn m_rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.phi.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.phi.view()
    }

    /// Mutable access for the optimizer. Callers keep entries finite.
    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.phi
    }

    /// Row-wise softmax of the logits.
    pub fn probabilities(&self) -> Array2<f64> {
        let mut p = self.phi.clone();
        for mut row in p.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        p
    }

    pub fn row_distribution(&self, m: usize) -> RowDistribution {
        let mut pi = self.phi.row(m).to_vec();
        softmax_in_place(&mut pi);
        RowDistribution {
            pi: Array1::from(pi),
        }
    }
}

/// Class probabilities of one measurement slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDistribution {
    pub pi: Array1<f64>,
}

impl RowDistribution {
    pub fn entropy(&self) -> f64 {
        -self
            .pi
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

/// i.i.d. Gumbel(0, 1) samples, one per logit.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub e: Array2<f64>,
}

impl GumbelNoise {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            e: Array2::zeros((rows, cols)),
        }
    }
}

/// `M` distinct positions out of `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SamplingPattern {
    indices: Vec<usize>,
    n: usize,
}

impl SamplingPattern {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::Invariant(format!(
                    "index {i} out of range for N={n}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invariant(format!("index {i} selected twice")));
            }
        }
        if indices.is_empty() {
            return Err(Error::Invariant("empty sampling pattern".into()));
        }
        Ok(Self { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Binary `M × N` selection matrix.
    pub fn onehot(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.m(), self.n));
        for (row, &i) in self.indices.iter().enumerate() {
            a[[row, i]] = 1.0;
        }
        a
    }
}

/// No-replacement mask: row `m` carries the `m` positions chosen by rows
/// `0..m`, set to [`MASK_NEG`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskState {
    pub w: Array2<f64>,
}

impl MaskState {
    /// Mask seen by measurement row `m` (0-based).
    pub fn before_row(&self, m: usize) -> ArrayView1<'_, f64> {
        self.w.row(m)
    }

    pub fn is_masked(&self, m: usize, n: usize) -> bool {
        self.w[[m, n]] != 0.0
    }
}

/// Linear temperature annealing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSchedule {
    pub tau_init: f64,
    pub tau_end: f64,
    pub n_iter: usize,
}

impl TemperatureSchedule {
    pub fn new(n_iter: usize) -> Self {
        Self {
            tau_init: 5.0,
            tau_end: 0.5,
            n_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_end > 0.0 && self.tau_init >= self.tau_end) || self.n_iter == 0 {
            return Err(Error::config(format!(
                "temperature schedule needs tau_init >= tau_end > 0 and n_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Diagonal-prior initialization: logits peak where `n ≈ (N/M) m` in the
/// 1-based indexing of the formula, then Gaussian jitter.
pub fn init_logits<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<LogitsMatrix> {
    init_logits_with_jitter(m, n, INIT_GAMMA_VAR.sqrt(), rng)
}

pub fn init_logits_with_jitter<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    jitter_std: f64,
    rng: &mut R,
) -> Result<LogitsMatrix> {
    if m == 0 || m > n {
        return Err(Error::config(format!("need 0 < M <= N, got M={m}, N={n}")));
    }
    let ratio = n as f64 / m as f64;
    let jitter = Normal::new(0.0, jitter_std).map_err(|e| Error::config(e.to_string()))?;
    let phi = Array2::from_shape_fn((m, n), |(row, col)| {
        let d = (col + 1) as f64 - ratio * (row + 1) as f64;
        diagonal_prior(d) + jitter.sample(rng)
    });
    LogitsMatrix::new(phi)
}

/// Deterministic part of the initialization at offset `d` from the diagonal.
pub fn diagonal_prior(d: f64) -> f64 {
    let d2 = d * d;
    INIT_ALPHA * d2 * d2 + INIT_BETA * d2
}

/// Standard Gumbel draw from a uniform on the open unit interval.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> GumbelNoise {
    let e = Array2::from_shape_simple_fn((rows, cols), || {
        let u: f64 = Open01.sample(rng);
        gumbel_from_uniform(u)
    });
    GumbelNoise { e }
}

/// Sequential Gumbel-max sampling without replacement.
pub fn draw_pattern(
    phi: &LogitsMatrix,
    noise: &GumbelNoise,
) -> Result<(SamplingPattern, MaskState)> {
    let (m, n) = phi.phi.dim();
    if noise.e.dim() != (m, n) {
        return Err(Error::config(format!(
            "noise shape {:?} does not match logits {m}x{n}",
            noise.e.dim()
        )));
    }
    let mut w = Array2::zeros((m + 1, n));
    let mut indices = Vec::with_capacity(m);
    for row in 0..m {
        let mask = w.row(row);
        let logits = phi.phi.row(row);
        let noise_row = noise.e.row(row);
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for col in 0..n {
            let v = mask[col] + logits[col] + noise_row[col];
            if v > best_val {
                best_val = v;
                best = col;
            }
        }
        indices.push(best);
        let (prev, mut rest) = w.view_mut().split_at(Axis(0), row + 1);
        let mut next = rest.row_mut(0);
        next.assign(&prev.row(row));
        next[best] = MASK_NEG;
    }
    Ok((SamplingPattern::new(indices, n)?, MaskState { w }))
}

/// Deterministic greedy pattern: sequential masked argmax without noise.
pub fn map_pattern(phi: &LogitsMatrix) -> SamplingPattern {
    let noise = GumbelNoise::zeros(phi.m_rows(), phi.n_cols());
    draw_pattern(phi, &noise)
        .expect("zero noise matches the logits shape")
        .0
}

/// `y = A x`: selects the pattern's columns of every row of `x`.
pub fn apply_pattern(pattern: &SamplingPattern, x: ArrayView2<Complex>) -> Result<Array2<Complex>> {
    if let Some(&bad) = pattern.indices.iter().find(|&&i| i >= x.ncols()) {
        return Err(Error::Invariant(format!(
            "pattern index {bad} out of range for rows of length {}",
            x.ncols()
        )));
    }
    Ok(x.select(Axis(1), &pattern.indices))
}

/// Adjoint of [`apply_pattern`]: scatters measurement gradients back to the
/// sampled positions of a length-`n` signal.
pub fn apply_pattern_adjoint(
    pattern: &SamplingPattern,
    grad_y: ArrayView2<Complex>,
    n: usize,
) -> Array2<Complex> {
    let mut out = Array2::zeros((grad_y.nrows(), n));
    for (slot, &i) in pattern.indices.iter().enumerate() {
        out.column_mut(i).assign(&grad_y.column(slot));
    }
    out
}

/// Relaxed rows `softmax((w_m + φ_m + e_m) / τ)`.
pub fn soft_rows(
    phi: &LogitsMatrix,
    noise: &GumbelNoise,
    mask: &MaskState,
    tau: f64,
) -> Result<Array2<f64>> {
    if !(tau > 0.0) {
        return Err(Error::config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let (m, n) = phi.phi.dim();
    if noise.e.dim() != (m, n) || mask.w.dim() != (m + 1, n) {
        return Err(Error::config(
            "noise or mask shape does not match the logits",
        ));
    }
    let mut soft = Array2::zeros((m, n));
    for row in 0..m {
        let out = soft.row_mut(row).into_slice().expect("standard layout");
        for (col, o) in out.iter_mut().enumerate() {
            *o = (mask.w[[row, col]] + phi.phi[[row, col]] + noise.e[[row, col]]) / tau;
        }
        softmax_in_place(out);
    }
    Ok(soft)
}

/// Softmax Jacobian `(diag(p) - p pᵀ) / τ`.
pub fn softmax_jacobian(p: ArrayView1<f64>, tau: f64) -> Array2<f64> {
    let n = p.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = if i == j { p[i] } else { 0.0 };
        (d - p[i] * p[j]) / tau
    })
}

/// Straight-through gradient w.r.t. the logits: each row's upstream
/// gradient is pulled back through its relaxed softmax. Rows are treated as
/// independent (the mask is not differentiated) and masked positions get
/// exactly zero.
pub fn st_grad_logits(
    upstream: ArrayView2<f64>,
    soft: ArrayView2<f64>,
    tau: f64,
    mask: &MaskState,
) -> Array2<f64> {
    assert_eq!(
        upstream.dim(),
        soft.dim(),
        "upstream and soft rows disagree"
    );
    let mut grad = Array2::zeros(soft.dim());
    for (row, (mut g, (u, p))) in grad
        .rows_mut()
        .into_iter()
        .zip(upstream.rows().into_iter().zip(soft.rows()))
        .enumerate()
    {
        // J is symmetric, so Jᵀu = (p ⊙ u - p (p·u)) / τ
        let pu = p.dot(&u);
        for col in 0..p.len() {
            g[col] = if mask.is_masked(row, col) {
                0.0
            } else {
                p[col] * (u[col] - pu) / tau
            };
        }
    }
    grad
}

/// Gradient of a real loss w.r.t. the one-hot rows of `A`, given the
/// gradient w.r.t. the complex measurements (as `∂L/∂Re + i ∂L/∂Im`) and the
/// full signals. Summed over the batch.
pub fn selection_grad(grad_y: ArrayView2<Complex>, x: ArrayView2<Complex>) -> Array2<f64> {
    let gr = grad_y.mapv(|c| c.re);
    let gi = grad_y.mapv(|c| c.im);
    let xr = x.mapv(|c| c.re);
    let xi = x.mapv(|c| c.im);
    gr.t().dot(&xr) + gi.t().dot(&xi)
}

/// Summed row entropies of the unmasked distributions and their gradient.
pub fn entropy_penalty(phi: &LogitsMatrix) -> (f64, Array2<f64>) {
    let p = phi.probabilities();
    let mut total = 0.0;
    let mut grad = Array2::zeros(p.dim());
    for (pr, mut g) in p.rows().into_iter().zip(grad.rows_mut()) {
        let h: f64 = -pr
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| v * v.ln())
            .sum::<f64>();
        total += h;
        // ∂H/∂φ_j = -π_j (ln π_j + H)
        for (gj, &pj) in g.iter_mut().zip(pr.iter()) {
            *gj = if pj > 0.0 { -pj * (pj.ln() + h) } else { 0.0 };
        }
    }
    (total, grad)
}

/// Regular pattern with stride `N/M`, starting at position 0.
pub fn uniform_pattern(n: usize, m: usize) -> Result<SamplingPattern> {
    if m == 0 || m > n || !n.is_multiple_of(m) {
        return Err(Error::config(format!(
            "uniform pattern needs M dividing N, got N={n}, M={m}"
        )));
    }
    let stride = n / m;
    SamplingPattern::new((0..m).map(|i| i * stride).collect(), n)
}

/// `M` positions drawn uniformly without replacement.
pub fn random_pattern<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SamplingPattern> {
    if m == 0 || m > n {
        return Err(Error::config(format!("need 0 < M <= N, got N={n}, M={m}")));
    }
    SamplingPattern::new(rand::seq::index::sample(rng, n, m).into_vec(), n)
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}
