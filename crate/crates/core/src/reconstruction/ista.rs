use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::SensingMatrix;
use crate::{Complex, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaConfig {
    pub n_iter: usize,
    pub step: f64,
    pub threshold: f64,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            n_iter: 300,
            step: 1.0,
            threshold: 0.1,
        }
    }
}

impl IstaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.threshold > 0.0) {
            return Err(Error::config(format!(
                "ISTA needs step > 0 and threshold > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Piecewise-linear soft threshold.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `½‖y − Ψz‖² + threshold·‖z‖₁` for a real `z`.
pub fn lasso_objective(
    y: ArrayView1<Complex>,
    psi: &SensingMatrix,
    z: ArrayView1<f64>,
    threshold: f64,
) -> f64 {
    let yr = realify(y);
    let r = &yr - &psi.realified.dot(&z);
    0.5 * r.dot(&r) + threshold * z.iter().map(|v| v.abs()).sum::<f64>()
}

/// Proximal-gradient recovery of a real sparse vector from `y = Ψz`,
/// starting from zero.
pub fn ista(y: ArrayView1<Complex>, psi: &SensingMatrix, cfg: &IstaConfig) -> Result<Array1<f64>> {
    ista_with_observer(y, psi, cfg, |_, _| {})
}

/// [`ista`] with a callback receiving `(iteration, iterate)` after every step.
pub fn ista_with_observer(
    y: ArrayView1<Complex>,
    psi: &SensingMatrix,
    cfg: &IstaConfig,
    observe: impl FnMut(usize, ArrayView1<f64>),
) -> Result<Array1<f64>> {
    if y.len() != psi.m() {
        return Err(Error::config(format!(
            "measurement length {} does not match M={}",
            y.len(),
            psi.m()
        )));
    }
    solve(realify(y).view(), psi, cfg, observe)
}

/// [`ista`] on measurements already split into `[Re y; Im y]`.
pub fn ista_realified(
    y_r: ArrayView1<f64>,
    psi: &SensingMatrix,
    cfg: &IstaConfig,
) -> Result<Array1<f64>> {
    if y_r.len() != 2 * psi.m() {
        return Err(Error::config(format!(
            "realified measurement length {} does not match 2M={}",
            y_r.len(),
            2 * psi.m()
        )));
    }
    solve(y_r, psi, cfg, |_, _| {})
}

fn solve(
    yr: ArrayView1<f64>,
    psi: &SensingMatrix,
    cfg: &IstaConfig,
    mut observe: impl FnMut(usize, ArrayView1<f64>),
) -> Result<Array1<f64>> {
    cfg.validate()?;
    let a = &psi.realified;
    let thr = cfg.step * cfg.threshold;
    let mut z = Array1::<f64>::zeros(psi.n());
    for it in 1..=cfg.n_iter {
        let residual = &yr - &a.dot(&z);
        let grad = a.t().dot(&residual);
        let mut finite = true;
        z.zip_mut_with(&grad, |zi, gi| {
            *zi = soft_threshold(*zi + cfg.step * gi, thr);
            finite &= zi.is_finite();
        });
        if !finite {
            return Err(Error::IstaDivergence(it));
        }
        observe(it, z.view());
    }
    Ok(z)
}

/// [`ista`] on a whole batch of realified measurements (`batch × 2M`),
/// one signal per row.
pub fn ista_batch(
    y_r: ArrayView2<f64>,
    psi: &SensingMatrix,
    cfg: &IstaConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if y_r.ncols() != 2 * psi.m() {
        return Err(Error::config(format!(
            "realified measurement length {} does not match 2M={}",
            y_r.ncols(),
            2 * psi.m()
        )));
    }
    let a = &psi.realified;
    let thr = cfg.step * cfg.threshold;
    let mut z = Array2::<f64>::zeros((y_r.nrows(), psi.n()));
    let mut residual = Array2::<f64>::zeros(y_r.dim());
    let mut grad = Array2::<f64>::zeros(z.dim());
    for it in 1..=cfg.n_iter {
        residual.assign(&y_r);
        general_mat_mul(-1.0, &z, &a.t(), 1.0, &mut residual);
        general_mat_mul(1.0, &residual, a, 0.0, &mut grad);
        let mut finite = true;
        z.zip_mut_with(&grad, |zi, gi| {
            *zi = soft_threshold(*zi + cfg.step * gi, thr);
            finite &= zi.is_finite();
        });
        if !finite {
            return Err(Error::IstaDivergence(it));
        }
    }
    Ok(z)
}

fn realify(y: ArrayView1<Complex>) -> Array1<f64> {
    concatenate(Axis(0), &[y.mapv(|c| c.re).view(), y.mapv(|c| c.im).view()])
        .expect("1-d concatenation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dps::{random_pattern, SamplingPattern};
    use crate::reconstruction::build_sensing_matrix;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn measure(psi: &SensingMatrix, z: &Array1<f64>) -> Array1<Complex> {
        psi.psi.dot(&z.mapv(|v| Complex::new(v, 0.0)))
    }

    #[test]
    fn batch_and_realified_solvers_match_the_complex_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pattern = random_pattern(64, 20, &mut rng).unwrap();
        let psi = build_sensing_matrix(&pattern);
        let cfg = IstaConfig {
            threshold: 0.02,
            ..IstaConfig::default()
        };
        let z = Array2::from_shape_fn((6, 64), |_| {
            if rng.random_bool(0.08) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let y_r = psi.measure_real(z.view());
        let batch = ista_batch(y_r.view(), &psi, &cfg).unwrap();
        for b in 0..6 {
            let single = ista(measure(&psi, &z.row(b).to_owned()).view(), &psi, &cfg).unwrap();
            let realified = ista_realified(y_r.row(b), &psi, &cfg).unwrap();
            for ((a, c), d) in batch.row(b).iter().zip(&single).zip(&realified) {
                assert!((a - c).abs() < 1e-12 && (c - d).abs() < 1e-12);
            }
        }
        assert!(ista_batch(y_r.slice(ndarray::s![.., ..10]), &psi, &cfg).is_err());
    }

    #[test]
    fn full_sampling_one_sparse_fixed_point() {
        let n = 32;
        let psi = build_sensing_matrix(&SamplingPattern::new((0..n).collect(), n).unwrap());
        let mut z = Array1::zeros(n);
        z[11] = 10.0;
        let y = measure(&psi, &z);
        let cfg = IstaConfig::default();
        let zh = ista(y.view(), &psi, &cfg).unwrap();
        // fixed point of soft_threshold(z, t) on an orthonormal system
        assert!((zh[11] - (10.0 - cfg.threshold)).abs() < 1e-9);
        for (i, v) in zh.iter().enumerate() {
            if i != 11 {
                assert!(v.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_measurements_stay_zero() {
        let psi = build_sensing_matrix(&SamplingPattern::new(vec![0, 3, 5], 8).unwrap());
        let y = Array1::zeros(3);
        assert!(ista(y.view(), &psi, &IstaConfig::default())
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let psi = build_sensing_matrix(&SamplingPattern::new(vec![0, 3], 8).unwrap());
        let y = Array1::zeros(2);
        let bad = IstaConfig {
            threshold: 0.0,
            ..IstaConfig::default()
        };
        assert!(ista(y.view(), &psi, &bad).is_err());
        assert!(ista(Array1::zeros(3).view(), &psi, &IstaConfig::default()).is_err());
    }

    /// Least-squares fit over every single-index support.
    fn best_single_support(psi: &SensingMatrix, y: &Array1<Complex>) -> usize {
        let yr = realify(y.view());
        let mut best = (0, f64::INFINITY);
        for j in 0..psi.n() {
            let col = psi.realified.column(j);
            let amp = col.dot(&yr) / col.dot(&col);
            let r = &yr - &col.mapv(|c| c * amp);
            let err = r.dot(&r);
            if err < best.1 {
                best = (j, err);
            }
        }
        best.0
    }

    #[test]
    fn recovers_one_sparse_supports_from_half_the_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = IstaConfig::default();
        let trials = 200;
        let mut hits = 0;
        for _ in 0..trials {
            let pattern = random_pattern(16, 8, &mut rng).unwrap();
            let psi = build_sensing_matrix(&pattern);
            let mut z = Array1::zeros(16);
            let pos = rng.random_range(0..16);
            z[pos] = if rng.random::<bool>() { 10.0 } else { -10.0 };
            let y = measure(&psi, &z);
            let oracle = best_single_support(&psi, &y);
            let zh = ista(y.view(), &psi, &cfg).unwrap();
            let found = zh
                .iter()
                .enumerate()
                .fold(
                    (0, 0.0),
                    |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b },
                )
                .0;
            if found == oracle && oracle == pos {
                hits += 1;
            }
        }
        assert!(hits as f64 / trials as f64 > 0.95, "hits {hits}/{trials}");
    }

    #[test]
    fn lasso_objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pattern = random_pattern(64, 16, &mut rng).unwrap();
        let psi = build_sensing_matrix(&pattern);
        let z = Array2::from_shape_fn((1, 64), |(_, j)| {
            if j % 13 == 2 {
                rng.random::<f64>() * 2.0 - 1.0
            } else {
                0.0
            }
        });
        let y = measure(&psi, &z.row(0).to_owned());
        let cfg = IstaConfig {
            n_iter: 200,
            ..IstaConfig::default()
        };
        let mut prev = lasso_objective(y.view(), &psi, Array1::zeros(64).view(), cfg.threshold);
        ista_with_observer(y.view(), &psi, &cfg, |_, zi| {
            let obj = lasso_objective(y.view(), &psi, zi, cfg.threshold);
            assert!(obj <= prev + 1e-12, "{obj} > {prev}");
            prev = obj;
        })
        .unwrap();
    }
}
