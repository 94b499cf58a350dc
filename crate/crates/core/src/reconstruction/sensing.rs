use std::f64::consts::PI;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::dps::SamplingPattern;
use crate::Complex;

/// `Ψ = A F`: the selected rows of the unitary DFT, plus its realified form
/// with the real parts stacked above the imaginary parts (`2M × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub psi: Array2<Complex>,
    pub realified: Array2<f64>,
}

impl SensingMatrix {
    pub fn m(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n(&self) -> usize {
        self.psi.ncols()
    }

    /// Realified measurements of real signals, `[Re(Ψz); Im(Ψz)]`, row-wise.
    pub fn measure_real(&self, z: ArrayView2<f64>) -> Array2<f64> {
        z.dot(&self.realified.t())
    }
}

/// Entry `(k, n)` of the unitary DFT matrix.
fn dft_entry(k: usize, n: usize, len: usize) -> Complex {
    // reduce the phase index first to keep the angle small
    let phase = ((k * n) % len) as f64;
    Complex::from_polar(1.0 / (len as f64).sqrt(), -2.0 * PI * phase / len as f64)
}

pub fn dft_matrix(n: usize) -> Array2<Complex> {
    Array2::from_shape_fn((n, n), |(k, j)| dft_entry(k, j, n))
}

pub fn build_sensing_matrix(pattern: &SamplingPattern) -> SensingMatrix {
    let n = pattern.n();
    let m = pattern.m();
    let psi = Array2::from_shape_fn((m, n), |(row, col)| {
        dft_entry(pattern.indices()[row], col, n)
    });
    let mut realified = Array2::zeros((2 * m, n));
    realified.slice_mut(s![..m, ..]).assign(&psi.mapv(|c| c.re));
    realified.slice_mut(s![m.., ..]).assign(&psi.mapv(|c| c.im));
    SensingMatrix { psi, realified }
}

/// Stacks `[Re(y) | Im(y)]` per row, giving a `batch × 2M` real matrix.
pub fn realify_measurements(y: ArrayView2<Complex>) -> Array2<f64> {
    concatenate(Axis(1), &[y.mapv(|c| c.re).view(), y.mapv(|c| c.im).view()])
        .expect("matching row counts")
}
