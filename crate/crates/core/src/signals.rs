//! K-sparse test signals and their Fourier-domain representation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};

use crate::streams::{self, Stream};
use crate::{Complex, Error, Result};

const TESTSET_MAGIC: &str = "DPS-TESTSET";
const TESTSET_VERSION: u32 = 1;

/// Imaginary parts above this magnitude are flagged after an inverse DFT.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSignalConfig {
    pub n: usize,
    pub k: usize,
    pub amplitude_std: f64,
    pub seed: u64,
}

impl SparseSignalConfig {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            amplitude_std: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::config(format!(
                "sparsity k={} must satisfy 0 < k < n={}",
                self.k, self.n
            )));
        }
        if !(self.amplitude_std > 0.0 && self.amplitude_std.is_finite()) {
            return Err(Error::config(format!(
                "amplitude_std must be positive, got {}",
                self.amplitude_std
            )));
        }
        Ok(())
    }
}

/// Paired sparse targets `z` (batch × n) and their unitary DFTs `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    pub z: Array2<f64>,
    pub x: Array2<Complex>,
}

impl SignalBatch {
    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    pub fn n(&self) -> usize {
        self.z.ncols()
    }
}

/// Draws `batch_size` i.i.d. K-sparse signals: support uniform without
/// replacement, Gaussian amplitudes.
pub fn gen_sparse_batch<R: Rng + ?Sized>(
    cfg: &SparseSignalConfig,
    batch_size: usize,
    rng: &mut R,
) -> Result<SignalBatch> {
    let z = gen_sparse_targets(cfg, batch_size, rng)?;
    let x = dft(z.view());
    Ok(SignalBatch { z, x })
}

pub(crate) fn gen_sparse_targets<R: Rng + ?Sized>(
    cfg: &SparseSignalConfig,
    batch_size: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let amp = Normal::new(0.0, cfg.amplitude_std).map_err(|e| Error::config(e.to_string()))?;
    let mut z = Array2::zeros((batch_size, cfg.n));
    for mut row in z.rows_mut() {
        for idx in rand::seq::index::sample(rng, cfg.n, cfg.k) {
            // a zero draw would silently reduce the sparsity
            let mut v = amp.sample(rng);
            while v == 0.0 {
                v = amp.sample(rng);
            }
            row[idx] = v;
        }
    }
    Ok(z)
}

/// Cached forward/inverse FFT plans for one length, unitary scaling.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward_real(&self, z: ArrayView2<f64>) -> Array2<Complex> {
        let x = z.mapv(|v| Complex::new(v, 0.0));
        self.forward(x.view())
    }

    pub fn forward(&self, x: ArrayView2<Complex>) -> Array2<Complex> {
        self.run(x, &self.forward)
    }

    pub fn inverse(&self, x: ArrayView2<Complex>) -> Array2<Complex> {
        self.run(x, &self.inverse)
    }

    fn run(&self, x: ArrayView2<Complex>, plan: &Arc<dyn Fft<f64>>) -> Array2<Complex> {
        assert_eq!(x.ncols(), self.n, "row length must equal the DFT length");
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut out = x.to_owned();
        let mut buf = vec![Complex::default(); self.n];
        for mut row in out.rows_mut() {
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = *v;
            }
            plan.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b * scale;
            }
        }
        out
    }
}

/// Row-wise unitary DFT (`1/sqrt(n)` scaling, `exp(-2πi kn/N)` kernel).
pub fn dft(z: ArrayView2<f64>) -> Array2<Complex> {
    Dft::new(z.ncols()).forward_real(z)
}

/// Real part of a row-wise inverse unitary DFT, with the largest discarded
/// imaginary magnitude.
#[derive(Debug, Clone)]
pub struct RealInverse {
    pub z: Array2<f64>,
    pub max_imag: f64,
}

impl RealInverse {
    /// True when the input was not (numerically) the spectrum of a real signal.
    pub fn has_imag_residue(&self) -> bool {
        self.max_imag > IMAG_RESIDUE_TOL
    }
}

pub fn idft(x: ArrayView2<Complex>) -> RealInverse {
    let full = Dft::new(x.ncols()).inverse(x);
    let max_imag = full.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    RealInverse {
        z: full.mapv(|c| c.re),
        max_imag,
    }
}

/// Integer multiple of `factor` closest to `nominal`; ties go to the smaller
/// multiple.
pub fn effective_length(nominal: usize, factor: usize) -> Result<usize> {
    if factor == 0 || nominal < factor {
        return Err(Error::config(format!(
            "need factor >= 1 and nominal >= factor, got nominal={nominal}, factor={factor}"
        )));
    }
    let below = (nominal / factor) * factor;
    let above = below + factor;
    Ok(if nominal - below <= above - nominal {
        below
    } else {
        above
    })
}

/// Header of a persisted test set.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSetHeader {
    pub version: u32,
    pub n: usize,
    pub k: usize,
    pub size: usize,
    pub seed: u64,
    pub amplitude_std: f64,
}

/// Generates a deterministic hold-out set from `seed` and writes it to `path`.
pub fn make_test_set(
    cfg: &SparseSignalConfig,
    size: usize,
    seed: u64,
    path: &Path,
) -> Result<SignalBatch> {
    if size == 0 {
        return Err(Error::config("test set size must be at least 1"));
    }
    let mut rng = streams::stream(seed, Stream::TestSet);
    let batch = gen_sparse_batch(cfg, size, &mut rng)?;
    let header = TestSetHeader {
        version: TESTSET_VERSION,
        n: cfg.n,
        k: cfg.k,
        size,
        seed,
        amplitude_std: cfg.amplitude_std,
    };
    write_test_set(path, &header, batch.z.view())?;
    Ok(batch)
}

fn write_test_set(path: &Path, header: &TestSetHeader, z: ArrayView2<f64>) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{TESTSET_MAGIC}");
    let _ = writeln!(out, "version {}", header.version);
    let _ = writeln!(out, "n {}", header.n);
    let _ = writeln!(out, "k {}", header.k);
    let _ = writeln!(out, "size {}", header.size);
    let _ = writeln!(out, "seed {}", header.seed);
    let _ = writeln!(out, "amplitude_std {:e}", header.amplitude_std);
    for row in z.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    fs::write(path, out).map_err(|e| Error::storage(path, e))
}

/// Loads a test set written by [`make_test_set`]; the transform is
/// recomputed from the stored targets.
pub fn load_test_set(path: &Path) -> Result<(TestSetHeader, SignalBatch)> {
    let text = fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);
    let mut lines = text.lines();
    if lines.next() != Some(TESTSET_MAGIC) {
        return Err(bad("missing test-set magic line"));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        match line.split_once(' ') {
            Some((key, value)) if key == name => Ok(value.trim().to_string()),
            _ => Err(bad(&format!("expected header field `{name}`"))),
        }
    };
    let parse_err = |name: &str| bad(&format!("unparsable header field `{name}`"));
    let version: u32 = field("version")?
        .parse()
        .map_err(|_| parse_err("version"))?;
    if version != TESTSET_VERSION {
        return Err(bad(&format!("unsupported test-set version {version}")));
    }
    let n: usize = field("n")?.parse().map_err(|_| parse_err("n"))?;
    let k: usize = field("k")?.parse().map_err(|_| parse_err("k"))?;
    let size: usize = field("size")?.parse().map_err(|_| parse_err("size"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| parse_err("seed"))?;
    let amplitude_std: f64 = field("amplitude_std")?
        .parse()
        .map_err(|_| parse_err("amplitude_std"))?;

    let mut values = Vec::with_capacity(n * size);
    let mut rows = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("unparsable sample"))?);
        }
        if values.len() - before != n {
            return Err(bad(&format!("row {rows} does not have {n} samples")));
        }
        rows += 1;
    }
    if rows != size {
        return Err(bad(&format!("expected {size} rows, found {rows}")));
    }
    let z = Array2::from_shape_vec((size, n), values).map_err(|e| bad(&e.to_string()))?;
    let x = dft(z.view());
    let header = TestSetHeader {
        version,
        n,
        k,
        size,
        seed,
        amplitude_std,
    };
    Ok((header, SignalBatch { z, x }))
}

/// Per-row squared norms, used by the zero-predictor baseline.
pub(crate) fn row_energy(z: ArrayView2<f64>) -> Vec<f64> {
    z.axis_iter(Axis(0))
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect()
}
