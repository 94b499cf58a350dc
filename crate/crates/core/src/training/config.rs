use std::fmt;
use std::str::FromStr;

use super::adam::AdamHyper;
use crate::dps::TemperatureSchedule;
use crate::reconstruction::SHRINK_SLOPE;
use crate::signals::{effective_length, SparseSignalConfig};
use crate::{Error, Result};

/// How the measurement positions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    /// Learned distributions, resampled every iteration.
    Dps,
    /// Fixed stride-`N/M` pattern.
    Uniform,
    /// Fixed pattern drawn once from the run seed.
    Random,
}

/// Which model decodes the measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconKind {
    Lista,
    Ista,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Dps => "dps",
            SamplerKind::Uniform => "uniform",
            SamplerKind::Random => "random",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dps" => Ok(SamplerKind::Dps),
            "uniform" => Ok(SamplerKind::Uniform),
            "random" => Ok(SamplerKind::Random),
            other => Err(Error::config(format!("unknown sampler `{other}`"))),
        }
    }
}

impl fmt::Display for ReconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconKind::Lista => "lista",
            ReconKind::Ista => "ista",
        })
    }
}

impl FromStr for ReconKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lista" => Ok(ReconKind::Lista),
            "ista" => Ok(ReconKind::Ista),
            other => Err(Error::config(format!("unknown reconstructor `{other}`"))),
        }
    }
}

/// Every knob of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Nominal signal length before rounding to a multiple of `factor`.
    pub n_nominal: usize,
    pub k: usize,
    pub amplitude_std: f64,
    pub n_iter: usize,
    pub batch: usize,
    pub lr_theta: f64,
    pub lr_phi: f64,
    pub l2_lambda: f64,
    pub entropy_mu: f64,
    pub adam: AdamHyper,
    pub tau_init: f64,
    pub tau_end: f64,
    pub sampler: SamplerKind,
    pub recon: ReconKind,
    pub factor: usize,
    pub seed: u64,
    pub shrink_slope: f64,
}

/// Iteration count of the desk-scale profile.
pub const DESK_ITERS: usize = 20_000;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_nominal: 128,
            k: 5,
            amplitude_std: 1.0,
            n_iter: 96_000,
            batch: 16,
            lr_theta: 1e-3,
            lr_phi: 5e-3,
            l2_lambda: 0.0,
            entropy_mu: 1e-8,
            adam: AdamHyper::default(),
            tau_init: 5.0,
            tau_end: 0.5,
            sampler: SamplerKind::Dps,
            recon: ReconKind::Lista,
            factor: 4,
            seed: 0,
            shrink_slope: SHRINK_SLOPE,
        }
    }
}

/// Configuration keys, in the order they are written out.
pub const CONFIG_KEYS: &[&str] = &[
    "n_nominal",
    "k",
    "amplitude_std",
    "iters",
    "batch",
    "lr_theta",
    "lr_phi",
    "l2_lambda",
    "entropy_mu",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "tau_init",
    "tau_end",
    "sampler",
    "recon",
    "factor",
    "seed",
    "shrink_slope",
];

impl TrainConfig {
    /// Full-length profile with the published hyperparameters.
    pub fn full() -> Self {
        Self::default()
    }

    /// Same hyperparameters, 20 000 iterations.
    pub fn desk() -> Self {
        Self {
            n_iter: DESK_ITERS,
            ..Self::default()
        }
    }

    /// Signal length actually used: the multiple of `factor` nearest to
    /// `n_nominal`.
    pub fn n(&self) -> Result<usize> {
        effective_length(self.n_nominal, self.factor)
    }

    /// Number of measurements.
    pub fn m(&self) -> Result<usize> {
        Ok(self.n()? / self.factor)
    }

    pub fn signal_config(&self) -> Result<SparseSignalConfig> {
        let cfg = SparseSignalConfig {
            n: self.n()?,
            k: self.k,
            amplitude_std: self.amplitude_std,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schedule(&self) -> TemperatureSchedule {
        TemperatureSchedule {
            tau_init: self.tau_init,
            tau_end: self.tau_end,
            n_iter: self.n_iter,
        }
    }

    /// Step multiplier applied to the logits' Adam update.
    pub fn phi_multiplier(&self) -> f64 {
        self.lr_phi / self.lr_theta
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_theta", self.lr_theta),
            ("lr_phi", self.lr_phi),
            ("adam_eps", self.adam.eps),
            ("shrink_slope", self.shrink_slope),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("l2_lambda", self.l2_lambda),
            ("entropy_mu", self.entropy_mu),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("adam_beta1", self.adam.beta1),
            ("adam_beta2", self.adam.beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.n_iter == 0 || self.batch == 0 {
            return Err(Error::config("iters and batch must be at least 1"));
        }
        self.schedule().validate()?;
        self.signal_config()?;
        if self.m()? <= self.k {
            return Err(Error::config(format!(
                "need more measurements than nonzeros, got M={} and K={}",
                self.m()?,
                self.k
            )));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "n_nominal" => self.n_nominal = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "amplitude_std" => self.amplitude_std = parse(key, value)?,
            "iters" => self.n_iter = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "lr_theta" => self.lr_theta = parse(key, value)?,
            "lr_phi" => self.lr_phi = parse(key, value)?,
            "l2_lambda" => self.l2_lambda = parse(key, value)?,
            "entropy_mu" => self.entropy_mu = parse(key, value)?,
            "adam_beta1" => self.adam.beta1 = parse(key, value)?,
            "adam_beta2" => self.adam.beta2 = parse(key, value)?,
            "adam_eps" => self.adam.eps = parse(key, value)?,
            "tau_init" => self.tau_init = parse(key, value)?,
            "tau_end" => self.tau_end = parse(key, value)?,
            "sampler" => self.sampler = value.trim().parse()?,
            "recon" => self.recon = value.trim().parse()?,
            "factor" => self.factor = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "shrink_slope" => self.shrink_slope = parse(key, value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown configuration key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// `(key, value)` pairs in [`CONFIG_KEYS`] order; floats are written in
    /// shortest round-trip form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = |v: f64| format!("{v:e}");
        vec![
            ("n_nominal", self.n_nominal.to_string()),
            ("k", self.k.to_string()),
            ("amplitude_std", f(self.amplitude_std)),
            ("iters", self.n_iter.to_string()),
            ("batch", self.batch.to_string()),
            ("lr_theta", f(self.lr_theta)),
            ("lr_phi", f(self.lr_phi)),
            ("l2_lambda", f(self.l2_lambda)),
            ("entropy_mu", f(self.entropy_mu)),
            ("adam_beta1", f(self.adam.beta1)),
            ("adam_beta2", f(self.adam.beta2)),
            ("adam_eps", f(self.adam.eps)),
            ("tau_init", f(self.tau_init)),
            ("tau_end", f(self.tau_end)),
            ("sampler", self.sampler.to_string()),
            ("recon", self.recon.to_string()),
            ("factor", self.factor.to_string()),
            ("seed", self.seed.to_string()),
            ("shrink_slope", f(self.shrink_slope)),
        ]
    }
}
