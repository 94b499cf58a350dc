use std::fs;
use std::path::Path;

use dps_core::training::TrainConfig;

use crate::args::{Profile, ReconArg, SamplerArg, TrainArgs};
use crate::Failure;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Effective training configuration: defaults, then the config file, then
/// the profile, then explicit flags. Returns the config file text as well.
pub fn resolve(args: &TrainArgs) -> Result<(TrainConfig, Option<String>), Failure> {
    let mut cfg = TrainConfig::full();
    let mut file_text = None;
    if let Some(path) = &args.config {
        let text = read(path)?;
        for (k, v) in parse_config_file(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        {
            cfg.set(&k, &v)?;
        }
        file_text = Some(text);
    }
    if args.profile == Some(Profile::Desk) {
        cfg.n_iter = dps_core::training::DESK_ITERS;
    }
    let mut flags: Vec<(&str, String)> = Vec::new();
    let mut put = |k, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k, v));
        }
    };
    put(
        "sampler",
        args.sampler.map(|s| match s {
            SamplerArg::Dps => "dps".into(),
            SamplerArg::Uniform => "uniform".into(),
            SamplerArg::Random => "random".into(),
        }),
    );
    put(
        "recon",
        args.recon.map(|r| match r {
            ReconArg::Lista => "lista".into(),
            ReconArg::Ista => "ista".into(),
        }),
    );
    put("factor", args.factor.map(|v| v.to_string()));
    put("seed", args.seed.map(|v| v.to_string()));
    put("iters", args.iters.map(|v| v.to_string()));
    put("batch", args.batch.map(|v| v.to_string()));
    put("n_nominal", args.n.map(|v| v.to_string()));
    put("k", args.k.map(|v| v.to_string()));
    put("lr_theta", args.lr_theta.map(|v| format!("{v:e}")));
    put("lr_phi", args.lr_phi.map(|v| format!("{v:e}")));
    put("l2_lambda", args.l2_lambda.map(|v| format!("{v:e}")));
    put("entropy_mu", args.entropy_mu.map(|v| format!("{v:e}")));
    put("tau_init", args.tau_init.map(|v| format!("{v:e}")));
    put("tau_end", args.tau_end.map(|v| format!("{v:e}")));
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    if !crate::args::FACTORS.contains(&cfg.factor) {
        return Err(Failure::usage(format!(
            "factor must be one of {:?}",
            crate::args::FACTORS
        )));
    }
    cfg.validate()?;
    Ok((cfg, file_text))
}

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}
