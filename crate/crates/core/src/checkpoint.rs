//! Plain-text checkpoint of a training run.
//!
//! ```text
//! [meta]        format_version, every config key, n, m, iteration
//! [pattern]     fixed pattern indices, or `none`
//! [phi]         "M N", then M rows
//! [theta]       folds, slope, "W<l> rows cols" / "S<l> rows cols" blocks, "t ..."
//! [history]     iteration,total,mse,entropy
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload is bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dps::{LogitsMatrix, SamplingPattern};
use crate::reconstruction::ListaParams;
use crate::training::{LossRecord, RunArtifacts, TrainConfig, CONFIG_KEYS};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn render(run: &RunArtifacts) -> String {
    let mut out = String::new();
    out.push_str("[meta]\n");
    let _ = writeln!(out, "format_version = {CHECKPOINT_VERSION}");
    for (k, v) in run.config.entries() {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "n = {}", run.n);
    let _ = writeln!(out, "m = {}", run.m);
    let _ = writeln!(out, "iteration = {}", run.iterations_completed());

    out.push_str("[pattern]\n");
    match &run.fixed_pattern {
        Some(p) => {
            let idx: Vec<String> = p.indices().iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{}", idx.join(" "));
        }
        None => out.push_str("none\n"),
    }

    out.push_str("[phi]\n");
    write_matrix(&mut out, None, &run.phi.view().to_owned());

    out.push_str("[theta]\n");
    let _ = writeln!(out, "folds {}", run.theta.folds());
    let _ = writeln!(out, "slope {:e}", run.theta.slope);
    for (l, w) in run.theta.w.iter().enumerate() {
        write_matrix(&mut out, Some(&format!("W{}", l + 1)), w);
    }
    for (l, s) in run.theta.s.iter().enumerate() {
        write_matrix(&mut out, Some(&format!("S{}", l + 2)), s);
    }
    let _ = writeln!(out, "t {}", join_floats(run.theta.t.iter()));

    out.push_str("[history]\niteration,total,mse,entropy\n");
    for r in &run.history {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.iteration, r.total, r.mse, r.entropy
        );
    }
    out
}

pub fn save(run: &RunArtifacts, path: &Path) -> Result<()> {
    fs::write(path, render(run)).map_err(|e| Error::storage(path, e))
}

pub fn load(path: &Path) -> Result<RunArtifacts> {
    let text = fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
    parse(&text).map_err(|reason| Error::format(path, reason))
}

fn join_floats<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_matrix(out: &mut String, label: Option<&str>, a: &Array2<f64>) {
    match label {
        Some(l) => {
            let _ = writeln!(out, "{l} {} {}", a.nrows(), a.ncols());
        }
        None => {
            let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
        }
    }
    for row in a.rows() {
        let _ = writeln!(out, "{}", join_floats(row.iter()));
    }
}

type ParseResult<T> = std::result::Result<T, String>;

fn sections(text: &str) -> ParseResult<HashMap<&str, Vec<&str>>> {
    let mut map: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut current: Option<&str> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            if map.insert(name, Vec::new()).is_some() {
                return Err(format!("duplicate section [{name}]"));
            }
            current = Some(name);
        } else if !trimmed.is_empty() {
            let name = current.ok_or("content before the first section")?;
            map.get_mut(name).expect("section inserted").push(trimmed);
        }
    }
    Ok(map)
}

fn floats(line: &str) -> ParseResult<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect()
}

fn read_matrix<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    label: Option<&str>,
) -> ParseResult<Array2<f64>> {
    let header = lines.next().ok_or("missing matrix header")?;
    let mut parts = header.split_whitespace();
    if let Some(l) = label {
        if parts.next() != Some(l) {
            return Err(format!("expected matrix `{l}`, found `{header}`"));
        }
    }
    let rows: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or("bad matrix rows")?;
    let cols: usize = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or("bad matrix cols")?;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = floats(
            lines
                .next()
                .ok_or_else(|| format!("matrix truncated at row {r}"))?,
        )?;
        if row.len() != cols {
            return Err(format!(
                "matrix row {r} has {} values, expected {cols}",
                row.len()
            ));
        }
        data.extend(row);
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| e.to_string())
}

fn parse(text: &str) -> ParseResult<RunArtifacts> {
    let secs = sections(text)?;
    let get = |name: &str| {
        secs.get(name)
            .ok_or_else(|| format!("missing section [{name}]"))
    };

    let mut meta = HashMap::new();
    for line in get("meta")? {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("bad meta line `{line}`"))?;
        meta.insert(k.trim(), v.trim());
    }
    let meta_usize = |k: &str| -> ParseResult<usize> {
        meta.get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("missing or bad meta `{k}`"))
    };
    let version = meta_usize("format_version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let mut config = TrainConfig::default();
    for key in CONFIG_KEYS {
        let v = meta
            .get(key)
            .ok_or_else(|| format!("missing meta `{key}`"))?;
        config.set(key, v).map_err(|e| e.to_string())?;
    }
    let n = meta_usize("n")?;
    let m = meta_usize("m")?;
    let iteration = meta_usize("iteration")?;

    let pattern_lines = get("pattern")?;
    let fixed_pattern = match pattern_lines.first().copied() {
        Some("none") => None,
        Some(line) => {
            let idx = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| format!("bad pattern index `{t}`"))
                })
                .collect::<ParseResult<Vec<_>>>()?;
            Some(SamplingPattern::new(idx, n).map_err(|e| e.to_string())?)
        }
        None => return Err("empty [pattern] section".into()),
    };

    let phi = read_matrix(&mut get("phi")?.iter().copied(), None)?;
    if phi.dim() != (m, n) {
        return Err(format!("phi is {:?}, expected ({m}, {n})", phi.dim()));
    }
    let phi = LogitsMatrix::new(phi).map_err(|e| e.to_string())?;

    let mut theta_lines = get("theta")?.iter().copied();
    let mut kv = |key: &str| -> ParseResult<String> {
        let line = theta_lines
            .next()
            .ok_or_else(|| format!("missing `{key}`"))?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| format!("expected `{key}`, found `{line}`"))
    };
    let folds: usize = kv("folds")?.parse().map_err(|_| "bad fold count")?;
    let slope: f64 = kv("slope")?.parse().map_err(|_| "bad slope")?;
    let mut w = Vec::with_capacity(folds);
    for l in 0..folds {
        w.push(read_matrix(&mut theta_lines, Some(&format!("W{}", l + 1)))?);
    }
    let mut s = Vec::with_capacity(folds.saturating_sub(1));
    for l in 1..folds {
        s.push(read_matrix(&mut theta_lines, Some(&format!("S{}", l + 1)))?);
    }
    let t_line = theta_lines.next().ok_or("missing thresholds")?;
    let t = floats(t_line.strip_prefix('t').ok_or("expected thresholds line")?)?;
    if t.len() != folds {
        return Err(format!("{} thresholds for {folds} folds", t.len()));
    }
    let theta = ListaParams {
        w,
        s,
        t: Array1::from(t),
        slope,
    };

    let mut history = Vec::new();
    let mut hist = get("history")?.iter();
    if hist.next() != Some(&"iteration,total,mse,entropy") {
        return Err("bad history header".into());
    }
    for line in hist {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(format!("bad history line `{line}`"));
        }
        let num = |i: usize| {
            cols[i]
                .parse::<f64>()
                .map_err(|_| format!("bad history value `{}`", cols[i]))
        };
        history.push(LossRecord {
            iteration: cols[0].parse().map_err(|_| "bad history iteration")?,
            total: num(1)?,
            mse: num(2)?,
            entropy: num(3)?,
        });
    }
    if history.len() != iteration {
        return Err(format!(
            "history has {} rows, meta says {iteration}",
            history.len()
        ));
    }

    Ok(RunArtifacts {
        config,
        n,
        m,
        phi,
        theta,
        fixed_pattern,
        history,
    })
}
