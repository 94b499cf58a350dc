use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::dps::{LogitsMatrix, SamplingPattern};
use crate::plot;
use crate::training::LossRecord;
use crate::{Error, Result};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::storage(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Writes a header (if any) and rows of pre-formatted cells.
fn write_csv<I, R>(path: &Path, header: Option<&[&str]>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| csv_error(path, e))?;
    }
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::storage(path, e))
}

fn read_csv(path: &Path, has_header: bool) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    r.records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))
}

fn cell<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| Error::format(path, format!("bad cell {i} in record {rec:?}")))
}

/// Writes the row-wise distributions `softmax(Φ)` as `stem.csv` plus a
/// heatmap `stem.svg`.
pub fn export_distributions(phi: &LogitsMatrix, stem: &Path) -> Result<()> {
    let pi = phi.probabilities();
    let rows = pi
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>());
    write_csv(&stem.with_extension("csv"), None, rows)?;
    let svg = stem.with_extension("svg");
    fs::write(&svg, plot::heatmap_svg(pi.view(), 4.0)).map_err(|e| Error::storage(&svg, e))
}

pub fn load_distributions(path: &Path) -> Result<Array2<f64>> {
    let records = read_csv(path, false)?;
    let cols = records
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let mut values = Vec::with_capacity(records.len() * cols);
    for rec in &records {
        for i in 0..cols {
            values.push(cell(path, rec, i)?);
        }
    }
    Array2::from_shape_vec((records.len(), cols), values)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// `row,index` listing of the selected positions.
pub fn export_pattern(pattern: &SamplingPattern, path: &Path) -> Result<()> {
    let rows = pattern
        .indices()
        .iter()
        .enumerate()
        .map(|(m, n)| [m.to_string(), n.to_string()]);
    write_csv(path, Some(&["row", "index"]), rows)
}

pub fn write_eval_csv(per_signal: &[f64], path: &Path) -> Result<()> {
    let rows = per_signal
        .iter()
        .enumerate()
        .map(|(i, v)| [i.to_string(), format!("{v:e}")]);
    write_csv(path, Some(&["signal_id", "mse"]), rows)
}

pub fn write_history_csv(history: &[LossRecord], path: &Path) -> Result<()> {
    let rows = history.iter().map(|r| {
        [
            r.iteration.to_string(),
            format!("{:e}", r.total),
            format!("{:e}", r.mse),
            format!("{:e}", r.entropy),
        ]
    });
    write_csv(path, Some(&["iteration", "total", "mse", "entropy"]), rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sampler: String,
    pub recon: String,
    pub factor: usize,
    pub mean_mse: f64,
    pub baseline_mse: f64,
    pub seconds: f64,
}

const SUMMARY_HEADER: [&str; 6] = [
    "sampler",
    "recon",
    "factor",
    "mean_mse",
    "baseline_mse",
    "seconds",
];

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let cells = rows.iter().map(|r| {
        [
            r.sampler.clone(),
            r.recon.clone(),
            r.factor.to_string(),
            format!("{:e}", r.mean_mse),
            format!("{:e}", r.baseline_mse),
            format!("{:e}", r.seconds),
        ]
    });
    write_csv(path, Some(&SUMMARY_HEADER), cells)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path, true)?
        .iter()
        .map(|rec| {
            Ok(SummaryRow {
                sampler: cell(path, rec, 0)?,
                recon: cell(path, rec, 1)?,
                factor: cell(path, rec, 2)?,
                mean_mse: cell(path, rec, 3)?,
                baseline_mse: cell(path, rec, 4)?,
                seconds: cell(path, rec, 5)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dps::init_logits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_export_flat_rows() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("pi");
        export_distributions(&LogitsMatrix::uniform(4, 16).unwrap(), &stem).unwrap();
        let pi = load_distributions(&stem.with_extension("csv")).unwrap();
        assert_eq!(pi.dim(), (4, 16));
        assert!(pi.iter().all(|v| (v - 1.0 / 16.0).abs() < 1e-15));
        assert!(fs::read_to_string(stem.with_extension("svg"))
            .unwrap()
            .starts_with("<svg"));
    }

    #[test]
    fn one_hot_logits_export_peaked_rows() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("pi");
        let mut phi = Array2::zeros((3, 8));
        for m in 0..3 {
            phi[[m, 2 * m]] = 50.0;
        }
        export_distributions(&LogitsMatrix::new(phi).unwrap(), &stem).unwrap();
        let pi = load_distributions(&stem.with_extension("csv")).unwrap();
        for row in pi.rows() {
            assert_eq!(row.iter().filter(|v| **v > 0.999).count(), 1);
        }
    }

    #[test]
    fn round_trip_matches_recomputed_distributions() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("pi");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = init_logits(32, 128, &mut rng).unwrap();
        export_distributions(&phi, &stem).unwrap();
        let pi = load_distributions(&stem.with_extension("csv")).unwrap();
        let diff = (&pi - &phi.probabilities())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-9);
        for row in pi.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("summary.csv");
        let row = SummaryRow {
            sampler: "dps".into(),
            recon: "lista".into(),
            factor: 4,
            mean_mse: 3.1e-4,
            baseline_mse: 0.039,
            seconds: 0.007,
        };
        write_summary_csv(std::slice::from_ref(&row), &p).unwrap();
        assert!(fs::read_to_string(&p)
            .unwrap()
            .starts_with("sampler,recon,factor,mean_mse,baseline_mse,seconds\n"));
        assert_eq!(read_summary_csv(&p).unwrap(), vec![row]);
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(load_distributions(&p).is_err());
    }
}
