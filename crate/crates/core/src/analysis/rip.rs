use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::dps::SamplingPattern;
use crate::reconstruction::build_sensing_matrix;
use crate::streams::{self, Stream};
use crate::{Complex, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RipReport {
    pub tested: usize,
    pub min_singular: f64,
    pub tol: f64,
    /// Every tested submatrix had its smallest singular value above `tol`.
    pub pass: bool,
    /// Column subset that attained `min_singular`.
    pub worst_columns: Vec<usize>,
}

/// Smallest singular value of a complex matrix, via its real embedding
/// `[[Re, −Im], [Im, Re]]` whose spectrum repeats each singular value twice.
pub fn smallest_singular_value(
    rows: usize,
    cols: usize,
    entry: impl Fn(usize, usize) -> Complex,
) -> f64 {
    let embed = DMatrix::from_fn(2 * rows, 2 * cols, |r, c| {
        let v = entry(r % rows, c % cols);
        match (r < rows, c < cols) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    embed
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Full-rank check of the `M × K` column submatrices of `Ψ = A_Φ F`.
///
/// Covers every subset when there are at most `trials` of them, otherwise
/// draws `trials` subsets from the rip stream of `seed`.
pub fn rip_rank_check(
    pattern: &SamplingPattern,
    k: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<RipReport> {
    let (n, m) = (pattern.n(), pattern.m());
    if k == 0 || k >= m || trials == 0 {
        return Err(Error::config(format!(
            "rank check needs 0 < K < M = {m} and trials > 0"
        )));
    }
    let psi = build_sensing_matrix(pattern).psi;
    let mut report = RipReport {
        tested: 0,
        min_singular: f64::INFINITY,
        tol,
        pass: true,
        worst_columns: Vec::new(),
    };
    let mut check = |cols: &[usize]| {
        let s = smallest_singular_value(m, cols.len(), |r, c| psi[[r, cols[c]]]);
        report.tested += 1;
        if s < report.min_singular {
            report.min_singular = s;
            report.worst_columns = cols.to_vec();
        }
    };
    if binomial_at_most(n, k, trials) {
        let mut cols: Vec<usize> = (0..k).collect();
        loop {
            check(&cols);
            if !next_combination(&mut cols, n) {
                break;
            }
        }
    } else {
        let mut rng = streams::stream(seed, Stream::Rip);
        for _ in 0..trials {
            let mut cols = sample(&mut rng, n, k).into_vec();
            cols.sort_unstable();
            check(&cols);
        }
    }
    report.pass = report.min_singular > tol;
    Ok(report)
}

fn binomial_at_most(n: usize, k: usize, limit: usize) -> bool {
    let mut c: u128 = 1;
    for i in 0..k.min(n - k) {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > limit as u128 {
            return false;
        }
    }
    true
}

/// Advances `cols` to the next sorted subset of `0..n` in lexicographic order.
fn next_combination(cols: &mut [usize], n: usize) -> bool {
    let k = cols.len();
    for i in (0..k).rev() {
        if cols[i] < n - k + i {
            cols[i] += 1;
            for j in i + 1..k {
                cols[j] = cols[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dps::{random_pattern, uniform_pattern};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aliased_columns_of_uniform_pattern_are_singular() {
        let p = uniform_pattern(128, 32).unwrap();
        let psi = build_sensing_matrix(&p).psi;
        for r in 0..32 {
            assert!((psi[[r, 0]] - psi[[r, 32]]).norm() < 1e-12);
        }
        let s = smallest_singular_value(32, 2, |r, c| psi[[r, [0, 32][c]]]);
        assert!(s < 1e-10, "{s}");
        let report = rip_rank_check(&p, 5, 10_000, 1e-6, 0).unwrap();
        assert!(!report.pass);
        assert_eq!(report.tested, 10_000);
        let w = &report.worst_columns;
        assert!(w
            .iter()
            .enumerate()
            .any(|(i, a)| w[i + 1..].iter().any(|b| (b - a) % 32 == 0)));
    }

    #[test]
    fn random_pattern_is_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_pattern(128, 32, &mut rng).unwrap();
        let report = rip_rank_check(&p, 5, 2000, 1e-6, 4).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.min_singular <= 1.0 + 1e-12);
    }

    #[test]
    fn random_pattern_exhaustive_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_pattern(32, 16, &mut rng).unwrap();
        let report = rip_rank_check(&p, 3, 5000, 1e-6, 0).unwrap();
        assert_eq!(report.tested, 4960);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn single_columns_have_unit_norm() {
        let p = uniform_pattern(128, 32).unwrap();
        let report = rip_rank_check(&p, 1, 1000, 1e-6, 0).unwrap();
        assert_eq!(report.tested, 128);
        assert!(report.pass);
        assert!((report.min_singular - (32.0f64 / 128.0).sqrt()).abs() < 1e-12);
        assert!(rip_rank_check(&p, 32, 10, 1e-6, 0).is_err());
    }

    #[test]
    fn exhaustive_when_small() {
        let p = SamplingPattern::new(vec![0, 1, 2, 3], 8).unwrap();
        let report = rip_rank_check(&p, 3, 1000, 1e-6, 0).unwrap();
        assert_eq!(report.tested, 56);
        let again = rip_rank_check(&p, 3, 1000, 1e-6, 99).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn singular_value_matches_closed_form() {
        // orthonormal columns scaled by 3 and 0.5
        let s = smallest_singular_value(2, 2, |r, c| {
            let scale = [3.0, 0.5][c];
            if r == c {
                Complex::new(0.0, scale)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut cols = vec![0, 1];
        let mut seen = vec![cols.clone()];
        while next_combination(&mut cols, 4) {
            seen.push(cols.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert!(binomial_at_most(8, 3, 56));
        assert!(!binomial_at_most(128, 5, 10_000));
    }
}
