//! Parity-construction simulation cohorts and their exact population
//! oracles.
//!
//! An X-subject is a matrix of independent equiprobable +/-1 draws. A
//! Y-subject draws hidden X variables per sample column and emits the cyclic
//! pairwise products `[X1*X2, X2*X3, ..., Xm*X1]`, so every column's row
//! product is +1. With the default m = 3 this is exactly
//! `[X1*X2, X2*X3, X3*X1]`: pairwise correlations vanish while the
//! three-way total correlation is ln 2, which is what separates hypergraph
//! features from graph features downstream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::core::TimeSeriesMatrix;
use crate::error::{Error, Result};
use crate::estimators::enumerate_total_correlation;

/// Which population a subject was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubjectLabel {
    X,
    Y,
}

impl std::fmt::Display for SubjectLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubjectLabel::X => f.write_str("X"),
            SubjectLabel::Y => f.write_str("Y"),
        }
    }
}

/// One generated subject with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSubject {
    pub ts: TimeSeriesMatrix,
    pub label: SubjectLabel,
    /// Seed of this subject's private random stream.
    pub seed: u64,
}

/// A labeled simulation cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub subjects: Vec<SimSubject>,
    pub samples_per_subject: usize,
    pub seed: u64,
}

/// Seed for subject `index`'s private stream. Depends only on
/// `(seed, index)`, so regenerating any subject is independent of
/// generation order and parallelism.
pub fn subject_seed(seed: u64, index: u64) -> u64 {
    crate::seeding::derive(seed, index)
}

/// Private random stream for one subject.
pub fn subject_stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subject_seed(seed, index))
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.next_u64() & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Independent equiprobable +/-1 matrix, `m` variables by `n` samples,
/// drawn column by column.
pub fn gen_x_subject_m(rng: &mut ChaCha8Rng, m: usize, n: usize) -> TimeSeriesMatrix {
    assert!(m >= 1 && n >= 1, "subject dimensions must be positive");
    let mut values = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            values[i * n + j] = rademacher(rng);
        }
    }
    TimeSeriesMatrix::new(m, n, values, None).expect("generated values are finite")
}

/// Cyclic-product parity subject: per column, hidden X variables are drawn
/// and row i emits `X_i * X_(i+1 mod m)`.
pub fn gen_y_subject_m(rng: &mut ChaCha8Rng, m: usize, n: usize) -> TimeSeriesMatrix {
    assert!(m >= 2 && n >= 1, "parity subjects need at least 2 variables");
    let mut hidden = vec![0.0; m];
    let mut values = vec![0.0; m * n];
    for j in 0..n {
        for h in hidden.iter_mut() {
            *h = rademacher(rng);
        }
        for i in 0..m {
            values[i * n + j] = hidden[i] * hidden[(i + 1) % m];
        }
    }
    TimeSeriesMatrix::new(m, n, values, None).expect("generated values are finite")
}

/// The paper's three-variable X-subject.
pub fn gen_x_subject(rng: &mut ChaCha8Rng, n: usize) -> TimeSeriesMatrix {
    gen_x_subject_m(rng, 3, n)
}

/// The paper's three-variable Y-subject `[X1*X2, X2*X3, X3*X1]`.
pub fn gen_y_subject(rng: &mut ChaCha8Rng, n: usize) -> TimeSeriesMatrix {
    gen_y_subject_m(rng, 3, n)
}

/// Generate a labeled cohort: `nx` X-subjects followed by `ny` Y-subjects,
/// each with its own stream derived from `(seed, subject index)`.
pub fn gen_dataset_m(nx: usize, ny: usize, m: usize, n: usize, seed: u64) -> Result<SimDataset> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if m < 2 {
        return Err(Error::InsufficientVariables { needed: 2, got: m });
    }
    let mut subjects = Vec::with_capacity(nx + ny);
    for k in 0..nx + ny {
        let sseed = subject_seed(seed, k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(sseed);
        let (ts, label) = if k < nx {
            (gen_x_subject_m(&mut rng, m, n), SubjectLabel::X)
        } else {
            (gen_y_subject_m(&mut rng, m, n), SubjectLabel::Y)
        };
        subjects.push(SimSubject {
            ts,
            label,
            seed: sseed,
        });
    }
    Ok(SimDataset {
        subjects,
        samples_per_subject: n,
        seed,
    })
}

/// Three-variable cohort matching the paper's simulation-study setup.
pub fn gen_dataset(nx: usize, ny: usize, n: usize, seed: u64) -> Result<SimDataset> {
    gen_dataset_m(nx, ny, 3, n, seed)
}

/// All eight equiprobable hidden-X outcomes mapped to Y triples.
fn y_population() -> Vec<(Vec<f64>, f64)> {
    let mut pmf: Vec<(Vec<f64>, f64)> = Vec::new();
    for bits in 0..8u32 {
        let x: Vec<f64> = (0..3)
            .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let y = vec![x[0] * x[1], x[1] * x[2], x[2] * x[0]];
        match pmf.iter_mut().find(|(t, _)| *t == y) {
            Some((_, p)) => *p += 0.125,
            None => pmf.push((y, 0.125)),
        }
    }
    pmf
}

/// Exact population Pearson correlation of any distinct Y pair, by
/// enumeration of the eight hidden outcomes. Returns 0 exactly.
pub fn oracle_pairwise_corr_y(i: usize, j: usize) -> f64 {
    assert!(i < 3 && j < 3);
    let pmf = y_population();
    // Marginal variances are exactly 1, so the correlation is E[Yi * Yj].
    pmf.iter().map(|(t, p)| t[i] * t[j] * p).sum()
}

/// Exact population total correlation C(Y1, Y2, Y3) by enumeration:
/// ln 2, positive.
pub fn oracle_total_corr_y() -> f64 {
    enumerate_total_correlation(&y_population()).expect("population pmf is valid")
}

/// The same enumeration for independent X variables: exactly 0.
pub fn oracle_total_corr_x() -> f64 {
    let mut pmf = Vec::new();
    for bits in 0..8u32 {
        let x: Vec<f64> = (0..3)
            .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        pmf.push((x, 0.125));
    }
    enumerate_total_correlation(&pmf).expect("population pmf is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::pearson;
    use std::collections::BTreeMap;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn x_subject_values_and_determinism() {
        let mut a = subject_stream(42, 0);
        let mut b = subject_stream(42, 0);
        let s1 = gen_x_subject(&mut a, 50);
        let s2 = gen_x_subject(&mut b, 50);
        assert_eq!(s1, s2);
        assert!(s1
            .rows()
            .flatten()
            .all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn x_subject_row_means_concentrate() {
        let mut rng = subject_stream(7, 3);
        let s = gen_x_subject(&mut rng, 100_000);
        for i in 0..3 {
            let mean: f64 = s.row(i).iter().sum::<f64>() / s.n() as f64;
            assert!(mean.abs() < 0.02, "row {i} mean {mean}");
        }
    }

    #[test]
    fn y_subject_parity_holds_everywhere() {
        let mut rng = subject_stream(11, 5);
        let s = gen_y_subject(&mut rng, 10_000);
        for j in 0..s.n() {
            let product: f64 = (0..3).map(|i| s.get(i, j)).product();
            assert_eq!(product, 1.0);
        }
    }

    #[test]
    fn y_subject_rows_look_independent_pairwise() {
        let mut rng = subject_stream(13, 8);
        let s = gen_y_subject(&mut rng, 100_000);
        for i in 0..3 {
            let mean: f64 = s.row(i).iter().sum::<f64>() / s.n() as f64;
            assert!(mean.abs() < 0.02, "row {i} mean {mean}");
            for j in 0..i {
                let r = pearson(s.row(i), s.row(j)).unwrap();
                assert!(r.abs() < 0.02, "pair ({i},{j}) correlation {r}");
            }
        }
    }

    #[test]
    fn y_empirical_pmf_matches_population() {
        let mut rng = subject_stream(17, 21);
        let s = gen_y_subject(&mut rng, 1_000_000);
        let mut counts: BTreeMap<[i8; 3], usize> = BTreeMap::new();
        for j in 0..s.n() {
            let key = [s.get(0, j) as i8, s.get(1, j) as i8, s.get(2, j) as i8];
            *counts.entry(key).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 4, "illegal triples observed: {counts:?}");
        for (key, c) in counts {
            let freq = c as f64 / s.n() as f64;
            assert!((freq - 0.25).abs() < 0.005, "{key:?} at {freq}");
            assert_eq!(key.iter().map(|&v| v as i64).product::<i64>(), 1);
        }
    }

    #[test]
    fn dataset_layout_and_determinism() {
        let a = gen_dataset(3, 2, 20, 99).unwrap();
        let b = gen_dataset(3, 2, 20, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subjects.len(), 5);
        assert_eq!(
            a.subjects.iter().filter(|s| s.label == SubjectLabel::X).count(),
            3
        );
        // Subject streams do not depend on how many subjects came before.
        let solo = gen_dataset(0, 1, 20, 99);
        assert!(solo.unwrap().subjects[0].label == SubjectLabel::Y);
        let mut rng = subject_stream(99, 3);
        assert_eq!(a.subjects[3].ts, gen_y_subject(&mut rng, 20));

        assert!(gen_dataset(1, 1, 0, 0).is_err());
    }

    #[test]
    fn generalized_parity_construction() {
        let mut rng = subject_stream(3, 0);
        let s = gen_y_subject_m(&mut rng, 61, 20);
        assert_eq!(s.m(), 61);
        for j in 0..s.n() {
            let product: f64 = (0..61).map(|i| s.get(i, j)).product();
            assert_eq!(product, 1.0);
        }
    }

    #[test]
    fn oracles_are_exact() {
        assert_eq!(oracle_pairwise_corr_y(0, 1), 0.0);
        assert_eq!(oracle_pairwise_corr_y(1, 2), 0.0);
        assert_eq!(oracle_pairwise_corr_y(0, 2), 0.0);
        assert_eq!(oracle_pairwise_corr_y(1, 1), 1.0);
        assert!((oracle_total_corr_y() - LN2).abs() < 1e-12);
        assert!(oracle_total_corr_y() > 0.0);
        assert_eq!(oracle_total_corr_x(), 0.0);
    }
}
