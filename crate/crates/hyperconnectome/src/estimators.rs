//! Correlation and information-theoretic estimators.
//!
//! Two families live here. The exact plug-in estimators
//! ([`entropy_exact`], [`joint_entropy_exact`], [`total_correlation_exact`],
//! [`total_correlation_kl_exact`]) operate on the empirical distribution of
//! observed values and satisfy the algebraic identity
//! `sum of marginal entropies - joint entropy = sum p log(p / prod marginals)`.
//! The epsilon-ball estimators ([`alg1_total_correlation`]) approximate each
//! probability by the fraction of samples within distance epsilon and fill a
//! [`SymmetricTensor`] with one total-correlation weight per non-decreasing
//! variable tuple.
//!
//! All entropies are in nats.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{tuple_count, tuple_unrank, ConnectomeMatrix, SymmetricTensor, TimeSeriesMatrix};
use crate::error::{Error, Result};

/// Which normalization the epsilon-ball tensor sweep uses.
///
/// `PaperTupleSum` sums a term for every tuple of sample indices, so each
/// distinct value cell is weighted by its sample multiplicity.
/// `DistinctCellPlugin` visits each distinct aligned value cell once.
/// `AlignedResubstitution` averages the log-ratio over the N aligned samples
/// only, making it O(N^2) per tuple instead of O(N^(d+1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorVariant {
    #[serde(rename = "paper")]
    PaperTupleSum,
    #[serde(rename = "plugin")]
    DistinctCellPlugin,
    #[serde(rename = "aligned")]
    AlignedResubstitution,
}

impl fmt::Display for EstimatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorVariant::PaperTupleSum => "paper",
            EstimatorVariant::DistinctCellPlugin => "plugin",
            EstimatorVariant::AlignedResubstitution => "aligned",
        };
        f.write_str(s)
    }
}

impl FromStr for EstimatorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(EstimatorVariant::PaperTupleSum),
            "plugin" => Ok(EstimatorVariant::DistinctCellPlugin),
            "aligned" => Ok(EstimatorVariant::AlignedResubstitution),
            other => Err(Error::contract(format!(
                "unknown estimator variant {other:?}; expected paper, plugin, or aligned"
            ))),
        }
    }
}

/// Positive epsilon-ball radius, in measurement units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsilonThreshold(f64);

impl EpsilonThreshold {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::contract(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        Ok(EpsilonThreshold(epsilon))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Total order on finite f64 values for deterministic counting maps.
/// Negative zero is folded into positive zero; NaN never reaches this
/// (inputs are validated finite upstream).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct FloatKey(u64);

impl FloatKey {
    fn new(x: f64) -> Self {
        let x = if x == 0.0 { 0.0 } else { x };
        let bits = x.to_bits();
        // Monotone map to u64 so Ord matches numeric order.
        let key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        FloatKey(key)
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "pearson inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson correlation matrix over all variable pairs of a subject.
///
/// Pairs involving a zero-variance variable get correlation 0 (with a
/// logged warning) rather than failing the whole subject.
pub fn connectome(ts: &TimeSeriesMatrix) -> Result<ConnectomeMatrix> {
    let m = ts.m();
    if ts.n() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: ts.n(),
        });
    }
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        entries[i * m + i] = 1.0;
        for j in 0..i {
            let r = match pearson(ts.row(i), ts.row(j)) {
                Ok(r) => r.clamp(-1.0, 1.0),
                Err(Error::DegenerateVariance) => {
                    log::warn!("zero-variance pair ({i}, {j}); correlation set to 0");
                    0.0
                }
                Err(e) => return Err(e),
            };
            entries[i * m + j] = r;
            entries[j * m + i] = r;
        }
    }
    ConnectomeMatrix::new(m, entries)
}

fn value_counts(x: &[f64]) -> BTreeMap<FloatKey, usize> {
    let mut counts = BTreeMap::new();
    for &v in x {
        *counts.entry(FloatKey::new(v)).or_insert(0) += 1;
    }
    counts
}

/// Plug-in entropy of the empirical distribution of observed values, in nats.
pub fn entropy_exact(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    value_counts(x)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn check_aligned(rows: &[&[f64]]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::contract("joint entropy needs at least one variable"));
    };
    let n = first.len();
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::contract("rows have mismatched sample counts"));
    }
    Ok(n)
}

fn joint_counts(rows: &[&[f64]], n: usize) -> BTreeMap<Vec<FloatKey>, usize> {
    let mut counts = BTreeMap::new();
    for j in 0..n {
        let key: Vec<FloatKey> = rows.iter().map(|r| FloatKey::new(r[j])).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Plug-in entropy of the empirical distribution of aligned value tuples.
pub fn joint_entropy_exact(rows: &[&[f64]]) -> Result<f64> {
    let n = check_aligned(rows)?;
    let nf = n as f64;
    Ok(joint_counts(rows, n)
        .values()
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum())
}

/// Plug-in total correlation: sum of marginal entropies minus joint entropy.
pub fn total_correlation_exact(rows: &[&[f64]]) -> Result<f64> {
    let joint = joint_entropy_exact(rows)?;
    let marginals: f64 = rows.iter().map(|r| entropy_exact(r)).sum();
    Ok(marginals - joint)
}

/// Plug-in total correlation in Kullback-Leibler form: the sum over distinct
/// observed aligned tuples of `p log(p / prod marginals)`. Numerically equal
/// to [`total_correlation_exact`].
pub fn total_correlation_kl_exact(rows: &[&[f64]]) -> Result<f64> {
    let n = check_aligned(rows)?;
    let nf = n as f64;
    let marginal_maps: Vec<BTreeMap<FloatKey, usize>> =
        rows.iter().map(|r| value_counts(r)).collect();
    let mut acc = 0.0;
    for (key, &c) in &joint_counts(rows, n) {
        let p = c as f64 / nf;
        let mut prod = 1.0;
        for (k, fk) in key.iter().enumerate() {
            prod *= marginal_maps[k][fk] as f64 / nf;
        }
        acc += p * (p / prod).ln();
    }
    Ok(acc)
}

/// Brute-force total correlation of an explicit finite joint distribution,
/// given as `(value tuple, probability)` pairs. Testing oracle for the
/// KL-form identity and the simulation-study separation claims.
pub fn enumerate_total_correlation(pmf: &[(Vec<f64>, f64)]) -> Result<f64> {
    if pmf.is_empty() {
        return Err(Error::contract("pmf is empty"));
    }
    let arity = pmf[0].0.len();
    if arity == 0 {
        return Err(Error::contract("pmf tuples are empty"));
    }
    let mut total = 0.0;
    let mut seen = BTreeMap::new();
    for (tuple, p) in pmf {
        if tuple.len() != arity {
            return Err(Error::contract("pmf tuples have mixed arities"));
        }
        if !(p.is_finite() && *p >= 0.0) {
            return Err(Error::contract(format!("invalid probability {p}")));
        }
        let key: Vec<FloatKey> = tuple.iter().map(|&v| FloatKey::new(v)).collect();
        if seen.insert(key, *p).is_some() {
            return Err(Error::contract(format!("duplicate pmf tuple {tuple:?}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::contract(format!(
            "pmf probabilities sum to {total}, not 1"
        )));
    }
    let mut marginals: Vec<BTreeMap<FloatKey, f64>> = vec![BTreeMap::new(); arity];
    for (key, &p) in &seen {
        for (k, fk) in key.iter().enumerate() {
            *marginals[k].entry(*fk).or_insert(0.0) += p;
        }
    }
    let mut acc = 0.0;
    for (key, &p) in &seen {
        if p == 0.0 {
            continue;
        }
        let mut prod = 1.0;
        for (k, fk) in key.iter().enumerate() {
            prod *= marginals[k][fk];
        }
        acc += p * (p / prod).ln();
    }
    Ok(acc)
}

/// Closed-form total correlation of a zero-mean Gaussian with correlation
/// matrix `r`: `-0.5 * ln det(r)`. Testing oracle for convergence checks of
/// the epsilon-ball estimators on continuous data.
pub fn gaussian_tc_closed_form(r: &ConnectomeMatrix) -> Result<f64> {
    let m = r.m();
    for i in 0..m {
        for j in 0..i {
            if r.get(i, j).abs() >= 1.0 - 1e-9 {
                return Err(Error::contract(format!(
                    "correlation ({i},{j}) = {} is at the singular limit",
                    r.get(i, j)
                )));
            }
        }
    }
    // Cholesky factorization; ln det(R) = 2 * sum ln L_ii.
    let mut l = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = r.get(i, j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::contract(
                        "correlation matrix is not positive definite",
                    ));
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let half_log_det: f64 = (0..m).map(|i| l[i * m + i].ln()).sum();
    Ok(-half_log_det)
}

/// A run of samples of one variable that share the same epsilon-ball
/// membership pattern (paper variant) or the same value (plugin variant).
struct CellGroup {
    /// Representative sample index; the mask and marginal count of the
    /// whole group are those of this sample.
    sample: usize,
    /// Ball occupancy of the representative sample.
    count: u32,
    /// How many sample-index choices this group stands for. 1 for the
    /// plugin variant.
    mult: f64,
}

/// Precomputed epsilon-ball structure for one subject: per-sample membership
/// bitmasks, their popcounts, a log-probability table, and the per-variable
/// cell groups the cross-product sweep iterates.
struct BallTables {
    n: usize,
    nblocks: usize,
    /// m * n masks of nblocks words each, variable-major.
    masks: Vec<u64>,
    /// Popcount of each mask, m * n.
    marg_count: Vec<u32>,
    /// ln(c / n) for c in 0..=n; index 0 is unused.
    ln_table: Vec<f64>,
    /// Content-derived ordering rank per variable. Accumulation order inside
    /// an entry follows this rank, so relabeling variables cannot change the
    /// floating-point result.
    canon: Vec<usize>,
    /// Per-variable cell groups, in first-occurrence order. Empty for the
    /// aligned variant, which iterates samples directly.
    groups: Vec<Vec<CellGroup>>,
}

impl BallTables {
    fn build(ts: &TimeSeriesMatrix, epsilon: f64, variant: EstimatorVariant) -> Self {
        let m = ts.m();
        let n = ts.n();
        let nblocks = n.div_ceil(64);
        let mut masks = vec![0u64; m * n * nblocks];
        let mut marg_count = vec![0u32; m * n];
        for i in 0..m {
            let row = ts.row(i);
            for s in 0..n {
                let base = (i * n + s) * nblocks;
                let center = row[s];
                let mut c = 0u32;
                for (j, &v) in row.iter().enumerate() {
                    if (v - center).abs() < epsilon {
                        masks[base + j / 64] |= 1u64 << (j % 64);
                        c += 1;
                    }
                }
                marg_count[i * n + s] = c;
            }
        }

        let ln_table: Vec<f64> = (0..=n).map(|c| (c as f64 / n as f64).ln()).collect();

        // Rank variables by their mask sequences. Variables with identical
        // sequences are numerically interchangeable, so the index tiebreak
        // of the stable sort is harmless.
        let key = |i: usize| &masks[i * n * nblocks..(i + 1) * n * nblocks];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| key(a).cmp(key(b)));
        let mut canon = vec![0usize; m];
        for (rank, &i) in order.iter().enumerate() {
            canon[i] = rank;
        }

        let groups = match variant {
            EstimatorVariant::AlignedResubstitution => Vec::new(),
            EstimatorVariant::PaperTupleSum => (0..m)
                .map(|i| {
                    let mut seen: BTreeMap<&[u64], usize> = BTreeMap::new();
                    let mut list: Vec<CellGroup> = Vec::new();
                    for s in 0..n {
                        let mask = &masks[(i * n + s) * nblocks..(i * n + s + 1) * nblocks];
                        match seen.get(mask) {
                            Some(&g) => list[g].mult += 1.0,
                            None => {
                                seen.insert(mask, list.len());
                                list.push(CellGroup {
                                    sample: s,
                                    count: marg_count[i * n + s],
                                    mult: 1.0,
                                });
                            }
                        }
                    }
                    list
                })
                .collect(),
            EstimatorVariant::DistinctCellPlugin => (0..m)
                .map(|i| {
                    let row = ts.row(i);
                    let mut seen = BTreeMap::new();
                    let mut list = Vec::new();
                    for s in 0..n {
                        if seen.insert(FloatKey::new(row[s]), ()).is_none() {
                            list.push(CellGroup {
                                sample: s,
                                count: marg_count[i * n + s],
                                mult: 1.0,
                            });
                        }
                    }
                    list
                })
                .collect(),
        };

        BallTables {
            n,
            nblocks,
            masks,
            marg_count,
            ln_table,
            canon,
            groups,
        }
    }

    fn mask(&self, var: usize, sample: usize) -> &[u64] {
        let base = (var * self.n + sample) * self.nblocks;
        &self.masks[base..base + self.nblocks]
    }

    /// Total-correlation weight for one sorted variable tuple.
    fn entry(&self, tuple: &[usize], variant: EstimatorVariant, scratch: &mut Scratch) -> f64 {
        scratch.vars.clear();
        scratch.vars.extend_from_slice(tuple);
        scratch.vars.sort_by_key(|&v| self.canon[v]);
        match variant {
            EstimatorVariant::AlignedResubstitution => self.aligned_entry(scratch),
            _ => {
                let Scratch { vars, stack, .. } = scratch;
                let mut acc = 0.0;
                self.cross_product(vars, 0, 0.0, 1.0, stack, &mut acc);
                acc
            }
        }
    }

    /// Recursive sweep over the cell groups of each tuple position. The mask
    /// stack holds the running intersection; subtrees whose intersection is
    /// already empty contribute nothing and are pruned.
    fn cross_product(
        &self,
        vars: &[usize],
        depth: usize,
        margsum: f64,
        mult: f64,
        stack: &mut [u64],
        acc: &mut f64,
    ) {
        let nb = self.nblocks;
        let nf = self.n as f64;
        let last = depth + 1 == vars.len();
        for group in &self.groups[vars[depth]] {
            let gmask = self.mask(vars[depth], group.sample);
            if last {
                let joint: u32 = if depth == 0 {
                    group.count
                } else {
                    let prefix = &stack[(depth - 1) * nb..depth * nb];
                    prefix
                        .iter()
                        .zip(gmask)
                        .map(|(a, b)| (a & b).count_ones())
                        .sum()
                };
                if joint > 0 {
                    let total_margsum = margsum + self.ln_table[group.count as usize];
                    let p = joint as f64 / nf;
                    *acc += mult
                        * group.mult
                        * p
                        * (self.ln_table[joint as usize] - total_margsum);
                }
            } else {
                let (done, rest) = stack.split_at_mut(depth * nb);
                let slot = &mut rest[..nb];
                let mut any = false;
                if depth == 0 {
                    slot.copy_from_slice(gmask);
                    any = true;
                } else {
                    let prefix = &done[(depth - 1) * nb..];
                    for b in 0..nb {
                        slot[b] = prefix[b] & gmask[b];
                        any |= slot[b] != 0;
                    }
                }
                if any {
                    self.cross_product(
                        vars,
                        depth + 1,
                        margsum + self.ln_table[group.count as usize],
                        mult * group.mult,
                        stack,
                        acc,
                    );
                }
            }
        }
    }

    /// Average log-ratio over aligned sample columns. Every joint count is
    /// at least 1 because each sample lies in its own ball.
    fn aligned_entry(&self, scratch: &mut Scratch) -> f64 {
        let nb = self.nblocks;
        let nf = self.n as f64;
        let mut acc = 0.0;
        for j in 0..self.n {
            let mut margsum = 0.0;
            scratch.join[..nb].fill(u64::MAX);
            for &var in &scratch.vars {
                let mask = self.mask(var, j);
                for b in 0..nb {
                    scratch.join[b] &= mask[b];
                }
                margsum += self.ln_table[self.marg_count[var * self.n + j] as usize];
            }
            let joint: u32 = scratch.join[..nb].iter().map(|w| w.count_ones()).sum();
            acc += self.ln_table[joint as usize] - margsum;
        }
        acc / nf
    }
}

struct Scratch {
    vars: Vec<usize>,
    stack: Vec<u64>,
    join: Vec<u64>,
}

impl Scratch {
    fn new(d: usize, nblocks: usize) -> Self {
        Scratch {
            vars: Vec::with_capacity(d),
            stack: vec![0; d * nblocks],
            join: vec![0; nblocks],
        }
    }
}

/// Epsilon-ball total-correlation tensor over all non-decreasing d-tuples
/// of variables.
///
/// The sweep is partitioned across worker threads by tuple rank; each entry
/// is accumulated sequentially in an order fixed by the subject's data, so
/// the output is bit-identical at any parallelism level.
pub fn alg1_total_correlation(
    ts: &TimeSeriesMatrix,
    d: usize,
    epsilon: EpsilonThreshold,
    variant: EstimatorVariant,
) -> Result<SymmetricTensor> {
    if d < 2 {
        return Err(Error::contract(format!("tensor order must be >= 2, got {d}")));
    }
    let m = ts.m();
    let tables = BallTables::build(ts, epsilon.value(), variant);
    let count = tuple_count(m, d);
    let weights: Vec<f64> = (0..count)
        .into_par_iter()
        .map_init(
            || Scratch::new(d, tables.nblocks),
            |scratch, rank| {
                let tuple = tuple_unrank(rank, m, d).expect("rank in range");
                tables.entry(&tuple, variant, scratch)
            },
        )
        .collect();
    SymmetricTensor::from_weights(m, d, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::next_tuple;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn ts(rows: Vec<Vec<f64>>) -> TimeSeriesMatrix {
        TimeSeriesMatrix::from_rows(rows, None).unwrap()
    }

    fn eps(e: f64) -> EpsilonThreshold {
        EpsilonThreshold::new(e).unwrap()
    }

    /// The four legal parity triples, one sample column each.
    fn y_exact_rows() -> Vec<Vec<f64>> {
        vec![
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ]
    }

    #[test]
    fn pearson_perfect_correlations() {
        let x = [1.0, 2.0, 3.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_case() {
        // Sample formula evaluated by hand: r = 3 / sqrt(2 * 14/3).
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.9819805060619659).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            pearson(&[1.0], &[2.0]),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn connectome_basics() {
        let one = connectome(&ts(vec![vec![1.0, 2.0]])).unwrap();
        assert_eq!(one.m(), 1);
        assert_eq!(one.get(0, 0), 1.0);

        let dup = connectome(&ts(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]])).unwrap();
        assert!((dup.get(0, 1) - 1.0).abs() < 1e-12);

        let flat = connectome(&ts(vec![vec![1.0, 1.0], vec![1.0, 2.0]])).unwrap();
        assert_eq!(flat.get(0, 1), 0.0);

        assert!(matches!(
            connectome(&ts(vec![vec![1.0]])),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy_exact(&[3.0, 3.0, 3.0]), 0.0);
        assert!((entropy_exact(&[-1.0, 1.0]) - LN2).abs() < 1e-12);
        assert!((entropy_exact(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn joint_entropy_cases() {
        let x = [1.0, 2.0, 1.0, 2.0];
        assert_eq!(joint_entropy_exact(&[&x]).unwrap(), entropy_exact(&x));
        assert_eq!(joint_entropy_exact(&[&x, &x]).unwrap(), entropy_exact(&x));

        let rows = y_exact_rows();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!((joint_entropy_exact(&refs).unwrap() - 4f64.ln()).abs() < 1e-12);

        assert!(joint_entropy_exact(&[&x, &x[..2]]).is_err());
        assert!(joint_entropy_exact(&[]).is_err());
    }

    #[test]
    fn total_correlation_cases() {
        assert_eq!(total_correlation_exact(&[&[1.0, 2.0, 3.0]]).unwrap(), 0.0);

        // Independent fair coins, all four combinations once.
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0];
        assert!(total_correlation_exact(&[&a, &b]).unwrap().abs() < 1e-12);

        let rows = y_exact_rows();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!((total_correlation_exact(&refs).unwrap() - LN2).abs() < 1e-12);
        assert!((total_correlation_kl_exact(&refs).unwrap() - LN2).abs() < 1e-12);
    }

    fn random_rows(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=24);
        (0..k)
            .map(|_| {
                let support = rng.gen_range(1..=4);
                (0..n).map(|_| rng.gen_range(0..support) as f64).collect()
            })
            .collect()
    }

    #[test]
    fn kl_identity_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let rows = random_rows(&mut rng);
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let direct = total_correlation_exact(&refs).unwrap();
            let kl = total_correlation_kl_exact(&refs).unwrap();
            assert!(
                (direct - kl).abs() < 1e-10,
                "difference {} on rows {rows:?}",
                direct - kl
            );
        }
    }

    #[test]
    fn plugin_total_correlation_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let rows = random_rows(&mut rng);
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            assert!(total_correlation_exact(&refs).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn enumerate_cases() {
        // Product of two fair coins.
        let product: Vec<(Vec<f64>, f64)> = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
            .iter()
            .map(|&(a, b)| (vec![a, b], 0.25))
            .collect();
        assert!(enumerate_total_correlation(&product).unwrap().abs() < 1e-15);

        // Fully coupled bit.
        let coupled = vec![(vec![0.0, 0.0], 0.5), (vec![1.0, 1.0], 0.5)];
        assert!((enumerate_total_correlation(&coupled).unwrap() - LN2).abs() < 1e-15);

        // Parity triples at probability 1/4 each.
        let y: Vec<(Vec<f64>, f64)> = vec![
            (vec![1.0, 1.0, 1.0], 0.25),
            (vec![1.0, -1.0, -1.0], 0.25),
            (vec![-1.0, 1.0, -1.0], 0.25),
            (vec![-1.0, -1.0, 1.0], 0.25),
        ];
        assert!((enumerate_total_correlation(&y).unwrap() - LN2).abs() < 1e-15);

        assert!(enumerate_total_correlation(&[(vec![0.0], 0.5)]).is_err());
        assert!(enumerate_total_correlation(&[(vec![0.0], 1.5), (vec![1.0], -0.5)]).is_err());
    }

    #[test]
    fn gaussian_closed_form() {
        let id = ConnectomeMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(gaussian_tc_closed_form(&id).unwrap(), 0.0);

        let half = ConnectomeMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let expected = -0.5 * 0.75f64.ln();
        assert!((gaussian_tc_closed_form(&half).unwrap() - expected).abs() < 1e-12);

        let near = 1.0 - 1e-10;
        let singular = ConnectomeMatrix::new(2, vec![1.0, near, near, 1.0]).unwrap();
        assert!(gaussian_tc_closed_form(&singular).is_err());
    }

    #[test]
    fn alg1_identical_rows_paper() {
        // Two identical rows [0, 1]: two of the four sample tuples contribute
        // (1/2) ln 2 each, the mixed tuples have empty joint balls.
        let t = alg1_total_correlation(
            &ts(vec![vec![0.0, 1.0], vec![0.0, 1.0]]),
            2,
            eps(0.5),
            EstimatorVariant::PaperTupleSum,
        )
        .unwrap();
        assert!((t.get(&[0, 1]).unwrap() - LN2).abs() < 1e-12);
    }

    #[test]
    fn alg1_independent_rows_all_variants() {
        let rows = vec![vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0, 1.0]];
        for variant in [
            EstimatorVariant::PaperTupleSum,
            EstimatorVariant::DistinctCellPlugin,
            EstimatorVariant::AlignedResubstitution,
        ] {
            let t = alg1_total_correlation(&ts(rows.clone()), 2, eps(0.5), variant).unwrap();
            assert!(
                t.get(&[0, 1]).unwrap().abs() < 1e-12,
                "variant {variant} not zero"
            );
        }
    }

    #[test]
    fn alg1_variant_normalizations_differ() {
        // Duplicated row [0, 0, 1, 1]: the paper sum counts each value cell
        // by its multiplicity (4), the normalized variants do not.
        let rows = vec![vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]];
        let cases = [
            (EstimatorVariant::PaperTupleSum, 4.0 * LN2),
            (EstimatorVariant::DistinctCellPlugin, LN2),
            (EstimatorVariant::AlignedResubstitution, LN2),
        ];
        for (variant, expected) in cases {
            let t = alg1_total_correlation(&ts(rows.clone()), 2, eps(0.5), variant).unwrap();
            assert!(
                (t.get(&[0, 1]).unwrap() - expected).abs() < 1e-12,
                "variant {variant}: got {}, expected {expected}",
                t.get(&[0, 1]).unwrap()
            );
        }
    }

    #[test]
    fn alg1_rejects_low_order() {
        let m = ts(vec![vec![0.0, 1.0]]);
        assert!(alg1_total_correlation(&m, 1, eps(0.5), EstimatorVariant::PaperTupleSum).is_err());
    }

    fn random_ts(rng: &mut ChaCha8Rng, m: usize, n: usize) -> TimeSeriesMatrix {
        ts((0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect())
    }

    #[test]
    fn alg1_permutation_symmetry_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for variant in [
            EstimatorVariant::PaperTupleSum,
            EstimatorVariant::DistinctCellPlugin,
            EstimatorVariant::AlignedResubstitution,
        ] {
            for _ in 0..5 {
                let m = 4;
                let base = random_ts(&mut rng, m, 8);
                let perm = [2usize, 0, 3, 1];
                let permuted = ts(perm.iter().map(|&i| base.row(i).to_vec()).collect());
                let t0 = alg1_total_correlation(&base, 3, eps(0.7), variant).unwrap();
                let t1 = alg1_total_correlation(&permuted, 3, eps(0.7), variant).unwrap();
                // inverse[original index] = index within the permuted matrix
                let mut inverse = [0usize; 4];
                for (new_i, &old_i) in perm.iter().enumerate() {
                    inverse[old_i] = new_i;
                }
                let mut tuple = vec![0usize; 3];
                loop {
                    let mapped: Vec<usize> = tuple.iter().map(|&i| inverse[i]).collect();
                    let a = t0.get(&tuple).unwrap();
                    let b = t1.get(&mapped).unwrap();
                    assert!(
                        a == b,
                        "variant {variant}: tuple {tuple:?} -> {mapped:?}: {a} != {b}"
                    );
                    if !next_tuple(&mut tuple, m) {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn alg1_shift_invariance_bitwise() {
        // Integer-valued data and an integer shift keep every epsilon-ball
        // membership decision exact, so outputs must agree bit for bit.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10).map(|_| rng.gen_range(-3..=3) as f64).collect())
            .collect();
        let mut shifted = rows.clone();
        for v in &mut shifted[1] {
            *v += 7.0;
        }
        for variant in [
            EstimatorVariant::PaperTupleSum,
            EstimatorVariant::DistinctCellPlugin,
            EstimatorVariant::AlignedResubstitution,
        ] {
            let a = alg1_total_correlation(&ts(rows.clone()), 2, eps(0.5), variant).unwrap();
            let b = alg1_total_correlation(&ts(shifted.clone()), 2, eps(0.5), variant).unwrap();
            assert_eq!(a.weights(), b.weights(), "variant {variant}");
        }
    }

    #[test]
    fn alg1_deterministic_across_worker_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let subject = random_ts(&mut rng, 6, 12);
        let reference = alg1_total_correlation(
            &subject,
            3,
            eps(0.3),
            EstimatorVariant::PaperTupleSum,
        )
        .unwrap();
        for workers in [1usize, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            let t = pool.install(|| {
                alg1_total_correlation(&subject, 3, eps(0.3), EstimatorVariant::PaperTupleSum)
                    .unwrap()
            });
            assert_eq!(t.weights(), reference.weights(), "{workers} workers");
        }
    }

    #[test]
    fn variant_string_roundtrip() {
        for v in [
            EstimatorVariant::PaperTupleSum,
            EstimatorVariant::DistinctCellPlugin,
            EstimatorVariant::AlignedResubstitution,
        ] {
            assert_eq!(v.to_string().parse::<EstimatorVariant>().unwrap(), v);
        }
        assert!("kernel".parse::<EstimatorVariant>().is_err());
        assert_eq!(serde_json::to_string(&EstimatorVariant::PaperTupleSum).unwrap(), "\"paper\"");
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_bounded(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..40);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!(a == b);
                prop_assert!(a.abs() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn epsilon_threshold_rejects_nonpositive(e in -10.0f64..=0.0) {
            prop_assert!(EpsilonThreshold::new(e).is_err());
        }
    }
}
