//! Foundational data types: time-series matrices, correlation matrices,
//! and compact symmetric-tensor storage with combinatorial tuple ranking.
//!
//! A symmetric order-`d` tensor over `m` variables is stored as one weight
//! per non-decreasing index tuple, `C(m+d-1, d)` entries in total, ranked
//! lexicographically. Tuples with repeated indices are stored like any
//! other; permutations of a tuple alias the same entry.

use crate::error::{Error, Result};

/// Binomial coefficient C(n, k) computed in u128 to avoid overflow at
/// the sizes this crate meets (m up to a few hundred, d up to 4).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Number of non-decreasing d-tuples over indices `[0, m)`.
pub fn tuple_count(m: usize, d: usize) -> usize {
    binomial(m + d - 1, d)
}

fn check_tuple(tuple: &[usize], m: usize, d: usize) -> Result<()> {
    if tuple.len() != d {
        return Err(Error::contract(format!(
            "tuple length {} does not match order {d}",
            tuple.len()
        )));
    }
    for w in tuple.windows(2) {
        if w[0] > w[1] {
            return Err(Error::contract(format!("tuple {tuple:?} is not sorted")));
        }
    }
    if let Some(&last) = tuple.last() {
        if last >= m {
            return Err(Error::contract(format!(
                "tuple {tuple:?} has index {last} out of range for m={m}"
            )));
        }
    }
    Ok(())
}

/// Lexicographic rank of a non-decreasing d-tuple among all such tuples
/// over `[0, m)`. Bijective onto `[0, C(m+d-1, d))`.
pub fn tuple_rank(tuple: &[usize], m: usize, d: usize) -> Result<usize> {
    check_tuple(tuple, m, d)?;
    let mut rank = 0usize;
    let mut lo = 0usize;
    for (k, &t) in tuple.iter().enumerate() {
        // Count tuples equal on the prefix with a smaller value at slot k:
        // each candidate v < t leaves a non-decreasing completion of the
        // remaining d-k-1 slots over [v, m).
        for v in lo..t {
            rank += binomial(m - v + d - k - 2, d - k - 1);
        }
        lo = t;
    }
    Ok(rank)
}

/// Inverse of [`tuple_rank`]: the non-decreasing d-tuple at `rank`.
pub fn tuple_unrank(rank: usize, m: usize, d: usize) -> Result<Vec<usize>> {
    let total = tuple_count(m, d);
    if rank >= total {
        return Err(Error::contract(format!(
            "rank {rank} out of range for m={m}, d={d} (count {total})"
        )));
    }
    let mut tuple = Vec::with_capacity(d);
    let mut remaining = rank;
    let mut lo = 0usize;
    for k in 0..d {
        let mut v = lo;
        loop {
            let block = binomial(m - v + d - k - 2, d - k - 1);
            if remaining < block {
                break;
            }
            remaining -= block;
            v += 1;
        }
        tuple.push(v);
        lo = v;
    }
    Ok(tuple)
}

/// Advance `tuple` to the next non-decreasing tuple in lexicographic
/// order. Returns false when `tuple` was the last one.
pub fn next_tuple(tuple: &mut [usize], m: usize) -> bool {
    for k in (0..tuple.len()).rev() {
        if tuple[k] + 1 < m {
            let v = tuple[k] + 1;
            for slot in &mut tuple[k..] {
                *slot = v;
            }
            return true;
        }
    }
    false
}

/// One subject's measurements: `m` variables observed over `n` samples,
/// stored row-major. Immutable after construction; all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl TimeSeriesMatrix {
    pub fn new(m: usize, n: usize, values: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::contract(format!(
                "time series must be non-empty, got {m}x{n}"
            )));
        }
        if values.len() != m * n {
            return Err(Error::contract(format!(
                "value buffer length {} does not match {m}x{n}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "time series contains non-finite value {bad}"
            )));
        }
        if let Some(ref labels) = labels {
            if labels.len() != m {
                return Err(Error::contract(format!(
                    "{} labels supplied for {m} variables",
                    labels.len()
                )));
            }
        }
        Ok(TimeSeriesMatrix {
            m,
            n,
            values,
            labels,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::contract("rows have unequal lengths"));
        }
        let values = rows.into_iter().flatten().collect();
        Self::new(m, n, values, labels)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Variable labels, substituting `ROI{i}` (1-based) when none were set.
    pub fn labels_or_default(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None => (1..=self.m).map(|i| format!("ROI{i}")).collect(),
        }
    }

    /// Restrict to a 1-based inclusive variable range and the first
    /// `samples_cap` samples.
    pub fn restrict(&self, roi: Option<(usize, usize)>, samples_cap: Option<usize>) -> Result<Self> {
        let (lo, hi) = roi.unwrap_or((1, self.m));
        if lo == 0 || lo > hi || hi > self.m {
            return Err(Error::contract(format!(
                "roi range {lo}:{hi} invalid for {} variables",
                self.m
            )));
        }
        let n = samples_cap.map_or(self.n, |cap| cap.min(self.n));
        if n == 0 {
            return Err(Error::contract("samples cap yields an empty selection"));
        }
        let rows: Vec<Vec<f64>> = (lo - 1..hi).map(|i| self.row(i)[..n].to_vec()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| l[lo - 1..hi].to_vec());
        Self::from_rows(rows, labels)
    }

    /// Swap the roles of variables and samples.
    pub fn transpose(&self) -> Result<Self> {
        let mut values = vec![0.0; self.m * self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                values[j * self.m + i] = self.get(i, j);
            }
        }
        Self::new(self.n, self.m, values, None)
    }
}

/// Symmetric m x m Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectomeMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl ConnectomeMatrix {
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(Error::contract(format!(
                "entry buffer length {} does not match {m}x{m}",
                entries.len()
            )));
        }
        for i in 0..m {
            if entries[i * m + i] != 1.0 {
                return Err(Error::contract(format!(
                    "diagonal entry ({i},{i}) is {} rather than 1",
                    entries[i * m + i]
                )));
            }
            for j in 0..i {
                let a = entries[i * m + j];
                let b = entries[j * m + i];
                if a != b {
                    return Err(Error::contract(format!(
                        "entries ({i},{j})={a} and ({j},{i})={b} are not symmetric"
                    )));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(Error::contract(format!(
                        "entry ({i},{j})={a} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(ConnectomeMatrix { m, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Compact symmetric tensor: one weight per non-decreasing d-tuple of
/// variable indices, addressed by tuple rank. Lookups accept a tuple in
/// any order and canonicalize by sorting.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    m: usize,
    d: usize,
    weights: Vec<f64>,
}

impl SymmetricTensor {
    pub fn zeros(m: usize, d: usize) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::contract(format!(
                "tensor dimensions must be positive, got m={m}, d={d}"
            )));
        }
        Ok(SymmetricTensor {
            m,
            d,
            weights: vec![0.0; tuple_count(m, d)],
        })
    }

    pub fn from_weights(m: usize, d: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = tuple_count(m, d);
        if weights.len() != expected {
            return Err(Error::contract(format!(
                "weight buffer length {} does not match C({}, {d}) = {expected}",
                weights.len(),
                m + d - 1
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::contract(format!(
                "tensor contains non-finite weight {bad}"
            )));
        }
        Ok(SymmetricTensor { m, d, weights })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight for `tuple`, given in any index order.
    pub fn get(&self, tuple: &[usize]) -> Result<f64> {
        let mut sorted = tuple.to_vec();
        sorted.sort_unstable();
        let rank = tuple_rank(&sorted, self.m, self.d)?;
        Ok(self.weights[rank])
    }

    /// Set the weight for a tuple given in any index order.
    pub fn set(&mut self, tuple: &[usize], weight: f64) -> Result<()> {
        let mut sorted = tuple.to_vec();
        sorted.sort_unstable();
        let rank = tuple_rank(&sorted, self.m, self.d)?;
        self.weights[rank] = weight;
        Ok(())
    }

    /// Iterate `(sorted tuple, weight)` pairs in rank order.
    pub fn iter(&self) -> TensorIter<'_> {
        TensorIter {
            tensor: self,
            tuple: vec![0; self.d],
            rank: 0,
        }
    }

    /// Apply `f` to every weight (used for nat -> bit conversion).
    pub fn map_weights(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_weights(self.m, self.d, self.weights.iter().map(|&w| f(w)).collect())
    }
}

pub struct TensorIter<'a> {
    tensor: &'a SymmetricTensor,
    tuple: Vec<usize>,
    rank: usize,
}

impl Iterator for TensorIter<'_> {
    type Item = (Vec<usize>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.rank >= self.tensor.len() {
            return None;
        }
        let item = (self.tuple.clone(), self.tensor.weights[self.rank]);
        self.rank += 1;
        next_tuple(&mut self.tuple, self.tensor.m);
        Some(item)
    }
}
