//! Hyper-connectome construction and export: wraps the total-correlation
//! tensor of one subject with its estimation metadata, extracts significant
//! hyperedges, reduces the tensor to a pairwise matrix, and (de)serializes
//! the whole artifact as a JSON document with 1-based ROI index tuples.

use serde::{Deserialize, Serialize};

use crate::core::{tuple_count, tuple_unrank, SymmetricTensor, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::estimators::{alg1_total_correlation, EpsilonThreshold, EstimatorVariant};

/// One subject's hypergraph: total-correlation weights over all
/// non-decreasing d-tuples of variables, plus the estimation parameters
/// and labels needed to interpret and reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperConnectome {
    tensor: SymmetricTensor,
    epsilon: EpsilonThreshold,
    variant: EstimatorVariant,
    roi_labels: Vec<String>,
    source_id: Option<String>,
    run_config: Option<serde_json::Value>,
}

impl HyperConnectome {
    pub fn new(
        tensor: SymmetricTensor,
        epsilon: EpsilonThreshold,
        variant: EstimatorVariant,
        roi_labels: Vec<String>,
    ) -> Result<Self> {
        if roi_labels.len() != tensor.m() {
            return Err(Error::contract(format!(
                "{} labels supplied for {} variables",
                roi_labels.len(),
                tensor.m()
            )));
        }
        if tensor.d() < 2 {
            return Err(Error::contract(format!(
                "hyperedge order must be >= 2, got {}",
                tensor.d()
            )));
        }
        Ok(HyperConnectome {
            tensor,
            epsilon,
            variant,
            roi_labels,
            source_id: None,
            run_config: None,
        })
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    /// Attach the resolved run configuration so exported documents carry
    /// their provenance.
    pub fn with_run_config(mut self, config: serde_json::Value) -> Self {
        self.run_config = Some(config);
        self
    }

    pub fn tensor(&self) -> &SymmetricTensor {
        &self.tensor
    }

    pub fn m(&self) -> usize {
        self.tensor.m()
    }

    pub fn d(&self) -> usize {
        self.tensor.d()
    }

    pub fn epsilon(&self) -> EpsilonThreshold {
        self.epsilon
    }

    pub fn variant(&self) -> EstimatorVariant {
        self.variant
    }

    pub fn roi_labels(&self) -> &[String] {
        &self.roi_labels
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    /// Same hyper-connectome measured in bits: every weight divided by ln 2.
    pub fn in_bits(&self) -> Result<Self> {
        Ok(HyperConnectome {
            tensor: self.tensor.map_weights(|w| w / std::f64::consts::LN_2)?,
            ..self.clone()
        })
    }
}

/// Estimate the hyper-connectome of one subject.
pub fn build_hyperconnectome(
    ts: &TimeSeriesMatrix,
    d: usize,
    epsilon: EpsilonThreshold,
    variant: EstimatorVariant,
) -> Result<HyperConnectome> {
    let tensor = alg1_total_correlation(ts, d, epsilon, variant)?;
    HyperConnectome::new(tensor, epsilon, variant, ts.labels_or_default())
}

/// Hyperedges whose weight strictly exceeds a threshold, in descending
/// weight order (ties broken by ascending tuple rank).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperedgeList {
    pub threshold: f64,
    /// `(sorted index tuple, weight)` pairs.
    pub edges: Vec<(Vec<usize>, f64)>,
}

/// Extract the hyperedges with weight strictly above `threshold`.
pub fn significant_edges(hc: &HyperConnectome, threshold: f64) -> HyperedgeList {
    let mut picked: Vec<(usize, Vec<usize>, f64)> = hc
        .tensor
        .iter()
        .enumerate()
        .filter(|(_, (_, w))| *w > threshold)
        .map(|(rank, (tuple, w))| (rank, tuple, w))
        .collect();
    picked.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    HyperedgeList {
        threshold,
        edges: picked.into_iter().map(|(_, t, w)| (t, w)).collect(),
    }
}

/// Symmetric m x m matrix of summed hyperedge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    m: usize,
    values: Vec<f64>,
}

impl PairwiseMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Collapse the tensor to a pairwise matrix: entry (a, b) with a != b sums
/// the weights of every stored tuple containing both a and b, each stored
/// tuple counted once; entry (a, a) sums the tuples containing a at least
/// twice. With `include_degenerate` false, tuples with any repeated index
/// are skipped, leaving strict hyperedges only.
pub fn pairwise_reduce(hc: &HyperConnectome, include_degenerate: bool) -> PairwiseMatrix {
    let m = hc.m();
    let mut values = vec![0.0; m * m];
    let mut unique: Vec<usize> = Vec::with_capacity(hc.d());
    for (tuple, w) in hc.tensor.iter() {
        unique.clear();
        let mut degenerate = false;
        for &idx in &tuple {
            match unique.last() {
                Some(&last) if last == idx => degenerate = true,
                _ => unique.push(idx),
            }
        }
        if degenerate {
            if include_degenerate {
                // Tuple is sorted, so repeats are adjacent.
                for pair in tuple.windows(2) {
                    if pair[0] == pair[1] {
                        values[pair[0] * m + pair[0]] += w;
                        break;
                    }
                }
            } else {
                continue;
            }
        }
        for (k, &a) in unique.iter().enumerate() {
            for &b in &unique[k + 1..] {
                values[a * m + b] += w;
                values[b * m + a] += w;
            }
        }
    }
    PairwiseMatrix { m, values }
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    /// 1-based sorted variable indices.
    idx: Vec<usize>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct HcDocument {
    m: usize,
    d: usize,
    epsilon: f64,
    variant: EstimatorVariant,
    roi_labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    source_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config: Option<serde_json::Value>,
    entries: Vec<EntryDoc>,
}

/// Serialize to the JSON document format: fields m, d, epsilon, variant,
/// roi_labels, and a complete `entries` array in tuple-rank order with
/// 1-based indices. Weights survive a round trip exactly.
pub fn serialize_hc(hc: &HyperConnectome) -> String {
    let doc = HcDocument {
        m: hc.m(),
        d: hc.d(),
        epsilon: hc.epsilon.value(),
        variant: hc.variant,
        roi_labels: hc.roi_labels.clone(),
        source_id: hc.source_id.clone(),
        config: hc.run_config.clone(),
        entries: hc
            .tensor
            .iter()
            .map(|(tuple, w)| EntryDoc {
                idx: tuple.iter().map(|i| i + 1).collect(),
                w,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("document serializes");
    out.push('\n');
    out
}

/// Parse a hyper-connectome document, validating completeness and tuple
/// order so that re-serialization is byte-identical.
pub fn deserialize_hc(document: &str) -> Result<HyperConnectome> {
    let doc: HcDocument = serde_json::from_str(document).map_err(|e| Error::Parse {
        path: "<document>".into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let expected = tuple_count(doc.m, doc.d);
    if doc.entries.len() != expected {
        return Err(Error::parse(
            "<document>",
            0,
            format!(
                "expected {expected} entries for m={}, d={}, found {}",
                doc.m,
                doc.d,
                doc.entries.len()
            ),
        ));
    }
    let mut weights = Vec::with_capacity(expected);
    for (rank, entry) in doc.entries.iter().enumerate() {
        let canonical = tuple_unrank(rank, doc.m, doc.d)?;
        let zero_based: Vec<usize> = entry
            .idx
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| Error::parse("<document>", 0, "index 0 in 1-based tuple"))
            })
            .collect::<Result<_>>()?;
        if zero_based != canonical {
            return Err(Error::parse(
                "<document>",
                0,
                format!("entry {rank} has tuple {:?}, expected rank order", entry.idx),
            ));
        }
        weights.push(entry.w);
    }
    let tensor = SymmetricTensor::from_weights(doc.m, doc.d, weights)?;
    let mut hc = HyperConnectome::new(
        tensor,
        EpsilonThreshold::new(doc.epsilon)?,
        doc.variant,
        doc.roi_labels,
    )?;
    hc.source_id = doc.source_id;
    hc.run_config = doc.config;
    Ok(hc)
}
