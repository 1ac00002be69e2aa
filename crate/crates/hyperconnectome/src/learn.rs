//! Feature vectorization, a deterministic L2-regularized hinge-loss linear
//! classifier, classification metrics, trial orchestration, and the
//! two-sample t-test.
//!
//! The classifier is a primal subgradient scheme with a decaying step size
//! `1/(lambda * t)` and iterate averaging. A fixed epoch count and a
//! seed-derived example order make training bit-reproducible; features are
//! standardized from training statistics only, so test data never leaks
//! into the model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{ConnectomeMatrix, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::estimators::{connectome, EpsilonThreshold, EstimatorVariant};
use crate::hypergraph::{build_hyperconnectome, HyperConnectome};
use crate::seeding;

/// What a feature vector's coordinates mean, and how many there are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSchema {
    /// Strict upper triangle of an m x m correlation matrix, row-major.
    GraphUpperTriangle { m: usize },
    /// All stored tensor entries in tuple-rank order; degenerate
    /// (repeated-index) tuples optionally dropped.
    HypergraphTensor {
        m: usize,
        d: usize,
        include_degenerate: bool,
    },
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        match *self {
            FeatureSchema::GraphUpperTriangle { m } => m * (m - 1) / 2,
            FeatureSchema::HypergraphTensor {
                m,
                d,
                include_degenerate,
            } => {
                if include_degenerate {
                    crate::core::tuple_count(m, d)
                } else {
                    crate::core::binomial(m, d)
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One subject's features under a fixed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: FeatureSchema,
}

/// Row-major strict upper triangle of the correlation matrix. The unit
/// diagonal carries no information and is excluded.
pub fn vectorize_graph(cm: &ConnectomeMatrix) -> FeatureVector {
    let m = cm.m();
    let mut values = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            values.push(cm.get(i, j));
        }
    }
    FeatureVector {
        values,
        schema: FeatureSchema::GraphUpperTriangle { m },
    }
}

/// Stored tensor entries in tuple-rank order, optionally dropping
/// degenerate tuples.
pub fn vectorize_hypergraph(hc: &HyperConnectome, include_degenerate: bool) -> FeatureVector {
    let values: Vec<f64> = hc
        .tensor()
        .iter()
        .filter(|(tuple, _)| include_degenerate || tuple.windows(2).all(|w| w[0] != w[1]))
        .map(|(_, w)| w)
        .collect();
    FeatureVector {
        values,
        schema: FeatureSchema::HypergraphTensor {
            m: hc.m(),
            d: hc.d(),
            include_degenerate,
        },
    }
}

/// Uniformly random train/test partition. The training side takes
/// `ceil(len * fraction)` elements, so at an odd count and fraction 0.5 the
/// larger side goes to training. Both sides must end up non-empty.
pub fn split(
    len: usize,
    fraction: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::contract(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let train_size = (len as f64 * fraction).ceil() as usize;
    if train_size == 0 || train_size >= len {
        return Err(Error::contract(format!(
            "dataset of {len} subjects cannot produce non-empty sides at fraction {fraction}"
        )));
    }
    let mut indices: Vec<usize> = (0..len).collect();
    indices.shuffle(rng);
    let mut train = indices[..train_size].to_vec();
    let mut test = indices[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Training hyperparameters. The defaults are fixed so that a seed fully
/// determines the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl SvmConfig {
    pub fn new(seed: u64) -> Self {
        SvmConfig {
            epochs: 200,
            lambda: 1e-4,
            seed,
        }
    }
}

/// Linear classifier with its training-set standardization baked in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    schema: FeatureSchema,
    weights: Vec<f64>,
    bias: f64,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Regularized average-hinge objective of the averaged iterate, logged
    /// at fixed points during training (initial point first).
    pub objective_checkpoints: Vec<f64>,
}

impl LinearModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn schema(&self) -> FeatureSchema {
        self.schema
    }

    fn score(&self, features: &FeatureVector) -> f64 {
        let mut s = self.bias;
        for f in 0..self.weights.len() {
            s += self.weights[f] * (features.values[f] - self.means[f]) / self.scales[f];
        }
        s
    }
}

fn check_training_inputs(features: &[FeatureVector], labels: &[i8]) -> Result<FeatureSchema> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} feature vectors for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let schema = features[0].schema;
    if features
        .iter()
        .any(|f| f.schema != schema || f.values.len() != schema.len())
    {
        return Err(Error::contract("feature vectors have mixed schemas"));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::contract("labels must be +1 or -1"));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::DegenerateLabels);
    }
    Ok(schema)
}

/// Train by minimizing `lambda/2 ||w||^2 + mean hinge` with a per-example
/// subgradient step of size `1/(lambda * t)` and averaging of all iterates.
/// Identical `(features, labels, config)` produce a bit-identical model.
pub fn svm_train(
    features: &[FeatureVector],
    labels: &[i8],
    config: &SvmConfig,
) -> Result<LinearModel> {
    let schema = check_training_inputs(features, labels)?;
    let nf = schema.len();
    let n = features.len();

    // Standardization from training data: population mean and std per
    // feature. Zero-variance features get scale 1; their standardized value
    // is identically 0, so they never receive weight.
    let mut means = vec![0.0; nf];
    for fv in features {
        for (m, &v) in means.iter_mut().zip(&fv.values) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut scales = vec![0.0; nf];
    for fv in features {
        for f in 0..nf {
            let d = fv.values[f] - means[f];
            scales[f] += d * d;
        }
    }
    for s in &mut scales {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let standardized: Vec<Vec<f64>> = features
        .iter()
        .map(|fv| {
            (0..nf)
                .map(|f| (fv.values[f] - means[f]) / scales[f])
                .collect()
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|&y| y as f64).collect();

    // w is kept as scale * v so the per-step shrink is O(1); the running
    // iterate sum is kept as alpha * v + u so averaging costs O(features)
    // only on margin violations.
    let lambda = config.lambda;
    let mut v = vec![0.0f64; nf];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut alpha = 0.0f64;
    let mut u = vec![0.0f64; nf];
    let mut bias_sum = 0.0f64;
    let mut t = 0u64;

    let objective = |w: &[f64], b: f64| -> f64 {
        let mut hinge = 0.0;
        for (x, &y) in standardized.iter().zip(&ys) {
            let margin = y * (dot(w, x) + b);
            hinge += (1.0 - margin).max(0.0);
        }
        lambda / 2.0 * dot(w, w) + hinge / n as f64
    };

    let averaged = |v: &[f64], u: &[f64], alpha: f64, bias_sum: f64, t: u64| {
        let steps = t.max(1) as f64;
        let w: Vec<f64> = v
            .iter()
            .zip(u)
            .map(|(&vi, &ui)| (alpha * vi + ui) / steps)
            .collect();
        (w, bias_sum / steps)
    };

    let checkpoint_every = (config.epochs / 4).max(1);
    let mut checkpoints = vec![objective(&vec![0.0; nf], 0.0)];

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeding::stream(config.seed, 0x53564d);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &standardized[idx];
            let y = ys[idx];
            let margin = y * (scale * dot(&v, x) + bias);
            scale *= 1.0 - eta * lambda;
            if scale == 0.0 {
                // First step: the shrink factor 1 - 1/t vanishes at t = 1.
                v.iter_mut().for_each(|vi| *vi = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y;
                for f in 0..nf {
                    let delta = step * x[f] / scale;
                    v[f] += delta;
                    u[f] -= alpha * delta;
                }
                bias += step;
            }
            alpha += scale;
            bias_sum += bias;
        }
        if (epoch + 1) % checkpoint_every == 0 || epoch + 1 == config.epochs {
            let (w, b) = averaged(&v, &u, alpha, bias_sum, t);
            checkpoints.push(objective(&w, b));
        }
    }

    let (weights, bias) = averaged(&v, &u, alpha, bias_sum, t);
    Ok(LinearModel {
        schema,
        weights,
        bias,
        means,
        scales,
        objective_checkpoints: checkpoints,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized average-hinge objective of a model on a labeled set, using
/// the model's own standardization.
pub fn hinge_objective(
    model: &LinearModel,
    features: &[FeatureVector],
    labels: &[i8],
    lambda: f64,
) -> f64 {
    let hinge: f64 = features
        .iter()
        .zip(labels)
        .map(|(fv, &y)| (1.0 - y as f64 * model.score(fv)).max(0.0))
        .sum();
    lambda / 2.0 * dot(&model.weights, &model.weights) + hinge / features.len() as f64
}

/// Predicted labels: the sign of the standardized score, with an exact 0
/// mapping to +1.
pub fn svm_predict(model: &LinearModel, features: &[FeatureVector]) -> Result<Vec<i8>> {
    if features
        .iter()
        .any(|f| f.schema != model.schema || f.values.len() != model.weights.len())
    {
        return Err(Error::contract("feature schema does not match the model"));
    }
    Ok(features
        .iter()
        .map(|f| if model.score(f) >= 0.0 { 1 } else { -1 })
        .collect())
}

/// Accuracy and F1 for the stated positive class. F1 is 0 when precision
/// and recall are both 0.
pub fn metrics(predicted: &[i8], truth: &[i8], positive: i8) -> Result<(f64, f64)> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    let n = predicted.len() as f64;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let tp = predicted
        .iter()
        .zip(truth)
        .filter(|&(&p, &t)| p == positive && t == positive)
        .count() as f64;
    let fp = predicted
        .iter()
        .zip(truth)
        .filter(|&(&p, &t)| p == positive && t != positive)
        .count() as f64;
    let fneg = predicted
        .iter()
        .zip(truth)
        .filter(|&(&p, &t)| p != positive && t == positive)
        .count() as f64;
    let accuracy = correct as f64 / n;
    let f1 = if tp == 0.0 {
        0.0
    } else {
        let precision = tp / (tp + fp);
        let recall = tp / (tp + fneg);
        2.0 * precision * recall / (precision + recall)
    };
    Ok((accuracy, f1))
}

/// Which feature family a classification run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Graph,
    Hypergraph,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Graph => f.write_str("graph"),
            FeatureKind::Hypergraph => f.write_str("hypergraph"),
        }
    }
}

/// Everything a classification experiment needs beyond the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub fraction: f64,
    pub seed: u64,
    pub d: usize,
    pub epsilon: EpsilonThreshold,
    pub variant: EstimatorVariant,
    pub include_degenerate: bool,
    pub epochs: usize,
    pub lambda: f64,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            trials: 10,
            fraction: 0.5,
            seed,
            d: 3,
            epsilon: EpsilonThreshold::new(1e-5).expect("default epsilon is positive"),
            variant: EstimatorVariant::PaperTupleSum,
            include_degenerate: true,
            epochs: 200,
            lambda: 1e-4,
        }
    }
}

/// One trial's held-out performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub f1: f64,
    pub split_seed: u64,
}

/// Vectorize every subject once under the requested feature kind.
pub fn vectorize_subjects(
    subjects: &[TimeSeriesMatrix],
    kind: FeatureKind,
    cfg: &ExperimentConfig,
) -> Result<Vec<FeatureVector>> {
    subjects
        .par_iter()
        .map(|ts| match kind {
            FeatureKind::Graph => Ok(vectorize_graph(&connectome(ts)?)),
            FeatureKind::Hypergraph => {
                let hc = build_hyperconnectome(ts, cfg.d, cfg.epsilon, cfg.variant)?;
                Ok(vectorize_hypergraph(&hc, cfg.include_degenerate))
            }
        })
        .collect()
}

/// Run `cfg.trials` independent trials: derive the split from
/// `(seed, trial)`, train on the training side, and evaluate both sides.
/// The split depends only on the seed and trial index, so runs over
/// different feature kinds are paired.
pub fn run_experiment(
    subjects: &[TimeSeriesMatrix],
    labels: &[i8],
    kind: FeatureKind,
    cfg: &ExperimentConfig,
) -> Result<Vec<TrialReport>> {
    if cfg.trials == 0 {
        return Err(Error::contract("at least one trial is required"));
    }
    if subjects.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} subjects for {} labels",
            subjects.len(),
            labels.len()
        )));
    }
    let features = vectorize_subjects(subjects, kind, cfg)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(&features, labels, trial as u64, cfg))
        .collect()
}

fn run_trial(
    features: &[FeatureVector],
    labels: &[i8],
    trial: u64,
    cfg: &ExperimentConfig,
) -> Result<TrialReport> {
    let split_seed = seeding::derive(cfg.seed, trial);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(split_seed);
    let (train_idx, test_idx) = split(features.len(), cfg.fraction, &mut rng)?;

    let gather = |idx: &[usize]| -> (Vec<FeatureVector>, Vec<i8>) {
        (
            idx.iter().map(|&i| features[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (train_x, train_y) = gather(&train_idx);
    let (test_x, test_y) = gather(&test_idx);

    let svm = SvmConfig {
        epochs: cfg.epochs,
        lambda: cfg.lambda,
        seed: seeding::derive(split_seed, 1),
    };
    let model = svm_train(&train_x, &train_y, &svm)?;
    let (train_accuracy, _) = metrics(&svm_predict(&model, &train_x)?, &train_y, 1)?;
    let (test_accuracy, f1) = metrics(&svm_predict(&model, &test_x)?, &test_y, 1)?;
    Ok(TrialReport {
        train_accuracy,
        test_accuracy,
        f1,
        split_seed,
    })
}

/// Per-feature-kind trial list with its means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: FeatureKind,
    pub trials: Vec<TrialReport>,
    pub mean_train_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub mean_f1: f64,
}

impl KindSummary {
    pub fn new(kind: FeatureKind, trials: Vec<TrialReport>) -> Self {
        let n = trials.len().max(1) as f64;
        let mean = |f: fn(&TrialReport) -> f64| trials.iter().map(f).sum::<f64>() / n;
        KindSummary {
            kind,
            mean_train_accuracy: mean(|t| t.train_accuracy),
            mean_test_accuracy: mean(|t| t.test_accuracy),
            mean_f1: mean(|t| t.f1),
            trials,
        }
    }
}

/// Full experiment outcome: per-kind trials and means, plus the paired
/// t-test on testing accuracy when exactly two kinds were run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
    pub kinds: Vec<KindSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_statistic: Option<TStatistic>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
}

impl ExperimentReport {
    /// Assemble the report. With two feature kinds the trial counts must
    /// match (the comparison is paired through shared splits), and the
    /// t-test compares the first kind's testing accuracies against the
    /// second's.
    pub fn new(kinds: Vec<KindSummary>, welch: bool) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::contract("experiment produced no feature kinds"));
        }
        let (t_statistic, p_value) = if kinds.len() == 2 {
            if kinds[0].trials.len() != kinds[1].trials.len() {
                return Err(Error::contract(
                    "paired comparison requires equal trial counts",
                ));
            }
            let a: Vec<f64> = kinds[0].trials.iter().map(|t| t.test_accuracy).collect();
            let b: Vec<f64> = kinds[1].trials.iter().map(|t| t.test_accuracy).collect();
            let (t, p) = if welch {
                welch_ttest(&a, &b)?
            } else {
                two_sample_ttest(&a, &b)?
            };
            (Some(TStatistic(t)), Some(p))
        } else {
            (None, None)
        };
        Ok(ExperimentReport {
            config: None,
            kinds,
            t_statistic,
            p_value,
        })
    }
}

/// t statistic wrapper whose JSON form survives infinities (the sentinel
/// for a zero-variance comparison with unequal means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStatistic(pub f64);

impl Serialize for TStatistic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for TStatistic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(TStatistic(v)),
            Raw::Text(s) => match s.as_str() {
                "inf" => Ok(TStatistic(f64::INFINITY)),
                "-inf" => Ok(TStatistic(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "invalid t statistic {other:?}"
                ))),
            },
        }
    }
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn check_ttest_inputs(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::contract(
            "t-test requires at least 2 observations per group",
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::contract("t-test inputs must be finite"));
    }
    Ok(())
}

/// Pooled-variance two-sample Student t-test: returns `(t, two-sided p)`
/// with `n_a + n_b - 2` degrees of freedom. Zero pooled variance yields
/// `(0, 1)` for equal means and `(+/-inf, 0)` otherwise.
pub fn two_sample_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_ttest_inputs(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if pooled == 0.0 {
        return Ok(if ma == mb {
            (0.0, 1.0)
        } else if ma > mb {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        });
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok((t, student_t_two_sided_p(t, df)))
}

/// Welch's unequal-variance variant with Welch-Satterthwaite degrees of
/// freedom. Same degenerate-case conventions as [`two_sample_ttest`].
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_ttest_inputs(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let sa = va / na;
    let sb = vb / nb;
    if sa + sb == 0.0 {
        return Ok(if ma == mb {
            (0.0, 1.0)
        } else if ma > mb {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb) * (sa + sb)
        / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok((t, student_t_two_sided_p(t, df)))
}

/// Two-sided p-value of the Student t distribution via the regularized
/// incomplete beta function: `I_{df/(df + t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    inc_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// ln Gamma(z) for z > 0 by the Lanczos approximation.
fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Regularized incomplete beta I_x(a, b), continued fraction evaluated by
/// the modified Lentz method.
fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fastest below the mean; use the
    // symmetry relation otherwise.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(1.0 - x, b, a);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();

    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let mf = m as f64;
        // Even step.
        let num = mf * (b - mf) * x / ((a + 2.0 * mf - 1.0) * (a + 2.0 * mf));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let num = -(a + mf) * (a + b + mf) * x / ((a + 2.0 * mf) * (a + 2.0 * mf + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front * h / a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn toy_features(values: &[(f64, f64)]) -> Vec<FeatureVector> {
        values
            .iter()
            .map(|&(a, b)| FeatureVector {
                values: vec![a, b],
                schema: FeatureSchema::GraphUpperTriangle { m: 2 },
            })
            .map(|mut f| {
                // m=2 gives one feature; fake a two-feature schema instead.
                f.schema = FeatureSchema::HypergraphTensor {
                    m: 2,
                    d: 2,
                    include_degenerate: false,
                };
                f.values.truncate(2);
                f
            })
            .collect()
    }

    fn separable_toy() -> (Vec<FeatureVector>, Vec<i8>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let y: i8 = if rng.gen::<bool>() { 1 } else { -1 };
            let offset = y as f64 * 2.0;
            features.push((offset + rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)));
            labels.push(y);
        }
        (toy_features(&features), labels)
    }

    #[test]
    fn schema_lengths() {
        assert_eq!(FeatureSchema::GraphUpperTriangle { m: 2 }.len(), 1);
        assert_eq!(FeatureSchema::GraphUpperTriangle { m: 61 }.len(), 1830);
        assert_eq!(
            FeatureSchema::HypergraphTensor {
                m: 61,
                d: 3,
                include_degenerate: true
            }
            .len(),
            39711
        );
        assert_eq!(
            FeatureSchema::HypergraphTensor {
                m: 3,
                d: 3,
                include_degenerate: true
            }
            .len(),
            10
        );
        assert_eq!(
            FeatureSchema::HypergraphTensor {
                m: 3,
                d: 3,
                include_degenerate: false
            }
            .len(),
            1
        );
    }

    #[test]
    fn vectorize_graph_upper_triangle() {
        let cm = ConnectomeMatrix::new(
            3,
            vec![1.0, 0.1, 0.2, 0.1, 1.0, 0.3, 0.2, 0.3, 1.0],
        )
        .unwrap();
        let fv = vectorize_graph(&cm);
        assert_eq!(fv.values, vec![0.1, 0.2, 0.3]);

        let id = ConnectomeMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(vectorize_graph(&id).values, vec![0.0]);
    }

    #[test]
    fn vectorize_hypergraph_lengths() {
        let ts = TimeSeriesMatrix::from_rows(
            vec![
                vec![1.0, -1.0, 1.0, -1.0],
                vec![1.0, 1.0, -1.0, -1.0],
                vec![1.0, -1.0, -1.0, 1.0],
            ],
            None,
        )
        .unwrap();
        let hc = build_hyperconnectome(
            &ts,
            3,
            EpsilonThreshold::new(1e-5).unwrap(),
            EstimatorVariant::PaperTupleSum,
        )
        .unwrap();
        assert_eq!(vectorize_hypergraph(&hc, true).values.len(), 10);
        let strict = vectorize_hypergraph(&hc, false);
        assert_eq!(strict.values.len(), 1);
        assert_eq!(strict.values[0], hc.tensor().get(&[0, 1, 2]).unwrap());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (train, test) = split(2000, 0.5, &mut rng).unwrap();
        assert_eq!(train.len(), 1000);
        assert_eq!(test.len(), 1000);

        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(split(100, 0.3, &mut r1).unwrap(), split(100, 0.3, &mut r2).unwrap());

        // Odd count at 0.5: the larger side goes to training.
        let (train, test) = split(11, 0.5, &mut rng).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 5);

        assert!(split(1, 0.5, &mut rng).is_err());
        assert!(split(10, 0.0, &mut rng).is_err());
        assert!(split(10, 1.0, &mut rng).is_err());
    }

    #[test]
    fn svm_separable_toy_set() {
        let (features, labels) = separable_toy();
        let model = svm_train(&features, &labels, &SvmConfig::new(1)).unwrap();
        let predictions = svm_predict(&model, &features).unwrap();
        let (acc, _) = metrics(&predictions, &labels, 1).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn svm_is_bit_deterministic() {
        let (features, labels) = separable_toy();
        let a = svm_train(&features, &labels, &SvmConfig::new(5)).unwrap();
        let b = svm_train(&features, &labels, &SvmConfig::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn svm_rejects_single_class() {
        let (features, _) = separable_toy();
        let labels = vec![1i8; features.len()];
        assert!(matches!(
            svm_train(&features, &labels, &SvmConfig::new(0)),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn svm_standardization_is_exact() {
        let (features, labels) = separable_toy();
        let model = svm_train(&features, &labels, &SvmConfig::new(2)).unwrap();
        let n = features.len() as f64;
        for f in 0..2 {
            let transformed: Vec<f64> = features
                .iter()
                .map(|fv| (fv.values[f] - model.means[f]) / model.scales[f])
                .collect();
            let mean: f64 = transformed.iter().sum::<f64>() / n;
            let var: f64 = transformed.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
            assert!(mean.abs() < 1e-9, "feature {f} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "feature {f} scale");
        }
    }

    #[test]
    fn svm_objective_decreases_from_initial_point() {
        let (features, labels) = separable_toy();
        let model = svm_train(&features, &labels, &SvmConfig::new(3)).unwrap();
        let first = *model.objective_checkpoints.first().unwrap();
        let last = *model.objective_checkpoints.last().unwrap();
        assert_eq!(first, 1.0); // zero model: hinge is exactly 1 everywhere
        assert!(last <= first + 1e-6);
        let direct = hinge_objective(&model, &features, &labels, 1e-4);
        assert!((direct - last).abs() < 1e-12);
    }

    #[test]
    fn predict_sign_conventions() {
        let model = LinearModel {
            schema: FeatureSchema::GraphUpperTriangle { m: 2 },
            weights: vec![0.0],
            bias: 0.5,
            means: vec![0.0],
            scales: vec![1.0],
            objective_checkpoints: vec![],
        };
        let fv = FeatureVector {
            values: vec![3.0],
            schema: FeatureSchema::GraphUpperTriangle { m: 2 },
        };
        assert_eq!(svm_predict(&model, &[fv.clone()]).unwrap(), vec![1]);

        let zero = LinearModel { bias: 0.0, ..model };
        assert_eq!(svm_predict(&zero, &[fv]).unwrap(), vec![1]);

        let wrong = FeatureVector {
            values: vec![1.0, 2.0],
            schema: FeatureSchema::GraphUpperTriangle { m: 3 },
        };
        assert!(svm_predict(&zero, &[wrong]).is_err());
    }

    #[test]
    fn prediction_invariant_under_positive_rescaling() {
        let (features, labels) = separable_toy();
        let model = svm_train(&features, &labels, &SvmConfig::new(6)).unwrap();
        let mut rescaled = model.clone();
        for w in &mut rescaled.weights {
            *w *= 3.5;
        }
        rescaled.bias *= 3.5;
        assert_eq!(
            svm_predict(&model, &features).unwrap(),
            svm_predict(&rescaled, &features).unwrap()
        );
    }

    #[test]
    fn metrics_cases() {
        assert_eq!(metrics(&[1, -1, 1], &[1, -1, 1], 1).unwrap(), (1.0, 1.0));

        // All-positive predictor at 50% prevalence: accuracy 1/2, F1 2/3.
        let truth = [1, 1, -1, -1];
        let (acc, f1) = metrics(&[1, 1, 1, 1], &truth, 1).unwrap();
        assert_eq!(acc, 0.5);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);

        let (_, f1) = metrics(&[-1, -1, -1, -1], &truth, 1).unwrap();
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn experiment_is_deterministic_and_paired() {
        let dataset = simulation::gen_dataset(12, 12, 20, 7).unwrap();
        let subjects: Vec<TimeSeriesMatrix> =
            dataset.subjects.iter().map(|s| s.ts.clone()).collect();
        let labels: Vec<i8> = dataset
            .subjects
            .iter()
            .map(|s| if s.label == simulation::SubjectLabel::Y { 1 } else { -1 })
            .collect();
        let mut cfg = ExperimentConfig::new(3);
        cfg.trials = 3;
        let a = run_experiment(&subjects, &labels, FeatureKind::Hypergraph, &cfg).unwrap();
        let b = run_experiment(&subjects, &labels, FeatureKind::Hypergraph, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);

        // Shared split derivation keeps trials paired across feature kinds.
        let g = run_experiment(&subjects, &labels, FeatureKind::Graph, &cfg).unwrap();
        for (ha, ga) in a.iter().zip(&g) {
            assert_eq!(ha.split_seed, ga.split_seed);
        }
    }

    #[test]
    fn ttest_identical_groups() {
        let a = [0.2, 0.4, 0.6, 0.8];
        let (t, p) = two_sample_ttest(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn ttest_hand_case() {
        // Pooled variance 2.5, standard error 1, 8 degrees of freedom.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let (t, p) = two_sample_ttest(&a, &b).unwrap();
        assert!((t + 1.0).abs() < 1e-12);
        assert!((p - 0.34659350708733416).abs() < 1e-3);
    }

    #[test]
    fn ttest_zero_variance_sentinels() {
        let a = [1.0, 1.0, 1.0];
        let b = [2.0, 2.0];
        let (t, p) = two_sample_ttest(&a, &b).unwrap();
        assert_eq!(t, f64::NEG_INFINITY);
        assert_eq!(p, 0.0);
        assert!(two_sample_ttest(&[1.0], &b).is_err());
    }

    #[test]
    fn welch_matches_pooled_for_balanced_equal_variance() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let (tp, _) = two_sample_ttest(&a, &b).unwrap();
        let (tw, _) = welch_ttest(&a, &b).unwrap();
        assert!((tp - tw).abs() < 1e-12);
    }

    #[test]
    fn t_distribution_reference_values() {
        // Frozen from the standard two-sided Student t tail formula.
        assert!((student_t_two_sided_p(1.0, 8.0) - 0.34659350708733416).abs() < 1e-10);
        assert!((student_t_two_sided_p(2.5, 10.0) - 0.031446844236760525).abs() < 1e-10);
        assert!((student_t_two_sided_p(0.5, 3.0) - 0.6514417228548321).abs() < 1e-10);
        assert_eq!(student_t_two_sided_p(0.0, 5.0), 1.0);
    }

    #[test]
    fn tstatistic_serde_handles_infinity() {
        let cases = [
            (TStatistic(1.5), "1.5"),
            (TStatistic(f64::INFINITY), "\"inf\""),
            (TStatistic(f64::NEG_INFINITY), "\"-inf\""),
        ];
        for (v, expected) in cases {
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, expected);
            let back: TStatistic = serde_json::from_str(&json).unwrap();
            assert_eq!(back, v);
        }
    }

    proptest! {
        #[test]
        fn ttest_swap_negates_t_exactly(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let na = rng.gen_range(2..12);
            let nb = rng.gen_range(2..12);
            let a: Vec<f64> = (0..na).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (t1, p1) = two_sample_ttest(&a, &b).unwrap();
            let (t2, p2) = two_sample_ttest(&b, &a).unwrap();
            prop_assert_eq!(t1, -t2);
            prop_assert_eq!(p1, p2);
            prop_assert!((0.0..=1.0).contains(&p1));
        }

        #[test]
        fn predictions_are_signs(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (features, mut labels) = separable_toy();
            for y in &mut labels {
                if rng.gen::<f64>() < 0.2 {
                    *y = -*y;
                }
            }
            if labels.contains(&1) && labels.contains(&-1) {
                let model = svm_train(&features, &labels, &SvmConfig::new(seed)).unwrap();
                let pred = svm_predict(&model, &features).unwrap();
                prop_assert!(pred.iter().all(|&p| p == 1 || p == -1));
            }
        }
    }
}
