//! Multiple homogeneous samples: diagnostics that decide whether samples
//! share a shape, standardisation into one pooled sample, and the algebra of
//! the pooled probability estimator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::hypothesis::{levene_median, paired_t, pearson, welch_t, TestResult};
use crate::sample::{moments, Sample, SampleError, SampleMoments, Series};

/// Smallest sample for which bootstrapped fourth moments are attempted.
pub const MIN_BOOTSTRAP_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoolingError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample '{label}' has {n} observations; at least {min} are needed", min = MIN_BOOTSTRAP_SIZE)]
    SampleTooSmall { label: String, n: usize },
    #[error("aligned comparison needs equal lengths, '{first}' has {n_first} and '{second}' has {n_second}")]
    NotAligned { first: String, n_first: usize, second: String, n_second: usize },
    #[error("sample label '{0}' appears more than once")]
    DuplicateLabel(String),
    #[error("bootstrap needs at least one replica")]
    NoReplicas,
    #[error("confidence level parameter alpha = {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("sample '{label}': {source}")]
    Sample {
        label: String,
        #[source]
        source: SampleError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityConfig {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Observations share an index (e.g. the same year) across samples.
    pub aligned: bool,
}

impl Default for HomogeneityConfig {
    fn default() -> Self {
        Self { reps: 1000, alpha: 0.05, seed: 0, aligned: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub first: String,
    pub second: String,
    /// Only for aligned samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<TestResult>,
    /// Paired t when aligned, Welch otherwise.
    pub location: TestResult,
    pub mean_difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeSummary {
    pub label: String,
    pub n: usize,
    pub moments: SampleMoments,
    pub skewness_ci: Interval,
    pub kurtosis_ci: Interval,
    /// Replicas whose resample had zero spread are dropped.
    pub usable_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub pairwise: Vec<PairwiseComparison>,
    pub scale_test: TestResult,
    pub shapes: Vec<ShapeSummary>,
    /// Some location test rejects at `alpha`.
    pub location_differs: bool,
    /// The scale test rejects at `alpha`.
    pub scale_differs: bool,
    /// Every pair of skewness intervals overlaps and every pair of kurtosis
    /// intervals overlaps.
    pub shape_homogeneous: bool,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub aligned: bool,
}

/// Runs the location, scale and shape diagnostics on `series`.
///
/// Bootstrap replica `r` draws its resampling indices from a generator keyed
/// only by `(seed, r)`, so equal-length samples are resampled at the same
/// positions and an affine change to one sample leaves its shape intervals
/// unchanged.
pub fn homogeneity_check(series: &[Series], cfg: &HomogeneityConfig) -> Result<HomogeneityReport, PoolingError> {
    if series.len() < 2 {
        return Err(PoolingError::TooFewSamples(series.len()));
    }
    if cfg.reps == 0 {
        return Err(PoolingError::NoReplicas);
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(PoolingError::InvalidAlpha(cfg.alpha));
    }
    check_labels(series.iter().map(|s| s.label.as_str()))?;
    for s in series {
        if s.values.len() < MIN_BOOTSTRAP_SIZE {
            return Err(PoolingError::SampleTooSmall { label: s.label.clone(), n: s.values.len() });
        }
        s.to_sample().map_err(|source| PoolingError::Sample { label: s.label.clone(), source })?;
    }

    let mut pairwise = Vec::new();
    for (i, x) in series.iter().enumerate() {
        for y in &series[i + 1..] {
            if cfg.aligned && x.values.len() != y.values.len() {
                return Err(PoolingError::NotAligned {
                    first: x.label.clone(),
                    n_first: x.values.len(),
                    second: y.label.clone(),
                    n_second: y.values.len(),
                });
            }
            let mean_difference = mean(&x.values) - mean(&y.values);
            let (correlation, location) = if cfg.aligned {
                (Some(pearson(&x.values, &y.values)), paired_t(&x.values, &y.values))
            } else {
                (None, welch_t(&x.values, &y.values))
            };
            pairwise.push(PairwiseComparison {
                first: x.label.clone(),
                second: y.label.clone(),
                correlation,
                location,
                mean_difference,
            });
        }
    }

    let groups: Vec<&[f64]> = series.iter().map(|s| s.values.as_slice()).collect();
    let scale_test = levene_median(&groups);
    let shapes: Vec<ShapeSummary> = series.iter().map(|s| bootstrap_shape(s, cfg)).collect();

    let mut shape_homogeneous = true;
    for (i, a) in shapes.iter().enumerate() {
        for b in &shapes[i + 1..] {
            shape_homogeneous &= a.skewness_ci.overlaps(&b.skewness_ci) && a.kurtosis_ci.overlaps(&b.kurtosis_ci);
        }
    }

    Ok(HomogeneityReport {
        location_differs: pairwise.iter().any(|p| p.location.p_value < cfg.alpha),
        scale_differs: scale_test.p_value < cfg.alpha,
        pairwise,
        scale_test,
        shapes,
        shape_homogeneous,
        alpha: cfg.alpha,
        bootstrap_reps: cfg.reps,
        seed: cfg.seed,
        aligned: cfg.aligned,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Result<(), PoolingError> {
    let mut seen = std::collections::BTreeSet::new();
    for label in labels {
        if !seen.insert(label) {
            return Err(PoolingError::DuplicateLabel(label.to_string()));
        }
    }
    Ok(())
}

fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

fn bootstrap_shape(s: &Series, cfg: &HomogeneityConfig) -> ShapeSummary {
    let n = s.values.len();
    let mut skew = Vec::with_capacity(cfg.reps);
    let mut kurt = Vec::with_capacity(cfg.reps);
    let mut resample = vec![0.0; n];
    for r in 0..cfg.reps {
        let mut rng = replica_rng(cfg.seed, r);
        for slot in resample.iter_mut() {
            *slot = s.values[rng.random_range(0..n)];
        }
        if let Some(m) = moments(&resample) {
            skew.push(m.skewness);
            kurt.push(m.excess_kurtosis);
        }
    }
    let point = moments(&s.values).expect("validated sample");
    ShapeSummary {
        label: s.label.clone(),
        n,
        moments: point,
        usable_reps: skew.len(),
        skewness_ci: percentile_interval(&mut skew, cfg.alpha),
        kurtosis_ci: percentile_interval(&mut kurt, cfg.alpha),
    }
}

/// Equal-tailed percentile interval with linear interpolation between order
/// statistics.
fn percentile_interval(values: &mut [f64], alpha: f64) -> Interval {
    if values.is_empty() {
        return Interval { lo: f64::NAN, hi: f64::NAN };
    }
    values.sort_by(f64::total_cmp);
    Interval { lo: interpolated_quantile(values, alpha / 2.0), hi: interpolated_quantile(values, 1.0 - alpha / 2.0) }
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// All samples mapped to z-scores with their own mean and sd and merged.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSample {
    pub standardized: Sample,
    pub origin_moments: BTreeMap<String, SampleMoments>,
    pub member_counts: BTreeMap<String, usize>,
}

impl PooledSample {
    pub fn len(&self) -> usize {
        self.standardized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.standardized.is_empty()
    }
}

/// Standardises each sample and merges the z-scores. Unlabelled samples are
/// named `sample1`, `sample2`, ... by position.
pub fn standardize_and_pool(samples: &[Sample]) -> Result<PooledSample, PoolingError> {
    if samples.len() < 2 {
        return Err(PoolingError::TooFewSamples(samples.len()));
    }
    let labels: Vec<String> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| s.label().map_or_else(|| format!("sample{}", i + 1), str::to_string))
        .collect();
    check_labels(labels.iter().map(String::as_str))?;

    let mut origin_moments = BTreeMap::new();
    let mut member_counts = BTreeMap::new();
    let mut z = Vec::with_capacity(samples.iter().map(Sample::len).sum());
    for (s, label) in samples.iter().zip(&labels) {
        let m = s.moments();
        z.extend(s.values().iter().map(|x| (x - m.mean) / m.sd));
        origin_moments.insert(label.clone(), m);
        member_counts.insert(label.clone(), s.len());
    }
    let standardized = Sample::new(z, Some("pooled".into()))
        .map_err(|source| PoolingError::Sample { label: "pooled".into(), source })?;
    Ok(PooledSample { standardized, origin_moments, member_counts })
}

/// Size-weighted combination of two EDF values at the same threshold.
pub fn pooled_probability(b1: f64, n1: usize, b2: f64, n2: usize) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    (n1 * b1 + n2 * b2) / (n1 + n2)
}

/// Variance of [`pooled_probability`] when both samples estimate the same
/// `theta` and the two estimators have covariance `cov`.
pub fn pooled_variance(theta: f64, n1: usize, n2: usize, cov: f64) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    let total = n1 + n2;
    theta * (1.0 - theta) / total + 2.0 * n1 * n2 * cov / (total * total)
}
