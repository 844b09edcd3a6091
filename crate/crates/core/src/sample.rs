//! Validated sample container and moment statistics.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("a sample needs at least 2 observations, got {0}")]
    EmptyOrTooSmall(usize),
    #[error("observation {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("all observations are equal; the sample has zero variance")]
    Degenerate,
}

/// Observations sorted ascending. The original input order is not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    label: Option<String>,
}

impl Sample {
    pub fn new(raw: Vec<f64>, label: Option<String>) -> Result<Self, SampleError> {
        if raw.len() < 2 {
            return Err(SampleError::EmptyOrTooSmall(raw.len()));
        }
        if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SampleError::NonFinite { index, value });
        }
        let mut values = raw;
        values.sort_by(f64::total_cmp);
        if values[0] == values[values.len() - 1] {
            return Err(SampleError::Degenerate);
        }
        Ok(Self { values, label })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn moments(&self) -> SampleMoments {
        moments(&self.values).expect("validated samples have positive variance")
    }
}

/// Convenience wrapper around [`Sample::new`].
pub fn make_sample(raw: Vec<f64>, label: Option<String>) -> Result<Sample, SampleError> {
    Sample::new(raw, label)
}

/// Labelled observations in their recorded order, as read from input. Paired
/// diagnostics need this order; [`Sample`] discards it.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self { label: label.into(), values }
    }

    pub fn to_sample(&self) -> Result<Sample, SampleError> {
        Sample::new(self.values.clone(), Some(self.label.clone()))
    }
}

/// Mean, standard deviation (n - 1 denominator) and the biased shape
/// estimators g1 = m3 / m2^1.5 and g2 = m4 / m2^2 - 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Moments of arbitrary data. `None` when there are fewer than two values or
/// the central second moment is zero, since the shape statistics are then
/// undefined. Bootstrap resamples go through here.
pub fn moments(values: &[f64]) -> Option<SampleMoments> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 <= 0.0 {
        return None;
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    Some(SampleMoments { mean, sd, skewness: m3 / m2.powf(1.5), excess_kurtosis: m4 / (m2 * m2) - 3.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sorts_on_construction() {
        let s = Sample::new(vec![3.0, 1.0, 2.0], None).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Sample::new(vec![1.0], None), Err(SampleError::EmptyOrTooSmall(1)));
        assert_eq!(Sample::new(vec![], None), Err(SampleError::EmptyOrTooSmall(0)));
        assert!(matches!(Sample::new(vec![1.0, f64::NAN], None), Err(SampleError::NonFinite { index: 1, .. })));
        assert!(matches!(Sample::new(vec![f64::INFINITY, 1.0], None), Err(SampleError::NonFinite { index: 0, .. })));
        assert_eq!(Sample::new(vec![5.0, 5.0, 5.0], None), Err(SampleError::Degenerate));
    }

    #[test]
    fn keeps_duplicates() {
        let s = Sample::new(vec![2.0, 1.0, 2.0, 1.0], None).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn simple_moments() {
        let m = Sample::new(vec![1.0, 2.0, 3.0], None).unwrap().moments();
        assert_relative_eq!(m.mean, 2.0);
        assert_relative_eq!(m.sd, 1.0);
        assert_eq!(m.skewness, 0.0);
    }

    #[test]
    fn skewed_moments_match_hand_computation() {
        // deviations -1, -1, -1, 3: m2 = 12/4, m3 = 24/4, m4 = 84/4
        let m = Sample::new(vec![0.0, 0.0, 0.0, 4.0], None).unwrap().moments();
        assert_relative_eq!(m.mean, 1.0);
        assert_relative_eq!(m.skewness, 6.0 / 3.0_f64.powf(1.5), epsilon = 1e-14);
        assert_relative_eq!(m.skewness, 1.1547005383792515, epsilon = 1e-12);
        assert_relative_eq!(m.excess_kurtosis, 21.0 / 9.0 - 3.0, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_triple_has_zero_skew() {
        let m = Sample::new(vec![-7.5, 0.0, 7.5], None).unwrap().moments();
        assert!(m.skewness.abs() < 1e-12);
    }

    fn raw_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, 3..60).prop_filter("needs spread", |v| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo > 1.0
        })
    }

    proptest! {
        #[test]
        fn sorting_is_idempotent(raw in raw_values()) {
            let s = Sample::new(raw, None).unwrap();
            let again = Sample::new(s.values().to_vec(), None).unwrap();
            prop_assert_eq!(s, again);
        }

        #[test]
        fn moments_are_affine_equivariant(raw in raw_values(), c in 0.1..10.0f64, d in -100.0..100.0f64) {
            let base = Sample::new(raw.clone(), None).unwrap().moments();
            let moved = Sample::new(raw.iter().map(|x| c * x + d).collect(), None).unwrap().moments();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            let magnitude = raw.iter().fold(0.0f64, |m, x| m.max((c * x).abs())) + d.abs();
            prop_assert!((moved.mean - (c * base.mean + d)).abs() <= 1e-12 * magnitude.max(1.0));
            prop_assert!(close(moved.sd, c * base.sd));
            prop_assert!(close(moved.skewness, base.skewness));
            prop_assert!(close(moved.excess_kurtosis, base.excess_kurtosis));
        }

        #[test]
        fn mirrored_samples_have_zero_skew(half in prop::collection::vec(0.1..100.0f64, 1..30)) {
            let mut raw: Vec<f64> = half.iter().map(|x| -x).collect();
            raw.extend(half.iter().copied());
            raw.push(0.0);
            let m = Sample::new(raw, None).unwrap().moments();
            prop_assert!(m.skewness.abs() < 1e-12);
        }
    }
}
