//! The augmented empirical distribution: order statistics at plotting
//! positions `(i - 1/2)/n` interleaved with adjacent midpoints at `i/n`,
//! together with the reciprocal binomial variances used as fit weights.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdfError {
    #[error("tail size {size} is too large for n = {n}; it must satisfy size < n/2")]
    TailTooLarge { size: usize, n: usize },
    #[error("tail size {size} is too small; at least 2 order statistics are required")]
    TailTooSmall { size: usize },
    #[error("tail fraction {0} must lie strictly between 0 and 0.5")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Lower,
    Upper,
}

impl std::fmt::Display for TailSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailSide::Lower => "lower",
            TailSide::Upper => "upper",
        })
    }
}

/// One support point: abscissa `a` and probability level `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdfPoint {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedEdf {
    points: Vec<EdfPoint>,
    weights: Vec<f64>,
    n: usize,
}

/// Builds the `2n - 1` support points of `s`.
pub fn augment(s: &Sample) -> AugmentedEdf {
    let x = s.values();
    let n = x.len();
    let two_n = (2 * n) as f64;
    let mut points = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        // b = (2i + 1) / 2n, one rounding from the exact ratio
        points.push(EdfPoint { a: x[i], b: (2 * i + 1) as f64 / two_n });
        if i + 1 < n {
            points.push(EdfPoint { a: 0.5 * (x[i] + x[i + 1]), b: (i + 1) as f64 / n as f64 });
        }
    }
    let weights = points.iter().map(|p| binomial_weight(n, p.b)).collect();
    AugmentedEdf { points, weights, n }
}

/// `n / (b (1 - b))`, the reciprocal of the variance of an EDF value at level `b`.
pub fn binomial_weight(n: usize, b: f64) -> f64 {
    n as f64 / (b * (1.0 - b))
}

/// `#{x_i <= x} / n`.
pub fn edf_value(s: &Sample, x: f64) -> f64 {
    let count = s.values().partition_point(|&v| v <= x);
    count as f64 / s.len() as f64
}

/// Number of order statistics in a tail holding fraction `f` of the sample:
/// `round(f n)` clamped to `[2, ceil(n/2) - 1]`.
pub fn tail_count_from_fraction(n: usize, fraction: f64) -> Result<usize, EdfError> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(EdfError::InvalidFraction(fraction));
    }
    let upper = n.div_ceil(2).saturating_sub(1);
    let m = ((fraction * n as f64).round() as usize).min(upper).max(2);
    check_tail_size(m, n)?;
    Ok(m)
}

fn check_tail_size(m: usize, n: usize) -> Result<(), EdfError> {
    if m < 2 {
        return Err(EdfError::TailTooSmall { size: m });
    }
    if 2 * m >= n {
        return Err(EdfError::TailTooLarge { size: m, n });
    }
    Ok(())
}

/// A contiguous run of support points belonging to one tail.
#[derive(Debug, Clone, Copy)]
pub struct TailSlice<'a> {
    pub side: TailSide,
    /// Zero-based positions into the full point list.
    pub range: (usize, usize),
    pub points: &'a [EdfPoint],
    pub weights: &'a [f64],
}

impl TailSlice<'_> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices(&self) -> Range<usize> {
        self.range.0..self.range.1
    }

    pub fn a_range(&self) -> (f64, f64) {
        let first = self.points.first().map_or(f64::NAN, |p| p.a);
        let last = self.points.last().map_or(f64::NAN, |p| p.a);
        (first, last)
    }

    pub fn b_range(&self) -> (f64, f64) {
        let first = self.points.first().map_or(f64::NAN, |p| p.b);
        let last = self.points.last().map_or(f64::NAN, |p| p.b);
        (first, last)
    }
}

impl AugmentedEdf {
    pub fn points(&self) -> &[EdfPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Size of the sample the points were built from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First `2m - 1` points.
    pub fn lower_tail_slice(&self, m: usize) -> Result<TailSlice<'_>, EdfError> {
        check_tail_size(m, self.n)?;
        Ok(self.slice(TailSide::Lower, 0, 2 * m - 1))
    }

    /// Last `2l - 1` points (one-based indices `2n - 2l + 1 ..= 2n - 1`).
    pub fn upper_tail_slice(&self, l: usize) -> Result<TailSlice<'_>, EdfError> {
        check_tail_size(l, self.n)?;
        let end = 2 * self.n - 1;
        Ok(self.slice(TailSide::Upper, end - (2 * l - 1), end))
    }

    pub fn tail_slice(&self, side: TailSide, size: usize) -> Result<TailSlice<'_>, EdfError> {
        match side {
            TailSide::Lower => self.lower_tail_slice(size),
            TailSide::Upper => self.upper_tail_slice(size),
        }
    }

    /// Rebuilds the slice a fit was made on from its stored index range.
    pub fn slice_by_range(&self, side: TailSide, range: Range<usize>) -> TailSlice<'_> {
        self.slice(side, range.start, range.end)
    }

    fn slice(&self, side: TailSide, start: usize, end: usize) -> TailSlice<'_> {
        TailSlice { side, range: (start, end), points: &self.points[start..end], weights: &self.weights[start..end] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec(), None).unwrap()
    }

    #[test]
    fn augments_three_points() {
        let e = augment(&sample(&[3.0, 1.0, 2.0]));
        let expected = [(1.0, 1.0 / 6.0), (1.5, 1.0 / 3.0), (2.0, 0.5), (2.5, 2.0 / 3.0), (3.0, 5.0 / 6.0)];
        assert_eq!(e.len(), 5);
        for (p, (a, b)) in e.points().iter().zip(expected) {
            assert_eq!(p.a, a);
            assert_relative_eq!(p.b, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn ties_share_abscissae() {
        let e = Sample::new(vec![5.0, 5.0, 6.0], None).map(|s| augment(&s)).unwrap();
        assert_eq!(e.points()[0].a, 5.0);
        assert_eq!(e.points()[1].a, 5.0);
        assert_eq!(e.points()[2].a, 5.0);
        assert!(e.points()[0].b < e.points()[1].b && e.points()[1].b < e.points()[2].b);
    }

    #[test]
    fn edf_counts() {
        let s = sample(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(edf_value(&s, 2.0), 2.0 / 3.0);
        assert_eq!(edf_value(&s, 0.5), 0.0);
        assert_eq!(edf_value(&s, 10.0), 1.0);
        assert_relative_eq!(edf_value(&sample(&[1.0, 1.0, 2.0]), 1.0), 2.0 / 3.0);
    }

    #[test]
    fn weights_follow_binomial_variance() {
        assert_relative_eq!(binomial_weight(100, 0.5), 400.0);
        assert_relative_eq!(binomial_weight(4, 0.125), 4.0 / (0.125 * 0.875), epsilon = 1e-12);
        assert_relative_eq!(binomial_weight(4, 0.125), 36.57142857142857, epsilon = 1e-12);
        let e = augment(&sample(&[1.0, 4.0, 2.0, 8.0, 5.0]));
        let w = e.weights();
        for i in 0..w.len() {
            assert_relative_eq!(w[i], w[w.len() - 1 - i], max_relative = 1e-14);
            assert!(w[i] > 0.0);
        }
    }

    #[test]
    fn slices_select_expected_indices() {
        let s = sample(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let e = augment(&s);
        let lower = e.lower_tail_slice(3).unwrap();
        let bs: Vec<f64> = lower.points.iter().map(|p| p.b).collect();
        assert_eq!(bs.len(), 5);
        for (b, want) in bs.iter().zip([0.05, 0.1, 0.15, 0.2, 0.25]) {
            assert_relative_eq!(*b, want, epsilon = 1e-15);
        }
        let upper = e.upper_tail_slice(3).unwrap();
        // one-based 15..=19
        assert_eq!(upper.indices(), 14..19);
        assert_eq!(upper.len(), 5);
        assert_eq!(e.lower_tail_slice(5).unwrap_err(), EdfError::TailTooLarge { size: 5, n: 10 });
        let six = augment(&sample(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(six.upper_tail_slice(1).unwrap_err(), EdfError::TailTooSmall { size: 1 });
    }

    #[test]
    fn tail_count_rounds_and_clamps() {
        assert_eq!(tail_count_from_fraction(116, 0.25), Ok(29));
        assert_eq!(tail_count_from_fraction(88, 0.25), Ok(22));
        assert_eq!(tail_count_from_fraction(10, 0.49), Ok(4));
        assert_eq!(tail_count_from_fraction(20, 0.01), Ok(2));
        assert!(tail_count_from_fraction(4, 0.25).is_err());
        assert_eq!(tail_count_from_fraction(20, 0.5), Err(EdfError::InvalidFraction(0.5)));
        assert_eq!(tail_count_from_fraction(20, 0.0), Err(EdfError::InvalidFraction(0.0)));
    }

    proptest! {
        #[test]
        fn augmentation_layout(raw in prop::collection::vec(-50.0..50.0f64, 2..40)) {
            prop_assume!(raw.iter().any(|&x| x != raw[0]));
            let s = Sample::new(raw, None).unwrap();
            let n = s.len();
            let e = augment(&s);
            prop_assert_eq!(e.len(), 2 * n - 1);
            for (k, p) in e.points().iter().enumerate() {
                // k is zero-based: odd one-based positions are order statistics
                let expected = if k % 2 == 0 {
                    (k + 1) as f64 / (2 * n) as f64
                } else {
                    k.div_ceil(2) as f64 / n as f64
                };
                prop_assert_eq!(p.b.to_bits(), expected.to_bits());
                prop_assert!(p.b > 0.0 && p.b < 1.0);
            }
            for pair in e.points().windows(2) {
                prop_assert!(pair[0].b < pair[1].b);
                prop_assert!(pair[0].a <= pair[1].a);
            }
        }

        #[test]
        fn tails_do_not_overlap(n in 5usize..200, m in 2usize..100, l in 2usize..100) {
            prop_assume!(2 * m < n && 2 * l < n && m + l < n);
            let s = Sample::new((0..n).map(|i| i as f64).collect(), None).unwrap();
            let e = augment(&s);
            let lower = e.lower_tail_slice(m).unwrap();
            let upper = e.upper_tail_slice(l).unwrap();
            prop_assert_eq!(lower.len(), 2 * m - 1);
            prop_assert_eq!(upper.len(), 2 * l - 1);
            prop_assert!(lower.indices().end <= upper.indices().start);
        }
    }
}
