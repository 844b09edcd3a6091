//! Two-sided tests used by the homogeneity diagnostics.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom; the second entry only for F tests.
    pub df: Vec<f64>,
}

fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Pearson product-moment correlation with the t-based test of zero
/// correlation. Needs equal lengths of at least 3.
pub fn pearson(x: &[f64], y: &[f64]) -> TestResult {
    assert_eq!(x.len(), y.len(), "correlation needs aligned series");
    assert!(x.len() >= 3, "correlation test needs at least 3 pairs");
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p_value = if r.abs() >= 1.0 { 0.0 } else { t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df) };
    TestResult { method: "pearson".into(), statistic: r, p_value, df: vec![df] }
}

/// Paired t test on `x - y`. All-zero differences give `t = 0`, `p = 1`.
pub fn paired_t(x: &[f64], y: &[f64]) -> TestResult {
    assert_eq!(x.len(), y.len(), "paired test needs aligned series");
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let se = (variance(&d) / n).sqrt();
    let t = if md == 0.0 { 0.0 } else { md / se };
    TestResult {
        method: "paired-t".into(),
        statistic: t,
        p_value: if md == 0.0 { 1.0 } else { t_two_sided(t, n - 1.0) },
        df: vec![n - 1.0],
    }
}

/// Welch's unequal-variance t test.
pub fn welch_t(x: &[f64], y: &[f64]) -> TestResult {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (v1, v2) = (variance(x) / n1, variance(y) / n2);
    let diff = mean(x) - mean(y);
    let t = if diff == 0.0 { 0.0 } else { diff / (v1 + v2).sqrt() };
    let df = (v1 + v2).powi(2) / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
    TestResult {
        method: "welch-t".into(),
        statistic: t,
        p_value: if diff == 0.0 { 1.0 } else { t_two_sided(t, df) },
        df: vec![df],
    }
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Levene's test for equal variances using deviations from group medians
/// (the Brown–Forsythe variant).
pub fn levene_median(groups: &[&[f64]]) -> TestResult {
    let k = groups.len();
    assert!(k >= 2, "need at least two groups");
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let med = median(g);
            g.iter().map(|v| (v - med).abs()).collect()
        })
        .collect();
    let total: usize = deviations.iter().map(Vec::len).sum();
    let grand = deviations.iter().flatten().sum::<f64>() / total as f64;
    let means: Vec<f64> = deviations.iter().map(|d| mean(d)).collect();
    let between: f64 = deviations.iter().zip(&means).map(|(d, m)| d.len() as f64 * (m - grand).powi(2)).sum();
    let within: f64 = deviations.iter().zip(&means).map(|(d, m)| d.iter().map(|z| (z - m).powi(2)).sum::<f64>()).sum();
    let (df1, df2) = ((k - 1) as f64, (total - k) as f64);
    let (statistic, p_value) = if between == 0.0 {
        (0.0, 1.0)
    } else if within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (df2 / df1) * between / within;
        let dist = FisherSnedecor::new(df1, df2).expect("positive degrees of freedom");
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    TestResult { method: "levene-median".into(), statistic, p_value, df: vec![df1, df2] }
}
