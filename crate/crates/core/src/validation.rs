//! Reproduction of the two bundled case studies and Monte Carlo checks of
//! the EDF and pooled-estimator properties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curves::CurveFamily;
use crate::edf::{edf_value, TailSide};
use crate::fit::Weighting;
use crate::ingest::{from_reader, InputFormat};
use crate::pipeline::{run_series, Mode, RunConfig, RunReport, SideConfig};
use crate::pooling::{pooled_probability, pooled_variance};
use crate::sample::{Sample, Series};

pub const WAFER_CSV: &str = include_str!("../data/wafer.csv");
pub const STATIONS_CSV: &str = include_str!("../data/stations.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Wafer,
    Stations,
}

impl Dataset {
    pub fn series(self) -> Vec<Series> {
        let text = match self {
            Dataset::Wafer => WAFER_CSV,
            Dataset::Stations => STATIONS_CSV,
        };
        from_reader(text.as_bytes(), InputFormat::Wide).expect("embedded data parses")
    }
}

/// Quantity read from a run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Estimate at `p`, back-transformed to `sample` when given.
    Quantile { p: f64, sample: Option<String> },
    /// Unweighted residual sum of squares of a tail fit.
    TailSse(TailSide),
    /// Correlation test p-value of the first sample pair.
    CorrelationPValue,
}

impl Metric {
    pub fn read(&self, r: &RunReport) -> Option<f64> {
        match self {
            Metric::Quantile { p, sample } => {
                let e = r.estimate(*p)?;
                match sample {
                    None => Some(e.value),
                    Some(label) => e.per_sample_values.as_ref()?.get(label).copied(),
                }
            }
            Metric::TailSse(side) => r.fit(*side).map(|f| f.sse),
            Metric::CorrelationPValue => {
                let h = r.homogeneity.as_ref()?;
                h.pairwise.first()?.correlation.as_ref().map(|c| c.p_value)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub fn accepts(self, expected: f64, actual: f64) -> bool {
        let d = (actual - expected).abs();
        match self {
            Tolerance::Relative(r) => d <= r * expected.abs(),
            Tolerance::Absolute(a) => d <= a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    pub name: String,
    pub metric: Metric,
    pub expected: f64,
    pub tolerance: Tolerance,
    /// Where the expected value comes from.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudySpec {
    pub dataset: Dataset,
    pub config: RunConfig,
    pub expected: Vec<Expectation>,
}

fn expect(name: &str, metric: Metric, expected: f64, tolerance: Tolerance, source: &str) -> Expectation {
    Expectation { name: name.into(), metric, expected, tolerance, source: source.into() }
}

impl CaseStudySpec {
    /// Particle counts on 116 wafers. Control limits at the 3-sigma
    /// equivalent probabilities, quadratic lower tail, Gumbel upper tail.
    pub fn wafer() -> Self {
        let config = RunConfig {
            probabilities: vec![0.00135, 0.99865],
            lower: SideConfig { family: Some(CurveFamily::Quadratic), weighting: Weighting::Unweighted, count: None },
            upper: SideConfig { family: Some(CurveFamily::Gumbel), weighting: Weighting::EdfWeights, count: None },
            ..RunConfig::default()
        };
        let src = "published wafer control-limit study";
        let q = |p| Metric::Quantile { p, sample: None };
        Self {
            dataset: Dataset::Wafer,
            config,
            expected: vec![
                expect("lower control limit", q(0.00135), 2.8022, Tolerance::Relative(0.02), src),
                expect("upper control limit", q(0.99865), 92.3982, Tolerance::Relative(0.02), src),
                expect(
                    "lower tail squared error",
                    Metric::TailSse(TailSide::Lower),
                    0.012,
                    Tolerance::Relative(0.5),
                    src,
                ),
                expect(
                    "upper tail squared error",
                    Metric::TailSse(TailSide::Upper),
                    0.006,
                    Tolerance::Relative(0.5),
                    src,
                ),
            ],
        }
    }

    /// Annual maximum precipitation at two stations, pooled upper Gumbel,
    /// return periods 1000, 100 and 20 years.
    pub fn stations(seed: u64) -> Self {
        let config = RunConfig {
            mode: Mode::Pooled,
            return_periods: vec![1000.0, 100.0, 20.0],
            upper: SideConfig { family: Some(CurveFamily::Gumbel), ..SideConfig::default() },
            aligned: true,
            seed,
            ..RunConfig::default()
        };
        let src = "published two-station precipitation study";
        let q = |p, s: &str| Metric::Quantile { p, sample: Some(s.to_string()) };
        let tol = Tolerance::Relative(0.05);
        Self {
            dataset: Dataset::Stations,
            config,
            expected: vec![
                expect("25081 T=1000", q(0.999, "25081"), 295.031, tol, src),
                expect("25081 T=100", q(0.99, "25081"), 218.54, tol, src),
                expect("25081 T=20", q(0.95, "25081"), 164.51, tol, src),
                expect("25078 T=1000", q(0.999, "25078"), 429.51, tol, src),
                expect("25078 T=100", q(0.99, "25078"), 311.14, tol, src),
                expect("25078 T=20", q(0.95, "25078"), 227.51, tol, src),
                expect("correlation p-value", Metric::CorrelationPValue, 0.0031, Tolerance::Absolute(0.001), src),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub name: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub abs_delta: Option<f64>,
    pub rel_delta: Option<f64>,
    pub tolerance: Tolerance,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyOutcome {
    pub dataset: Dataset,
    pub passed: bool,
    pub deltas: Vec<Delta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub notes: Vec<String>,
}

/// Runs the pipeline in-process and compares every expectation. Failures
/// are reported, never raised.
pub fn run_case_study(spec: &CaseStudySpec) -> CaseStudyOutcome {
    let mut notes = Vec::new();
    if spec.dataset == Dataset::Stations {
        notes.push("tail fraction applied to the pooled sample size".to_string());
    }
    let report = match run_series(&spec.config, &spec.dataset.series()) {
        Ok(out) => out.report,
        Err(e) => {
            return CaseStudyOutcome {
                dataset: spec.dataset,
                passed: false,
                deltas: Vec::new(),
                error: Some(e.to_string()),
                notes,
            }
        }
    };
    let deltas: Vec<Delta> = spec
        .expected
        .iter()
        .map(|x| {
            let actual = x.metric.read(&report);
            let abs_delta = actual.map(|a| a - x.expected);
            Delta {
                name: x.name.clone(),
                expected: x.expected,
                actual,
                abs_delta,
                rel_delta: abs_delta.map(|d| if x.expected == 0.0 { d } else { d / x.expected.abs() }),
                tolerance: x.tolerance,
                passed: actual.is_some_and(|a| x.tolerance.accepts(x.expected, a)),
            }
        })
        .collect();
    CaseStudyOutcome { dataset: spec.dataset, passed: deltas.iter().all(|d| d.passed), deltas, error: None, notes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Reduced replica counts for quick checks.
    Small,
    #[default]
    Full,
}

impl std::str::FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(Budget::Small),
            "full" => Ok(Budget::Full),
            other => Err(format!("unknown budget '{other}' (expected small or full)")),
        }
    }
}

impl Budget {
    pub fn replicas(self) -> usize {
        match self {
            Budget::Small => 2_000,
            Budget::Full => 10_000,
        }
    }

    pub fn sup_replicas(self) -> usize {
        match self {
            Budget::Small => 200,
            Budget::Full => 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertySummary {
    pub seed: u64,
    pub budget: Budget,
    pub replicas: usize,
    pub passed: bool,
    pub properties: Vec<PropertyOutcome>,
}

pub const EDF_SAMPLE_SIZE: usize = 50;
pub const EDF_THRESHOLDS: [f64; 3] = [-1.0, 0.0, 1.0];
pub const SUP_SIZES: [usize; 3] = [50, 200, 800];
pub const POOLED_CORRELATION: f64 = 0.6;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn normal_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Mean and variance of the EDF at fixed thresholds over normal samples.
pub fn edf_properties(seed: u64, replicas: usize) -> Vec<PropertyOutcome> {
    let phi = std_normal();
    let mut rng = rng_for(seed, 1);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(replicas); EDF_THRESHOLDS.len()];
    for _ in 0..replicas {
        let s = Sample::new(normal_sample(&mut rng, EDF_SAMPLE_SIZE), None).expect("continuous draws");
        for (k, &x) in EDF_THRESHOLDS.iter().enumerate() {
            values[k].push(edf_value(&s, x));
        }
    }
    let n = EDF_SAMPLE_SIZE as f64;
    let mut mean_ok = true;
    let mut var_ok = true;
    let mut mean_detail = Vec::new();
    let mut var_detail = Vec::new();
    for (k, &x) in EDF_THRESHOLDS.iter().enumerate() {
        let f = phi.cdf(x);
        let theory = f * (1.0 - f) / n;
        let (m, v) = mean_var(&values[k]);
        let z = (m - f) / (theory / replicas as f64).sqrt();
        mean_ok &= z.abs() <= 4.0;
        mean_detail.push(format!("x={x}: mean {m:.5} vs F {f:.5} ({z:+.2} SE)"));
        let ratio = v / theory;
        var_ok &= (0.9..=1.1).contains(&ratio);
        var_detail.push(format!("x={x}: variance ratio {ratio:.4}"));
    }
    vec![
        PropertyOutcome { name: "edf_unbiased".into(), passed: mean_ok, detail: mean_detail.join("; ") },
        PropertyOutcome { name: "edf_variance".into(), passed: var_ok, detail: var_detail.join("; ") },
    ]
}

/// Kolmogorov distance between the EDF of `sorted` and the normal CDF.
pub fn sup_distance(sorted: &[f64], cdf: &Normal) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn glivenko_cantelli(seed: u64, replicas: usize) -> PropertyOutcome {
    let phi = std_normal();
    let mut rng = rng_for(seed, 2);
    let means: Vec<f64> = SUP_SIZES
        .iter()
        .map(|&n| {
            (0..replicas)
                .map(|_| {
                    let s = Sample::new(normal_sample(&mut rng, n), None).expect("continuous draws");
                    sup_distance(s.values(), &phi)
                })
                .sum::<f64>()
                / replicas as f64
        })
        .collect();
    let passed = means.windows(2).all(|w| w[1] < w[0]);
    let detail = SUP_SIZES.iter().zip(&means).map(|(n, d)| format!("n={n}: {d:.5}")).collect::<Vec<_>>().join(", ");
    PropertyOutcome { name: "sup_distance_decreasing".into(), passed, detail }
}

/// `P(X <= 0, Y <= 0)` for a standard bivariate normal with correlation `rho`.
pub fn orthant_probability(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
}

/// Pooled estimator at threshold 0 over correlated paired samples.
pub fn pooled_properties(seed: u64, replicas: usize) -> Vec<PropertyOutcome> {
    let n = EDF_SAMPLE_SIZE;
    let rho = POOLED_CORRELATION;
    let mut rng = rng_for(seed, 3);
    let c = (1.0 - rho * rho).sqrt();
    let estimates: Vec<f64> = (0..replicas)
        .map(|_| {
            let x = normal_sample(&mut rng, n);
            let e = normal_sample(&mut rng, n);
            let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| rho * a + c * b).collect();
            let b1 = x.iter().filter(|v| **v <= 0.0).count() as f64 / n as f64;
            let b2 = y.iter().filter(|v| **v <= 0.0).count() as f64 / n as f64;
            pooled_probability(b1, n, b2, n)
        })
        .collect();
    let theta = 0.5;
    let cov = (orthant_probability(rho) - theta * theta) / n as f64;
    let var = pooled_variance(theta, n, n, cov);
    let (m, v) = mean_var(&estimates);
    let z = (m - theta) / (var / replicas as f64).sqrt();
    let ratio = v / var;
    vec![
        PropertyOutcome {
            name: "pooled_unbiased".into(),
            passed: z.abs() <= 4.0,
            detail: format!("rho={rho}: mean {m:.5} vs {theta} ({z:+.2} SE)"),
        },
        PropertyOutcome {
            name: "pooled_variance".into(),
            passed: (0.85..=1.15).contains(&ratio),
            detail: format!("rho={rho}: variance ratio {ratio:.4}"),
        },
    ]
}

pub fn run_property_suite(seed: u64, budget: Budget) -> PropertySummary {
    let replicas = budget.replicas();
    let mut properties = edf_properties(seed, replicas);
    properties.push(glivenko_cantelli(seed, budget.sup_replicas()));
    properties.extend(pooled_properties(seed, replicas));
    PropertySummary { seed, budget, replicas, passed: properties.iter().all(|p| p.passed), properties }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub passed: bool,
    pub case_studies: Vec<CaseStudyOutcome>,
    pub properties: PropertySummary,
}

pub fn validate_all(seed: u64, budget: Budget) -> ValidationSummary {
    let case_studies = vec![run_case_study(&CaseStudySpec::wafer()), run_case_study(&CaseStudySpec::stations(seed))];
    let properties = run_property_suite(seed, budget);
    ValidationSummary { passed: properties.passed && case_studies.iter().all(|c| c.passed), case_studies, properties }
}
