//! End-to-end runs: read samples, optionally check homogeneity and pool,
//! fit the requested tails, invert at the requested probabilities and
//! collect everything into one report.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::CurveFamily;
use crate::edf::{augment, AugmentedEdf, TailSide};
use crate::fit::{fit_tail, FitError, FittedCurve, OptimizerSettings, TailFitConfig, TailSize, Weighting};
use crate::ingest::{ingest, IngestError, InputFormat};
use crate::plot::emit_plot_data;
use crate::pooling::{homogeneity_check, standardize_and_pool, HomogeneityConfig, HomogeneityReport, PoolingError};
use crate::quantile::{back_transform, estimate_quantile, return_period_probability, QuantileError, SideHint};
use crate::sample::{Sample, SampleError, SampleMoments, Series};

pub const TOOL_NAME: &str = "raqe";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Single,
    Pooled,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Mode::Single),
            "pooled" => Ok(Mode::Pooled),
            other => Err(format!("unknown mode '{other}' (expected single or pooled)")),
        }
    }
}

/// Settings for one tail. A tail is fitted when its family is set or when a
/// requested probability routes to it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SideConfig {
    pub family: Option<CurveFamily>,
    pub weighting: Weighting,
    /// Number of order statistics in the tail; overrides `tail_fraction`.
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    pub mode: Mode,
    pub lower: SideConfig,
    pub upper: SideConfig,
    pub tail_fraction: f64,
    pub probabilities: Vec<f64>,
    pub return_periods: Vec<f64>,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub aligned: bool,
    pub override_homogeneity: bool,
    pub out: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            format: InputFormat::Wide,
            mode: Mode::Single,
            lower: SideConfig::default(),
            upper: SideConfig::default(),
            tail_fraction: 0.25,
            probabilities: Vec::new(),
            return_periods: Vec::new(),
            bootstrap_reps: 1000,
            seed: 0,
            alpha: 0.05,
            aligned: false,
            override_homogeneity: false,
            out: None,
            plot_data: None,
        }
    }
}

/// Default family for a tail fitted only because a probability routed to it.
pub fn default_family(side: TailSide) -> CurveFamily {
    match side {
        TailSide::Lower => CurveFamily::Quadratic,
        TailSide::Upper => CurveFamily::Gumbel,
    }
}

/// A probability to estimate, remembering the return period it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub p: f64,
    pub return_period: Option<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.probabilities.is_empty() && self.return_periods.is_empty() {
            return Err(PipelineError::Config(
                "give at least one probability (--p) or return period (--return-periods)".into(),
            ));
        }
        for &p in &self.probabilities {
            if !(p > 0.0 && p < 1.0) {
                return Err(PipelineError::Config(format!("probability {p} must lie strictly between 0 and 1")));
            }
        }
        for &t in &self.return_periods {
            if return_period_probability(t).is_none() {
                return Err(PipelineError::Config(format!("return period {t} must be a finite number greater than 1")));
            }
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(PipelineError::Config(format!(
                "tail fraction {} must lie strictly between 0 and 0.5",
                self.tail_fraction
            )));
        }
        if self.mode == Mode::Pooled {
            if self.bootstrap_reps == 0 {
                return Err(PipelineError::Config("bootstrap replicas must be positive".into()));
            }
            if !(self.alpha > 0.0 && self.alpha < 1.0) {
                return Err(PipelineError::Config(format!("alpha {} must lie strictly between 0 and 1", self.alpha)));
            }
        }
        Ok(())
    }

    /// Probabilities first, then return periods, each in the given order.
    pub fn targets(&self) -> Vec<Target> {
        let direct = self.probabilities.iter().map(|&p| Target { p, return_period: None });
        let periods = self
            .return_periods
            .iter()
            .filter_map(|&t| return_period_probability(t).map(|p| Target { p, return_period: Some(t) }));
        direct.chain(periods).collect()
    }

    fn side(&self, side: TailSide) -> &SideConfig {
        match side {
            TailSide::Lower => &self.lower,
            TailSide::Upper => &self.upper,
        }
    }

    fn tail_size(&self, side: TailSide) -> TailSize {
        self.side(side).count.map_or(TailSize::Fraction(self.tail_fraction), TailSize::Count)
    }

    /// Tails to fit with their families, lower first.
    pub fn fitted_sides(&self) -> Vec<(TailSide, CurveFamily)> {
        let targets = self.targets();
        [TailSide::Lower, TailSide::Upper]
            .into_iter()
            .filter_map(|side| {
                let routed = targets.iter().any(|t| SideHint::Auto.route(t.p) == side);
                match self.side(side).family {
                    Some(f) => Some((side, f)),
                    None if routed => Some((side, default_family(side))),
                    None => None,
                }
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("sample '{label}': {source}")]
    Sample {
        label: String,
        #[source]
        source: SampleError,
    },
    #[error("{side} tail fit failed: {source}")]
    Fit {
        side: TailSide,
        #[source]
        source: FitError,
    },
    #[error(transparent)]
    Quantile(#[from] QuantileError),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error("samples do not share a shape: {0}")]
    NonHomogeneous(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 configuration, 3 data, 4 homogeneity refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Quantile(QuantileError::SideMismatch { .. }) => 2,
            PipelineError::NonHomogeneous(_) => 4,
            _ => 3,
        }
    }

    pub fn remediation(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "check the command-line flags and the config file",
            PipelineError::Ingest(_) => {
                "fix the input file; wide CSV needs a header row of labels, long CSV needs label,value rows"
            }
            PipelineError::Sample { .. } => "each sample needs at least two finite, not all equal, values",
            PipelineError::Fit { .. } => {
                "use a larger tail (--tail-fraction or an explicit count) or a different family"
            }
            PipelineError::Quantile(QuantileError::SideMismatch { .. }) => {
                "tail fits only answer extreme probabilities; request p in a fitted tail or fit that tail explicitly"
            }
            PipelineError::Quantile(_) => {
                "the fitted curve cannot reach this probability; try another family or tail size"
            }
            PipelineError::Pooling(_) => {
                "pooling needs two or more distinctly labelled samples; --aligned needs equal lengths"
            }
            PipelineError::NonHomogeneous(_) => {
                "pass --override-homogeneity to pool anyway, or run each sample in single mode"
            }
            PipelineError::Io { .. } => "check that the output directory exists and is writable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleInfo {
    pub label: String,
    pub n: usize,
    pub moments: SampleMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub side: TailSide,
    pub family: CurveFamily,
    pub weighting: Weighting,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// Order statistics in the tail (m or l).
    pub tail_count: usize,
    pub tail_points: usize,
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    pub wsse: f64,
    pub mse: f64,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitSummary {
    fn new(f: &FittedCurve) -> Self {
        Self {
            side: f.side,
            family: f.family,
            weighting: f.weighting,
            param_names: f.family.param_names().iter().map(|s| s.to_string()).collect(),
            params: f.params.clone(),
            tail_count: f.point_count().div_ceil(2),
            tail_points: f.point_count(),
            a_range: f.a_range,
            b_range: f.b_range,
            wsse: f.wsse,
            mse: f.mse,
            sse: f.sse,
            converged: f.converged,
            iterations: f.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_period: Option<f64>,
    pub side: TailSide,
    /// Standardized scale in pooled mode.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample_values: Option<BTreeMap<String, f64>>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub samples: Vec<SampleInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_n: Option<usize>,
    pub fits: Vec<FitSummary>,
    pub estimates: Vec<EstimateEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<HomogeneityReport>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn fit(&self, side: TailSide) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.side == side)
    }

    /// First estimate at `p` (compared to 1e-12).
    pub fn estimate(&self, p: f64) -> Option<&EstimateEntry> {
        self.estimates.iter().find(|e| (e.p - p).abs() < 1e-12)
    }
}

/// Full output of a run, including the fitted data needed for plotting.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub edf: AugmentedEdf,
    pub curves: Vec<FittedCurve>,
}

/// Reads the inputs named in `cfg`, runs, and writes the report and plot
/// data when paths are set.
pub fn run(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    if cfg.inputs.is_empty() {
        return Err(PipelineError::Config("no input file given (--input)".into()));
    }
    let mut series = Vec::new();
    for path in &cfg.inputs {
        series.extend(ingest(path, cfg.format)?);
    }
    let out = run_series(cfg, &series)?;
    if let Some(path) = &cfg.plot_data {
        let extremes: Vec<f64> = out.report.estimates.iter().map(|e| e.value).collect();
        emit_plot_data(&out.edf, &out.curves, &extremes, path)
            .map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
    }
    if let Some(path) = &cfg.out {
        std::fs::write(path, out.report.to_json())
            .map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
    }
    Ok(out.report)
}

/// Runs on samples already in memory. Input paths in `cfg` are only echoed.
pub fn run_series(cfg: &RunConfig, series: &[Series]) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let samples = series
        .iter()
        .map(|s| {
            s.to_sample()
                .map(|x| x.with_label(s.label.clone()))
                .map_err(|source| PipelineError::Sample { label: s.label.clone(), source })
        })
        .collect::<Result<Vec<Sample>, _>>()?;
    let infos = samples
        .iter()
        .map(|s| SampleInfo { label: s.label().unwrap_or_default().to_string(), n: s.len(), moments: s.moments() })
        .collect();

    let (fit_sample, homogeneity, origin) = match cfg.mode {
        Mode::Single => {
            if samples.len() != 1 {
                return Err(PipelineError::Config(format!(
                    "single mode takes exactly one sample, the input has {}; use --mode pooled",
                    samples.len()
                )));
            }
            (samples[0].clone(), None, None)
        }
        Mode::Pooled => {
            let hcfg =
                HomogeneityConfig { reps: cfg.bootstrap_reps, alpha: cfg.alpha, seed: cfg.seed, aligned: cfg.aligned };
            let report = homogeneity_check(series, &hcfg)?;
            if !report.shape_homogeneous {
                let detail = shape_disagreement(&report);
                if !cfg.override_homogeneity {
                    return Err(PipelineError::NonHomogeneous(detail));
                }
                warnings.push(format!("pooling despite differing shapes ({detail}); homogeneity override in effect"));
            }
            let pooled = standardize_and_pool(&samples)?;
            (pooled.standardized.clone(), Some(report), Some(pooled.origin_moments))
        }
    };

    let edf = augment(&fit_sample);
    let optimizer = OptimizerSettings { seed: cfg.seed, ..OptimizerSettings::default() };
    let mut curves = Vec::new();
    for (side, family) in cfg.fitted_sides() {
        let tcfg = TailFitConfig::new(side, family)
            .size(cfg.tail_size(side))
            .weighting(cfg.side(side).weighting)
            .optimizer(optimizer);
        let f = fit_tail(&edf, &tcfg).map_err(|source| PipelineError::Fit { side, source })?;
        if !f.converged {
            warnings.push(format!(
                "{side} {family} fit stopped after {} iterations without meeting the tolerance",
                f.iterations
            ));
        }
        curves.push(f);
    }

    let mut estimates = Vec::new();
    for t in cfg.targets() {
        let side = SideHint::Auto.route(t.p);
        let f = curves.iter().find(|c| c.side == side).expect("routed sides are fitted");
        let q = estimate_quantile(f, t.p, SideHint::Auto)?;
        warnings.extend(q.warnings.iter().cloned());
        estimates.push(EstimateEntry {
            p: t.p,
            return_period: t.return_period,
            side,
            value: q.value,
            per_sample_values: origin.as_ref().map(|m| back_transform(q.value, m)),
            extrapolated: q.extrapolated,
        });
    }

    let mut seen = std::collections::HashSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    let report = RunReport {
        mode: cfg.mode,
        samples: infos,
        pooled_n: origin.as_ref().map(|_| fit_sample.len()),
        fits: curves.iter().map(FitSummary::new).collect(),
        estimates,
        homogeneity,
        warnings,
        provenance: Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed: cfg.seed,
            config: cfg.clone(),
        },
    };
    Ok(RunOutput { report, edf, curves })
}

fn shape_disagreement(r: &HomogeneityReport) -> String {
    let mut parts = Vec::new();
    for (i, a) in r.shapes.iter().enumerate() {
        for b in &r.shapes[i + 1..] {
            if !a.skewness_ci.overlaps(&b.skewness_ci) {
                parts.push(format!("skewness intervals of '{}' and '{}' are disjoint", a.label, b.label));
            }
            if !a.kurtosis_ci.overlaps(&b.kurtosis_ci) {
                parts.push(format!("kurtosis intervals of '{}' and '{}' are disjoint", a.label, b.label));
            }
        }
    }
    parts.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::from_reader;

    fn wafer() -> Vec<Series> {
        from_reader(include_str!("../data/wafer.csv").as_bytes(), InputFormat::Wide).unwrap()
    }

    fn stations() -> Vec<Series> {
        from_reader(include_str!("../data/stations.csv").as_bytes(), InputFormat::Wide).unwrap()
    }

    #[test]
    fn targets_and_sides() {
        let cfg =
            RunConfig { probabilities: vec![0.01], return_periods: vec![20.0, 100.0, 1000.0], ..RunConfig::default() };
        let ps: Vec<f64> = cfg.targets().iter().map(|t| t.p).collect();
        assert_eq!(ps, vec![0.01, 0.95, 0.99, 0.999]);
        assert_eq!(
            cfg.fitted_sides(),
            vec![(TailSide::Lower, CurveFamily::Quadratic), (TailSide::Upper, CurveFamily::Gumbel)]
        );
        let cfg = RunConfig {
            probabilities: vec![0.99],
            lower: SideConfig { family: Some(CurveFamily::Logistic), ..SideConfig::default() },
            ..RunConfig::default()
        };
        assert_eq!(cfg.fitted_sides().len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(matches!(RunConfig::default().validate(), Err(PipelineError::Config(_))));
        let bad = |cfg: RunConfig| cfg.validate().unwrap_err().exit_code();
        assert_eq!(bad(RunConfig { return_periods: vec![1.0], ..RunConfig::default() }), 2);
        assert_eq!(bad(RunConfig { probabilities: vec![1.0], ..RunConfig::default() }), 2);
    }

    #[test]
    fn config_deserializes_with_defaults() {
        let cfg: RunConfig = serde_json::from_value(serde_json::json!({
            "inputs": ["a.csv"],
            "mode": "pooled",
            "probabilities": [0.99],
            "seed": 7,
            "upper": {"family": "gumbel", "weighting": "unweighted"}
        }))
        .unwrap();
        assert_eq!(cfg.mode, Mode::Pooled);
        assert_eq!(cfg.upper.family, Some(CurveFamily::Gumbel));
        assert_eq!(cfg.upper.weighting, Weighting::Unweighted);
        assert_eq!(cfg.tail_fraction, 0.25);
        assert_eq!(cfg.bootstrap_reps, 1000);
        assert!(serde_json::from_value::<RunConfig>(serde_json::json!({"tail_fractoin": 0.2})).is_err());
    }

    #[test]
    fn single_wafer_run() {
        let cfg = RunConfig {
            probabilities: vec![0.00135, 0.99865],
            lower: SideConfig { family: Some(CurveFamily::Quadratic), weighting: Weighting::Unweighted, count: None },
            upper: SideConfig { family: Some(CurveFamily::Gumbel), ..SideConfig::default() },
            ..RunConfig::default()
        };
        let out = run_series(&cfg, &wafer()).unwrap();
        let r = &out.report;
        assert_eq!(r.fits.len(), 2);
        assert_eq!(r.fits[0].tail_count, 29);
        let lo = r.estimate(0.00135).unwrap().value;
        let hi = r.estimate(0.99865).unwrap().value;
        assert!((lo - 2.8022).abs() < 1e-3, "{lo}");
        assert!((hi - 92.3982).abs() < 1e-3, "{hi}");
    }

    #[test]
    fn central_probability_is_refused() {
        let cfg = RunConfig { probabilities: vec![0.5], ..RunConfig::default() };
        let err = run_series(&cfg, &wafer()).unwrap_err();
        assert!(matches!(err, PipelineError::Quantile(QuantileError::SideMismatch { .. })), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn single_mode_rejects_many_samples() {
        let cfg = RunConfig { probabilities: vec![0.99], ..RunConfig::default() };
        assert!(matches!(run_series(&cfg, &stations()), Err(PipelineError::Config(_))));
    }

    #[test]
    fn pooled_stations_run() {
        let cfg = RunConfig {
            mode: Mode::Pooled,
            return_periods: vec![1000.0, 100.0, 20.0],
            aligned: true,
            seed: 42,
            ..RunConfig::default()
        };
        let r = run_series(&cfg, &stations()).unwrap().report;
        assert_eq!(r.pooled_n, Some(88));
        assert_eq!(r.fits[0].tail_count, 22);
        let h = r.homogeneity.as_ref().unwrap();
        assert!(h.shape_homogeneous);
        let e = r.estimate(0.999).unwrap();
        let per = e.per_sample_values.as_ref().unwrap();
        assert!((per["25078"] - 429.515).abs() < 0.01, "{per:?}");
        assert!((per["25081"] - 295.031).abs() < 0.01, "{per:?}");
    }

    #[test]
    fn gate_refuses_without_override() {
        // heavy right skew against a mirrored copy
        let a: Vec<f64> = (0..60).map(|i| (i as f64 / 8.0).exp()).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let series = vec![Series::new("a", a), Series::new("b", b)];
        let mut cfg =
            RunConfig { mode: Mode::Pooled, probabilities: vec![0.99], bootstrap_reps: 200, ..RunConfig::default() };
        let err = run_series(&cfg, &series).unwrap_err();
        assert_eq!(err.exit_code(), 4, "{err}");
        cfg.override_homogeneity = true;
        let r = run_series(&cfg, &series).unwrap().report;
        assert!(r.warnings.iter().any(|w| w.contains("override")));
    }

    #[test]
    fn deterministic_json() {
        let cfg = RunConfig {
            mode: Mode::Pooled,
            return_periods: vec![100.0],
            aligned: true,
            seed: 9,
            bootstrap_reps: 100,
            ..RunConfig::default()
        };
        let a = run_series(&cfg, &stations()).unwrap().report.to_json();
        let b = run_series(&cfg, &stations()).unwrap().report.to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn warnings_appear_once() {
        let cfg = RunConfig { probabilities: vec![0.999999, 0.999999], ..RunConfig::default() };
        let r = run_series(&cfg, &wafer()).unwrap().report;
        assert_eq!(r.estimates.len(), 2);
        let mut w = r.warnings.clone();
        w.dedup();
        assert_eq!(w, r.warnings);
        assert!(!r.warnings.is_empty());
    }
}
