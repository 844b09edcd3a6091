//! Weighted least-squares fitting of a curve family to one tail of the
//! augmented EDF.
//!
//! The objective is `sum w_i (b_i - g(a_i | theta))^2` over the tail slice.
//! Linear families are solved through their weighted normal equations. The
//! sigmoid families are searched with Nelder–Mead over `(location, ln scale)`
//! from the linearised initial guess plus a few seeded, jittered restarts; the
//! lowest objective wins, ties going to the earlier start.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{quadratic_wls, CurveError, CurveFamily};
use crate::edf::{tail_count_from_fraction, AugmentedEdf, EdfError, EdfPoint, TailSide, TailSlice};
use crate::simplex::{self, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("{family} needs at least {needed} tail points, the slice has {got}")]
    TooFewPoints { family: CurveFamily, needed: usize, got: usize },
    #[error("weighted normal equations for {0} are singular (too few distinct abscissae in the tail)")]
    SingularNormalEquations(CurveFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `w_i = n / (b_i (1 - b_i))`
    #[default]
    #[serde(rename = "edf")]
    EdfWeights,
    Unweighted,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edf" | "weighted" => Ok(Weighting::EdfWeights),
            "unweighted" | "none" => Ok(Weighting::Unweighted),
            other => Err(format!("unknown weighting '{other}' (expected edf or unweighted)")),
        }
    }
}

/// How many order statistics make up the tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSize {
    Fraction(f64),
    Count(usize),
}

impl Default for TailSize {
    fn default() -> Self {
        TailSize::Fraction(0.25)
    }
}

impl TailSize {
    pub fn resolve(self, n: usize) -> Result<usize, EdfError> {
        match self {
            TailSize::Fraction(f) => tail_count_from_fraction(n, f),
            TailSize::Count(m) => Ok(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative change in the objective across the simplex.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { max_iterations: 2000, tolerance: 1e-10, restarts: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Closed form for linear families, simplex otherwise.
    #[default]
    Auto,
    /// Simplex search for every family.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFitConfig {
    pub side: TailSide,
    pub size: TailSize,
    pub family: CurveFamily,
    pub weighting: Weighting,
    pub optimizer: OptimizerSettings,
    pub method: FitMethod,
}

impl TailFitConfig {
    pub fn new(side: TailSide, family: CurveFamily) -> Self {
        Self {
            side,
            size: TailSize::default(),
            family,
            weighting: Weighting::default(),
            optimizer: OptimizerSettings::default(),
            method: FitMethod::default(),
        }
    }

    pub fn size(mut self, size: TailSize) -> Self {
        self.size = size;
        self
    }

    pub fn weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn optimizer(mut self, optimizer: OptimizerSettings) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn method(mut self, method: FitMethod) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedCurve {
    pub family: CurveFamily,
    pub params: Vec<f64>,
    pub side: TailSide,
    pub weighting: Weighting,
    /// Zero-based range into the augmented points.
    pub tail_indices: Range<usize>,
    /// Abscissa span of the tail slice.
    pub a_range: (f64, f64),
    /// Probability span of the tail slice.
    pub b_range: (f64, f64),
    /// The minimised objective.
    pub wsse: f64,
    /// Unweighted mean of squared residuals over the slice.
    pub mse: f64,
    /// Unweighted sum of squared residuals over the slice.
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedCurve {
    pub fn eval(&self, x: f64) -> f64 {
        self.family.eval_unchecked(&self.params, x)
    }

    pub fn inverse(&self, p: f64) -> Result<f64, CurveError> {
        self.family.inverse(&self.params, p, Some(self.a_range))
    }

    pub fn point_count(&self) -> usize {
        self.tail_indices.len()
    }
}

/// `sum w_i (b_i - g(a_i))^2`.
pub fn weighted_sse(family: CurveFamily, params: &[f64], points: &[EdfPoint], weights: &[f64]) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let r = p.b - family.eval_unchecked(params, p.a);
            w * r * r
        })
        .sum()
}

fn unweighted_sse(family: CurveFamily, params: &[f64], points: &[EdfPoint]) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.b - family.eval_unchecked(params, p.a);
            r * r
        })
        .sum()
}

/// Mean squared residual of `f` over the slice of `e` it was fitted on.
pub fn tail_mse(f: &FittedCurve, e: &AugmentedEdf) -> f64 {
    tail_sse(f, e) / f.point_count() as f64
}

/// Sum of squared residuals of `f` over the slice of `e` it was fitted on.
pub fn tail_sse(f: &FittedCurve, e: &AugmentedEdf) -> f64 {
    let slice = e.slice_by_range(f.side, f.tail_indices.clone());
    unweighted_sse(f.family, &f.params, slice.points)
}

pub fn fit_tail(e: &AugmentedEdf, cfg: &TailFitConfig) -> Result<FittedCurve, FitError> {
    let size = cfg.size.resolve(e.n())?;
    let slice = e.tail_slice(cfg.side, size)?;
    fit_slice(&slice, cfg)
}

/// Fits a prepared slice; `cfg.size` is ignored.
pub fn fit_slice(slice: &TailSlice<'_>, cfg: &TailFitConfig) -> Result<FittedCurve, FitError> {
    let family = cfg.family;
    let needed = family.param_count() + 1;
    if slice.len() < needed {
        return Err(FitError::TooFewPoints { family, needed, got: slice.len() });
    }
    let weights: Vec<f64> = match cfg.weighting {
        Weighting::EdfWeights => slice.weights.to_vec(),
        Weighting::Unweighted => vec![1.0; slice.len()],
    };

    let search = if family.is_linear() && cfg.method == FitMethod::Auto {
        let params = quadratic_wls(slice.points, &weights).ok_or(FitError::SingularNormalEquations(family))?;
        Search { params, converged: true, iterations: 0 }
    } else {
        simplex_search(family, slice, &weights, &cfg.optimizer)?
    };
    family.validate(&search.params)?;

    let wsse = weighted_sse(family, &search.params, slice.points, &weights);
    let sse = unweighted_sse(family, &search.params, slice.points);
    Ok(FittedCurve {
        family,
        side: slice.side,
        weighting: cfg.weighting,
        tail_indices: slice.indices(),
        a_range: slice.a_range(),
        b_range: slice.b_range(),
        wsse,
        sse,
        mse: sse / slice.len() as f64,
        converged: search.converged,
        iterations: search.iterations,
        params: search.params,
    })
}

struct Search {
    params: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Relative spread of the simplex in search coordinates at convergence.
const PARAM_TOLERANCE: f64 = 1e-10;

/// Rounds of re-starting the simplex from its own best vertex.
const MAX_POLISH_ROUNDS: usize = 8;

fn simplex_search(
    family: CurveFamily,
    slice: &TailSlice<'_>,
    weights: &[f64],
    settings: &OptimizerSettings,
) -> Result<Search, FitError> {
    let guess = family.initial_guess(slice.points, slice.side)?;
    let coords = Coordinates(family);
    let objective = |u: &[f64]| weighted_sse(family, &coords.to_params(u), slice.points, weights);
    let opts = SimplexOptions {
        max_iterations: settings.max_iterations,
        tolerance: settings.tolerance,
        x_tolerance: PARAM_TOLERANCE,
    };

    let mut starts = vec![guess.clone()];
    for k in 0..settings.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(k as u64 + 1);
        starts.push(guess.iter().map(|v| v * (1.0 + rng.random_range(-0.2..0.2))).collect());
    }

    let mut best: Option<(f64, Search)> = None;
    for start in starts {
        let mut u = coords.to_search(&start);
        let mut f = objective(&u);
        let mut iterations = 0;
        let mut converged = false;
        for _ in 0..MAX_POLISH_ROUNDS {
            let steps = coords.steps(&u);
            let r = simplex::minimize(objective, &u, &steps, opts);
            iterations += r.iterations;
            converged = r.converged;
            let improved = r.f < f && (f - r.f) > settings.tolerance * r.f.abs();
            if r.f <= f {
                u = r.x;
                f = r.f;
            }
            if !improved || !converged {
                break;
            }
        }
        // strict comparison keeps the earliest start on ties
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, Search { params: coords.to_params(&u), converged, iterations }));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Maps between curve parameters and the unconstrained search space.
#[derive(Clone, Copy)]
struct Coordinates(CurveFamily);

impl Coordinates {
    fn to_search(self, p: &[f64]) -> Vec<f64> {
        if self.0.is_linear() {
            p.to_vec()
        } else {
            vec![p[0], p[1].ln()]
        }
    }

    fn to_params(self, u: &[f64]) -> Vec<f64> {
        if self.0.is_linear() {
            u.to_vec()
        } else {
            vec![u[0], u[1].exp()]
        }
    }

    fn steps(self, u: &[f64]) -> Vec<f64> {
        if self.0.is_linear() {
            u.iter().map(|v| 0.1 * v.abs() + 1e-3).collect()
        } else {
            vec![0.1 * u[1].exp(), 0.1]
        }
    }
}
