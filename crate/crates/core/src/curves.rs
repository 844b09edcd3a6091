//! Parametric curve families used as local approximations of a CDF on one
//! tail. Outputs are not clamped to `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edf::{EdfPoint, TailSide};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParams { family: CurveFamily, reason: String },
    #[error("probability {0} must lie strictly between 0 and 1")]
    ProbabilityOutOfRange(f64),
    #[error("quadratic has no real root at probability {prob} (discriminant {discriminant})")]
    NoRealRoot { prob: f64, discriminant: f64 },
    #[error("quadratic is not increasing at any root for probability {prob}")]
    NonMonotoneAtRoot { prob: f64 },
    #[error("unknown curve family '{0}' (expected gumbel, quadratic or logistic)")]
    UnknownFamily(String),
    #[error("need at least {needed} usable points for {family}, got {got}")]
    TooFewPoints { family: CurveFamily, needed: usize, got: usize },
    #[error("design matrix is rank deficient for {0}")]
    IllConditioned(CurveFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFamily {
    /// `exp(-exp(-(x - location) / scale))`
    Gumbel,
    /// `c0 + c1 x + c2 x^2`
    Quadratic,
    /// `1 / (1 + exp(-(x - location) / scale))`
    Logistic,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 3] = [CurveFamily::Gumbel, CurveFamily::Quadratic, CurveFamily::Logistic];

    pub fn id(self) -> &'static str {
        match self {
            CurveFamily::Gumbel => "gumbel",
            CurveFamily::Quadratic => "quadratic",
            CurveFamily::Logistic => "logistic",
        }
    }

    pub fn param_count(self) -> usize {
        self.param_names().len()
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            CurveFamily::Gumbel | CurveFamily::Logistic => &["location", "scale"],
            CurveFamily::Quadratic => &["c0", "c1", "c2"],
        }
    }

    /// Linear in its parameters, so weighted least squares has a closed form.
    pub fn is_linear(self) -> bool {
        matches!(self, CurveFamily::Quadratic)
    }

    pub fn validate(self, p: &[f64]) -> Result<(), CurveError> {
        if p.len() != self.param_count() {
            return Err(self.invalid(format!("expected {} parameters, got {}", self.param_count(), p.len())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(self.invalid("parameters must be finite".into()));
        }
        if !self.is_linear() && p[1] <= 0.0 {
            return Err(self.invalid(format!("scale must be positive, got {}", p[1])));
        }
        Ok(())
    }

    fn invalid(self, reason: String) -> CurveError {
        CurveError::InvalidParams { family: self, reason }
    }

    pub fn eval(self, p: &[f64], x: f64) -> Result<f64, CurveError> {
        self.validate(p)?;
        Ok(self.eval_unchecked(p, x))
    }

    /// Evaluation without parameter validation; used in optimizer inner loops.
    pub fn eval_unchecked(self, p: &[f64], x: f64) -> f64 {
        match self {
            CurveFamily::Gumbel => (-(-(x - p[0]) / p[1]).exp()).exp(),
            CurveFamily::Quadratic => p[0] + x * (p[1] + x * p[2]),
            CurveFamily::Logistic => 1.0 / (1.0 + (-(x - p[0]) / p[1]).exp()),
        }
    }

    /// Partial derivatives of `eval` with respect to each parameter.
    pub fn param_gradient(self, p: &[f64], x: f64) -> Result<Vec<f64>, CurveError> {
        self.validate(p)?;
        Ok(match self {
            CurveFamily::Gumbel => {
                let z = (x - p[0]) / p[1];
                let e = (-z).exp();
                let g = (-e).exp();
                // dg/dz = g e
                vec![-g * e / p[1], -g * e * z / p[1]]
            }
            CurveFamily::Quadratic => vec![1.0, x, x * x],
            CurveFamily::Logistic => {
                let z = (x - p[0]) / p[1];
                let g = 1.0 / (1.0 + (-z).exp());
                let dz = g * (1.0 - g);
                vec![-dz / p[1], -dz * z / p[1]]
            }
        })
    }

    /// Slope of the curve in `x`.
    pub fn derivative(self, p: &[f64], x: f64) -> f64 {
        match self {
            CurveFamily::Gumbel => {
                let z = (x - p[0]) / p[1];
                let e = (-z).exp();
                (-e).exp() * e / p[1]
            }
            CurveFamily::Quadratic => p[1] + 2.0 * p[2] * x,
            CurveFamily::Logistic => {
                let g = self.eval_unchecked(p, x);
                g * (1.0 - g) / p[1]
            }
        }
    }

    /// Solves `eval(p, x) = prob` for `x`.
    ///
    /// For the quadratic the root with positive slope is taken. When more than
    /// one root qualifies, the one nearest `data_range` wins.
    pub fn inverse(self, p: &[f64], prob: f64, data_range: Option<(f64, f64)>) -> Result<f64, CurveError> {
        self.validate(p)?;
        if !(prob > 0.0 && prob < 1.0) {
            return Err(CurveError::ProbabilityOutOfRange(prob));
        }
        match self {
            CurveFamily::Gumbel => Ok(p[0] - p[1] * (-prob.ln()).ln()),
            CurveFamily::Logistic => Ok(p[0] + p[1] * (prob / (1.0 - prob)).ln()),
            CurveFamily::Quadratic => quadratic_inverse(p, prob, data_range),
        }
    }

    /// Starting parameters for an iterative fit, or the unweighted solution for
    /// linear families.
    ///
    /// Gumbel and logistic regress their linearising transform of `b`
    /// (`-ln(-ln b)` and `ln(b / (1 - b))`) on `a`; the slope gives
    /// `1 / scale` and the intercept `-location / scale`.
    pub fn initial_guess(self, points: &[EdfPoint], _side: TailSide) -> Result<Vec<f64>, CurveError> {
        match self {
            CurveFamily::Quadratic => {
                let needed = self.param_count();
                if points.len() < needed {
                    return Err(CurveError::TooFewPoints { family: self, needed, got: points.len() });
                }
                let ones = vec![1.0; points.len()];
                quadratic_wls(points, &ones).ok_or(CurveError::IllConditioned(self))
            }
            CurveFamily::Gumbel | CurveFamily::Logistic => {
                let usable: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.b > 0.0 && p.b < 1.0 && p.a.is_finite())
                    .map(|p| {
                        let y = match self {
                            CurveFamily::Gumbel => -(-p.b.ln()).ln(),
                            _ => (p.b / (1.0 - p.b)).ln(),
                        };
                        (p.a, y)
                    })
                    .collect();
                if usable.len() < 2 {
                    return Err(CurveError::TooFewPoints { family: self, needed: 2, got: usable.len() });
                }
                let (slope, intercept) = simple_regression(&usable).ok_or(CurveError::IllConditioned(self))?;
                if slope > 0.0 && slope.is_finite() {
                    let scale = 1.0 / slope;
                    Ok(vec![-intercept * scale, scale])
                } else {
                    // Non-increasing transform: fall back to a moment-style guess.
                    let n = usable.len() as f64;
                    let mean = usable.iter().map(|u| u.0).sum::<f64>() / n;
                    let var = usable.iter().map(|u| (u.0 - mean).powi(2)).sum::<f64>() / n;
                    Ok(vec![mean, var.sqrt().max(f64::MIN_POSITIVE)])
                }
            }
        }
    }
}

impl fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CurveFamily {
    type Err = CurveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        CurveFamily::ALL.into_iter().find(|f| f.id() == key).ok_or_else(|| CurveError::UnknownFamily(s.to_string()))
    }
}

fn quadratic_inverse(p: &[f64], prob: f64, data_range: Option<(f64, f64)>) -> Result<f64, CurveError> {
    let (c, b, a) = (p[0] - prob, p[1], p[2]);
    let mut roots = Vec::with_capacity(2);
    if a == 0.0 {
        if b == 0.0 {
            return Err(CurveError::NoRealRoot { prob, discriminant: f64::NAN });
        }
        roots.push(-c / b);
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(CurveError::NoRealRoot { prob, discriminant: disc });
        }
        // q avoids cancellation between b and the square root
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            roots.push(0.0);
        } else {
            roots.push(q / a);
            roots.push(c / q);
        }
    }
    let increasing: Vec<f64> = roots.into_iter().filter(|&x| x.is_finite() && b + 2.0 * a * x > 0.0).collect();
    match increasing.as_slice() {
        [] => Err(CurveError::NonMonotoneAtRoot { prob }),
        [x] => Ok(*x),
        many => {
            let dist = |x: f64| match data_range {
                Some((lo, _)) if x < lo => lo - x,
                Some((_, hi)) if x > hi => x - hi,
                Some(_) => 0.0,
                None => x.abs(),
            };
            Ok(many.iter().copied().min_by(|l, r| dist(*l).total_cmp(&dist(*r))).expect("non-empty"))
        }
    }
}

/// Ordinary least squares line through `(x, y)` pairs. Returns `(slope, intercept)`.
fn simple_regression(xy: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= n * (1e-12 * mx.abs().max(1.0)).powi(2) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Weighted least squares quadratic through the points. The abscissae are
/// centred and scaled before forming the normal equations, then the
/// coefficients are mapped back to the raw `x` basis.
pub(crate) fn quadratic_wls(points: &[EdfPoint], weights: &[f64]) -> Option<Vec<f64>> {
    let wsum: f64 = weights.iter().sum();
    let center = points.iter().zip(weights).map(|(p, w)| w * p.a).sum::<f64>() / wsum;
    let half_width = points.iter().map(|p| (p.a - center).abs()).fold(0.0, f64::max);
    if half_width.is_nan() || half_width <= 0.0 {
        return None;
    }
    let mut xtwx = [[0.0; 3]; 3];
    let mut xtwy = [0.0; 3];
    for (p, &w) in points.iter().zip(weights) {
        let t = (p.a - center) / half_width;
        let row = [1.0, t, t * t];
        for i in 0..3 {
            xtwy[i] += w * row[i] * p.b;
            for j in 0..3 {
                xtwx[i][j] += w * row[i] * row[j];
            }
        }
    }
    let d = linalg::solve_spd3(xtwx, xtwy)?;
    // g(x) = d0 + d1 t + d2 t^2 with t = (x - center) / h
    let h = half_width;
    let c2 = d[2] / (h * h);
    let c1 = d[1] / h - 2.0 * d[2] * center / (h * h);
    let c0 = d[0] - d[1] * center / h + d[2] * center * center / (h * h);
    Some(vec![c0, c1, c2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PROBS: [f64; 8] = [0.001, 0.00135, 0.05, 0.5, 0.95, 0.99, 0.99865, 0.999];

    #[test]
    fn evaluates_known_points() {
        assert_relative_eq!(CurveFamily::Gumbel.eval(&[10.0, 2.0], 10.0).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(CurveFamily::Gumbel.eval(&[10.0, 2.0], 10.0).unwrap(), 0.36787944117144233);
        assert_eq!(CurveFamily::Quadratic.eval(&[0.0, 0.0, 1.0], 3.0).unwrap(), 9.0);
        assert_eq!(CurveFamily::Logistic.eval(&[0.0, 1.0], 0.0).unwrap(), 0.5);
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(matches!(CurveFamily::Gumbel.eval(&[0.0, 0.0], 1.0), Err(CurveError::InvalidParams { .. })));
        assert!(matches!(CurveFamily::Logistic.eval(&[0.0, -1.0], 1.0), Err(CurveError::InvalidParams { .. })));
        assert!(CurveFamily::Quadratic.eval(&[0.0, -1.0, -3.0], 1.0).is_ok());
        assert!(CurveFamily::Quadratic.eval(&[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn quadratic_is_not_clamped() {
        assert_eq!(CurveFamily::Quadratic.eval(&[-1.0, 0.0, 0.0], 0.0).unwrap(), -1.0);
        assert_eq!(CurveFamily::Quadratic.eval(&[0.0, 1.0, 0.0], 7.0).unwrap(), 7.0);
    }

    #[test]
    fn inverts_known_points() {
        let g = CurveFamily::Gumbel;
        assert_relative_eq!(g.inverse(&[10.0, 2.0], (-1.0f64).exp(), None).unwrap(), 10.0, epsilon = 1e-12);
        // -ln(-ln 0.99) = 4.600149226...
        let (t1, t2) = (3.5, 1.25);
        assert_relative_eq!(g.inverse(&[t1, t2], 0.99, None).unwrap(), t1 + 4.600149226776579 * t2, epsilon = 1e-12);
        assert_relative_eq!(CurveFamily::Quadratic.inverse(&[0.0, 0.0, 1.0], 0.25, Some((0.3, 0.7))).unwrap(), 0.5);
        assert_relative_eq!(CurveFamily::Logistic.inverse(&[1.0, 2.0], 0.5, None).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_inverse_errors() {
        // x^2 + 1 never reaches 0.5
        assert!(matches!(
            CurveFamily::Quadratic.inverse(&[1.0, 0.0, 1.0], 0.5, None),
            Err(CurveError::NoRealRoot { .. })
        ));
        // decreasing line
        assert!(matches!(
            CurveFamily::Quadratic.inverse(&[1.0, -1.0, 0.0], 0.5, None),
            Err(CurveError::NonMonotoneAtRoot { .. })
        ));
        // linear increasing case
        assert_relative_eq!(CurveFamily::Quadratic.inverse(&[0.0, 2.0, 0.0], 0.5, None).unwrap(), 0.25);
        assert!(matches!(
            CurveFamily::Gumbel.inverse(&[0.0, 1.0], 1.0, None),
            Err(CurveError::ProbabilityOutOfRange(_))
        ));
    }

    #[test]
    fn parses_family_ids() {
        assert_eq!("gumbel".parse::<CurveFamily>().unwrap(), CurveFamily::Gumbel);
        assert_eq!(" Quadratic ".parse::<CurveFamily>().unwrap(), CurveFamily::Quadratic);
        assert_eq!("logistic".parse::<CurveFamily>().unwrap(), CurveFamily::Logistic);
        assert!(matches!("weibull".parse::<CurveFamily>(), Err(CurveError::UnknownFamily(_))));
        assert_eq!(CurveFamily::Gumbel.param_count(), 2);
        assert_eq!(CurveFamily::Quadratic.param_count(), 3);
        assert_eq!(CurveFamily::Logistic.param_count(), 2);
    }

    fn random_params(family: CurveFamily, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match family {
            CurveFamily::Gumbel | CurveFamily::Logistic => {
                vec![rng.random_range(-100.0..100.0), rng.random_range(0.05..50.0)]
            }
            CurveFamily::Quadratic => (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn round_trip_over_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in CurveFamily::ALL {
            let mut checked = 0;
            for _ in 0..100 {
                let p = random_params(family, &mut rng);
                for q in PROBS {
                    let Ok(x) = family.inverse(&p, q, None) else { continue };
                    let back = family.eval(&p, x).unwrap();
                    assert!((back - q).abs() < 1e-9, "{family} {p:?} q={q} back={back}");
                    checked += 1;
                }
            }
            assert!(checked > 100, "{family}: only {checked} invertible cases");
        }
    }

    #[test]
    fn sigmoid_families_are_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in [CurveFamily::Gumbel, CurveFamily::Logistic] {
            for _ in 0..50 {
                let p = random_params(family, &mut rng);
                // standardized span kept short of floating-point saturation
                let (from, to) = if family == CurveFamily::Gumbel { (-3.0, 12.0) } else { (-30.0, 30.0) };
                let xs: Vec<f64> = (0..=400).map(|i| p[0] + p[1] * (from + (to - from) * i as f64 / 400.0)).collect();
                for w in xs.windows(2) {
                    let (lo, hi) = (family.eval(&p, w[0]).unwrap(), family.eval(&p, w[1]).unwrap());
                    assert!(hi > lo, "{family} not increasing at {w:?}");
                }
                if family == CurveFamily::Gumbel {
                    for &x in &xs {
                        let v = family.eval(&p, x).unwrap();
                        assert!(v > 0.0 && v < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in CurveFamily::ALL {
            for _ in 0..30 {
                let p = random_params(family, &mut rng);
                let x = if family.is_linear() {
                    rng.random_range(-3.0..3.0)
                } else {
                    p[0] + p[1] * rng.random_range(-2.0..3.0)
                };
                let grad = family.param_gradient(&p, x).unwrap();
                for k in 0..p.len() {
                    let h = 1e-6 * p[k].abs().max(1e-2);
                    let (mut up, mut down) = (p.clone(), p.clone());
                    up[k] += h;
                    down[k] -= h;
                    let fd = (family.eval(&up, x).unwrap() - family.eval(&down, x).unwrap()) / (2.0 * h);
                    let scale = grad[k].abs().max(1e-8);
                    assert!((fd - grad[k]).abs() / scale < 1e-6, "{family} k={k}: fd {fd} vs {}", grad[k]);
                }
            }
        }
    }

    fn exact_points(family: CurveFamily, p: &[f64], xs: &[f64]) -> Vec<EdfPoint> {
        xs.iter().map(|&a| EdfPoint { a, b: family.eval(p, a).unwrap() }).collect()
    }

    #[test]
    fn guesses_recover_noiseless_parameters() {
        let xs: Vec<f64> = (0..10).map(|i| 60.0 + 10.0 * i as f64).collect();
        let guess = CurveFamily::Gumbel
            .initial_guess(&exact_points(CurveFamily::Gumbel, &[100.0, 20.0], &xs), TailSide::Upper)
            .unwrap();
        assert_relative_eq!(guess[0], 100.0, epsilon = 1e-6);
        assert_relative_eq!(guess[1], 20.0, epsilon = 1e-6);

        let guess = CurveFamily::Logistic
            .initial_guess(&exact_points(CurveFamily::Logistic, &[80.0, 15.0], &xs), TailSide::Upper)
            .unwrap();
        assert_relative_eq!(guess[0], 80.0, epsilon = 1e-6);
        assert_relative_eq!(guess[1], 15.0, epsilon = 1e-6);

        let line = exact_points(CurveFamily::Quadratic, &[0.1, 0.02, 0.0], &[1.0, 2.0, 3.0]);
        let guess = CurveFamily::Quadratic.initial_guess(&line, TailSide::Lower).unwrap();
        assert_relative_eq!(guess[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(guess[1], 0.02, epsilon = 1e-12);
        assert!(guess[2].abs() < 1e-12);
    }

    #[test]
    fn guess_rejects_degenerate_abscissae() {
        let pts: Vec<EdfPoint> = [0.1, 0.2, 0.3].iter().map(|&b| EdfPoint { a: 4.0, b }).collect();
        for family in CurveFamily::ALL {
            assert!(matches!(family.initial_guess(&pts, TailSide::Lower), Err(CurveError::IllConditioned(_))));
        }
        assert!(matches!(
            CurveFamily::Quadratic.initial_guess(&pts[..2], TailSide::Lower),
            Err(CurveError::TooFewPoints { .. })
        ));
    }
}
