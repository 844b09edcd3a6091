//! Quantile estimates from fitted tail curves and their back-transformation
//! to the scale of each pooled sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::CurveError;
use crate::edf::TailSide;
use crate::fit::FittedCurve;
use crate::sample::SampleMoments;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantileError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("probability {p} cannot be served by the {side} tail fit: {reason}")]
    SideMismatch { p: f64, side: TailSide, reason: String },
    #[error("no moments recorded for sample '{0}'")]
    MissingSample(String),
}

/// Which tail fit should answer a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideHint {
    Lower,
    Upper,
    /// `p < 0.5` goes to the lower fit, everything else to the upper fit.
    #[default]
    Auto,
}

impl SideHint {
    pub fn route(self, p: f64) -> TailSide {
        match self {
            SideHint::Lower => TailSide::Lower,
            SideHint::Upper => TailSide::Upper,
            SideHint::Auto if p < 0.5 => TailSide::Lower,
            SideHint::Auto => TailSide::Upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileEstimate {
    pub p: f64,
    pub side: TailSide,
    /// On the standardized scale when the fit came from a pooled sample.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample_values: Option<BTreeMap<String, f64>>,
    /// The value lies outside the abscissa span of the tail slice.
    pub extrapolated: bool,
    pub warnings: Vec<String>,
}

/// How far past the slice edge, in multiples of the slice width, an estimate
/// may land before a warning is attached.
pub const EXTRAPOLATION_WARN_FACTOR: f64 = 1.5;
const MONOTONE_CHECK_POINTS: usize = 100;

/// Inverts `f` at `p`.
///
/// With [`SideHint::Auto`] the request must fall on the fitted tail's side of
/// 0.5 and must not reach into the central region beyond the slice's inner
/// probability edge. An explicit hint equal to the fit's side skips those
/// checks.
pub fn estimate_quantile(f: &FittedCurve, p: f64, hint: SideHint) -> Result<QuantileEstimate, QuantileError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CurveError::ProbabilityOutOfRange(p).into());
    }
    let wanted = hint.route(p);
    if wanted != f.side {
        return Err(QuantileError::SideMismatch {
            p,
            side: f.side,
            reason: format!("the request routes to the {wanted} tail"),
        });
    }
    if hint == SideHint::Auto {
        let (b_lo, b_hi) = f.b_range;
        let central = match f.side {
            TailSide::Lower => p > b_hi,
            TailSide::Upper => p < b_lo,
        };
        if central {
            return Err(QuantileError::SideMismatch {
                p,
                side: f.side,
                reason: format!(
                    "it lies in the central region (tail slice covers b in [{b_lo:.6}, {b_hi:.6}]); \
                     tail fits only target extreme quantiles"
                ),
            });
        }
    }

    let value = f.inverse(p)?;
    let (a_lo, a_hi) = f.a_range;
    let extrapolated = value < a_lo || value > a_hi;
    let mut warnings = Vec::new();

    let width = a_hi - a_lo;
    let beyond = if value > a_hi {
        value - a_hi
    } else if value < a_lo {
        a_lo - value
    } else {
        0.0
    };
    if beyond > EXTRAPOLATION_WARN_FACTOR * width {
        warnings.push(format!(
            "{} tail estimate for p={p} ({value:.6}) lies {beyond:.6} beyond the tail data, \
             more than {EXTRAPOLATION_WARN_FACTOR} times the slice width ({width:.6})",
            f.side
        ));
    }

    // sample the curve between the nearest slice edge and the estimate
    let edge = match f.side {
        TailSide::Lower => a_lo,
        TailSide::Upper => a_hi,
    };
    if extrapolated && !curve_increasing_between(f, edge, value) {
        warnings.push(format!(
            "{} {} fit is not increasing between the tail edge {edge:.6} and the estimate {value:.6} for p={p}",
            f.side, f.family
        ));
    }

    Ok(QuantileEstimate { p, side: f.side, value, per_sample_values: None, extrapolated, warnings })
}

fn curve_increasing_between(f: &FittedCurve, from: f64, to: f64) -> bool {
    let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
    let step = (hi - lo) / (MONOTONE_CHECK_POINTS - 1) as f64;
    let values: Vec<f64> = (0..MONOTONE_CHECK_POINTS).map(|i| f.eval(lo + step * i as f64)).collect();
    values.windows(2).all(|w| w[1] >= w[0])
}

/// `x_r = s_r z + mean_r` for every sample.
pub fn back_transform(z: f64, moments: &BTreeMap<String, SampleMoments>) -> BTreeMap<String, f64> {
    moments.iter().map(|(label, m)| (label.clone(), m.sd * z + m.mean)).collect()
}

/// Back-transform for a single named sample.
pub fn back_transform_one(
    z: f64,
    moments: &BTreeMap<String, SampleMoments>,
    label: &str,
) -> Result<f64, QuantileError> {
    moments.get(label).map(|m| m.sd * z + m.mean).ok_or_else(|| QuantileError::MissingSample(label.to_string()))
}

/// `p = 1 - 1/T` for a return period of `T` (> 1) time units.
pub fn return_period_probability(period: f64) -> Option<f64> {
    (period > 1.0 && period.is_finite()).then(|| 1.0 - 1.0 / period)
}
