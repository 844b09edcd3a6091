//! Extreme quantile estimation by weighted local curve fitting.
//!
//! A sample is turned into an augmented empirical distribution (order
//! statistics interleaved with midpoints). A parametric curve is fitted to
//! the points of one tail by weighted least squares, with weights equal to
//! the reciprocal binomial variance of each EDF level, and the fitted curve
//! is inverted at the target probability. Several samples that share a shape
//! but differ in location or scale can be standardised, pooled, fitted once
//! and mapped back to each sample's scale.

pub mod curves;
pub mod edf;
pub mod fit;
pub mod hypothesis;
pub mod ingest;
mod linalg;
pub mod pipeline;
pub mod plot;
pub mod pooling;
pub mod quantile;
pub mod sample;
pub mod simplex;
pub mod validation;

pub use curves::{CurveError, CurveFamily};
pub use edf::{augment, edf_value, AugmentedEdf, EdfError, EdfPoint, TailSide, TailSlice};
pub use fit::{
    fit_tail, tail_mse, tail_sse, FitError, FitMethod, FittedCurve, OptimizerSettings, TailFitConfig, TailSize,
    Weighting,
};
pub use ingest::{ingest, IngestError, InputFormat};
pub use pipeline::{run, run_series, Mode, PipelineError, RunConfig, RunReport, SideConfig};
pub use plot::emit_plot_data;
pub use pooling::{
    homogeneity_check, pooled_probability, pooled_variance, standardize_and_pool, HomogeneityConfig, HomogeneityReport,
    PooledSample, PoolingError,
};
pub use quantile::{back_transform, estimate_quantile, QuantileError, QuantileEstimate, SideHint};
pub use sample::{make_sample, Sample, SampleError, SampleMoments, Series};
pub use validation::{run_case_study, run_property_suite, Budget, CaseStudySpec};
