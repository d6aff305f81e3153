#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidentiality;
pub mod deconvolution;
mod error;
pub mod evaluation;
pub mod noise;
pub mod optimizer;
pub mod quadrature;
pub mod search;

pub use confidentiality::{
    calibrate_scale, conditional_tail_curve, empirical_m, empirical_mu, fixed_quantile_scale,
    normal_normal_mu, sup_empirical_m, true_measure, true_mu, DatasetSummary, MeasureCurve,
    MeasureTable, NoiseDensity, NormalNoise, PrivacyBudget, ScaleCalibration,
};
pub use deconvolution::{
    aimse, estimate_density, kernel_ft, noise_free_estimate, normal_reference_roughness,
    select_bandwidth, BandwidthSelection, BiasConstant, DensityEstimate, Noise,
};
pub use error::{Error, Result};
pub use evaluation::{cdf_error, reference_law, run_study, Law, StudyConfig, StudyReport};
pub use noise::{GammaNoiseParams, OrdinarySmoothBounds};
pub use optimizer::{objective_j, select_optimal, sweep, FrontierPoint, SelectionReport, ShapeGrid};
