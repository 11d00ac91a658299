//! Least-squares parameter extraction: spectroscopy sweeps, flux-axis
//! calibration and resonator line shapes.

pub mod calibrate;
pub mod lineshape;
pub mod lm;
pub mod simplex;
pub mod spectrum;

pub use calibrate::{calibrate_flux_axis, FluxAxisCalibration};
pub use lineshape::{fit_lineshape, synthesize_trace, LineShapeFit};
pub use lm::{gradient_consistency, levenberg_marquardt, numeric_jacobian, LsqOptions, LsqOutcome, Method, ParamSpace};
pub use spectrum::{
    fit_spectrum, model_frequencies, synthesize_sweep, FitParam, FitProblem, FitResult, FittedValue, FluxCalibration,
    FreeParameter, SpectroscopySweep,
};
