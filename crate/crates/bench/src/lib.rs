//! Inputs shared by the benchmarks.

use fluxcad::fit::{synthesize_sweep, FluxCalibration, SpectroscopySweep};
use fluxcad::{CircuitParams, DesignPreset, Flavor};

pub fn design(name: &str) -> CircuitParams {
    DesignPreset::builtin(name).expect("built-in design").params
}

/// Noise-free cavity sweep over two flux periods.
pub fn cavity_sweep(params: &CircuitParams, n: usize) -> SpectroscopySweep {
    let bias = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    synthesize_sweep(params, &FluxCalibration::default(), bias, Flavor::Cavity).expect("sweep")
}
