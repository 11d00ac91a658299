//! Notch line-shape fit to |S21| traces.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LsqOptions, ParamSpace};
use crate::readout::ResonatorLineShape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineShapeFit {
    pub line: ResonatorLineShape,
    pub q_c: f64,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Standard errors of (f0, Q_i, Q_e, θ).
    pub std_errors: [f64; 4],
}

/// Starting point from the trace minimum and the half-power width.
fn initial_guess(freq: &[f64], mag: &[f64]) -> Result<[f64; 4]> {
    let (imin, &amin) =
        mag.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).ok_or(Error::invalid("trace", "empty"))?;
    let f0 = freq[imin];
    let depth = (1.0 - amin).clamp(1e-3, 0.999);
    let pmax = 1.0 - amin * amin;
    let half = 0.5 * pmax;
    // extent of the region above half power
    let (mut l, mut r) = (f0, f0);
    for (&f, &m) in freq.iter().zip(mag) {
        if 1.0 - m * m >= half {
            l = l.min(f);
            r = r.max(f);
        }
    }
    let width = (r - l).max(f0 * 1e-7);
    let q_c = f0 / width;
    let q_e = q_c / depth;
    let inv_qi = 1.0 / q_c - 1.0 / q_e;
    let q_i = if inv_qi > 0.0 { 1.0 / inv_qi } else { 1e3 * q_e };
    Ok([f0, q_i, q_e, 0.0])
}

/// Least-squares fit of f0, Q_i, Q_e and θ to a magnitude trace.
pub fn fit_lineshape(freq: &[f64], mag: &[f64]) -> Result<LineShapeFit> {
    if freq.len() != mag.len() || freq.len() < 16 {
        return Err(Error::invalid("trace", "need at least 16 (f, |S21|) pairs of equal length"));
    }
    if freq.iter().chain(mag).any(|v| !v.is_finite()) || freq.iter().any(|&f| f <= 0.0) {
        return Err(Error::invalid("trace", "non-finite or non-positive values"));
    }
    let x0 = initial_guess(freq, mag)?;
    let (fmin, fmax) = freq.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    let linewidth = x0[0] / (1.0 / (1.0 / x0[1] + 1.0 / x0[2]));
    if fmax - fmin < 5.0 * linewidth {
        return Err(Error::invalid("trace", "must span at least 5 linewidths"));
    }
    let space =
        ParamSpace::new(&x0, vec![fmin, 1.0, 1.0, -std::f64::consts::PI], vec![fmax, 1e9, 1e9, std::f64::consts::PI])?;
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let line = ResonatorLineShape { f0: x[0], q_i: x[1], q_e: x[2], skew_angle: x[3] };
        Ok(freq.iter().zip(mag).map(|(&f, &m)| line.transmission(f).norm() - m).collect())
    };
    let out = levenberg_marquardt(&residuals, &x0, &space, &LsqOptions::default())?;
    let line = ResonatorLineShape::new(out.x[0], out.x[1], out.x[2], out.x[3])?;
    let cov = out.covariance();
    let mut std_errors = [f64::NAN; 4];
    if let Some(c) = cov {
        for (i, e) in std_errors.iter_mut().enumerate() {
            *e = c[(i, i)].max(0.0).sqrt();
        }
    }
    Ok(LineShapeFit {
        q_c: line.q_c(),
        line,
        residual_rms: (2.0 * out.cost / freq.len() as f64).sqrt(),
        iterations: out.iterations,
        converged: out.converged,
        std_errors,
    })
}

/// Magnitude trace of a line shape on `n` points spanning ±`span_linewidths`.
pub fn synthesize_trace(line: &ResonatorLineShape, span_linewidths: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let half = span_linewidths * line.linewidth();
    let freq: Vec<f64> = (0..n).map(|i| line.f0 - half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
    let mag = freq.iter().map(|&f| line.transmission(f).norm()).collect();
    (freq, mag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn reference() -> ResonatorLineShape {
        ResonatorLineShape::new(6.78e9, 3444.0, 309.0, 0.0).unwrap()
    }

    #[test]
    fn recovers_reference_quality_factors() {
        let (f, m) = synthesize_trace(&reference(), 8.0, 801);
        let fit = fit_lineshape(&f, &m).unwrap();
        assert!(fit.converged);
        assert!((fit.q_c - 284.0).abs() <= 3.0, "{fit:?}");
        assert!(fit.line.skew_angle.abs() < 0.02);
        assert!((fit.line.f0 / 6.78e9 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn skewed_trace() {
        let truth = ResonatorLineShape::new(6.78e9, 3444.0, 309.0, 0.25).unwrap();
        let (f, m) = synthesize_trace(&truth, 8.0, 801);
        let fit = fit_lineshape(&f, &m).unwrap();
        assert!((fit.line.skew_angle - 0.25).abs() < 1e-4, "{fit:?}");
        assert!((fit.q_c / truth.q_c() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn noisy_trace_within_five_percent() {
        let truth = reference();
        let (f, clean) = synthesize_trace(&truth, 8.0, 801);
        let sd = 0.01 * truth.dip_depth();
        let mut worst: f64 = 0.0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, sd).unwrap();
            let m: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let fit = fit_lineshape(&f, &m).unwrap();
            worst = worst.max((fit.q_c / truth.q_c() - 1.0).abs()).max((fit.line.q_e / 309.0 - 1.0).abs());
        }
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn narrow_trace_rejected() {
        let (f, m) = synthesize_trace(&reference(), 1.0, 101);
        assert!(fit_lineshape(&f, &m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn round_trip_random_lines(qi in 500.0f64..2e4, qe in 100.0f64..2000.0, theta in -0.4f64..0.4) {
            let truth = ResonatorLineShape::new(6.5e9, qi, qe, theta).unwrap();
            let (f, m) = synthesize_trace(&truth, 8.0, 801);
            let fit = fit_lineshape(&f, &m).unwrap();
            prop_assert!((fit.q_c / truth.q_c() - 1.0).abs() < 1e-3, "{:?}", fit);
        }
    }
}
