//! Flux-axis calibration from the periodicity of a spectroscopy trace.

use serde::{Deserialize, Serialize};

use super::spectrum::SpectroscopySweep;
use crate::constants::FLUX_QUANTUM;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxAxisCalibration {
    /// Raw bias units per flux quantum.
    pub period: f64,
    /// Raw bias of the symmetry centre (φ = 0), reduced to (−P/2, P/2].
    pub offset: f64,
    /// Φ0/period; only meaningful when the bias axis is a current in amperes.
    pub bias_mutual: f64,
    pub periods_spanned: f64,
}

const RESAMPLE: usize = 4096;

fn resample(sweep: &SpectroscopySweep) -> Result<(f64, f64, Vec<f64>)> {
    let mut pts: Vec<(f64, f64)> = sweep.bias.iter().copied().zip(sweep.frequency.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if !(hi > lo) {
        return Err(Error::invalid("sweep", "bias axis has zero span"));
    }
    let step = (hi - lo) / (RESAMPLE - 1) as f64;
    let mut k = 0;
    let values = (0..RESAMPLE)
        .map(|i| {
            let x = lo + step * i as f64;
            while k + 2 < pts.len() && pts[k + 1].0 < x {
                k += 1;
            }
            let (a, b) = (pts[k], pts[k + 1]);
            a.1 + (b.1 - a.1) * ((x - a.0) / (b.0 - a.0)).clamp(0.0, 1.0)
        })
        .collect();
    Ok((lo, step, values))
}

/// Linear interpolation into a uniformly sampled trace.
fn sample(values: &[f64], pos: f64) -> f64 {
    let i = pos.floor().clamp(0.0, (values.len() - 2) as f64) as usize;
    let t = pos - i as f64;
    values[i] + t * (values[i + 1] - values[i])
}

/// Mean squared mismatch between the trace and itself shifted by `lag`
/// samples.
fn lag_mismatch(values: &[f64], lag: f64) -> f64 {
    let n = values.len();
    let count = (n as f64 - lag).floor() as usize;
    if count < 2 {
        return f64::INFINITY;
    }
    (0..count).map(|i| (values[i] - sample(values, i as f64 + lag)).powi(2)).sum::<f64>() / count as f64
}

/// Mean squared asymmetry of the trace about `centre` (sample units),
/// out to half a period.
fn asymmetry(values: &[f64], centre: f64, half: f64) -> f64 {
    let last = (values.len() - 1) as f64;
    let reach = half.min(centre).min(last - centre);
    let m = reach.floor() as usize;
    if m < 2 {
        return f64::INFINITY;
    }
    (1..=m).map(|j| (sample(values, centre + j as f64) - sample(values, centre - j as f64)).powi(2)).sum::<f64>()
        / m as f64
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Period from the autocorrelation peak, refined by minimizing the
/// self-mismatch; offset from the symmetry centre nearest the highest
/// frequency sample.
pub fn calibrate_flux_axis(sweep: &SpectroscopySweep) -> Result<FluxAxisCalibration> {
    sweep.validate()?;
    let (lo, step, values) = resample(sweep)?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var: f64 = centred.iter().map(|v| v * v).sum();
    if var == 0.0 {
        return Err(Error::InsufficientSpan { periods: 0.0 });
    }
    let acf: Vec<f64> = (0..n / 2 + 1)
        .map(|lag| centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / var)
        .collect();
    // first peak after the autocorrelation has gone negative
    let first_negative = acf.iter().position(|&v| v < 0.0);
    let peak = first_negative.and_then(|start| {
        (start + 1..acf.len() - 1)
            .filter(|&k| acf[k] >= acf[k - 1] && acf[k] >= acf[k + 1] && acf[k] > 0.0)
            .max_by(|&a, &b| acf[a].total_cmp(&acf[b]))
    });
    let span = step * (n - 1) as f64;
    let Some(k) = peak else {
        return Err(Error::InsufficientSpan { periods: 0.0 });
    };
    let lag = golden_min(|l| lag_mismatch(&values, l), k as f64 - 1.5, k as f64 + 1.5, 1e-6);
    let period = lag * step;
    let periods_spanned = span / period;
    if periods_spanned < 2.0 {
        return Err(Error::InsufficientSpan { periods: periods_spanned });
    }

    let imax = values
        .iter()
        .enumerate()
        .filter(|(i, _)| (*i as f64) >= 0.5 * lag && (*i as f64) <= (n - 1) as f64 - 0.5 * lag)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(n / 2);
    let centre = golden_min(|c| asymmetry(&values, c, 0.5 * lag), imax as f64 - 2.0, imax as f64 + 2.0, 1e-6);
    let raw = lo + centre * step;
    let offset = raw - period * (raw / period).round();
    Ok(FluxAxisCalibration { period, offset, bias_mutual: FLUX_QUANTUM / period.abs(), periods_spanned })
}
