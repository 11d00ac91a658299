//! Small relations between measured coherence times.

use crate::{Error, Result};

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be positive and finite"))
    }
}

/// Decay time of on-resonance Rabi oscillations, T′ = (1/2T1 + 1/2T2)⁻¹.
pub fn rabi_decay_time(t1: f64, t2: f64) -> Result<f64> {
    positive("t1", t1)?;
    positive("t2", t2)?;
    Ok(1.0 / (0.5 / t1 + 0.5 / t2))
}

/// T2 from a measured Rabi decay time and T1.
pub fn t2_from_rabi_decay(t_prime: f64, t1: f64) -> Result<f64> {
    positive("t_prime", t_prime)?;
    positive("t1", t1)?;
    let rate = 1.0 / t_prime - 0.5 / t1;
    if rate <= 0.0 {
        return Err(Error::invalid("t_prime", "must be shorter than 2 T1"));
    }
    Ok(0.5 / rate)
}

/// Gaussian Ramsey envelope exp[−(t/T2*)²].
pub fn ramsey_envelope(t: f64, t2_star: f64) -> Result<f64> {
    positive("t2_star", t2_star)?;
    Ok((-(t / t2_star).powi(2)).exp())
}
