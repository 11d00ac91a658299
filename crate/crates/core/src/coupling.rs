//! Qubit–cavity coupling and dispersive shifts.

use serde::{Deserialize, Serialize};

use crate::params::CircuitParams;
use crate::squid::cavity_band;
use crate::{Error, Result};

/// Relative slack allowed beyond the computed cavity band before a cavity
/// frequency is rejected.
pub const BAND_SLACK: f64 = 0.02;

/// Coupling evaluated at one cavity/qubit frequency pair (all rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub cavity_freq: f64,
    pub qubit_freq: f64,
    pub coupling: f64,
    /// Δ01 = ω01 − ω_c.
    pub detuning: f64,
    pub g0: f64,
    pub omega_s: f64,
    pub omega_c0: f64,
    pub omega_q0: f64,
    /// False where g > 0.1 ω_c and the weak-coupling expansion is suspect.
    pub weak_coupling: bool,
}

/// g(ω_c) for the shared-inductor coupling:
/// `g = g0 [ω_c0/ω_c − (ω_c0/ω_s²) ω_c]` with `g0 = ω_q0 M / 2√(𝓛_q 𝓛_c)`.
pub fn inductive_coupling(params: &CircuitParams, cavity_freq: f64, qubit_freq: f64) -> Result<CouplingPoint> {
    params.validate()?;
    let (lo, hi) = cavity_band(params);
    let (lo, hi) = (lo * (1.0 - BAND_SLACK), hi * (1.0 + BAND_SLACK));
    if !(cavity_freq >= lo && cavity_freq <= hi) {
        return Err(Error::OutOfRange { what: "cavity angular frequency", value: cavity_freq, lo, hi });
    }
    let omega_c0 = params.cavity_bare_frequency();
    let omega_q0 = params.qubit_bare_frequency();
    let omega_s = params.series_frequency();
    let g0 =
        omega_q0 * params.shared_mutual / (2.0 * (params.loop_inductance_qubit * params.loop_inductance_cavity).sqrt());
    let coupling = g0 * (omega_c0 / cavity_freq - omega_c0 / (omega_s * omega_s) * cavity_freq);
    Ok(CouplingPoint {
        cavity_freq,
        qubit_freq,
        coupling,
        detuning: qubit_freq - cavity_freq,
        g0,
        omega_s,
        omega_c0,
        omega_q0,
        weak_coupling: coupling <= 0.1 * cavity_freq,
    })
}

/// Shorthand for the coupling rate alone.
pub fn inductive_g(params: &CircuitParams, cavity_freq: f64) -> Result<f64> {
    inductive_coupling(params, cavity_freq, cavity_freq).map(|c| c.coupling)
}

/// Comparison curve for a single coupling capacitor C between the two shunt
/// capacitors: `g = ω_c C / 2√(C_q C_c)`, rad/s.
pub fn capacitive_coupling_comparison(
    coupling_capacitance: f64,
    qubit_capacitance: f64,
    cavity_capacitance: f64,
    cavity_freq: f64,
) -> Result<f64> {
    if !(coupling_capacitance >= 0.0) {
        return Err(Error::invalid("coupling_capacitance", "must be >= 0"));
    }
    if !(qubit_capacitance > 0.0 && cavity_capacitance > 0.0) {
        return Err(Error::invalid("capacitance", "shunt capacitances must be > 0"));
    }
    Ok(cavity_freq * coupling_capacitance / (2.0 * (qubit_capacitance * cavity_capacitance).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersiveModel {
    TwoLevel,
    ThreeLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveShift {
    pub chi: f64,
    /// Full shift 2χ.
    pub full_shift: f64,
    pub model: DispersiveModel,
    pub anharmonicity: f64,
    /// Advisory: |Δ01| ≥ 5g.
    pub dispersive: bool,
}

/// χ = (g²/Δ01) for two levels, χ = (g²/Δ01)/(1 + Δ01/α) for three.
pub fn dispersive_shift(
    coupling: f64,
    detuning: f64,
    anharmonicity: f64,
    model: DispersiveModel,
) -> Result<DispersiveShift> {
    if detuning == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let two_level = coupling * coupling / detuning;
    let chi = match model {
        DispersiveModel::TwoLevel => two_level,
        DispersiveModel::ThreeLevel => {
            let denom = 1.0 + detuning / anharmonicity;
            if denom.abs() <= 4.0 * f64::EPSILON {
                return Err(Error::StraddlingBoundary);
            }
            two_level / denom
        }
    };
    Ok(DispersiveShift {
        chi,
        full_shift: 2.0 * chi,
        model,
        anharmonicity,
        dispersive: detuning.abs() >= 5.0 * coupling,
    })
}

/// n_crit = (Δ01 / 2g)².
pub fn critical_photon_number(coupling: f64, detuning: f64) -> Result<f64> {
    if !(coupling > 0.0) {
        return Err(Error::invalid("coupling", "must be > 0"));
    }
    Ok((detuning / (2.0 * coupling)).powi(2))
}

/// Eigenfrequencies (lower, upper) of the one-excitation block
/// [[ω01, g], [g, ω_c]].
pub fn normal_mode_frequencies(qubit_freq: f64, cavity_freq: f64, coupling: f64) -> (f64, f64) {
    let mean = 0.5 * (qubit_freq + cavity_freq);
    let half = 0.5 * (qubit_freq - cavity_freq);
    let r = half.hypot(coupling);
    (mean - r, mean + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ghz_to_rad, mhz_to_rad, rad_to_mhz, TWO_PI};
    use crate::params::test_support::design_a;
    use proptest::prelude::*;

    #[test]
    fn design_a_coupling_near_table_values() {
        let p = design_a();
        for (fc, two_g) in [(6.78, 78.0), (6.58, 104.0), (4.90, 316.0)] {
            let g = inductive_g(&p, ghz_to_rad(fc)).unwrap();
            let rel = (2.0 * rad_to_mhz(g) / two_g - 1.0).abs();
            assert!(rel < 0.10, "{fc} GHz: 2g = {} MHz", 2.0 * rad_to_mhz(g));
        }
    }

    #[test]
    fn coupling_zero_at_series_frequency_outside_band() {
        let p = design_a();
        let ws = p.series_frequency();
        let (_, hi) = cavity_band(&p);
        assert!(ws > hi * (1.0 + BAND_SLACK));
        // evaluate the closed form right at ω_s
        let g0 = p.qubit_bare_frequency() * p.shared_mutual
            / (2.0 * (p.loop_inductance_qubit * p.loop_inductance_cavity).sqrt());
        let g = g0 * (p.cavity_bare_frequency() / ws - p.cavity_bare_frequency() / (ws * ws) * ws);
        assert!(g.abs() < 1e-6 * g0);
        assert!(matches!(inductive_g(&p, ws), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn inductive_decreasing_capacitive_increasing() {
        let p = design_a();
        let (lo, hi) = cavity_band(&p);
        let mut prev_g = f64::INFINITY;
        let mut prev_c = 0.0;
        for k in 0..=100 {
            let w = lo + (hi - lo) * k as f64 / 100.0;
            let g = inductive_g(&p, w).unwrap();
            assert!(g > 0.0 && g < prev_g);
            let c = capacitive_coupling_comparison(15e-15, 0.39e-12, 0.25e-12, w).unwrap();
            assert!(c > prev_c);
            prev_g = g;
            prev_c = c;
        }
    }

    #[test]
    fn capacitive_examples() {
        let w = ghz_to_rad(6.0);
        assert_eq!(capacitive_coupling_comparison(0.0, 0.39e-12, 0.25e-12, w).unwrap(), 0.0);
        let g = capacitive_coupling_comparison(15e-15, 0.39e-12, 0.25e-12, w).unwrap();
        // 6 GHz · 15 / (2 √(390 · 250)) = 144.1 MHz
        let expected = 6000.0 * 15.0 / (2.0 * (390.0f64 * 250.0).sqrt());
        assert!((rad_to_mhz(g) - expected).abs() < 1e-9);
        assert!((rad_to_mhz(g) - 144.1).abs() < 0.05);
        let g2 = capacitive_coupling_comparison(30e-15, 0.39e-12, 0.25e-12, w).unwrap();
        assert!((g2 - 2.0 * g).abs() < 1e-9 * g);
    }

    #[test]
    fn three_level_example_with_sign_flip() {
        let chi =
            dispersive_shift(mhz_to_rad(50.0), mhz_to_rad(500.0), mhz_to_rad(-100.0), DispersiveModel::ThreeLevel)
                .unwrap();
        assert!((rad_to_mhz(chi.chi) + 1.25).abs() < 1e-12);
        assert!((chi.full_shift - 2.0 * chi.chi).abs() < 1e-9);
    }

    #[test]
    fn two_level_limit() {
        let (g, d) = (mhz_to_rad(40.0), mhz_to_rad(-800.0));
        let three = dispersive_shift(g, d, f64::NEG_INFINITY, DispersiveModel::ThreeLevel).unwrap();
        let two = dispersive_shift(g, d, 0.0, DispersiveModel::TwoLevel).unwrap();
        assert_eq!(three.chi, two.chi);
        let near = dispersive_shift(g, d, d * 200.0, DispersiveModel::ThreeLevel).unwrap();
        assert!((near.chi / two.chi - 1.0).abs() < 0.01);
    }

    #[test]
    fn pole_and_zero_detuning_errors() {
        let a = mhz_to_rad(-200.0);
        assert!(matches!(dispersive_shift(1.0, -a, a, DispersiveModel::ThreeLevel), Err(Error::StraddlingBoundary)));
        assert!(matches!(dispersive_shift(1.0, 0.0, a, DispersiveModel::TwoLevel), Err(Error::ZeroDetuning)));
    }

    #[test]
    fn critical_photon_examples() {
        let g = 1.3e8;
        assert!((critical_photon_number(g, 10.0 * g).unwrap() - 25.0).abs() < 1e-12);
        assert!((critical_photon_number(g, 2.0 * g).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(critical_photon_number(g, 0.0).unwrap(), 0.0);
        assert!(critical_photon_number(0.0, 1.0).is_err());
    }

    #[test]
    fn normal_modes_split_by_2g_on_resonance() {
        let w = ghz_to_rad(7.07);
        let g = mhz_to_rad(52.0);
        let (lo, hi) = normal_mode_frequencies(w, w, g);
        assert!(((hi - lo) - 2.0 * g).abs() < 1e-12 * w);
        assert!((rad_to_mhz(hi - lo) - 104.0).abs() < 1e-9);
        // far detuned: upper mode pushed up by g²/|Δ|
        let (wq, wc) = (ghz_to_rad(8.0), ghz_to_rad(6.0));
        let g = mhz_to_rad(20.0);
        let (_, hi) = normal_mode_frequencies(wq, wc, g);
        let approx = wq + g * g / (wq - wc);
        assert!((hi - approx).abs() < 1e-4 * g);
    }

    #[test]
    fn half_splitting_recovers_inductive_g() {
        let p = design_a();
        let w = ghz_to_rad(6.2);
        let g = inductive_g(&p, w).unwrap();
        let (lo, hi) = normal_mode_frequencies(w, w, g);
        assert!((0.5 * (hi - lo) - g).abs() <= 4.0 * f64::EPSILON * w);
    }

    proptest! {
        #[test]
        fn antisymmetric_under_sign_flip(g in 1e6f64..1e9, d in 1e7f64..1e10, a in 1e6f64..1e9, s in prop::bool::ANY) {
            let d = if s { d } else { -d };
            prop_assume!((1.0 + d / -a).abs() > 1e-6);
            let x = dispersive_shift(g, d, -a, DispersiveModel::ThreeLevel).unwrap();
            let y = dispersive_shift(g, -d, a, DispersiveModel::ThreeLevel).unwrap();
            prop_assert!((x.chi + y.chi).abs() <= 1e-12 * x.chi.abs());
        }

        #[test]
        fn three_level_smaller_when_qubit_below_cavity(g in 1e6f64..5e8, d in 1e7f64..2e10, a in 1e6f64..1e9) {
            // Δ01 < 0 and α < 0: the denominator 1 + Δ01/α exceeds one
            let (det, alpha) = (-d, -a);
            let three = dispersive_shift(g, det, alpha, DispersiveModel::ThreeLevel).unwrap();
            let two = dispersive_shift(g, det, alpha, DispersiveModel::TwoLevel).unwrap();
            prop_assert!(three.chi.abs() < two.chi.abs());
        }

        #[test]
        fn three_level_smaller_far_above_cavity(g in 1e6f64..5e8, a in 1e6f64..1e9, r in 2.0001f64..50.0) {
            let (det, alpha) = (r * a, -a);
            let three = dispersive_shift(g, det, alpha, DispersiveModel::ThreeLevel).unwrap();
            let two = dispersive_shift(g, det, alpha, DispersiveModel::TwoLevel).unwrap();
            prop_assert!(three.chi.abs() < two.chi.abs());
        }
    }

    #[test]
    fn normal_mode_trace_preserved() {
        let (lo, hi) = normal_mode_frequencies(1.0e10, 1.2e10, 3e8);
        assert!((lo + hi - 2.2e10).abs() < 1.0);
        let _ = TWO_PI;
    }
}
