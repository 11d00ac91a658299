//! Qubit energy-decay budget: Purcell loss through the tunable cavity, loss
//! to the flux-bias line and dielectric loss.

use serde::{Deserialize, Serialize};

use crate::coupling::inductive_g;
use crate::params::CircuitParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Purcell,
    BiasLine,
    Dielectric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub kind: DecayKind,
    /// 1/s
    pub rate: f64,
}

/// One cavity operating point (rad/s throughout).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySetting {
    pub cavity_freq: f64,
    pub kappa: f64,
    pub coupling: f64,
}

impl CavitySetting {
    pub fn new(cavity_freq: f64, kappa: f64, coupling: f64) -> Result<Self> {
        if !(cavity_freq > 0.0 && cavity_freq.is_finite()) {
            return Err(Error::invalid("cavity_freq", "must be positive and finite"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa", "must be positive and finite"));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid("coupling", "must be >= 0 and finite"));
        }
        Ok(Self { cavity_freq, kappa, coupling })
    }

    /// Setting whose g comes from the inductive coupling model at `cavity_freq`.
    pub fn from_params(params: &CircuitParams, cavity_freq: f64, kappa: f64) -> Result<Self> {
        Self::new(cavity_freq, kappa, inductive_g(params, cavity_freq)?)
    }
}

/// γ_P = (g/Δ01)² κ / (1 + Δ01/2ω_c)².
pub fn purcell_rate(setting: &CavitySetting, qubit_freq: f64) -> Result<DecayChannel> {
    if !(qubit_freq > 0.0) {
        return Err(Error::invalid("qubit_freq", "must be > 0"));
    }
    let g = setting.coupling;
    let detuning = qubit_freq - setting.cavity_freq;
    if g == 0.0 {
        return Ok(DecayChannel { kind: DecayKind::Purcell, rate: 0.0 });
    }
    if detuning.abs() < g {
        return Err(Error::OnResonance { detuning, coupling: g });
    }
    let filter = 1.0 + detuning / (2.0 * setting.cavity_freq);
    let rate = (g / detuning).powi(2) * setting.kappa / (filter * filter);
    Ok(DecayChannel { kind: DecayKind::Purcell, rate })
}

/// γ_qB = (M_qB/𝓛_q)² / (Z_o C_q), independent of qubit frequency.
pub fn bias_line_rate(params: &CircuitParams) -> DecayChannel {
    let ratio = params.bias_mutual_qubit / params.loop_inductance_qubit;
    DecayChannel {
        kind: DecayKind::BiasLine,
        rate: ratio * ratio / (params.feedline_impedance * params.shunt_capacitance_qubit),
    }
}

/// γ_d = ω01 / Q_d.
pub fn dielectric_rate(qubit_freq: f64, q_d: f64) -> Result<DecayChannel> {
    if !(q_d > 0.0) {
        return Err(Error::invalid("q_d", "must be > 0"));
    }
    if !(qubit_freq >= 0.0) {
        return Err(Error::invalid("qubit_freq", "must be >= 0"));
    }
    Ok(DecayChannel { kind: DecayKind::Dielectric, rate: qubit_freq / q_d })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub qubit_freq: f64,
    pub channels: Vec<DecayChannel>,
    pub total_rate: f64,
    pub t1_total: f64,
}

impl LossBudget {
    pub fn from_channels(qubit_freq: f64, channels: Vec<DecayChannel>) -> Self {
        let total_rate = channels.iter().map(|c| c.rate).sum::<f64>();
        Self { qubit_freq, channels, total_rate, t1_total: 1.0 / total_rate }
    }

    /// Summed rate of every channel of `kind`.
    pub fn rate(&self, kind: DecayKind) -> f64 {
        self.channels.iter().filter(|c| c.kind == kind).map(|c| c.rate).sum()
    }
}

/// Budget with an explicit bias-line rate. Useful when that rate is known
/// from measurement rather than from the circuit.
pub fn budget_with_bias_rate(setting: &CavitySetting, qubit_freq: f64, q_d: f64, bias_rate: f64) -> Result<LossBudget> {
    if !(bias_rate >= 0.0) {
        return Err(Error::invalid("bias_rate", "must be >= 0"));
    }
    let channels = vec![
        purcell_rate(setting, qubit_freq)?,
        DecayChannel { kind: DecayKind::BiasLine, rate: bias_rate },
        dielectric_rate(qubit_freq, q_d)?,
    ];
    Ok(LossBudget::from_channels(qubit_freq, channels))
}

pub fn combined_budget(
    params: &CircuitParams,
    setting: &CavitySetting,
    qubit_freq: f64,
    q_d: f64,
) -> Result<LossBudget> {
    budget_with_bias_rate(setting, qubit_freq, q_d, bias_line_rate(params).rate)
}

/// One grid point of a T1 sweep. `budget` is `None` where the qubit sits
/// within g of the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub qubit_freq: f64,
    pub budget: Option<LossBudget>,
}

pub fn t1_spectrum_with_bias_rate(
    setting: &CavitySetting,
    qubit_freqs: &[f64],
    q_d: f64,
    bias_rate: f64,
) -> Result<Vec<SpectrumPoint>> {
    qubit_freqs
        .iter()
        .map(|&w| match budget_with_bias_rate(setting, w, q_d, bias_rate) {
            Ok(b) => Ok(SpectrumPoint { qubit_freq: w, budget: Some(b) }),
            Err(Error::OnResonance { .. }) => Ok(SpectrumPoint { qubit_freq: w, budget: None }),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn t1_spectrum(
    params: &CircuitParams,
    setting: &CavitySetting,
    qubit_freqs: &[f64],
    q_d: f64,
) -> Result<Vec<SpectrumPoint>> {
    t1_spectrum_with_bias_rate(setting, qubit_freqs, q_d, bias_line_rate(params).rate)
}

/// Budget with the longest T1 in a sweep.
pub fn peak_t1(points: &[SpectrumPoint]) -> Option<&LossBudget> {
    points.iter().filter_map(|p| p.budget.as_ref()).max_by(|a, b| a.t1_total.total_cmp(&b.t1_total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidancePoint {
    pub qubit_freq: f64,
    pub t1_from: f64,
    pub t1_to: f64,
}

/// Result of comparing T1 at two cavity settings over a qubit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceScan {
    pub points: Vec<AvoidancePoint>,
    /// Qubit frequencies where moving the cavity lowered T1.
    pub violations: Vec<f64>,
}

/// Move the cavity from `from` to `to` at each qubit frequency and record
/// where T1 got worse. Points hybridized at either setting are skipped.
pub fn purcell_avoidance_scan(
    params: &CircuitParams,
    from: &CavitySetting,
    to: &CavitySetting,
    qubit_freqs: &[f64],
    q_d: f64,
) -> Result<AvoidanceScan> {
    let mut points = Vec::new();
    let mut violations = Vec::new();
    for &w in qubit_freqs {
        let (a, b) = match (combined_budget(params, from, w, q_d), combined_budget(params, to, w, q_d)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::OnResonance { .. }), _) | (_, Err(Error::OnResonance { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if b.t1_total < a.t1_total {
            violations.push(w);
        }
        points.push(AvoidancePoint { qubit_freq: w, t1_from: a.t1_total, t1_to: b.t1_total });
    }
    Ok(AvoidanceScan { points, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ghz_to_rad, mhz_to_rad, TWO_PI};
    use crate::params::test_support::design_a;
    use crate::squid::cavity_band;
    use proptest::prelude::*;

    fn table_setting(fc_ghz: f64, two_g_mhz: f64, kappa_mhz: f64) -> CavitySetting {
        CavitySetting::new(ghz_to_rad(fc_ghz), mhz_to_rad(kappa_mhz), mhz_to_rad(two_g_mhz / 2.0)).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn purcell_worked_example() {
        let s = table_setting(6.78, 78.0, 24.0);
        let g = purcell_rate(&s, ghz_to_rad(6.28)).unwrap().rate;
        let oracle = (0.039f64 / 0.5).powi(2) * (TWO_PI * 24e6) / (1.0 - 0.5 / 13.56f64).powi(2);
        assert!((g / oracle - 1.0).abs() < 1e-12);
        assert!((g - 9.9e5).abs() < 0.02e6, "{g}");
    }

    #[test]
    fn purcell_vanishes_without_coupling() {
        let s = table_setting(6.78, 0.0, 24.0);
        assert_eq!(purcell_rate(&s, ghz_to_rad(6.78)).unwrap().rate, 0.0);
    }

    #[test]
    fn purcell_hybridized_rejected() {
        let s = table_setting(6.78, 78.0, 24.0);
        let r = purcell_rate(&s, ghz_to_rad(6.78) + mhz_to_rad(30.0));
        assert!(matches!(r, Err(Error::OnResonance { .. })));
    }

    #[test]
    fn purcell_monotone_below_cavity() {
        let s = table_setting(6.78, 78.0, 24.0);
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let w = ghz_to_rad(6.78 - 0.05 - 0.02 * k as f64);
            let g = purcell_rate(&s, w).unwrap().rate;
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn bias_line_design_a() {
        let p = design_a();
        let r = bias_line_rate(&p).rate;
        let oracle = (10.9e-12f64 / 2.5e-9).powi(2) / (50.0 * 0.39e-12);
        assert!((r / oracle - 1.0).abs() < 1e-12);
        let t = 1.0 / r;
        assert!((t - 1.026e-6).abs() < 0.005e-6, "{t}");
        assert!((t / 1.25e-6 - 1.0).abs() < 0.30);
    }

    #[test]
    fn bias_line_scaling() {
        let mut p = design_a();
        let full = bias_line_rate(&p).rate;
        p.bias_mutual_qubit *= 0.5;
        assert!((bias_line_rate(&p).rate * 4.0 - full).abs() < 1e-9 * full);
        p.bias_mutual_qubit = 0.0;
        assert_eq!(bias_line_rate(&p).rate, 0.0);
    }

    #[test]
    fn dielectric_examples() {
        let t = 1.0 / dielectric_rate(ghz_to_rad(6.0), 82_400.0).unwrap().rate;
        assert!((t - 82_400.0 / (TWO_PI * 6e9)).abs() < 1e-18);
        assert!((t - 2.19e-6).abs() < 0.005e-6);
        assert_eq!(dielectric_rate(0.0, 82_400.0).unwrap().rate, 0.0);
        let a = dielectric_rate(1e10, 1e4).unwrap().rate;
        let b = dielectric_rate(1e10, 2e4).unwrap().rate;
        assert!((a - 2.0 * b).abs() < 1e-9);
        assert!(dielectric_rate(1e10, 0.0).is_err());
    }

    #[test]
    fn dielectric_only_budget() {
        let s = table_setting(6.78, 0.0, 24.0);
        let w = ghz_to_rad(6.0);
        let b = budget_with_bias_rate(&s, w, 82_400.0, 0.0).unwrap();
        assert!((b.t1_total / (82_400.0 / w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn design_b_peak() {
        let s = table_setting(6.97, 113.0, 10.0);
        let grid: Vec<f64> = (0..=2000).map(|k| ghz_to_rad(5.5 + 2.0 * k as f64 / 2000.0)).collect();
        let pts = t1_spectrum_with_bias_rate(&s, &grid, 82_400.0, 1.0 / 18.5e-6).unwrap();
        let peak = peak_t1(&pts).unwrap();
        assert!((1.2e-6..=1.8e-6).contains(&peak.t1_total), "{}", peak.t1_total);
        // dielectric is the dominant channel at the peak
        assert!(peak.rate(DecayKind::Dielectric) > peak.rate(DecayKind::Purcell));
        assert!(peak.rate(DecayKind::Dielectric) > peak.rate(DecayKind::BiasLine));
        assert!(pts.iter().any(|p| p.budget.is_none()));
    }

    #[test]
    fn design_a_low_cavity_peak() {
        let p = design_a();
        let s = table_setting(4.90, 316.0, 24.0);
        let grid: Vec<f64> = (0..=2000).map(|k| ghz_to_rad(6.48 + 2.3 * k as f64 / 2000.0)).collect();
        let pts = t1_spectrum(&p, &s, &grid, 82_400.0).unwrap();
        let peak = peak_t1(&pts).unwrap();
        assert!((0.55e-6..=0.90e-6).contains(&peak.t1_total), "{}", peak.t1_total);
        assert!(peak.rate(DecayKind::BiasLine) > peak.rate(DecayKind::Purcell));
        assert!(peak.rate(DecayKind::BiasLine) > peak.rate(DecayKind::Dielectric));
    }

    #[test]
    fn purcell_dip_near_cavity() {
        let p = design_a();
        let s = table_setting(6.78, 78.0, 24.0);
        let near = combined_budget(&p, &s, ghz_to_rad(6.58), 82_400.0).unwrap();
        let far = combined_budget(&p, &s, ghz_to_rad(4.78), 82_400.0).unwrap();
        assert!(far.t1_total > 5.0 * near.t1_total);
    }

    #[test]
    fn settings_differ_only_in_purcell() {
        let p = design_a();
        let w = ghz_to_rad(7.5);
        let a =
            combined_budget(&p, &CavitySetting::from_params(&p, ghz_to_rad(6.0), mhz_to_rad(24.0)).unwrap(), w, 8e4)
                .unwrap();
        let b =
            combined_budget(&p, &CavitySetting::from_params(&p, ghz_to_rad(5.0), mhz_to_rad(24.0)).unwrap(), w, 8e4)
                .unwrap();
        assert_eq!(a.rate(DecayKind::BiasLine), b.rate(DecayKind::BiasLine));
        assert_eq!(a.rate(DecayKind::Dielectric), b.rate(DecayKind::Dielectric));
        assert_ne!(a.rate(DecayKind::Purcell), b.rate(DecayKind::Purcell));
    }

    #[test]
    fn avoidance_scan_reports_violations_at_high_qubit_frequency() {
        // cavity moved from the top of the band to its bottom: the larger g at
        // low ω_c outweighs the extra detuning for qubits far above the cavity
        let p = design_a();
        let (lo, hi) = cavity_band(&p);
        let from = CavitySetting::from_params(&p, hi, mhz_to_rad(24.0)).unwrap();
        let to = CavitySetting::from_params(&p, lo, mhz_to_rad(24.0)).unwrap();
        let grid: Vec<f64> = (0..=200).map(|k| ghz_to_rad(6.9 + 1.88 * k as f64 / 200.0)).collect();
        let scan = purcell_avoidance_scan(&p, &from, &to, &grid, 82_400.0).unwrap();
        assert!(!scan.violations.is_empty());
        assert!(scan.points.iter().any(|pt| pt.t1_to > pt.t1_from));
        // violations sit at the far end of the grid
        let first = scan.violations[0];
        assert!(scan.violations.iter().all(|&w| w >= first));
        assert!(scan.points.iter().filter(|pt| pt.qubit_freq < first).all(|pt| pt.t1_to >= pt.t1_from));
    }

    #[test]
    fn spectrum_single_point_matches_budget() {
        let p = design_a();
        let s = table_setting(6.78, 78.0, 24.0);
        let w = ghz_to_rad(6.1);
        let pts = t1_spectrum(&p, &s, &[w], 82_400.0).unwrap();
        assert_eq!(pts[0].budget.as_ref().unwrap(), &combined_budget(&p, &s, w, 82_400.0).unwrap());
    }

    proptest! {
        #[test]
        fn rates_are_additive(f01 in 4.0f64..9.0, fc in 4.8f64..6.8, g in 0.0f64..200.0, k in 1.0f64..50.0, qd in 1e3f64..1e6, bias in 0.0f64..1e7) {
            let s = table_setting(fc, 2.0 * g, k);
            if let Ok(b) = budget_with_bias_rate(&s, ghz_to_rad(f01), qd, bias) {
                let sum: f64 = b.channels.iter().map(|c| c.rate).sum();
                prop_assert_eq!(b.total_rate, sum);
                prop_assert_eq!(b.t1_total, 1.0 / sum);
                prop_assert!(b.channels.iter().all(|c| c.rate >= 0.0));
            }
        }

        #[test]
        fn spectrum_order_independent(seed in 0u64..1000) {
            let s = table_setting(6.78, 78.0, 24.0);
            let mut grid: Vec<f64> = (0..40).map(|k| ghz_to_rad(5.0 + 0.1 * k as f64)).collect();
            let fwd = t1_spectrum_with_bias_rate(&s, &grid, 82_400.0, 1e6).unwrap();
            let n = grid.len();
            grid.rotate_left((seed as usize) % n);
            let rot = t1_spectrum_with_bias_rate(&s, &grid, 82_400.0, 1e6).unwrap();
            for p in &rot {
                let q = fwd.iter().find(|q| q.qubit_freq == p.qubit_freq).unwrap();
                prop_assert_eq!(p, q);
            }
        }

        #[test]
        fn vanishing_kappa_leaves_bias_and_dielectric(f01 in 4.0f64..6.0, qd in 1e3f64..1e6, bias in 0.0f64..1e7) {
            let s = CavitySetting::new(ghz_to_rad(6.78), 1e-300, mhz_to_rad(39.0)).unwrap();
            let w = ghz_to_rad(f01);
            let b = budget_with_bias_rate(&s, w, qd, bias).unwrap();
            prop_assert!((b.total_rate - (bias + w / qd)).abs() <= 1e-12 * b.total_rate);
        }
    }
}
