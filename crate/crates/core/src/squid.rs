//! Flux quantization and plasma frequencies of a single rf SQUID.
//!
//! The junction phase δ of a loop with screening parameter β biased at flux φ
//! satisfies `2πφ = β sin δ + δ`. For β > 1 the equation has several roots;
//! roots with `1 + β cos δ > 0` are local minima of the loop potential and
//! alternate with unstable extrema.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::params::{CircuitParams, Flavor, FluxBias};
use crate::potential::ReducedPotential;
use crate::{Error, Result};

/// Default residual tolerance for [`solve_flux_quantization`].
pub const DEFAULT_FLUX_TOL: f64 = 1e-12;

const MAX_REFINE_ITERATIONS: usize = 200;
const TIE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableMinimum,
    UnstableExtremum,
}

/// One solution of the flux-quantization condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidBranch {
    /// Junction phase δ, rad.
    pub junction_phase: f64,
    /// Capacitor-node phase at the extremum, rad. Equal to δ when the loop
    /// has no extra series inductance on the junction side.
    pub node_phase: f64,
    pub stability: Stability,
    /// Escape barrier of a stable well, J. Zero for unstable extrema and
    /// infinite for a well without an adjacent saddle.
    pub well_depth: f64,
    /// For a stable well, same as `well_depth`. For an unstable extremum,
    /// its height above the deeper neighbouring minimum.
    pub barrier_height: f64,
    /// Loop current I_o sin δ, A.
    pub circulating_current: f64,
    /// Winding index: the integer nearest δ/2π.
    pub branch_id: i64,
}

impl SquidBranch {
    pub fn is_stable(&self) -> bool {
        self.stability == Stability::StableMinimum
    }
}

fn residual(beta: f64, drive: f64, delta: f64) -> f64 {
    delta + beta * delta.sin() - drive
}

fn branch_id(delta: f64) -> i64 {
    (delta / TWO_PI).round() as i64
}

/// All real roots of `2πφ = β sin δ + δ`, sorted by δ.
///
/// Metrics that need a physical scale (`well_depth`, `barrier_height`,
/// `circulating_current`) are zero; [`squid_branches`] fills them in.
pub fn solve_flux_quantization(beta_eff: f64, bias: FluxBias, tol: f64) -> Result<Vec<SquidBranch>> {
    if !(beta_eff.is_finite() && beta_eff > 0.0) {
        return Err(Error::invalid("beta_eff", "must be finite and > 0"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", "must be finite and > 0"));
    }
    let bias = FluxBias::new(bias.0)?;
    let drive = bias.phase();
    let lo = drive - beta_eff - PI;
    let hi = drive + beta_eff + PI;
    let max_step = PI / (8.0 * (1.0 + beta_eff));
    let n = ((hi - lo) / max_step).ceil() as usize;
    let step = (hi - lo) / n as f64;

    let mut roots: Vec<f64> = Vec::new();
    let mut x0 = lo;
    let mut r0 = residual(beta_eff, drive, x0);
    for i in 1..=n {
        let x1 = lo + step * i as f64;
        let r1 = residual(beta_eff, drive, x1);
        if r0 == 0.0 {
            roots.push(x0);
        } else if r0 * r1 < 0.0 {
            roots.push(refine_root(beta_eff, drive, x0, x1, r0, tol)?);
        }
        x0 = x1;
        r0 = r1;
    }
    if r0 == 0.0 {
        roots.push(x0);
    }

    Ok(roots
        .into_iter()
        .map(|delta| SquidBranch {
            junction_phase: delta,
            node_phase: delta,
            stability: if 1.0 + beta_eff * delta.cos() > 0.0 {
                Stability::StableMinimum
            } else {
                Stability::UnstableExtremum
            },
            well_depth: 0.0,
            barrier_height: 0.0,
            circulating_current: 0.0,
            branch_id: branch_id(delta),
        })
        .collect())
}

/// Bisection until the bracket is small, then safeguarded Newton.
fn refine_root(beta: f64, drive: f64, mut a: f64, mut b: f64, mut ra: f64, tol: f64) -> Result<f64> {
    let mut x = 0.5 * (a + b);
    for _ in 0..MAX_REFINE_ITERATIONS {
        let r = residual(beta, drive, x);
        if r.abs() < tol {
            return Ok(x);
        }
        if (r < 0.0) == (ra < 0.0) {
            a = x;
            ra = r;
        } else {
            b = x;
        }
        let scale = a.abs().max(b.abs()).max(1.0);
        if b - a <= 4.0 * f64::EPSILON * scale {
            // Bracket collapsed to rounding level; accept if the residual is
            // at the floating-point floor of the terms involved.
            if r.abs() <= 64.0 * f64::EPSILON * (drive.abs() + beta + scale) {
                return Ok(x);
            }
            break;
        }
        let slope = 1.0 + beta * x.cos();
        let newton = x - r / slope;
        x = if (b - a) < 1e-3 && slope != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    Err(Error::NoConvergence { what: "flux quantization root", iterations: MAX_REFINE_ITERATIONS })
}

/// Total screening parameter entering flux quantization for one SQUID.
pub fn effective_beta(params: &CircuitParams, flavor: Flavor) -> f64 {
    match flavor {
        Flavor::Cavity => params.beta_cavity(),
        Flavor::Qubit => params.beta_qubit() + params.beta_arm(),
    }
}

/// Flux-quantization roots with physical well metrics and currents.
pub fn squid_branches(params: &CircuitParams, bias: FluxBias, flavor: Flavor) -> Result<Vec<SquidBranch>> {
    params.validate()?;
    let mut branches = solve_flux_quantization(effective_beta(params, flavor), bias, DEFAULT_FLUX_TOL)?;
    let potential = ReducedPotential::new(params, flavor, bias)?;
    let junction = match flavor {
        Flavor::Cavity => params.cavity_junction,
        Flavor::Qubit => params.qubit_junction,
    };
    let energies: Vec<f64> = branches.iter().map(|b| potential.energy_at_junction_phase(b.junction_phase)).collect();
    let n = branches.len();
    for i in 0..n {
        let neighbours = [i.checked_sub(1), (i + 1 < n).then_some(i + 1)];
        let b = &mut branches[i];
        b.node_phase = potential.node_phase_of(b.junction_phase);
        b.circulating_current = junction.critical_current * b.junction_phase.sin();
        let neighbour_energies = neighbours.iter().flatten().map(|&j| energies[j]);
        match b.stability {
            Stability::StableMinimum => {
                let lowest_saddle = neighbour_energies.fold(f64::INFINITY, f64::min);
                b.well_depth = lowest_saddle - energies[i];
                b.barrier_height = b.well_depth;
            }
            Stability::UnstableExtremum => {
                let deepest = neighbour_energies.fold(f64::INFINITY, f64::min);
                b.well_depth = 0.0;
                b.barrier_height = if deepest.is_finite() { energies[i] - deepest } else { 0.0 };
            }
        }
    }
    Ok(branches)
}

/// The stable branch a reset protocol lands in: the one whose winding index
/// is nearest the applied flux (ties go to the lower index), or the branch
/// with the requested index. A branch at δ = ±π answers to either of the
/// two indices it straddles.
pub fn select_branch(branches: &[SquidBranch], bias: FluxBias, branch_id: Option<i64>) -> Option<SquidBranch> {
    let stable = branches.iter().filter(|b| b.is_stable());
    match branch_id {
        Some(id) => {
            let stable: Vec<&SquidBranch> = stable.collect();
            stable
                .iter()
                .find(|b| b.branch_id == id)
                // A branch sitting at δ = ±π rounds to either neighbour.
                .or_else(|| stable.iter().find(|b| (b.junction_phase / TWO_PI - id as f64).abs() <= 0.5 + TIE_SLACK))
                .map(|b| **b)
        }
        None => stable
            .min_by(|a, b| {
                let da = (a.branch_id as f64 - bias.0).abs();
                let db = (b.branch_id as f64 - bias.0).abs();
                da.partial_cmp(&db).unwrap().then(a.branch_id.cmp(&b.branch_id))
            })
            .copied(),
    }
}

fn check_branch(branch: &SquidBranch, beta_eff: f64, bias: FluxBias) -> Result<()> {
    if !branch.is_stable() {
        return Err(Error::UnstableBranch { phase: branch.junction_phase });
    }
    let r = residual(beta_eff, bias.phase(), branch.junction_phase);
    if r.abs() > 1e-6 * (1.0 + bias.phase().abs()) {
        return Err(Error::invalid("branch", format!("does not solve flux quantization at φ = {}", bias.0)));
    }
    Ok(())
}

/// Cavity plasma frequency from the cavity-junction phase, rad/s.
pub fn cavity_angular_frequency_at_phase(params: &CircuitParams, junction_phase: f64) -> f64 {
    let y = 1.0 + params.beta_cavity() * junction_phase.cos();
    let ratio = params.series_inductance / params.loop_inductance_cavity;
    params.cavity_bare_frequency() * y.sqrt() / (1.0 + y * ratio).sqrt()
}

/// Qubit plasma frequency from the qubit-junction phase, rad/s.
pub fn qubit_angular_frequency_at_phase(params: &CircuitParams, junction_phase: f64) -> f64 {
    let c = junction_phase.cos();
    let bx = params.beta_arm();
    let num = 1.0 + (params.beta_qubit() + bx) * c;
    params.qubit_bare_frequency() * (num / (1.0 + bx * c)).sqrt()
}

/// Cavity resonance f_c in Hz on a stable branch.
pub fn cavity_frequency(params: &CircuitParams, bias: FluxBias, branch: &SquidBranch) -> Result<f64> {
    params.validate()?;
    check_branch(branch, params.beta_cavity(), bias)?;
    Ok(cavity_angular_frequency_at_phase(params, branch.junction_phase) / TWO_PI)
}

/// Qubit plasma frequency f_q in Hz on a stable branch.
pub fn qubit_plasma_frequency(params: &CircuitParams, bias: FluxBias, branch: &SquidBranch) -> Result<f64> {
    params.validate()?;
    check_branch(branch, effective_beta(params, Flavor::Qubit), bias)?;
    Ok(qubit_angular_frequency_at_phase(params, branch.junction_phase) / TWO_PI)
}

/// Plasma frequency (Hz) of every stable branch at one bias, with its
/// branch id. Two entries inside a hysteretic interval.
pub fn stable_frequencies(params: &CircuitParams, bias: FluxBias, flavor: Flavor) -> Result<Vec<(i64, f64)>> {
    params.validate()?;
    let branches = solve_flux_quantization(effective_beta(params, flavor), bias, DEFAULT_FLUX_TOL)?;
    Ok(branches
        .iter()
        .filter(|b| b.is_stable())
        .map(|b| {
            let w = match flavor {
                Flavor::Cavity => cavity_angular_frequency_at_phase(params, b.junction_phase),
                Flavor::Qubit => qubit_angular_frequency_at_phase(params, b.junction_phase),
            };
            (b.branch_id, w / TWO_PI)
        })
        .collect())
}

/// Loop current I_o sin δ for the given flavor's junction.
pub fn circulating_current(params: &CircuitParams, branch: &SquidBranch, flavor: Flavor) -> f64 {
    let junction = match flavor {
        Flavor::Cavity => params.cavity_junction,
        Flavor::Qubit => params.qubit_junction,
    };
    junction.critical_current * branch.junction_phase.sin()
}

/// Cavity frequency at a flux bias on the reset branch, Hz.
pub fn cavity_frequency_at(params: &CircuitParams, bias: FluxBias) -> Result<f64> {
    let branches = solve_flux_quantization(params.beta_cavity(), bias, DEFAULT_FLUX_TOL)?;
    let branch = select_branch(&branches, bias, None).ok_or(Error::UnstableBranch { phase: f64::NAN })?;
    cavity_frequency(params, bias, &branch)
}

/// Range [ω_min, ω_max] of the cavity plasma frequency over all stable
/// bias points, rad/s.
pub fn cavity_band(params: &CircuitParams) -> (f64, f64) {
    let beta = params.beta_cavity();
    let c_min = (-1.0f64).max(-1.0 / beta);
    let at = |c: f64| cavity_angular_frequency_at_phase(params, c.acos());
    (at(c_min), at(1.0))
}

/// Flux φ_c ∈ [0, 1/2] on the principal branch where the cavity sits at
/// `freq_hz`.
pub fn cavity_flux_for_frequency(params: &CircuitParams, freq_hz: f64) -> Result<FluxBias> {
    let (lo, hi) = cavity_band(params);
    let w = TWO_PI * freq_hz;
    if !(w >= lo && w <= hi) {
        return Err(Error::OutOfRange {
            what: "cavity frequency (Hz)",
            value: freq_hz,
            lo: lo / TWO_PI,
            hi: hi / TWO_PI,
        });
    }
    let beta = params.beta_cavity();
    let ratio = params.series_inductance / params.loop_inductance_cavity;
    let w2 = (w / params.cavity_bare_frequency()).powi(2);
    let y = w2 / (1.0 - w2 * ratio);
    let c = ((y - 1.0) / beta).clamp(-1.0, 1.0);
    let delta = c.acos();
    Ok(FluxBias((delta + beta * delta.sin()) / TWO_PI))
}

/// Flux φ_q ≥ 0 on the branch continuous with φ_q = 0 where the qubit plasma
/// frequency equals `freq_hz`.
pub fn qubit_flux_for_frequency(params: &CircuitParams, freq_hz: f64) -> Result<FluxBias> {
    let beta = effective_beta(params, Flavor::Qubit);
    let bx = params.beta_arm();
    let top = qubit_angular_frequency_at_phase(params, 0.0);
    let w = TWO_PI * freq_hz;
    if !(w > 0.0 && w <= top) {
        return Err(Error::OutOfRange { what: "qubit frequency (Hz)", value: freq_hz, lo: 0.0, hi: top / TWO_PI });
    }
    let w2 = (w / params.qubit_bare_frequency()).powi(2);
    let c = (1.0 - w2) / (w2 * bx - beta);
    if !(-1.0..=1.0).contains(&c) || 1.0 + beta * c <= 0.0 {
        return Err(Error::OutOfRange { what: "qubit frequency (Hz)", value: freq_hz, lo: 0.0, hi: top / TWO_PI });
    }
    let delta = c.acos();
    Ok(FluxBias((delta + beta * delta.sin()) / TWO_PI))
}
