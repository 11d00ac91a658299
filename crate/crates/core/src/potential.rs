//! Single-coordinate potentials of the two rf SQUIDs.
//!
//! The dynamical coordinate is the phase θ across the shunt capacitor. Any
//! inductance between the capacitor node and the junction (L_x in the qubit
//! arm, L_s in series with the cavity capacitor) joins a massless node, so the
//! junction phase δ is slaved to θ by minimizing the energy over δ. With no
//! such inductance θ = δ and the potential reduces to the textbook form
//!
//! ```text
//! U(δ) = (Φ0/2π)² (δ − 2πφ)² / 2𝓛 − E_J cos δ
//! ```
//!
//! Qubit (arm inductance inside the loop, capacitor across 𝓛_q):
//!
//! ```text
//! V(θ) = E_q (θ − 2πφ)²/2 + E_x (θ − δ)²/2 − E_J cos δ,   θ = δ + β_x sin δ
//! ```
//!
//! Cavity (L_s between the capacitor and the loop):
//!
//! ```text
//! V(θ) = E_s (θ − δ)²/2 + E_c (δ − 2πφ)²/2 − E_J cos δ,
//! θ = δ + (E_c (δ − 2πφ) + E_J sin δ) / E_s
//! ```
//!
//! At every extremum the curvature of V reproduces the closed-form plasma
//! frequencies in [`crate::squid`].

use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, REDUCED_FLUX_QUANTUM};
use crate::params::{CircuitParams, Flavor, FluxBias};
use crate::squid::{effective_beta, squid_branches, SquidBranch};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Topology {
    /// Series inductance inside the loop, between capacitor node and junction.
    ArmInLoop,
    /// Series inductance between capacitor and the loop.
    SeriesOutsideLoop,
}

#[derive(Debug, Clone)]
pub struct ReducedPotential {
    topology: Topology,
    drive: f64,
    /// (Φ0/2π)²/𝓛, J.
    loop_energy: f64,
    /// (Φ0/2π)²/L for the extra series inductance; `None` when it is zero.
    series_energy: Option<f64>,
    josephson_energy: f64,
    capacitance: f64,
}

impl ReducedPotential {
    pub fn new(params: &CircuitParams, flavor: Flavor, bias: FluxBias) -> Result<Self> {
        let phi2 = REDUCED_FLUX_QUANTUM * REDUCED_FLUX_QUANTUM;
        let (topology, loop_l, series_l, junction, capacitance) = match flavor {
            Flavor::Qubit => (
                Topology::ArmInLoop,
                params.loop_inductance_qubit,
                params.junction_arm_inductance,
                params.qubit_junction,
                params.shunt_capacitance_qubit,
            ),
            Flavor::Cavity => (
                Topology::SeriesOutsideLoop,
                params.loop_inductance_cavity,
                params.series_inductance,
                params.cavity_junction,
                params.shunt_capacitance_cavity,
            ),
        };
        let loop_energy = phi2 / loop_l;
        let series_energy = (series_l > 0.0).then(|| phi2 / series_l);
        let josephson_energy = junction.josephson_energy();
        if let Some(es) = series_energy {
            let stiffness = match topology {
                Topology::ArmInLoop => es,
                Topology::SeriesOutsideLoop => es + loop_energy,
            };
            if josephson_energy >= stiffness {
                return Err(Error::invalid(
                    "series inductance",
                    "junction node must be single-valued (L_J must exceed the series/arm inductance)",
                ));
            }
        }
        Ok(Self { topology, drive: bias.phase(), loop_energy, series_energy, josephson_energy, capacitance })
    }

    /// Charging energy e²/2C, J.
    pub fn charging_energy(&self) -> f64 {
        ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * self.capacitance)
    }

    /// Effective mass C (Φ0/2π)² for the node phase.
    pub fn mass(&self) -> f64 {
        self.capacitance * REDUCED_FLUX_QUANTUM * REDUCED_FLUX_QUANTUM
    }

    /// Capacitor-node phase θ for which `delta` is the optimal junction phase.
    pub fn node_phase_of(&self, delta: f64) -> f64 {
        let Some(es) = self.series_energy else { return delta };
        match self.topology {
            Topology::ArmInLoop => delta + self.josephson_energy / es * delta.sin(),
            Topology::SeriesOutsideLoop => {
                delta + (self.loop_energy * (delta - self.drive) + self.josephson_energy * delta.sin()) / es
            }
        }
    }

    fn node_phase_slope(&self, delta: f64) -> f64 {
        let Some(es) = self.series_energy else { return 1.0 };
        match self.topology {
            Topology::ArmInLoop => 1.0 + self.josephson_energy / es * delta.cos(),
            Topology::SeriesOutsideLoop => 1.0 + (self.loop_energy + self.josephson_energy * delta.cos()) / es,
        }
    }

    /// Junction phase δ slaved to a node phase θ (inverse of
    /// [`Self::node_phase_of`], which is strictly increasing).
    pub fn junction_phase_at(&self, theta: f64) -> f64 {
        if self.series_energy.is_none() {
            return theta;
        }
        // the map θ(δ) − δ is bounded by a linear term, so a bracket is found
        // by expanding outward
        let f = |d: f64| self.node_phase_of(d) - theta;
        let mut width = 1.0;
        let (mut a, mut b) = (theta - width, theta + width);
        while f(a) > 0.0 {
            width *= 2.0;
            a = theta - width;
        }
        while f(b) < 0.0 {
            width *= 2.0;
            b = theta + width;
        }
        let mut x = theta.clamp(a, b);
        for _ in 0..100 {
            let fx = f(x);
            if fx == 0.0 {
                return x;
            }
            if fx < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - fx / self.node_phase_slope(x);
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    fn energy_with(&self, theta: f64, delta: f64) -> f64 {
        let josephson = -self.josephson_energy * delta.cos();
        match (self.topology, self.series_energy) {
            (_, None) => 0.5 * self.loop_energy * (delta - self.drive).powi(2) + josephson,
            (Topology::ArmInLoop, Some(es)) => {
                0.5 * self.loop_energy * (theta - self.drive).powi(2) + 0.5 * es * (theta - delta).powi(2) + josephson
            }
            (Topology::SeriesOutsideLoop, Some(es)) => {
                0.5 * es * (theta - delta).powi(2) + 0.5 * self.loop_energy * (delta - self.drive).powi(2) + josephson
            }
        }
    }

    /// V(θ), J.
    pub fn energy(&self, theta: f64) -> f64 {
        self.energy_with(theta, self.junction_phase_at(theta))
    }

    /// V at the node phase belonging to junction phase δ, J.
    pub fn energy_at_junction_phase(&self, delta: f64) -> f64 {
        self.energy_with(self.node_phase_of(delta), delta)
    }
}

/// Potential sampled on a node-phase grid together with its minima.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub phase_grid: Vec<f64>,
    pub energy: Vec<f64>,
    pub minima: Vec<SquidBranch>,
}

/// Sample the potential over a window holding every stable minimum and the
/// barriers on either side.
pub fn potential_profile(
    params: &CircuitParams,
    bias: FluxBias,
    flavor: Flavor,
    n_points: usize,
) -> Result<PotentialProfile> {
    if n_points < 3 {
        return Err(Error::invalid("n_points", "need at least 3 grid points"));
    }
    let branches = squid_branches(params, bias, flavor)?;
    let potential = ReducedPotential::new(params, flavor, bias)?;
    let beta = effective_beta(params, flavor);
    let margin = beta + std::f64::consts::PI;
    let lo = potential.node_phase_of(bias.phase() - margin);
    let hi = potential.node_phase_of(bias.phase() + margin);
    let step = (hi - lo) / (n_points - 1) as f64;
    let phase_grid: Vec<f64> = (0..n_points).map(|i| lo + step * i as f64).collect();
    let energy = phase_grid.iter().map(|&t| potential.energy(t)).collect();
    Ok(PotentialProfile { phase_grid, energy, minima: branches.into_iter().filter(|b| b.is_stable()).collect() })
}
