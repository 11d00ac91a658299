//! Energy levels of the qubit's metastable well by finite-difference
//! diagonalization of H = −4E_C d²/dθ² + V(θ).
//!
//! The well is cut out between the adjacent saddle points with hard walls.
//! Where a side has no saddle the wall is placed far enough out that V has
//! risen well above the levels of interest.

use serde::{Deserialize, Serialize};

use crate::constants::{PLANCK, TWO_PI};
use crate::eigen::lowest_eigenvalues;
use crate::params::{CircuitParams, Flavor, FluxBias};
use crate::potential::ReducedPotential;
use crate::squid::{effective_beta, qubit_angular_frequency_at_phase, squid_branches, SquidBranch};
use crate::{Error, Result};

pub const DEFAULT_GRID: usize = 2048;
pub const MIN_GRID: usize = 512;

/// Height, in units of ħω_p, at which an open side of the well is walled off.
const OPEN_SIDE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitLevels {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub f01: f64,
    pub f12: f64,
    /// α = ω12 − ω01, rad/s.
    pub anharmonicity: f64,
    /// α / ω01.
    pub relative_anharmonicity: f64,
}

impl QubitLevels {
    fn from_energies(e: [f64; 3]) -> Self {
        let f01 = (e[1] - e[0]) / PLANCK;
        let f12 = (e[2] - e[1]) / PLANCK;
        let anharmonicity = TWO_PI * (f12 - f01);
        Self { e0: e[0], e1: e[1], e2: e[2], f01, f12, anharmonicity, relative_anharmonicity: (f12 - f01) / f01 }
    }
}

/// Lowest `k` eigenvalues (Hz) of −E_C4 d²/dθ² + V(θ) on (lo, hi) with
/// Dirichlet walls, `n` interior points. `kinetic_hz` is 4E_C/h and
/// `potential_hz` returns V/h.
pub fn levels_in_window(
    potential_hz: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    kinetic_hz: f64,
    k: usize,
) -> Vec<f64> {
    let dx = (hi - lo) / (n + 1) as f64;
    let t = kinetic_hz / (dx * dx);
    let diag: Vec<f64> = (1..=n).map(|i| 2.0 * t + potential_hz(lo + dx * i as f64)).collect();
    let off = vec![-t; n - 1];
    lowest_eigenvalues(&diag, &off, k)
}

/// Three lowest levels of the qubit well that holds `branch`.
pub fn qubit_levels(
    params: &CircuitParams,
    bias: FluxBias,
    branch: &SquidBranch,
    n_grid: usize,
) -> Result<QubitLevels> {
    if n_grid < MIN_GRID {
        return Err(Error::invalid("n_grid", format!("must be at least {MIN_GRID}")));
    }
    if !branch.is_stable() {
        return Err(Error::UnstableBranch { phase: branch.junction_phase });
    }
    let branches = squid_branches(params, bias, Flavor::Qubit)?;
    let idx = branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_stable())
        .min_by(|(_, a), (_, b)| {
            (a.junction_phase - branch.junction_phase)
                .abs()
                .partial_cmp(&(b.junction_phase - branch.junction_phase).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .ok_or(Error::UnstableBranch { phase: branch.junction_phase })?;
    let here = branches[idx];
    if (here.junction_phase - branch.junction_phase).abs() > 1e-6 {
        return Err(Error::invalid("branch", format!("not a minimum at φ_q = {}", bias.0)));
    }

    let pot = ReducedPotential::new(params, Flavor::Qubit, bias)?;
    let v_min = pot.energy(here.node_phase);
    let omega_p = qubit_angular_frequency_at_phase(params, here.junction_phase);
    let quantum = PLANCK * omega_p / TWO_PI;
    let width = (crate::constants::HBAR / (pot.mass() * omega_p)).sqrt();

    let open_wall = |dir: f64| {
        let mut t = here.node_phase;
        let step = 0.25 * width;
        // bounded: V grows quadratically away from the minimum
        for _ in 0..100_000 {
            t += dir * step;
            if pot.energy(t) - v_min > OPEN_SIDE_CUTOFF * quantum {
                break;
            }
        }
        t
    };
    let left = idx.checked_sub(1).map(|j| branches[j]);
    let right = branches.get(idx + 1).copied();
    let lo = left.map_or_else(|| open_wall(-1.0), |b| b.node_phase);
    let hi = right.map_or_else(|| open_wall(1.0), |b| b.node_phase);
    let barrier =
        [left, right].iter().flatten().map(|b| pot.energy(b.node_phase) - v_min).fold(f64::INFINITY, f64::min);

    let kinetic_hz = 4.0 * pot.charging_energy() / PLANCK;
    let ev = levels_in_window(|t| (pot.energy(t) - v_min) / PLANCK, lo, hi, n_grid, kinetic_hz, 3);
    let bound = ev.iter().filter(|&&e| e * PLANCK < barrier).count();
    // the wall at the saddle pushes a level that sits close to the barrier
    // top upward, so also demand room for one more level above e2
    if bound < 3 || (2.0 * ev[2] - ev[1]) * PLANCK >= barrier {
        return Err(Error::WellTooShallow { bound_levels: bound });
    }
    Ok(QubitLevels::from_energies([v_min + ev[0] * PLANCK, v_min + ev[1] * PLANCK, v_min + ev[2] * PLANCK]))
}

/// Convenience: levels on branch `branch_id` (or the reset branch) at `bias`.
pub fn qubit_levels_at(params: &CircuitParams, bias: FluxBias, branch_id: Option<i64>) -> Result<QubitLevels> {
    let branches = crate::squid::solve_flux_quantization(
        effective_beta(params, Flavor::Qubit),
        bias,
        crate::squid::DEFAULT_FLUX_TOL,
    )?;
    let b = crate::squid::select_branch(&branches, bias, branch_id).ok_or(Error::UnstableBias {
        index: 0,
        reason: format!("no stable branch {branch_id:?} at φ_q = {}", bias.0),
    })?;
    qubit_levels(params, bias, &b, DEFAULT_GRID)
}

/// Qubit flux φ_q ≥ 0 on branch 0 where the 0→1 transition sits at
/// `f01_hz`, by bisection on the diagonalized levels.
pub fn flux_for_f01(params: &CircuitParams, f01_hz: f64) -> Result<FluxBias> {
    let top = qubit_levels_at(params, FluxBias(0.0), Some(0))?.f01;
    if !(f01_hz > 0.0 && f01_hz <= top) {
        return Err(Error::OutOfRange { what: "qubit f01 (Hz)", value: f01_hz, lo: 0.0, hi: top });
    }
    let beta = effective_beta(params, Flavor::Qubit);
    let edge = if beta > 1.0 {
        let ds = (-1.0 / beta).acos();
        (ds + beta * ds.sin()) / TWO_PI
    } else {
        0.5
    };
    // f01 falls monotonically from φ_q = 0 toward the edge
    let (mut lo, mut hi) = (0.0, edge);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let above = match qubit_levels_at(params, FluxBias(mid), Some(0)) {
            Ok(lv) => lv.f01 >= f01_hz,
            Err(Error::WellTooShallow { .. }) => false,
            Err(e) => return Err(e),
        };
        if above {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let lv = qubit_levels_at(params, FluxBias(lo), Some(0))?;
    if (lv.f01 / f01_hz - 1.0).abs() > 1e-6 {
        return Err(Error::OutOfRange { what: "qubit f01 (Hz)", value: f01_hz, lo: lv.f01, hi: top });
    }
    Ok(FluxBias(lo))
}
