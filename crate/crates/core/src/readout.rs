//! Notch-resonator line shape, readout-flux optimization for tunneling
//! readout and dispersive-readout figures of merit.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::constants::FLUX_QUANTUM;
use crate::params::{CircuitParams, Flavor, FluxBias};
use crate::squid::{cavity_frequency_at, squid_branches, SquidBranch};
use crate::{Error, Result};

/// 1/Q_c = 1/Q_i + 1/Q_e. An infinite Q_i gives Q_e.
pub fn loaded_q(q_i: f64, q_e: f64) -> Result<f64> {
    if !(q_i > 0.0 && q_e > 0.0) {
        return Err(Error::invalid("quality factor", "Q_i and Q_e must be > 0"));
    }
    Ok(1.0 / (1.0 / q_i + 1.0 / q_e))
}

/// Ring-up/ring-down time 2/κ in seconds.
pub fn cavity_response_time(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }
    Ok(2.0 / kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorLineShape {
    /// Hz
    pub f0: f64,
    pub q_i: f64,
    pub q_e: f64,
    /// Impedance-mismatch skew θ, rad.
    pub skew_angle: f64,
}

impl ResonatorLineShape {
    pub fn new(f0: f64, q_i: f64, q_e: f64, skew_angle: f64) -> Result<Self> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::invalid("f0", "must be positive and finite"));
        }
        loaded_q(q_i, q_e)?;
        if !skew_angle.is_finite() {
            return Err(Error::invalid("skew_angle", "must be finite"));
        }
        Ok(Self { f0, q_i, q_e, skew_angle })
    }

    pub fn q_c(&self) -> f64 {
        1.0 / (1.0 / self.q_i + 1.0 / self.q_e)
    }

    /// S21(f) = 1 − (Q_c/Q_e) e^{iθ} / (1 + 2i Q_c (f/f0 − 1)).
    pub fn transmission(&self, f: f64) -> Complex<f64> {
        let qc = self.q_c();
        let x = 2.0 * qc * (f / self.f0 - 1.0);
        let num = Complex::from_polar(qc / self.q_e, self.skew_angle);
        Complex::new(1.0, 0.0) - num / Complex::new(1.0, x)
    }

    /// Linear amplitude depth 1 − |S21(f0)| for θ = 0.
    pub fn dip_depth(&self) -> f64 {
        self.q_c() / self.q_e
    }

    /// Linewidth f0/Q_c in Hz.
    pub fn linewidth(&self) -> f64 {
        self.f0 / self.q_c()
    }

    /// Energy decay rate κ = ω0/Q_c, rad/s.
    pub fn kappa(&self) -> f64 {
        crate::constants::hz_to_rad(self.f0) / self.q_c()
    }
}

/// Numerically measured dip of a line shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredDip {
    pub f_min: f64,
    /// 1 − min |S21|
    pub depth: f64,
    /// Full width at half depth of the power dip 1 − |S21|², Hz.
    pub fwhm: f64,
}

/// Scan ±`span_linewidths` around f0 on `n` points and measure the dip.
pub fn measure_dip(line: &ResonatorLineShape, span_linewidths: f64, n: usize) -> Result<MeasuredDip> {
    if n < 16 {
        return Err(Error::invalid("n", "need at least 16 scan points"));
    }
    let half = span_linewidths * line.linewidth();
    let fs: Vec<f64> = (0..n).map(|i| line.f0 - half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
    let power: Vec<f64> = fs.iter().map(|&f| 1.0 - line.transmission(f).norm_sqr()).collect();
    let (imax, pmax) = power.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty scan");
    let amp_min = fs.iter().map(|&f| line.transmission(f).norm()).fold(f64::INFINITY, f64::min);
    let target = 0.5 * pmax;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if power[i] < target {
                let t = (power[prev] - target) / (power[prev] - power[i]);
                return Some(fs[prev] + t * (fs[i] - fs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev()).ok_or(Error::invalid("span_linewidths", "scan too narrow"))?;
    let right = crossing(&mut (imax + 1..n)).ok_or(Error::invalid("span_linewidths", "scan too narrow"))?;
    Ok(MeasuredDip { f_min: fs[imax], depth: 1.0 - amp_min, fwhm: right - left })
}

/// Amplifier and drive description for dispersive readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutChannel {
    /// rad/s
    pub kappa: f64,
    /// Added noise N in photons.
    pub noise_photons: f64,
    /// rad/s
    pub amplifier_bandwidth: f64,
    pub drive_photons: f64,
}

impl ReadoutChannel {
    pub fn new(kappa: f64, noise_photons: f64, amplifier_bandwidth: f64, drive_photons: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if !(noise_photons >= 0.0) {
            return Err(Error::invalid("noise_photons", "must be >= 0"));
        }
        if !(amplifier_bandwidth > 0.0) {
            return Err(Error::invalid("amplifier_bandwidth", "must be > 0"));
        }
        if !(drive_photons >= 0.0) {
            return Err(Error::invalid("drive_photons", "must be >= 0"));
        }
        Ok(Self { kappa, noise_photons, amplifier_bandwidth, drive_photons })
    }

    /// η = 1/(N + 1).
    pub fn efficiency(&self) -> f64 {
        1.0 / (self.noise_photons + 1.0)
    }

    /// B ≥ κ.
    pub fn bandwidth_adequate(&self) -> bool {
        self.amplifier_bandwidth >= self.kappa
    }

    /// Drive stays at or below the critical photon number.
    pub fn within_critical_photons(&self, n_crit: f64) -> bool {
        self.drive_photons <= n_crit
    }
}

/// SNR_max = 2 n κ T1 η.
pub fn dispersive_snr(channel: &ReadoutChannel, t1: f64) -> f64 {
    2.0 * channel.drive_photons * channel.kappa * t1 * channel.efficiency()
}

/// Phase shift arctan(2χ/κ) of the transmitted tone, rad.
pub fn dispersive_phase_signal(chi: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }
    Ok((2.0 * chi / kappa).atan())
}

/// df_c/dφ_c in Hz per Φ0 by centered difference with step `h`.
pub fn cavity_flux_slope(params: &CircuitParams, phi_c: f64, h: f64) -> Result<f64> {
    let up = cavity_frequency_at(params, FluxBias::new(phi_c + h)?)?;
    let down = cavity_frequency_at(params, FluxBias::new(phi_c - h)?)?;
    Ok((up - down) / (2.0 * h))
}

pub const SLOPE_STEP: f64 = 1e-5;

/// Cavity flux change Φ0-normalized from switching the qubit between two
/// branches: M ΔI_q / Φ0.
pub fn induced_cavity_flux(params: &CircuitParams, a: &SquidBranch, b: &SquidBranch) -> f64 {
    let di = params.qubit_junction.critical_current * (a.junction_phase.sin() - b.junction_phase.sin());
    params.shared_mutual * di / FLUX_QUANTUM
}

fn two_stable(branches: &[SquidBranch]) -> Result<(SquidBranch, SquidBranch)> {
    let stable: Vec<_> = branches.iter().filter(|b| b.is_stable()).copied().collect();
    if stable.len() < 2 {
        return Err(Error::SingleBranch);
    }
    Ok((stable[0], stable[1]))
}

/// |df_c/dφ_c| · |M ΔI_q / Φ0| for the first two stable qubit branches, Hz.
pub fn flux_state_cavity_shift(params: &CircuitParams, phi_c: f64, qubit_branches: &[SquidBranch]) -> Result<f64> {
    let (a, b) = two_stable(qubit_branches)?;
    let slope = cavity_flux_slope(params, phi_c, SLOPE_STEP)?;
    Ok(slope.abs() * induced_cavity_flux(params, &a, &b).abs())
}

/// Dip depth (linear amplitude) and width (Hz) as a function of cavity flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DipModel {
    Constant {
        depth: f64,
        width: f64,
    },
    /// Rows (φ_c, depth, width) sorted by φ_c, linearly interpolated and held
    /// constant beyond the ends.
    Table(Vec<(f64, f64, f64)>),
}

impl DipModel {
    pub fn from_line_shape(line: &ResonatorLineShape) -> Self {
        DipModel::Constant { depth: line.dip_depth(), width: line.linewidth() }
    }

    pub fn table(mut rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dip table", "no rows"));
        }
        if rows.iter().any(|r| !(r.0.is_finite() && r.1 >= 0.0 && r.2 > 0.0)) {
            return Err(Error::invalid("dip table", "need finite phi_c, depth >= 0, width > 0"));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(DipModel::Table(rows))
    }

    pub fn at(&self, phi_c: f64) -> (f64, f64) {
        match self {
            DipModel::Constant { depth, width } => (*depth, *width),
            DipModel::Table(rows) => {
                let first = rows[0];
                let last = rows[rows.len() - 1];
                if phi_c <= first.0 {
                    return (first.1, first.2);
                }
                if phi_c >= last.0 {
                    return (last.1, last.2);
                }
                let k = rows.partition_point(|r| r.0 <= phi_c);
                let (a, b) = (rows[k - 1], rows[k]);
                let t = (phi_c - a.0) / (b.0 - a.0);
                (a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2))
            }
        }
    }

    /// Same model with every depth multiplied by `s`.
    pub fn scaled_depth(&self, s: f64) -> Self {
        match self {
            DipModel::Constant { depth, width } => DipModel::Constant { depth: depth * s, width: *width },
            DipModel::Table(rows) => DipModel::Table(rows.iter().map(|r| (r.0, r.1 * s, r.2)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelingReadoutPoint {
    pub phi_c: f64,
    pub f_dip_state0: f64,
    pub f_dip_state1: f64,
    pub dip_depth: f64,
    pub dip_width: f64,
    /// Hz per Φ0
    pub slope: f64,
    /// (depth/width)·|slope|, slope taken per Φ0.
    pub figure_of_merit: f64,
    /// |Δf| exceeds the mean of the two dip widths.
    pub well_separated: bool,
}

impl TunnelingReadoutPoint {
    pub fn separation(&self) -> f64 {
        (self.f_dip_state0 - self.f_dip_state1).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelingOptimum {
    pub best: TunnelingReadoutPoint,
    /// No grid point has a positive figure of merit.
    pub no_optimum: bool,
    pub trace: Vec<TunnelingReadoutPoint>,
}

/// Grid search with caller-supplied cavity response. `cavity` returns
/// (f_c in Hz, df_c/dφ_c in Hz/Φ0) at a cavity flux; `induced` is the cavity
/// flux change between the two qubit states in Φ0.
pub fn optimize_tunneling_with(
    grid: &[f64],
    dips: &DipModel,
    induced: f64,
    cavity: impl Fn(f64) -> Result<(f64, f64)>,
) -> Result<TunnelingOptimum> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut trace = Vec::with_capacity(grid.len());
    for &phi_c in grid {
        let (fc, slope) = cavity(phi_c)?;
        let (depth, width) = dips.at(phi_c);
        let half = 0.5 * slope * induced;
        let point = TunnelingReadoutPoint {
            phi_c,
            f_dip_state0: fc + half,
            f_dip_state1: fc - half,
            dip_depth: depth,
            dip_width: width,
            slope,
            figure_of_merit: depth / width * slope.abs(),
            well_separated: (slope * induced).abs() > width,
        };
        trace.push(point);
    }
    let best =
        *trace.iter().reduce(|a, b| if b.figure_of_merit > a.figure_of_merit { b } else { a }).expect("non-empty");
    Ok(TunnelingOptimum { best, no_optimum: !(best.figure_of_merit > 0.0), trace })
}

/// Optimal cavity flux for discriminating the two qubit flux states at the
/// qubit readout flux `phi_q`.
pub fn optimize_tunneling_readout(
    params: &CircuitParams,
    phi_q: FluxBias,
    dips: &DipModel,
    grid: &[f64],
) -> Result<TunnelingOptimum> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let branches = squid_branches(params, phi_q, Flavor::Qubit)?;
    let (a, b) = two_stable(&branches)?;
    let induced = induced_cavity_flux(params, &a, &b);
    optimize_tunneling_with(grid, dips, induced, |phi_c| {
        Ok((cavity_frequency_at(params, FluxBias::new(phi_c)?)?, cavity_flux_slope(params, phi_c, SLOPE_STEP)?))
    })
}
