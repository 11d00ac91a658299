//! Circuit-parameter extraction from spectroscopy sweeps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LsqOptions, Method, ParamSpace};
use crate::constants::TWO_PI;
use crate::params::{CircuitParams, Flavor, FluxBias};
use crate::squid::{
    cavity_angular_frequency_at_phase, effective_beta, qubit_angular_frequency_at_phase, select_branch,
    solve_flux_quantization, SquidBranch, DEFAULT_FLUX_TOL,
};
use crate::{Error, Result};

/// Residual, in σ units, charged for a point where the model has no stable
/// branch.
pub const FAILURE_PENALTY: f64 = 1e3;

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopySweep {
    /// Raw bias values (coil current, programmed flux, ...).
    pub bias: Vec<f64>,
    /// Hz
    pub frequency: Vec<f64>,
    /// Hz; uniform 0.1 % of the median frequency when absent.
    pub sigma: Option<Vec<f64>>,
    /// Explicit qubit branch per point; continuation when absent.
    pub branch_id: Option<Vec<i64>>,
    pub flavor: Flavor,
}

impl SpectroscopySweep {
    pub fn new(bias: Vec<f64>, frequency: Vec<f64>, flavor: Flavor) -> Result<Self> {
        let s = Self { bias, frequency, sigma: None, branch_id: None, flavor };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bias.len();
        if n < MIN_POINTS {
            return Err(Error::invalid("sweep", format!("need at least {MIN_POINTS} points, got {n}")));
        }
        if self.frequency.len() != n {
            return Err(Error::invalid("sweep", "bias and frequency lengths differ"));
        }
        if self.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("sweep", "non-finite bias"));
        }
        if self.frequency.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::invalid("sweep", "frequencies must be positive"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != n || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("sweep", "sigma must be positive with one entry per point"));
            }
        }
        if let Some(b) = &self.branch_id {
            if b.len() != n {
                return Err(Error::invalid("sweep", "branch_id needs one entry per point"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        match &self.sigma {
            Some(s) => s.clone(),
            None => {
                let mut f = self.frequency.clone();
                f.sort_by(|a, b| a.total_cmp(b));
                let n = f.len();
                let median = if n % 2 == 1 { f[n / 2] } else { 0.5 * (f[n / 2 - 1] + f[n / 2]) };
                vec![1e-3 * median; n]
            }
        }
    }
}

/// Map from raw bias to flux: φ = (bias − offset) / period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxCalibration {
    pub offset: f64,
    pub period: f64,
}

impl Default for FluxCalibration {
    fn default() -> Self {
        Self { offset: 0.0, period: 1.0 }
    }
}

impl FluxCalibration {
    pub fn flux(&self, bias: f64) -> f64 {
        (bias - self.offset) / self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    LoopInductanceCavity,
    LoopInductanceQubit,
    SeriesInductance,
    JunctionArmInductance,
    ShuntCapacitanceCavity,
    ShuntCapacitanceQubit,
    CriticalCurrentCavity,
    CriticalCurrentQubit,
    FluxOffset,
    FluxPeriod,
}

impl FitParam {
    pub const ALL: [FitParam; 10] = [
        FitParam::LoopInductanceCavity,
        FitParam::LoopInductanceQubit,
        FitParam::SeriesInductance,
        FitParam::JunctionArmInductance,
        FitParam::ShuntCapacitanceCavity,
        FitParam::ShuntCapacitanceQubit,
        FitParam::CriticalCurrentCavity,
        FitParam::CriticalCurrentQubit,
        FitParam::FluxOffset,
        FitParam::FluxPeriod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::LoopInductanceCavity => "loop_inductance_cavity",
            FitParam::LoopInductanceQubit => "loop_inductance_qubit",
            FitParam::SeriesInductance => "series_inductance",
            FitParam::JunctionArmInductance => "junction_arm_inductance",
            FitParam::ShuntCapacitanceCavity => "shunt_capacitance_cavity",
            FitParam::ShuntCapacitanceQubit => "shunt_capacitance_qubit",
            FitParam::CriticalCurrentCavity => "critical_current_cavity",
            FitParam::CriticalCurrentQubit => "critical_current_qubit",
            FitParam::FluxOffset => "flux_offset",
            FitParam::FluxPeriod => "flux_period",
        }
    }

    pub fn get(self, p: &CircuitParams, cal: &FluxCalibration) -> f64 {
        match self {
            FitParam::LoopInductanceCavity => p.loop_inductance_cavity,
            FitParam::LoopInductanceQubit => p.loop_inductance_qubit,
            FitParam::SeriesInductance => p.series_inductance,
            FitParam::JunctionArmInductance => p.junction_arm_inductance,
            FitParam::ShuntCapacitanceCavity => p.shunt_capacitance_cavity,
            FitParam::ShuntCapacitanceQubit => p.shunt_capacitance_qubit,
            FitParam::CriticalCurrentCavity => p.cavity_junction.critical_current,
            FitParam::CriticalCurrentQubit => p.qubit_junction.critical_current,
            FitParam::FluxOffset => cal.offset,
            FitParam::FluxPeriod => cal.period,
        }
    }

    pub fn set(self, p: &mut CircuitParams, cal: &mut FluxCalibration, v: f64) {
        match self {
            FitParam::LoopInductanceCavity => p.loop_inductance_cavity = v,
            FitParam::LoopInductanceQubit => p.loop_inductance_qubit = v,
            FitParam::SeriesInductance => p.series_inductance = v,
            FitParam::JunctionArmInductance => p.junction_arm_inductance = v,
            FitParam::ShuntCapacitanceCavity => p.shunt_capacitance_cavity = v,
            FitParam::ShuntCapacitanceQubit => p.shunt_capacitance_qubit = v,
            FitParam::CriticalCurrentCavity => p.cavity_junction.critical_current = v,
            FitParam::CriticalCurrentQubit => p.qubit_junction.critical_current = v,
            FitParam::FluxOffset => cal.offset = v,
            FitParam::FluxPeriod => cal.period = v,
        }
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitParam::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown fit parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub param: FitParam,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub sweep: SpectroscopySweep,
    /// Starting point; also supplies every fixed parameter.
    pub initial: CircuitParams,
    pub calibration: FluxCalibration,
    pub free: Vec<FreeParameter>,
    pub options: LsqOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedValue {
    pub name: String,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: CircuitParams,
    pub calibration: FluxCalibration,
    pub fitted: Vec<FittedValue>,
    /// Hz
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Points where the best-fit model had no stable branch.
    pub dropped_points: usize,
    /// Model minus data, Hz, in the sweep's order (NaN where dropped).
    pub residuals: Vec<f64>,
}

fn branch_frequency(params: &CircuitParams, flavor: Flavor, b: &SquidBranch) -> f64 {
    match flavor {
        Flavor::Cavity => cavity_angular_frequency_at_phase(params, b.junction_phase) / TWO_PI,
        Flavor::Qubit => qubit_angular_frequency_at_phase(params, b.junction_phase) / TWO_PI,
    }
}

/// Plasma frequency (Hz) predicted at each sweep point, `None` where no
/// stable branch exists. Without explicit branch ids the branch is followed
/// continuously in order of increasing bias, starting from the reset branch.
pub fn model_frequencies(
    params: &CircuitParams,
    cal: &FluxCalibration,
    sweep: &SpectroscopySweep,
) -> Result<Vec<Option<f64>>> {
    params.validate()?;
    if !(cal.period.is_finite() && cal.period != 0.0) {
        return Err(Error::invalid("flux_period", "must be finite and non-zero"));
    }
    let beta = effective_beta(params, sweep.flavor);
    let n = sweep.len();
    let mut out = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sweep.bias[a].total_cmp(&sweep.bias[b]).then(a.cmp(&b)));
    let mut prev: Option<SquidBranch> = None;
    for &i in &order {
        let bias = FluxBias(cal.flux(sweep.bias[i]));
        let roots = solve_flux_quantization(beta, bias, DEFAULT_FLUX_TOL)?;
        let chosen = match &sweep.branch_id {
            Some(ids) => select_branch(&roots, bias, Some(ids[i])),
            None => match prev {
                Some(p) => roots
                    .iter()
                    .filter(|b| b.is_stable())
                    .min_by(|a, b| {
                        (a.junction_phase - p.junction_phase)
                            .abs()
                            .total_cmp(&(b.junction_phase - p.junction_phase).abs())
                    })
                    .copied(),
                None => select_branch(&roots, bias, None),
            },
        };
        if let Some(b) = chosen {
            out[i] = Some(branch_frequency(params, sweep.flavor, &b));
            prev = Some(b);
        }
    }
    Ok(out)
}

fn apply(problem: &FitProblem, x: &[f64]) -> (CircuitParams, FluxCalibration) {
    let mut p = problem.initial;
    let mut cal = problem.calibration;
    for (fp, &v) in problem.free.iter().zip(x) {
        fp.param.set(&mut p, &mut cal, v);
    }
    (p, cal)
}

/// Weighted least-squares fit of the plasma-frequency model to a sweep.
pub fn fit_spectrum(problem: &FitProblem) -> Result<FitResult> {
    problem.sweep.validate()?;
    let nfree = problem.free.len();
    if problem.sweep.len() < 2 * nfree {
        return Err(Error::invalid("sweep", "need at least twice as many points as free parameters"));
    }
    for (i, a) in problem.free.iter().enumerate() {
        if problem.free[..i].iter().any(|b| b.param == a.param) {
            return Err(Error::Config(format!("parameter `{}` listed twice", a.param)));
        }
    }
    let sigma = problem.sweep.sigmas();
    let x0: Vec<f64> = problem.free.iter().map(|f| f.param.get(&problem.initial, &problem.calibration)).collect();
    let space = ParamSpace::new(
        &x0,
        problem.free.iter().map(|f| f.lower).collect(),
        problem.free.iter().map(|f| f.upper).collect(),
    )?;
    let residual_fn = |x: &[f64]| -> Result<Vec<f64>> {
        let (p, cal) = apply(problem, x);
        let model = match model_frequencies(&p, &cal, &problem.sweep) {
            Ok(m) => m,
            Err(Error::InvalidParameter { .. }) => {
                return Err(Error::ModelEvalFailure { dropped: problem.sweep.len(), total: problem.sweep.len() })
            }
            Err(e) => return Err(e),
        };
        Ok(model
            .iter()
            .zip(&problem.sweep.frequency)
            .zip(&sigma)
            .map(|((m, f), s)| match m {
                Some(m) => (m - f) / s,
                None => FAILURE_PENALTY,
            })
            .collect())
    };
    let outcome = levenberg_marquardt(&residual_fn, &x0, &space, &problem.options).map_err(|e| match e {
        Error::SingularJacobian { direction } => Error::SingularJacobian {
            direction: direction
                .into_iter()
                .zip(&problem.free)
                .map(|((_, v), f)| (f.param.name().to_string(), v))
                .collect(),
        },
        e => e,
    })?;
    let (params, calibration) = apply(problem, &outcome.x);
    let model = model_frequencies(&params, &calibration, &problem.sweep)?;
    let residuals: Vec<f64> =
        model.iter().zip(&problem.sweep.frequency).map(|(m, f)| m.map_or(f64::NAN, |m| m - f)).collect();
    let kept: Vec<f64> = residuals.iter().copied().filter(|r| r.is_finite()).collect();
    let dropped_points = residuals.len() - kept.len();
    let residual_rms =
        if kept.is_empty() { f64::NAN } else { (kept.iter().map(|r| r * r).sum::<f64>() / kept.len() as f64).sqrt() };
    let covariance = outcome.covariance();
    let fitted = problem
        .free
        .iter()
        .enumerate()
        .map(|(i, f)| FittedValue {
            name: f.param.name().to_string(),
            value: outcome.x[i],
            variance: covariance.as_ref().map_or(f64::NAN, |c| c[(i, i)]),
        })
        .collect();
    Ok(FitResult {
        params,
        calibration,
        fitted,
        residual_rms,
        iterations: outcome.iterations,
        converged: outcome.converged,
        method: outcome.method,
        initial_cost: outcome.initial_cost,
        final_cost: outcome.cost,
        dropped_points,
        residuals,
    })
}

/// Noise-free sweep from the model, for round-trip checks and fixtures.
pub fn synthesize_sweep(
    params: &CircuitParams,
    cal: &FluxCalibration,
    bias: Vec<f64>,
    flavor: Flavor,
) -> Result<SpectroscopySweep> {
    let probe = SpectroscopySweep { frequency: vec![1.0; bias.len()], bias, sigma: None, branch_id: None, flavor };
    let model = model_frequencies(params, cal, &probe)?;
    let frequency = model.into_iter().collect::<Option<Vec<f64>>>().ok_or(Error::UnstableBranch { phase: f64::NAN })?;
    let sweep = SpectroscopySweep { frequency, ..probe };
    sweep.validate()?;
    Ok(sweep)
}
