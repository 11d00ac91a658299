//! Piecewise-constant flux schedules: survival of the excited state and
//! readout quality for static and dynamic cavity operation.

use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::coupling::{dispersive_shift, inductive_g, DispersiveModel};
use crate::levels::qubit_levels_at;
use crate::loss::{combined_budget, CavitySetting};
use crate::params::{CircuitParams, FluxBias};
use crate::readout::{dispersive_snr, ReadoutChannel};
use crate::squid::cavity_frequency_at;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    Coherent,
    Measurement,
    Reset,
    Transit,
}

/// Bias pair held during a segment. `qubit_branch` pins the qubit well;
/// `None` takes the reset branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub phi_q: f64,
    pub phi_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_branch: Option<i64>,
}

impl BiasPoint {
    pub fn new(phi_q: f64, phi_c: f64) -> Self {
        Self { phi_q, phi_c, qubit_branch: None }
    }

    fn midpoint(&self, other: &BiasPoint) -> BiasPoint {
        BiasPoint {
            phi_q: 0.5 * (self.phi_q + other.phi_q),
            phi_c: 0.5 * (self.phi_c + other.phi_c),
            qubit_branch: self.qubit_branch,
        }
    }

    fn same_bias(&self, other: &BiasPoint) -> bool {
        self.phi_q == other.phi_q && self.phi_c == other.phi_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSegment {
    /// seconds
    pub duration: f64,
    #[serde(flatten)]
    pub bias: BiasPoint,
    pub mode: SegmentMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSchedule {
    pub segments: Vec<FluxSegment>,
    /// Inserted between segments whose bias differs; evaluated at the
    /// midpoint bias.
    #[serde(default)]
    pub ramp_time: f64,
}

impl FluxSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_time >= 0.0 && self.ramp_time.is_finite()) {
            return Err(Error::invalid("ramp_time", "must be >= 0 and finite"));
        }
        for s in &self.segments {
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return Err(Error::invalid("duration", "must be >= 0 and finite"));
            }
            FluxBias::new(s.bias.phi_q)?;
            FluxBias::new(s.bias.phi_c)?;
        }
        Ok(())
    }

    /// Segments with ramps made explicit.
    pub fn expanded(&self) -> Vec<FluxSegment> {
        let mut out = Vec::with_capacity(2 * self.segments.len());
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 && self.ramp_time > 0.0 {
                let prev = &self.segments[i - 1];
                if !prev.bias.same_bias(&s.bias) {
                    out.push(FluxSegment {
                        duration: self.ramp_time,
                        bias: prev.bias.midpoint(&s.bias),
                        mode: SegmentMode::Transit,
                    });
                }
            }
            out.push(*s);
        }
        out
    }

    pub fn total_duration(&self) -> f64 {
        self.expanded().iter().map(|s| s.duration).sum()
    }
}

/// How κ is obtained at each cavity setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaModel {
    /// The readout channel's κ everywhere.
    Fixed,
    /// κ = ω_c / Q_c.
    LoadedQ(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleContext {
    pub q_d: f64,
    pub kappa: KappaModel,
    pub channel: ReadoutChannel,
}

/// Conditions while one segment is held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub index: usize,
    pub mode: SegmentMode,
    pub duration: f64,
    pub phi_q: f64,
    pub phi_c: f64,
    /// rad/s
    pub qubit_freq: f64,
    pub anharmonicity: f64,
    pub cavity_freq: f64,
    pub coupling: f64,
    pub detuning: f64,
    pub kappa: f64,
    /// Full three-level shift 2χ, rad/s.
    pub full_shift: f64,
    /// 1/s
    pub total_rate: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub survival_probability: f64,
    pub effective_t1: f64,
    pub measurement_snr: f64,
    pub total_duration: f64,
    pub per_segment: Vec<SegmentReport>,
}

/// Rates and shifts at one bias point. `index` labels errors.
pub fn evaluate_bias(
    params: &CircuitParams,
    bias: &BiasPoint,
    ctx: &ScheduleContext,
    index: usize,
) -> Result<SegmentReport> {
    let unstable = |e: Error| Error::UnstableBias { index, reason: e.to_string() };
    let levels = qubit_levels_at(params, FluxBias::new(bias.phi_q)?, bias.qubit_branch).map_err(|e| match e {
        Error::UnstableBias { reason, .. } => Error::UnstableBias { index, reason },
        e @ (Error::WellTooShallow { .. } | Error::UnstableBranch { .. }) => unstable(e),
        e => e,
    })?;
    let qubit_freq = TWO_PI * levels.f01;
    let cavity_freq = TWO_PI * cavity_frequency_at(params, FluxBias::new(bias.phi_c)?)?;
    let coupling = inductive_g(params, cavity_freq)?;
    let detuning = qubit_freq - cavity_freq;
    if detuning.abs() < coupling {
        return Err(Error::HybridizedSegment { index });
    }
    let kappa = match ctx.kappa {
        KappaModel::Fixed => ctx.channel.kappa,
        KappaModel::LoadedQ(q) => {
            if !(q > 0.0) {
                return Err(Error::invalid("loaded_q", "must be > 0"));
            }
            cavity_freq / q
        }
    };
    let setting = CavitySetting::new(cavity_freq, kappa, coupling)?;
    let budget = combined_budget(params, &setting, qubit_freq, ctx.q_d)?;
    let shift = dispersive_shift(coupling, detuning, levels.anharmonicity, DispersiveModel::ThreeLevel)?;
    Ok(SegmentReport {
        index,
        mode: SegmentMode::Transit,
        duration: 0.0,
        phi_q: bias.phi_q,
        phi_c: bias.phi_c,
        qubit_freq,
        anharmonicity: levels.anharmonicity,
        cavity_freq,
        coupling,
        detuning,
        kappa,
        full_shift: shift.full_shift,
        total_rate: budget.total_rate,
        t1: budget.t1_total,
    })
}

pub fn evaluate_schedule(
    params: &CircuitParams,
    schedule: &FluxSchedule,
    ctx: &ScheduleContext,
) -> Result<ScheduleReport> {
    schedule.validate()?;
    let mut per_segment = Vec::new();
    for (index, seg) in schedule.expanded().iter().enumerate() {
        let mut r = evaluate_bias(params, &seg.bias, ctx, index)?;
        r.mode = seg.mode;
        r.duration = seg.duration;
        per_segment.push(r);
    }
    Ok(summarize(per_segment, &ctx.channel))
}

fn summarize(per_segment: Vec<SegmentReport>, channel: &ReadoutChannel) -> ScheduleReport {
    let exponent: f64 = per_segment.iter().map(|r| r.total_rate * r.duration).sum();
    let total_duration: f64 = per_segment.iter().map(|r| r.duration).sum();
    let measurement_snr = per_segment
        .iter()
        .filter(|r| r.mode == SegmentMode::Measurement)
        .map(|r| dispersive_snr(&ReadoutChannel { kappa: r.kappa, ..*channel }, r.t1))
        .fold(0.0, f64::max);
    ScheduleReport {
        survival_probability: (-exponent).exp(),
        effective_t1: if exponent > 0.0 { total_duration / exponent } else { f64::INFINITY },
        measurement_snr,
        total_duration,
        per_segment,
    }
}

/// Static schedule (measurement bias throughout) and dynamic schedule
/// (coherent bias while evolving, measurement bias while measuring).
pub fn compare_static_dynamic(
    params: &CircuitParams,
    coherent: BiasPoint,
    measurement: BiasPoint,
    evolve_time: f64,
    measure_time: f64,
    ramp_time: f64,
    ctx: &ScheduleContext,
) -> Result<(ScheduleReport, ScheduleReport)> {
    let build = |evolve_bias: BiasPoint| {
        let mut segments = Vec::new();
        if evolve_time > 0.0 {
            segments.push(FluxSegment { duration: evolve_time, bias: evolve_bias, mode: SegmentMode::Coherent });
        }
        segments.push(FluxSegment { duration: measure_time, bias: measurement, mode: SegmentMode::Measurement });
        FluxSchedule { segments, ramp_time }
    };
    let stat = evaluate_schedule(params, &build(measurement), ctx)?;
    let dynamic = evaluate_schedule(params, &build(coherent), ctx)?;
    Ok((stat, dynamic))
}
