//! Text configuration: circuit designs and flux schedules in CLI units.
//!
//! Designs are TOML files with `[cavity]`, `[qubit]`, `[coupling]`,
//! `[resonator]`, `[loss]` and `[qubit_band]` sections plus optional
//! `[[table1]]` rows of measured (f_c, 2g, κ). Field names carry their unit
//! (`_nH`, `_pF`, `_uA`, `_pH`, `_GHz`, `_MHz`, `_us`, `_ns`). The two shipped
//! designs live in `presets/` and are embedded at build time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{ghz_to_rad, mhz_to_rad};
use crate::levels::flux_for_f01;
use crate::params::{CircuitParams, JunctionParams};
use crate::readout::{loaded_q, ReadoutChannel};
use crate::schedule::{BiasPoint, FluxSchedule, FluxSegment, KappaModel, ScheduleContext, SegmentMode};
use crate::squid::cavity_flux_for_frequency;
use crate::{Error, Result};

const DESIGN_A: &str = include_str!("../presets/designA.toml");
const DESIGN_B: &str = include_str!("../presets/designB.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    #[serde(rename = "loop_inductance_nH")]
    pub loop_inductance_nh: f64,
    #[serde(rename = "series_inductance_nH")]
    pub series_inductance_nh: f64,
    #[serde(rename = "shunt_capacitance_pF")]
    pub shunt_capacitance_pf: f64,
    #[serde(rename = "critical_current_uA")]
    pub critical_current_ua: f64,
    #[serde(rename = "junction_capacitance_pF", default)]
    pub junction_capacitance_pf: f64,
    #[serde(rename = "bias_mutual_pH", default)]
    pub bias_mutual_ph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSection {
    #[serde(rename = "loop_inductance_nH")]
    pub loop_inductance_nh: f64,
    #[serde(rename = "junction_arm_inductance_nH", default)]
    pub junction_arm_inductance_nh: f64,
    #[serde(rename = "shunt_capacitance_pF")]
    pub shunt_capacitance_pf: f64,
    #[serde(rename = "critical_current_uA")]
    pub critical_current_ua: f64,
    #[serde(rename = "junction_capacitance_pF", default)]
    pub junction_capacitance_pf: f64,
    #[serde(rename = "bias_mutual_pH", default)]
    pub bias_mutual_ph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(rename = "shared_mutual_pH")]
    pub shared_mutual_ph: f64,
    #[serde(default = "default_impedance")]
    pub feedline_impedance_ohm: f64,
}

fn default_impedance() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub internal_q: f64,
    pub external_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub dielectric_q: f64,
    /// Replaces the bias-line formula when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_line_t1_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    #[serde(rename = "min_GHz")]
    pub min_ghz: f64,
    #[serde(rename = "max_GHz", default, skip_serializing_if = "Option::is_none")]
    pub max_ghz: Option<f64>,
}

/// One measured cavity setting: (f_c, 2g/2π, κ/2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Row {
    #[serde(rename = "fc_GHz")]
    pub fc_ghz: f64,
    #[serde(rename = "two_g_MHz")]
    pub two_g_mhz: f64,
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
}

impl Table1Row {
    pub fn cavity_freq(&self) -> f64 {
        ghz_to_rad(self.fc_ghz)
    }

    /// g in rad/s (half the quoted splitting).
    pub fn coupling(&self) -> f64 {
        0.5 * mhz_to_rad(self.two_g_mhz)
    }

    pub fn kappa(&self) -> f64 {
        mhz_to_rad(self.kappa_mhz)
    }
}

/// A design file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub name: String,
    pub cavity: CavitySection,
    pub qubit: QubitSection,
    pub coupling: CouplingSection,
    pub resonator: ResonatorSection,
    pub loss: LossSection,
    pub qubit_band: BandSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table1: Vec<Table1Row>,
}

/// A validated design in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPreset {
    pub name: String,
    pub params: CircuitParams,
    pub table1_rows: Vec<Table1Row>,
    pub internal_q: f64,
    pub external_q: f64,
    pub dielectric_q: f64,
    /// Fixed bias-line T1 in seconds, if the design pins it.
    pub bias_line_t1: Option<f64>,
    /// Qubit band in Hz; `None` upper edge means the top of the qubit curve.
    pub qubit_band: (f64, Option<f64>),
}

/// Map a section-local parameter name back to its config key.
fn config_key(name: &str) -> &str {
    match name {
        "loop_inductance_cavity" => "cavity.loop_inductance_nH",
        "loop_inductance_qubit" => "qubit.loop_inductance_nH",
        "series_inductance" => "cavity.series_inductance_nH",
        "junction_arm_inductance" => "qubit.junction_arm_inductance_nH",
        "shared_mutual" => "coupling.shared_mutual_pH",
        "shunt_capacitance_cavity" => "cavity.shunt_capacitance_pF",
        "shunt_capacitance_qubit" => "qubit.shunt_capacitance_pF",
        "bias_mutual_cavity" => "cavity.bias_mutual_pH",
        "bias_mutual_qubit" => "qubit.bias_mutual_pH",
        "feedline_impedance" => "coupling.feedline_impedance_ohm",
        "critical_current" => "critical_current_uA",
        "self_capacitance" => "junction_capacitance_pF",
        other => other,
    }
}

fn field_error(origin: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            Error::Config(format!("{origin}: field `{}`: {reason}", config_key(name)))
        }
        other => other,
    }
}

impl DesignFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<CircuitParams> {
        let c = &self.cavity;
        let q = &self.qubit;
        let p = CircuitParams {
            loop_inductance_cavity: c.loop_inductance_nh * 1e-9,
            loop_inductance_qubit: q.loop_inductance_nh * 1e-9,
            series_inductance: c.series_inductance_nh * 1e-9,
            junction_arm_inductance: q.junction_arm_inductance_nh * 1e-9,
            shared_mutual: self.coupling.shared_mutual_ph * 1e-12,
            shunt_capacitance_cavity: c.shunt_capacitance_pf * 1e-12,
            shunt_capacitance_qubit: q.shunt_capacitance_pf * 1e-12,
            cavity_junction: JunctionParams {
                critical_current: c.critical_current_ua * 1e-6,
                self_capacitance: c.junction_capacitance_pf * 1e-12,
            },
            qubit_junction: JunctionParams {
                critical_current: q.critical_current_ua * 1e-6,
                self_capacitance: q.junction_capacitance_pf * 1e-12,
            },
            bias_mutual_cavity: c.bias_mutual_ph * 1e-12,
            bias_mutual_qubit: q.bias_mutual_ph * 1e-12,
            feedline_impedance: self.coupling.feedline_impedance_ohm,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn into_preset(self, origin: &str) -> Result<DesignPreset> {
        let params = self.params().map_err(|e| field_error(origin, e))?;
        let bad = |key: &str, why: &str| Error::Config(format!("{origin}: field `{key}`: {why}"));
        loaded_q(self.resonator.internal_q, self.resonator.external_q)
            .map_err(|_| bad("resonator", "quality factors must be finite and > 0"))?;
        if !(self.loss.dielectric_q.is_finite() && self.loss.dielectric_q > 0.0) {
            return Err(bad("loss.dielectric_q", "must be finite and > 0"));
        }
        if let Some(t) = self.loss.bias_line_t1_us {
            if !(t.is_finite() && t > 0.0) {
                return Err(bad("loss.bias_line_t1_us", "must be finite and > 0"));
            }
        }
        let band = &self.qubit_band;
        if !(band.min_ghz.is_finite() && band.min_ghz > 0.0) || band.max_ghz.is_some_and(|m| !(m > band.min_ghz)) {
            return Err(bad("qubit_band", "need 0 < min_GHz < max_GHz"));
        }
        for (i, r) in self.table1.iter().enumerate() {
            if [r.fc_ghz, r.two_g_mhz, r.kappa_mhz].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(bad(&format!("table1[{i}]"), "values must be finite and > 0"));
            }
        }
        Ok(DesignPreset {
            name: self.name,
            params,
            table1_rows: self.table1,
            internal_q: self.resonator.internal_q,
            external_q: self.resonator.external_q,
            dielectric_q: self.loss.dielectric_q,
            bias_line_t1: self.loss.bias_line_t1_us.map(|t| t * 1e-6),
            qubit_band: (band.min_ghz * 1e9, band.max_ghz.map(|m| m * 1e9)),
        })
    }
}

impl DesignPreset {
    /// Shipped design by name (`A`, `B`, `designA`, `designB`).
    pub fn builtin(name: &str) -> Result<Self> {
        let (text, origin) = match name.to_ascii_lowercase().trim_start_matches("design") {
            "a" => (DESIGN_A, "designA.toml"),
            "b" => (DESIGN_B, "designB.toml"),
            _ => return Err(Error::Config(format!("unknown design `{name}`; expected A or B"))),
        };
        Self::from_toml(text, origin)
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        DesignFile::parse(text, origin)?.into_preset(origin)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Raw text of a shipped design, for writing out and editing.
    pub fn builtin_text(name: &str) -> Result<&'static str> {
        match name.to_ascii_lowercase().trim_start_matches("design") {
            "a" => Ok(DESIGN_A),
            "b" => Ok(DESIGN_B),
            _ => Err(Error::Config(format!("unknown design `{name}`; expected A or B"))),
        }
    }

    /// 1/γ_qB to use in budgets: the pinned value or the formula.
    pub fn bias_line_rate(&self) -> f64 {
        match self.bias_line_t1 {
            Some(t) => 1.0 / t,
            None => crate::loss::bias_line_rate(&self.params).rate,
        }
    }

    pub fn loaded_q(&self) -> f64 {
        1.0 / (1.0 / self.internal_q + 1.0 / self.external_q)
    }

    /// Closest measured row to a cavity frequency (Hz), within 1%.
    pub fn table1_row_near(&self, fc_hz: f64) -> Option<Table1Row> {
        self.table1_rows
            .iter()
            .copied()
            .filter(|r| (r.fc_ghz * 1e9 / fc_hz - 1.0).abs() < 0.01)
            .min_by(|a, b| (a.fc_ghz * 1e9 - fc_hz).abs().total_cmp(&(b.fc_ghz * 1e9 - fc_hz).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
    #[serde(default)]
    pub noise_photons: f64,
    #[serde(rename = "amplifier_bandwidth_MHz")]
    pub amplifier_bandwidth_mhz: f64,
    pub drive_photons: f64,
    /// Use κ = ω_c/Q_c at each cavity setting instead of the fixed κ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loaded_q: Option<f64>,
}

/// A segment bias may be given as flux or as a target frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub mode: SegmentMode,
    pub duration_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_q: Option<f64>,
    #[serde(rename = "f01_GHz", default, skip_serializing_if = "Option::is_none")]
    pub f01_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_c: Option<f64>,
    #[serde(rename = "fc_GHz", default, skip_serializing_if = "Option::is_none")]
    pub fc_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_branch: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default)]
    pub ramp_ns: f64,
    /// Overrides the design's dielectric Q.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dielectric_q: Option<f64>,
    pub channel: ChannelSection,
    #[serde(rename = "segment")]
    pub segments: Vec<SegmentSection>,
}

impl ScheduleFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Resolve frequency targets against a design. A qubit target sits on
    /// branch 0 unless a branch is given.
    pub fn resolve(&self, design: &DesignPreset) -> Result<(FluxSchedule, ScheduleContext)> {
        let p = &design.params;
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, s) in self.segments.iter().enumerate() {
            let which = |what: &str| Error::Config(format!("segment[{i}]: give exactly one of {what}"));
            let (phi_q, default_branch) = match (s.phi_q, s.f01_ghz) {
                (Some(phi), None) => (phi, None),
                (None, Some(f)) => (flux_for_f01(p, f * 1e9)?.0, Some(0)),
                _ => return Err(which("phi_q, f01_GHz")),
            };
            let phi_c = match (s.phi_c, s.fc_ghz) {
                (Some(phi), None) => phi,
                (None, Some(f)) => cavity_flux_for_frequency(p, f * 1e9)?.0,
                _ => return Err(which("phi_c, fc_GHz")),
            };
            segments.push(FluxSegment {
                duration: s.duration_ns * 1e-9,
                bias: BiasPoint { phi_q, phi_c, qubit_branch: s.qubit_branch.or(default_branch) },
                mode: s.mode,
            });
        }
        let schedule = FluxSchedule { segments, ramp_time: self.ramp_ns * 1e-9 };
        schedule.validate().map_err(|e| Error::Config(format!("schedule: {e}")))?;
        let c = &self.channel;
        let channel = ReadoutChannel::new(
            mhz_to_rad(c.kappa_mhz),
            c.noise_photons,
            mhz_to_rad(c.amplifier_bandwidth_mhz),
            c.drive_photons,
        )
        .map_err(|e| Error::Config(format!("channel: {e}")))?;
        let ctx = ScheduleContext {
            q_d: self.dielectric_q.unwrap_or(design.dielectric_q),
            kappa: c.loaded_q.map_or(KappaModel::Fixed, KappaModel::LoadedQ),
            channel,
        };
        Ok((schedule, ctx))
    }
}
