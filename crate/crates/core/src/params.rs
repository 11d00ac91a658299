//! Circuit description shared by every module.

use serde::{Deserialize, Serialize};

use crate::constants::{FLUX_QUANTUM, REDUCED_FLUX_QUANTUM, TWO_PI};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Critical current I_o, A.
    pub critical_current: f64,
    /// Junction self-capacitance C_J, F. Not used by the closed-form
    /// frequencies; carried for completeness.
    pub self_capacitance: f64,
}

impl JunctionParams {
    pub fn new(critical_current: f64, self_capacitance: f64) -> Result<Self> {
        let j = Self { critical_current, self_capacitance };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.critical_current.is_finite() && self.critical_current > 0.0) {
            return Err(Error::invalid("critical_current", "must be finite and > 0"));
        }
        if !(self.self_capacitance.is_finite() && self.self_capacitance >= 0.0) {
            return Err(Error::invalid("self_capacitance", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Zero-flux Josephson inductance L_J = Φ0 / (2π I_o).
    pub fn josephson_inductance(&self) -> f64 {
        FLUX_QUANTUM / (TWO_PI * self.critical_current)
    }

    /// Josephson energy E_J = Φ0 I_o / 2π.
    pub fn josephson_energy(&self) -> f64 {
        REDUCED_FLUX_QUANTUM * self.critical_current
    }
}

/// Full electrical description of one cavity + qubit design (SI units).
///
/// Loop inductances are the total loop values including the shared mutual,
/// i.e. `loop_inductance_cavity` is L_c + M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub loop_inductance_cavity: f64,
    pub loop_inductance_qubit: f64,
    /// Inductance in series with the cavity shunt capacitor, L_s.
    pub series_inductance: f64,
    /// Inductance in the qubit junction arm, L_x.
    pub junction_arm_inductance: f64,
    /// Mutual inductance shared by the two loops, M.
    pub shared_mutual: f64,
    pub shunt_capacitance_cavity: f64,
    pub shunt_capacitance_qubit: f64,
    pub cavity_junction: JunctionParams,
    pub qubit_junction: JunctionParams,
    pub bias_mutual_cavity: f64,
    pub bias_mutual_qubit: f64,
    /// Bias-line / feedline characteristic impedance Z_o, Ω.
    pub feedline_impedance: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v:e}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v:e}")))
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        positive("loop_inductance_cavity", self.loop_inductance_cavity)?;
        positive("loop_inductance_qubit", self.loop_inductance_qubit)?;
        positive("series_inductance", self.series_inductance)?;
        non_negative("junction_arm_inductance", self.junction_arm_inductance)?;
        positive("shared_mutual", self.shared_mutual)?;
        positive("shunt_capacitance_cavity", self.shunt_capacitance_cavity)?;
        positive("shunt_capacitance_qubit", self.shunt_capacitance_qubit)?;
        non_negative("bias_mutual_cavity", self.bias_mutual_cavity)?;
        non_negative("bias_mutual_qubit", self.bias_mutual_qubit)?;
        positive("feedline_impedance", self.feedline_impedance)?;
        self.cavity_junction.validate()?;
        self.qubit_junction.validate()?;
        if self.shared_mutual >= self.loop_inductance_cavity.min(self.loop_inductance_qubit) {
            return Err(Error::invalid("shared_mutual", "must be smaller than both loop inductances"));
        }
        Ok(())
    }

    /// β_c = 𝓛_c / L_Jc.
    pub fn beta_cavity(&self) -> f64 {
        self.loop_inductance_cavity / self.cavity_junction.josephson_inductance()
    }

    /// β_q = 𝓛_q / L_Jq.
    pub fn beta_qubit(&self) -> f64 {
        self.loop_inductance_qubit / self.qubit_junction.josephson_inductance()
    }

    /// β_x = L_x / L_Jq.
    pub fn beta_arm(&self) -> f64 {
        self.junction_arm_inductance / self.qubit_junction.josephson_inductance()
    }

    /// ω_c0 = 1/√(𝓛_c C_c), rad/s.
    pub fn cavity_bare_frequency(&self) -> f64 {
        1.0 / (self.loop_inductance_cavity * self.shunt_capacitance_cavity).sqrt()
    }

    /// ω_q0 = 1/√(𝓛_q C_q), rad/s.
    pub fn qubit_bare_frequency(&self) -> f64 {
        1.0 / (self.loop_inductance_qubit * self.shunt_capacitance_qubit).sqrt()
    }

    /// ω_s = 1/√(L_s C_c), rad/s.
    pub fn series_frequency(&self) -> f64 {
        1.0 / (self.series_inductance * self.shunt_capacitance_cavity).sqrt()
    }
}

/// Which rf SQUID of the pair an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Cavity,
    Qubit,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Flavor::Cavity => f.write_str("cavity"),
            Flavor::Qubit => f.write_str("qubit"),
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cavity" => Ok(Flavor::Cavity),
            "qubit" => Ok(Flavor::Qubit),
            other => Err(Error::Config(format!("unknown flavor `{other}`"))),
        }
    }
}

/// Applied flux in units of Φ0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FluxBias(pub f64);

impl FluxBias {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::invalid("flux_bias", "must be finite"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// 2πφ, the phase the loop is driven towards.
    pub fn phase(self) -> f64 {
        TWO_PI * self.0
    }
}

impl From<f64> for FluxBias {
    fn from(v: f64) -> Self {
        Self(v)
    }
}
