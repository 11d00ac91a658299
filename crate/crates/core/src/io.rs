//! CSV input and output.
//!
//! Dialect: comma separated, `.` decimal, one header line, LF line endings.
//! Numbers are written with the shortest representation that round-trips,
//! so identical inputs give byte-identical files. Missing values are empty
//! cells.

use std::io::{Read, Write};

use crate::constants::rad_to_ghz;
use crate::fit::{FitResult, SpectroscopySweep};
use crate::loss::{DecayKind, SpectrumPoint};
use crate::params::Flavor;
use crate::readout::{DipModel, TunnelingReadoutPoint};
use crate::{Error, Result};

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn write_table<W, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Parsed table: header as written plus rows of optional numbers, each
/// tagged with its 1-based line number.
struct Table {
    origin: String,
    header: Vec<String>,
    rows: Vec<(u64, Vec<Option<f64>>)>,
}

impl Table {
    fn read<R: Read>(r: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut vals = Vec::with_capacity(rec.len());
            for (i, cell) in rec.iter().enumerate() {
                if cell.is_empty() {
                    vals.push(None);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    let col = header.get(i).map_or("?", String::as_str);
                    Error::Config(format!("{origin}: line {line}, column `{col}`: `{cell}` is not a number"))
                })?;
                vals.push(Some(v));
            }
            rows.push((line, vals));
        }
        Ok(Self { origin: origin.to_string(), header, rows })
    }

    fn column(&self, names: &[&str]) -> Option<usize> {
        self.header.iter().position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.column(names).ok_or_else(|| {
            Error::Config(format!(
                "{}: missing column `{}` (header: {})",
                self.origin,
                names.join("` or `"),
                self.header.join(",")
            ))
        })
    }

    fn get(&self, row: &(u64, Vec<Option<f64>>), col: usize) -> Result<f64> {
        row.1.get(col).copied().flatten().ok_or_else(|| {
            Error::Config(format!("{}: line {}, column `{}`: value missing", self.origin, row.0, self.header[col]))
        })
    }

    fn values(&self, col: usize) -> Result<Vec<f64>> {
        self.rows.iter().map(|r| self.get(r, col)).collect()
    }

    /// Optional column: all present or all absent.
    fn optional(&self, names: &[&str]) -> Result<Option<Vec<f64>>> {
        match self.column(names) {
            Some(c) => self.values(c).map(Some),
            None => Ok(None),
        }
    }
}

/// Spectroscopy sweep: `bias` (or `phi`), `freq_GHz`, optional `sigma_GHz`
/// and `branch_id`. Emitted spectrum files read back directly.
pub fn read_sweep<R: Read>(r: R, flavor: Flavor, origin: &str) -> Result<SpectroscopySweep> {
    let t = Table::read(r, origin)?;
    let bias = t.values(t.require(&["bias", "phi"])?)?;
    let frequency: Vec<f64> = t.values(t.require(&["freq_GHz"])?)?.iter().map(|f| f * 1e9).collect();
    let sigma = t.optional(&["sigma_GHz"])?.map(|s| s.iter().map(|v| v * 1e9).collect());
    let branch_id = match t.optional(&["branch_id"])? {
        Some(ids) => Some(
            ids.iter()
                .map(|&v| {
                    if v.fract() == 0.0 {
                        Ok(v as i64)
                    } else {
                        Err(Error::Config(format!("{origin}: branch_id {v} is not an integer")))
                    }
                })
                .collect::<Result<Vec<i64>>>()?,
        ),
        None => None,
    };
    let sweep = SpectroscopySweep { bias, frequency, sigma, branch_id, flavor };
    sweep.validate().map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    Ok(sweep)
}

pub fn write_sweep<W: Write>(w: W, sweep: &SpectroscopySweep) -> Result<()> {
    let mut header = vec!["bias", "freq_GHz"];
    if sweep.sigma.is_some() {
        header.push("sigma_GHz");
    }
    if sweep.branch_id.is_some() {
        header.push("branch_id");
    }
    let rows = (0..sweep.len()).map(|i| {
        let mut row = vec![num(sweep.bias[i]), num(sweep.frequency[i] / 1e9)];
        if let Some(s) = &sweep.sigma {
            row.push(num(s[i] / 1e9));
        }
        if let Some(b) = &sweep.branch_id {
            row.push(b[i].to_string());
        }
        row
    });
    write_table(w, &header, rows)
}

/// Measured dip table: `phi_c`, `depth_linear`, `width_Hz`.
pub fn read_dip_table<R: Read>(r: R, origin: &str) -> Result<DipModel> {
    let t = Table::read(r, origin)?;
    let (p, d, w) = (t.require(&["phi_c"])?, t.require(&["depth_linear"])?, t.require(&["width_Hz"])?);
    let rows =
        t.rows.iter().map(|row| Ok((t.get(row, p)?, t.get(row, d)?, t.get(row, w)?))).collect::<Result<Vec<_>>>()?;
    DipModel::table(rows).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Transmission magnitude trace: `freq_GHz`, `s21_mag`. Frequencies in Hz.
pub fn read_trace<R: Read>(r: R, origin: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = Table::read(r, origin)?;
    let f = t.values(t.require(&["freq_GHz"])?)?.iter().map(|f| f * 1e9).collect();
    let m = t.values(t.require(&["s21_mag"])?)?;
    Ok((f, m))
}

pub fn write_trace<W: Write>(w: W, freq: &[f64], mag: &[f64]) -> Result<()> {
    write_table(w, &["freq_GHz", "s21_mag"], freq.iter().zip(mag).map(|(f, m)| vec![num(f / 1e9), num(*m)]))
}

/// One row of a flux spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub phi: f64,
    pub branch_id: i64,
    /// Hz
    pub frequency: f64,
}

pub fn write_spectrum<W: Write>(w: W, rows: &[SpectrumRow]) -> Result<()> {
    write_table(
        w,
        &["phi", "branch_id", "freq_GHz"],
        rows.iter().map(|r| vec![num(r.phi), r.branch_id.to_string(), num(r.frequency / 1e9)]),
    )
}

/// T1 budget sweep. Rates in 1/s; gaps where the qubit is hybridized with
/// the cavity are left empty.
pub fn write_budget<W: Write>(w: W, cavity_freq: f64, points: &[SpectrumPoint]) -> Result<()> {
    let fc = num(rad_to_ghz(cavity_freq));
    write_table(
        w,
        &["f01_GHz", "fc_GHz", "gamma_purcell", "gamma_bias", "gamma_dielectric", "t1_us"],
        points.iter().map(|p| {
            let mut row = vec![num(rad_to_ghz(p.qubit_freq)), fc.clone()];
            match &p.budget {
                Some(b) => row.extend([
                    num(b.rate(DecayKind::Purcell)),
                    num(b.rate(DecayKind::BiasLine)),
                    num(b.rate(DecayKind::Dielectric)),
                    num(b.t1_total * 1e6),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row
        }),
    )
}

pub fn write_optimizer_trace<W: Write>(w: W, trace: &[TunnelingReadoutPoint]) -> Result<()> {
    write_table(
        w,
        &["phi_c", "fom", "shift_Hz", "slope_Hz_per_Phi0"],
        trace.iter().map(|p| vec![num(p.phi_c), num(p.figure_of_merit), num(p.separation()), num(p.slope)]),
    )
}

/// Per-point fit residuals (model − data) in Hz.
pub fn write_residuals<W: Write>(w: W, sweep: &SpectroscopySweep, fit: &FitResult) -> Result<()> {
    write_table(
        w,
        &["bias", "phi", "freq_GHz", "model_GHz", "residual_Hz"],
        sweep
            .bias
            .iter()
            .zip(&sweep.frequency)
            .zip(&fit.residuals)
            .map(|((&b, &f), &r)| vec![num(b), num(fit.calibration.flux(b)), num(f / 1e9), num((f + r) / 1e9), num(r)]),
    )
}

/// Generic numeric table; used for coupling and dispersive-shift sweeps.
pub fn write_columns<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_table(w, header, rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()))
}
