use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use fluxcad::coherence::{rabi_decay_time, t2_from_rabi_decay};
use fluxcad::config::{DesignFile, ScheduleFile};
use fluxcad::constants::{ghz_to_rad, mhz_to_rad, rad_to_ghz, rad_to_mhz, TWO_PI};
use fluxcad::coupling::{capacitive_coupling_comparison, dispersive_shift, inductive_g, DispersiveModel};
use fluxcad::fit::{
    calibrate_flux_axis, fit_lineshape, fit_spectrum, FitParam, FitProblem, FluxCalibration, FreeParameter, LsqOptions,
};
use fluxcad::io::{self, SpectrumRow};
use fluxcad::levels::qubit_levels_at;
use fluxcad::loss::{peak_t1, t1_spectrum_with_bias_rate, CavitySetting};
use fluxcad::readout::{optimize_tunneling_readout, DipModel, ResonatorLineShape};
use fluxcad::schedule::{evaluate_schedule, FluxSchedule, ScheduleReport, SegmentMode};
use fluxcad::squid::{cavity_band, cavity_frequency_at, stable_frequencies};
use fluxcad::{DesignPreset, Error, ErrorClass, FluxBias};

use crate::output::Run;
use crate::{Cli, Command, DesignName, Format};

/// Honour FLUXCAD_THREADS as a cap on the worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("FLUXCAD_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| Error::Config(format!("FLUXCAD_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn points(cli: &Cli, default: usize, min: usize) -> Result<usize> {
    let n = cli.common.points.unwrap_or(default);
    if n < min {
        return Err(Error::Config(format!("--points must be at least {min}, got {n}")).into());
    }
    Ok(n)
}

fn design_text(cli: &Cli) -> Result<(String, String)> {
    Ok(match &cli.common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            (text, p.display().to_string())
        }
        None => {
            let name = match cli.common.design.unwrap_or(DesignName::A) {
                DesignName::A => "A",
                DesignName::B => "B",
            };
            (DesignPreset::builtin_text(name)?.to_string(), format!("design{name}"))
        }
    })
}

fn load_design(cli: &Cli, run: &mut Run) -> Result<DesignPreset> {
    let (text, origin) = design_text(cli)?;
    let file = DesignFile::parse(&text, &origin)?;
    run.digest("design", file.to_toml()?.as_bytes());
    Ok(file.into_preset(&origin)?)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> fluxcad::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Rows as an array of objects keyed by column name; non-finite cells become null.
fn table_json(header: &[&str], rows: &[Vec<f64>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Object(header.iter().zip(r).map(|(h, v)| (h.to_string(), json!(v))).collect()))
            .collect(),
    )
}

fn table(format: Format, header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(|w| io::write_columns(w, header, rows)),
        Format::Json => json_bytes(&table_json(header, rows)),
    }
}

fn is_domain(e: &Error) -> bool {
    e.class() == ErrorClass::ModelDomain
}

pub fn run(cli: &Cli) -> Result<()> {
    let name = match &cli.command {
        Command::Spectrum(_) => "spectrum",
        Command::Couple(_) => "couple",
        Command::Budget(_) => "budget",
        Command::ReadoutOpt(_) => "readout-opt",
        Command::Chi(_) => "chi",
        Command::Schedule(_) => "schedule",
        Command::Fit(_) => "fit",
        Command::Calibrate(_) => "calibrate",
        Command::Lineshape(_) => "lineshape",
        Command::Coherence(_) => "coherence",
        Command::Preset => "preset",
    };
    let mut run = Run::new(name);
    let c = &cli.common;
    run.digest("common", format!("{:?} {:?} {} {:?}", c.design, c.format, c.seed, c.points).as_bytes());
    match &cli.command {
        Command::Fit(a) => {
            let mut hashed = format!("{a:?}");
            if let Some(r) = &a.residuals {
                hashed = hashed.replace(&format!("{r:?}"), "_");
            }
            run.digest("args", hashed.as_bytes());
        }
        other => run.digest("args", format!("{other:?}").as_bytes()),
    }
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Spectrum(a) => spectrum(cli, a, &mut run, out)?,
        Command::Couple(a) => couple(cli, a, &mut run, out)?,
        Command::Budget(a) => budget(cli, a, &mut run, out)?,
        Command::ReadoutOpt(a) => readout_opt(cli, a, &mut run, out)?,
        Command::Chi(a) => chi(cli, a, &mut run, out)?,
        Command::Schedule(a) => schedule(cli, a, &mut run, out)?,
        Command::Fit(a) => return fit(cli, a, run, out),
        Command::Calibrate(a) => calibrate(cli, a, &mut run, out)?,
        Command::Lineshape(a) => lineshape(cli, a, &mut run, out)?,
        Command::Coherence(a) => coherence(cli, a, &mut run, out)?,
        Command::Preset => {
            load_design(cli, &mut run)?;
            run.emit(out, design_text(cli)?.0.as_bytes())?;
        }
    }
    run.finish()?;
    Ok(())
}

fn spectrum(cli: &Cli, a: &crate::SpectrumArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let n = points(cli, 401, 2)?;
    if !(a.phi_max >= a.phi_min) {
        bail!(Error::Config("--phi-max must not be below --phi-min".into()));
    }
    let flavor = a.flavor.into();
    let per_point: Vec<Vec<SpectrumRow>> = linspace(a.phi_min, a.phi_max, n)
        .par_iter()
        .map(|&phi| {
            let f = stable_frequencies(&d.params, FluxBias::new(phi)?, flavor)?;
            Ok(f.into_iter().map(|(branch_id, frequency)| SpectrumRow { phi, branch_id, frequency }).collect())
        })
        .collect::<fluxcad::Result<_>>()?;
    let mut rows: Vec<SpectrumRow> = per_point.into_iter().flatten().collect();
    if a.noise_mhz != 0.0 {
        let noise = Normal::new(0.0, a.noise_mhz * 1e6).map_err(|e| Error::Config(format!("--noise-MHz: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cli.common.seed);
        for r in &mut rows {
            r.frequency += noise.sample(&mut rng);
        }
    }
    let bytes = match cli.common.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_bytes(|w| io::write_spectrum(w, &rows))?,
        Format::Json => json_bytes(
            &rows
                .iter()
                .map(|r| json!({"phi": r.phi, "branch_id": r.branch_id, "freq_GHz": r.frequency / 1e9}))
                .collect::<Vec<_>>(),
        )?,
    };
    run.emit(out, &bytes)
}

fn couple(cli: &Cli, a: &crate::CoupleArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let p = &d.params;
    let n = points(cli, 201, 1)?;
    let (lo, hi) = cavity_band(p);
    let lo = a.fc_min.map_or(lo, ghz_to_rad);
    let hi = a.fc_max.map_or(hi, ghz_to_rad);
    let mut header = vec!["fc_GHz".to_string(), "two_g_inductive_MHz".to_string()];
    header.extend(a.cap_ff.iter().map(|c| format!("two_g_cap_{c}fF_MHz")));
    let rows = linspace(lo, hi, n)
        .into_iter()
        .map(|w| {
            let mut row = vec![rad_to_ghz(w), 2.0 * rad_to_mhz(inductive_g(p, w)?)];
            for &c in &a.cap_ff {
                let g = capacitive_coupling_comparison(
                    c * 1e-15,
                    p.shunt_capacitance_qubit,
                    p.shunt_capacitance_cavity,
                    w,
                )?;
                row.push(2.0 * rad_to_mhz(g));
            }
            Ok(row)
        })
        .collect::<fluxcad::Result<Vec<_>>>()?;
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.emit(out, &table(cli.common.format.unwrap_or(Format::Csv), &header, &rows)?)
}

/// Cavity setting at `fc` (Hz): tabulated κ and g when a row sits near fc,
/// else ω_c/Q_c and the circuit formula. Overrides win.
fn cavity_setting(d: &DesignPreset, fc: f64, kappa_mhz: Option<f64>, two_g_mhz: Option<f64>) -> Result<CavitySetting> {
    let w = TWO_PI * fc;
    let row = d.table1_row_near(fc);
    let kappa = match (kappa_mhz, row) {
        (Some(k), _) => mhz_to_rad(k),
        (None, Some(r)) => r.kappa(),
        (None, None) => w / d.loaded_q(),
    };
    let g = match (two_g_mhz, row) {
        (Some(g), _) => mhz_to_rad(g / 2.0),
        (None, Some(r)) => r.coupling(),
        (None, None) => inductive_g(&d.params, w)?,
    };
    Ok(CavitySetting::new(w, kappa, g)?)
}

fn qubit_top(d: &DesignPreset) -> Result<f64> {
    let f = stable_frequencies(&d.params, FluxBias(0.0), fluxcad::Flavor::Qubit)?;
    f.iter().map(|x| x.1).reduce(f64::max).context("no stable qubit branch at zero flux")
}

fn budget(cli: &Cli, a: &crate::BudgetArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let n = points(cli, 2001, 2)?;
    let setting = cavity_setting(&d, a.fc * 1e9, a.kappa, a.two_g)?;
    let lo = a.f01_min.map_or(d.qubit_band.0, |f| f * 1e9);
    let hi = match (a.f01_max, d.qubit_band.1) {
        (Some(f), _) => f * 1e9,
        (None, Some(h)) => h,
        (None, None) => qubit_top(&d)?,
    };
    if !(hi > lo && lo > 0.0) {
        bail!(Error::Config(format!("empty qubit range [{lo:e}, {hi:e}] Hz")));
    }
    let q_d = a.qd.unwrap_or(d.dielectric_q);
    let grid: Vec<f64> = linspace(TWO_PI * lo, TWO_PI * hi, n);
    let pts = t1_spectrum_with_bias_rate(&setting, &grid, q_d, d.bias_line_rate())?;
    let bytes = match cli.common.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_bytes(|w| io::write_budget(w, setting.cavity_freq, &pts))?,
        Format::Json => json_bytes(&json!({
            "fc_GHz": rad_to_ghz(setting.cavity_freq),
            "kappa_MHz": rad_to_mhz(setting.kappa),
            "two_g_MHz": 2.0 * rad_to_mhz(setting.coupling),
            "dielectric_q": q_d,
            "bias_line_rate": d.bias_line_rate(),
            "peak_t1_us": peak_t1(&pts).map(|b| b.t1_total * 1e6),
            "points": pts,
        }))?,
    };
    run.emit(out, &bytes)
}

fn readout_opt(cli: &Cli, a: &crate::ReadoutOptArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let n = points(cli, 201, 1)?;
    let dips = match &a.dips {
        Some(path) => io::read_dip_table(run.read_input(path)?.as_bytes(), &path.display().to_string())?,
        None => {
            let f0 = cavity_frequency_at(&d.params, FluxBias(0.0))?;
            let line = ResonatorLineShape::new(f0, d.internal_q, d.external_q, 0.0)?;
            DipModel::from_line_shape(&line)
        }
    };
    let grid = linspace(a.phi_c_min, a.phi_c_max, n);
    let opt = optimize_tunneling_readout(&d.params, FluxBias::new(a.phi_q)?, &dips, &grid)?;
    let bytes = match cli.common.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_bytes(|w| io::write_optimizer_trace(w, &opt.trace))?,
        Format::Json => json_bytes(&opt)?,
    };
    run.emit(out, &bytes)
}

const CHI_HEADER: [&str; 7] =
    ["phi_q", "f01_GHz", "alpha_MHz", "delta_MHz", "rel_detuning", "two_chi_two_level_MHz", "two_chi_three_level_MHz"];

fn chi(cli: &Cli, a: &crate::ChiArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let n = points(cli, 65, 1)?;
    let fc = a.fc * 1e9;
    let g = match (a.two_g, d.table1_row_near(fc)) {
        (Some(g), _) => mhz_to_rad(g / 2.0),
        (None, Some(r)) => r.coupling(),
        (None, None) => inductive_g(&d.params, TWO_PI * fc)?,
    };
    let wc = TWO_PI * fc;
    let rows: Vec<Option<Vec<f64>>> = linspace(a.phi_q_min, a.phi_q_max, n)
        .par_iter()
        .map(|&phi| {
            let lv = match qubit_levels_at(&d.params, FluxBias::new(phi)?, Some(0)) {
                Ok(l) => l,
                Err(e) if is_domain(&e) => return Ok(None),
                Err(e) => return Err(e),
            };
            let w01 = TWO_PI * lv.f01;
            let delta = w01 - wc;
            let shift = |m| match dispersive_shift(g, delta, lv.anharmonicity, m) {
                Ok(s) if delta.abs() >= g => Ok(2.0 * rad_to_mhz(s.chi)),
                Ok(_) => Ok(f64::NAN),
                Err(e) if is_domain(&e) => Ok(f64::NAN),
                Err(e) => Err(e),
            };
            Ok(Some(vec![
                phi,
                lv.f01 / 1e9,
                rad_to_mhz(lv.anharmonicity),
                rad_to_mhz(delta),
                delta / w01,
                shift(DispersiveModel::TwoLevel)?,
                shift(DispersiveModel::ThreeLevel)?,
            ]))
        })
        .collect::<fluxcad::Result<_>>()?;
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if rows.is_empty() {
        bail!(Error::WellTooShallow { bound_levels: 0 });
    }
    run.emit(out, &table(cli.common.format.unwrap_or(Format::Csv), &CHI_HEADER, &rows)?)
}

/// Same segments and durations, every bias moved to the first measurement bias.
fn static_counterpart(s: &FluxSchedule) -> Option<FluxSchedule> {
    let m = s.segments.iter().find(|g| g.mode == SegmentMode::Measurement)?.bias;
    let mut st = s.clone();
    for g in &mut st.segments {
        g.bias = m;
    }
    Some(st)
}

const SEGMENT_HEADER: [&str; 12] = [
    "index",
    "duration_ns",
    "phi_q",
    "phi_c",
    "f01_GHz",
    "fc_GHz",
    "two_g_MHz",
    "detuning_MHz",
    "kappa_MHz",
    "two_chi_MHz",
    "total_rate",
    "t1_us",
];

fn segment_rows(r: &ScheduleReport) -> Vec<Vec<f64>> {
    r.per_segment
        .iter()
        .map(|s| {
            vec![
                s.index as f64,
                s.duration * 1e9,
                s.phi_q,
                s.phi_c,
                rad_to_ghz(s.qubit_freq),
                rad_to_ghz(s.cavity_freq),
                2.0 * rad_to_mhz(s.coupling),
                rad_to_mhz(s.detuning),
                rad_to_mhz(s.kappa),
                rad_to_mhz(s.full_shift),
                s.total_rate,
                s.t1 * 1e6,
            ]
        })
        .collect()
}

fn schedule(cli: &Cli, a: &crate::ScheduleArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, run)?;
    let origin = a.schedule.display().to_string();
    let file = ScheduleFile::parse(&run.read_input(&a.schedule)?, &origin)?;
    let (sched, ctx) = file.resolve(&d)?;
    let report = evaluate_schedule(&d.params, &sched, &ctx)?;
    let bytes = match cli.common.format.unwrap_or(Format::Json) {
        Format::Csv => csv_bytes(|w| io::write_columns(w, &SEGMENT_HEADER, &segment_rows(&report)))?,
        Format::Json => {
            let stat = static_counterpart(&sched).map(|s| evaluate_schedule(&d.params, &s, &ctx)).transpose()?;
            json_bytes(&json!({ "schedule": report, "static": stat }))?
        }
    };
    run.emit(out, &bytes)
}

fn fit(cli: &Cli, a: &crate::FitArgs, mut run: Run, out: Option<&Path>) -> Result<()> {
    let d = load_design(cli, &mut run)?;
    let origin = a.sweep.display().to_string();
    let sweep = io::read_sweep(run.read_input(&a.sweep)?.as_bytes(), a.flavor.into(), &origin)?;
    if !(a.bound_factor > 1.0) {
        bail!(Error::Config("--bound-factor must exceed 1".into()));
    }
    let calibration = FluxCalibration { offset: a.offset, period: a.period };
    let free = a
        .free
        .iter()
        .map(|name| {
            let param: FitParam = name.trim().parse()?;
            let v = param.get(&d.params, &calibration);
            let (lower, upper) = match param {
                FitParam::FluxOffset => (v - 0.5 * a.period.abs(), v + 0.5 * a.period.abs()),
                _ if v > 0.0 => (v / a.bound_factor, v * a.bound_factor),
                _ => (v * a.bound_factor, v / a.bound_factor),
            };
            Ok(FreeParameter { param, lower, upper })
        })
        .collect::<fluxcad::Result<Vec<_>>>()?;
    let problem = FitProblem { sweep, initial: d.params, calibration, free, options: LsqOptions::default() };
    let result = fit_spectrum(&problem)?;
    let bytes = match cli.common.format.unwrap_or(Format::Json) {
        Format::Csv => csv_bytes(|w| io::write_residuals(w, &problem.sweep, &result))?,
        Format::Json => json_bytes(&result)?,
    };
    run.emit(out, &bytes)?;
    if let Some(path) = &a.residuals {
        run.emit(Some(path), &csv_bytes(|w| io::write_residuals(w, &problem.sweep, &result))?)?;
    }
    run.finish()?;
    if !result.converged {
        bail!(Error::NoConvergence { what: "spectrum fit", iterations: result.iterations });
    }
    Ok(())
}

fn calibrate(cli: &Cli, a: &crate::CalibrateArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let origin = a.sweep.display().to_string();
    let sweep = io::read_sweep(run.read_input(&a.sweep)?.as_bytes(), a.flavor.into(), &origin)?;
    let cal = calibrate_flux_axis(&sweep)?;
    let bytes = match cli.common.format.unwrap_or(Format::Json) {
        Format::Csv => table(
            Format::Csv,
            &["period", "offset", "bias_mutual_H", "periods_spanned"],
            &[vec![cal.period, cal.offset, cal.bias_mutual, cal.periods_spanned]],
        )?,
        Format::Json => json_bytes(&cal)?,
    };
    run.emit(out, &bytes)
}

fn lineshape(cli: &Cli, a: &crate::LineshapeArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let origin = a.trace.display().to_string();
    let (f, m) = io::read_trace(run.read_input(&a.trace)?.as_bytes(), &origin)?;
    let fit = fit_lineshape(&f, &m)?;
    let bytes = match cli.common.format.unwrap_or(Format::Json) {
        Format::Csv => table(
            Format::Csv,
            &["f0_GHz", "q_i", "q_e", "q_c", "skew_rad", "residual_rms"],
            &[vec![fit.line.f0 / 1e9, fit.line.q_i, fit.line.q_e, fit.q_c, fit.line.skew_angle, fit.residual_rms]],
        )?,
        Format::Json => json_bytes(&fit)?,
    };
    run.emit(out, &bytes)
}

fn coherence(cli: &Cli, a: &crate::CoherenceArgs, run: &mut Run, out: Option<&Path>) -> Result<()> {
    let t1 = a.t1 * 1e-9;
    let (t2_ns, tp_ns) = match (a.t2, a.t_prime) {
        (_, Some(tp)) => (t2_from_rabi_decay(tp * 1e-9, t1)? * 1e9, tp),
        (t2, None) => {
            let t2 = t2.unwrap_or(310.0);
            (t2, rabi_decay_time(t1, t2 * 1e-9)? * 1e9)
        }
    };
    let header = ["t1_ns", "t2_ns", "t_prime_ns"];
    let rows = [vec![a.t1, t2_ns, tp_ns]];
    run.emit(out, &table(cli.common.format.unwrap_or(Format::Csv), &header, &rows)?)
}
