//! Pressure sweeps with equipartition-calibrated temperatures.
//!
//! The calibration run uses the same configuration at the calibration
//! pressure with the cavity disabled; each sweep point is an independent
//! trajectory. Point `i` is seeded with `base_seed + i` and the calibration
//! run with `base_seed + n_points`, so results do not depend on how the
//! runs are scheduled.

use std::path::Path;

use rayon::prelude::*;

use crate::analysis::calibration::{default_readouts, effective_temperature, CalibrationRecord, Channel, Dof, Readout};
use crate::analysis::spectral::{band_area, welch_psd, NoiseFloor, Window};
use crate::config::Config;
use crate::dynamics::{col, simulate, TraceRecord};
use crate::error::{Error, Result};

/// Welch segment length used for temperature estimates.
pub const TEMPERATURE_SEGMENT: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub pressures_mbar: Vec<f64>,
    /// Recorded duration per point (s).
    pub duration: f64,
    pub base_seed: u64,
}

impl SweepPlan {
    pub fn from_config(config: &Config) -> Self {
        Self {
            pressures_mbar: config.sweep_pressures_mbar.clone(),
            duration: config.simulation.duration,
            base_seed: config.simulation.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pressures_mbar.is_empty() {
            return Err(Error::InvalidParameter("sweep plan has no points".into()));
        }
        if self.pressures_mbar.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("sweep pressures must be finite and non-negative".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("sweep duration must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub pressure_mbar: f64,
    pub seed: u64,
    /// Effective temperatures (K) for x, y, z, α, β.
    pub temperatures: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub calibration: CalibrationRecord,
    pub calibration_seed: u64,
    pub points: Vec<SweepPoint>,
    pub config_hash: String,
}

pub const SUMMARY_DOFS: [Dof; 5] = [Dof::X, Dof::Y, Dof::Z, Dof::Alpha, Dof::Beta];

fn channel_column(channel: Channel) -> usize {
    match channel {
        Channel::Split1 => col::SPLIT1,
        Channel::Split2 => col::SPLIT2,
        Channel::Pbs => col::PBS,
    }
}

/// PSD band area of each readout in a trace.
pub fn readout_areas(trace: &TraceRecord, readouts: &[Readout]) -> Result<Vec<f64>> {
    let seg = TEMPERATURE_SEGMENT.min(trace.len());
    readouts
        .iter()
        .map(|r| {
            let series = trace.column(channel_column(r.channel));
            let est = welch_psd(&series, trace.fs, seg, 0.5, Window::Hann)?;
            band_area(&est, r.f_lo, r.f_hi, NoiseFloor::None)
        })
        .collect()
}

fn with_overrides(config: &Config, pressure: f64, seed: u64, duration: f64, cavity: bool) -> Config {
    let mut c = config.clone();
    c.environment.pressure_mbar = pressure;
    c.simulation.seed = seed;
    c.simulation.duration = duration;
    c.cavity.enabled = cavity;
    c
}

/// Reference areas from a cavity-free run at the calibration pressure.
pub fn calibrate(config: &Config, readouts: &[Readout], seed: u64, duration: f64) -> Result<CalibrationRecord> {
    let c = with_overrides(config, config.calibration_pressure_mbar, seed, duration, false);
    let trace = simulate(&c)?;
    let areas = readout_areas(&trace, readouts)?;
    let mut cal = CalibrationRecord::new(config.environment.temperature_k, config.calibration_pressure_mbar);
    for (r, a) in readouts.iter().zip(areas) {
        cal.insert(*r, a)?;
    }
    Ok(cal)
}

/// Temperatures of the readouts in a trace under a calibration.
pub fn trace_temperatures(trace: &TraceRecord, cal: &CalibrationRecord) -> Result<Vec<(Dof, f64)>> {
    let readouts: Vec<Readout> = cal.entries.iter().map(|e| e.readout).collect();
    let areas = readout_areas(trace, &readouts)?;
    readouts
        .iter()
        .zip(areas)
        .map(|(r, a)| Ok((r.dof, effective_temperature(a, r.dof, cal)?)))
        .collect()
}

pub fn run_sweep(config: &Config, plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let readouts = default_readouts();
    let n = plan.pressures_mbar.len();
    let cal_seed = plan.base_seed.wrapping_add(n as u64);

    // index n is the calibration run
    let traces: Vec<Result<TraceRecord>> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let c = if i == n {
                with_overrides(config, config.calibration_pressure_mbar, cal_seed, plan.duration, false)
            } else {
                with_overrides(
                    config,
                    plan.pressures_mbar[i],
                    plan.base_seed.wrapping_add(i as u64),
                    plan.duration,
                    config.cavity.enabled,
                )
            };
            simulate(&c)
        })
        .collect();
    let mut traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let cal_trace = traces.pop().expect("calibration trace");

    let mut cal = CalibrationRecord::new(config.environment.temperature_k, config.calibration_pressure_mbar);
    for (r, a) in readouts.iter().zip(readout_areas(&cal_trace, &readouts)?) {
        cal.insert(*r, a)?;
    }

    let mut points = Vec::with_capacity(n);
    for (i, trace) in traces.iter().enumerate() {
        let temps = trace_temperatures(trace, &cal)?;
        let mut t = [0.0; 5];
        for (dof, value) in temps {
            if let Some(k) = SUMMARY_DOFS.iter().position(|d| *d == dof) {
                t[k] = value;
            }
        }
        points.push(SweepPoint {
            pressure_mbar: plan.pressures_mbar[i],
            seed: plan.base_seed.wrapping_add(i as u64),
            temperatures: t,
        });
    }
    Ok(SweepResult {
        calibration: cal,
        calibration_seed: cal_seed,
        points,
        config_hash: config.hash(),
    })
}

pub fn write_summary(result: &SweepResult, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("# config_hash = {}\n", result.config_hash));
    s.push_str(&format!(
        "# calibration: cavity off, {} mbar, T_ref = {} K, seed {}\n",
        result.calibration.pressure_ref_mbar, result.calibration.t_ref, result.calibration_seed
    ));
    for e in &result.calibration.entries {
        s.push_str(&format!(
            "# calibration {}: {} band [{}, {}] Hz, area_ref = {:e}\n",
            e.readout.dof,
            e.readout.channel.name(),
            e.readout.f_lo,
            e.readout.f_hi,
            e.area_ref
        ));
    }
    s.push_str("pressure_mbar,T_x_K,T_y_K,T_z_K,T_alpha_K,T_beta_K\n");
    for p in &result.points {
        s.push_str(&format!("{:e}", p.pressure_mbar));
        for t in p.temperatures {
            s.push_str(&format!(",{t:e}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
