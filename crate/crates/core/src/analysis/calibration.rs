//! Equipartition calibration of detector channels into temperatures.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dof {
    X,
    Y,
    Z,
    Alpha,
    Beta,
    Gamma,
}

impl Dof {
    pub const ALL: [Dof; 6] = [Dof::X, Dof::Y, Dof::Z, Dof::Alpha, Dof::Beta, Dof::Gamma];

    pub fn name(&self) -> &'static str {
        match self {
            Dof::X => "x",
            Dof::Y => "y",
            Dof::Z => "z",
            Dof::Alpha => "alpha",
            Dof::Beta => "beta",
            Dof::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Split1,
    Split2,
    Pbs,
}

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Split1 => "det_split1",
            Channel::Split2 => "det_split2",
            Channel::Pbs => "det_pbs",
        }
    }
}

/// Where a degree of freedom is read out: channel and integration band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout {
    pub dof: Dof,
    pub channel: Channel,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Default readout plan for the tweezer frequencies of the preset particle.
pub fn default_readouts() -> Vec<Readout> {
    vec![
        Readout { dof: Dof::X, channel: Channel::Split1, f_lo: 90e3, f_hi: 250e3 },
        Readout { dof: Dof::Y, channel: Channel::Split2, f_lo: 90e3, f_hi: 250e3 },
        Readout { dof: Dof::Z, channel: Channel::Split1, f_lo: 10e3, f_hi: 70e3 },
        Readout { dof: Dof::Alpha, channel: Channel::Pbs, f_lo: 250e3, f_hi: 550e3 },
        Readout { dof: Dof::Beta, channel: Channel::Split2, f_lo: 250e3, f_hi: 550e3 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationEntry {
    pub readout: Readout,
    pub area_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub t_ref: f64,
    pub pressure_ref_mbar: f64,
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationRecord {
    pub fn new(t_ref: f64, pressure_ref_mbar: f64) -> Self {
        Self {
            t_ref,
            pressure_ref_mbar,
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, readout: Readout, area_ref: f64) -> Result<()> {
        if !(area_ref > 0.0 && area_ref.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "reference area for {} must be positive, got {area_ref}",
                readout.dof
            )));
        }
        self.entries.retain(|e| e.readout.dof != readout.dof);
        self.entries.push(CalibrationEntry { readout, area_ref });
        Ok(())
    }

    pub fn entry(&self, dof: Dof) -> Option<&CalibrationEntry> {
        self.entries.iter().find(|e| e.readout.dof == dof)
    }
}

/// `T = T_ref·area/area_ref` for the calibrated readout of `dof`.
pub fn effective_temperature(area: f64, dof: Dof, cal: &CalibrationRecord) -> Result<f64> {
    let e = cal
        .entry(dof)
        .ok_or_else(|| Error::UncalibratedChannel(dof.name().to_string()))?;
    Ok(cal.t_ref * area / e.area_ref)
}
