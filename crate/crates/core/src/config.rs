//! Flat INI-style configuration.
//!
//! ```text
//! # comment
//! [tweezer]
//! power_w = 0.235
//! psi_deg = 14.5
//! ```
//!
//! Values are stored in the units named by their keys so that
//! parse → serialize → parse is exact; conversion to SI happens when the
//! physical models are built. Keys not present take the preset value.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analysis::detector::DetectorParams;
use crate::constants::TWO_PI;
use crate::dynamics::{DampingModel, Dynamics, Environment, InitialCondition, RecoilNoise, SimulationParams, PAPER_DAMPING_HZ_PER_MBAR};
use crate::error::{Error, Result};
use crate::optics::{CavityParams, OpticalModel, OpticalSetup, TweezerParams};
use crate::rigidbody::{Particle, ParticleParams};

/// Name accepted in place of a config path for the built-in preset.
pub const PAPER_PRESET: &str = "paper_defaults";

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSection {
    pub r1_nm: f64,
    pub r2_nm: f64,
    pub r3_nm: f64,
    pub density_kg_m3: f64,
    pub eps_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweezerSection {
    pub power_w: f64,
    pub wavelength_nm: f64,
    pub w_par_nm: f64,
    pub w_perp_nm: f64,
    pub psi_deg: f64,
    pub theta_deg: f64,
    pub tilt_deg: f64,
    pub scattering_force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavitySection {
    pub enabled: bool,
    pub length_mm: f64,
    /// κ/2π
    pub kappa_hz: f64,
    pub kappa_in_hz: f64,
    pub waist_um: f64,
    /// Δ/2π
    pub detuning_hz: f64,
    /// Trap centre offset from the antinode, in wavelengths.
    pub y0_lambda: f64,
    /// Rotation of the mode polarization pair (e_x, e_z) about the cavity axis.
    pub mode_basis_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSection {
    pub pressure_mbar: f64,
    pub temperature_k: f64,
    pub damping_custom: bool,
    /// Hz/mbar for x, y, z, α, β, γ; used when `damping_custom`.
    pub damping_hz_mbar: [f64; 6],
    pub recoil_enabled: bool,
    pub recoil_force_psd: f64,
    pub recoil_torque_psd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSection {
    pub detectors: DetectorParams,
    pub f_lo_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParameter {
    R1,
    R2,
    R3,
    EpsR,
}

impl FreeParameter {
    pub fn name(&self) -> &'static str {
        match self {
            FreeParameter::R1 => "r1",
            FreeParameter::R2 => "r2",
            FreeParameter::R3 => "r3",
            FreeParameter::EpsR => "eps_r",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "r1" => Some(FreeParameter::R1),
            "r2" => Some(FreeParameter::R2),
            "r3" => Some(FreeParameter::R3),
            "eps_r" => Some(FreeParameter::EpsR),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    /// Observed frequencies (Hz) for x, y, z, α, β.
    pub f_hz: [f64; 5],
    pub sigma_hz: [f64; 5],
    pub free: Vec<FreeParameter>,
    pub r_min_nm: f64,
    pub r_max_nm: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub particle: ParticleSection,
    pub tweezer: TweezerSection,
    pub cavity: CavitySection,
    pub environment: EnvironmentSection,
    pub simulation: SimulationParams,
    pub sweep_pressures_mbar: Vec<f64>,
    pub calibration_pressure_mbar: f64,
    pub detection: DetectionSection,
    pub fit: FitSection,
}

const FIT_NAMES: [&str; 5] = ["x", "y", "z", "alpha", "beta"];
const DAMPING_NAMES: [&str; 6] = ["x", "y", "z", "alpha", "beta", "gamma"];

impl Config {
    /// Operating point of the experiment: prolate particle, elliptic
    /// polarization, red-detuned cavity near a node, 6.9e-4 mbar.
    pub fn paper_defaults() -> Self {
        Self {
            particle: ParticleSection {
                r1_nm: 83.7,
                r2_nm: 84.2,
                r3_nm: 109.0,
                density_kg_m3: 1850.0,
                eps_r: 1.98,
            },
            tweezer: TweezerSection {
                power_w: 0.235,
                wavelength_nm: 1064.0,
                w_par_nm: 831.0,
                w_perp_nm: 771.0,
                psi_deg: 14.5,
                theta_deg: 45.0,
                tilt_deg: 0.0,
                scattering_force: true,
            },
            cavity: CavitySection {
                enabled: true,
                length_mm: 12.23,
                kappa_hz: 198e3,
                kappa_in_hz: 81e3,
                waist_um: 60.0,
                detuning_hz: -362e3,
                y0_lambda: 0.155,
                mode_basis_deg: 0.0,
            },
            environment: EnvironmentSection {
                pressure_mbar: 6.9e-4,
                temperature_k: 300.0,
                damping_custom: false,
                damping_hz_mbar: PAPER_DAMPING_HZ_PER_MBAR,
                recoil_enabled: false,
                recoil_force_psd: 0.0,
                recoil_torque_psd: 0.0,
            },
            simulation: SimulationParams::default(),
            sweep_pressures_mbar: vec![2.5, 4e-2, 6.9e-4],
            calibration_pressure_mbar: 2.5,
            detection: DetectionSection {
                detectors: DetectorParams::default(),
                f_lo_hz: 2e6,
            },
            fit: FitSection {
                f_hz: [135e3, 148e3, 33e3, 357e3, 377e3],
                sigma_hz: [1.35e3, 1.48e3, 0.33e3, 3.57e3, 3.77e3],
                free: vec![FreeParameter::R1, FreeParameter::R2, FreeParameter::R3],
                r_min_nm: 10.0,
                r_max_nm: 500.0,
                eps_min: 1.5,
                eps_max: 4.5,
                starts: 8,
            },
        }
    }

    /// Reads a file, or the preset when `path` is [`PAPER_PRESET`].
    pub fn load(path: &str) -> Result<Self> {
        if path == PAPER_PRESET {
            return Ok(Self::paper_defaults());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::paper_defaults();
        let mut section: Option<String> = None;
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line_no, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(cfg_err(line_no, &format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(line_no, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| cfg_err(line_no, "key outside of any section"))?;
            if !seen.insert(format!("{sec}.{key}")) {
                return Err(cfg_err(line_no, &format!("duplicate key `{key}`")));
            }
            cfg.set(sec, key, value).map_err(|m| cfg_err(line_no, &m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let unknown = || format!("unknown key `{key}` in [{section}]");
        match section {
            "particle" => {
                let p = &mut self.particle;
                let slot = match key {
                    "r1_nm" => &mut p.r1_nm,
                    "r2_nm" => &mut p.r2_nm,
                    "r3_nm" => &mut p.r3_nm,
                    "density_kg_m3" => &mut p.density_kg_m3,
                    "eps_r" => &mut p.eps_r,
                    _ => return Err(unknown()),
                };
                *slot = num(value)?;
            }
            "tweezer" => {
                let t = &mut self.tweezer;
                if key == "scattering_force" {
                    t.scattering_force = boolean(value)?;
                    return Ok(());
                }
                let slot = match key {
                    "power_w" => &mut t.power_w,
                    "wavelength_nm" => &mut t.wavelength_nm,
                    "w_par_nm" => &mut t.w_par_nm,
                    "w_perp_nm" => &mut t.w_perp_nm,
                    "psi_deg" => &mut t.psi_deg,
                    "theta_deg" => &mut t.theta_deg,
                    "tilt_deg" => &mut t.tilt_deg,
                    _ => return Err(unknown()),
                };
                *slot = num(value)?;
            }
            "cavity" => {
                let c = &mut self.cavity;
                if key == "enabled" {
                    c.enabled = boolean(value)?;
                    return Ok(());
                }
                let slot = match key {
                    "length_mm" => &mut c.length_mm,
                    "kappa_hz" => &mut c.kappa_hz,
                    "kappa_in_hz" => &mut c.kappa_in_hz,
                    "waist_um" => &mut c.waist_um,
                    "detuning_hz" => &mut c.detuning_hz,
                    "y0_lambda" => &mut c.y0_lambda,
                    "mode_basis_deg" => &mut c.mode_basis_deg,
                    _ => return Err(unknown()),
                };
                *slot = num(value)?;
            }
            "environment" => {
                let e = &mut self.environment;
                match key {
                    "damping_model" => {
                        e.damping_custom = match value {
                            "table" => false,
                            "custom" => true,
                            _ => return Err(format!("damping_model must be table or custom, got `{value}`")),
                        }
                    }
                    "recoil_enabled" => e.recoil_enabled = boolean(value)?,
                    "pressure_mbar" => e.pressure_mbar = num(value)?,
                    "temperature_k" => e.temperature_k = num(value)?,
                    "recoil_force_psd_n2_hz" => e.recoil_force_psd = num(value)?,
                    "recoil_torque_psd_n2m2_hz" => e.recoil_torque_psd = num(value)?,
                    _ => {
                        let idx = key
                            .strip_prefix("damping_")
                            .and_then(|k| k.strip_suffix("_hz_mbar"))
                            .and_then(|k| DAMPING_NAMES.iter().position(|n| *n == k))
                            .ok_or_else(unknown)?;
                        e.damping_hz_mbar[idx] = num(value)?;
                    }
                }
            }
            "simulation" => {
                let s = &mut self.simulation;
                match key {
                    "dt_s" => s.dt = num(value)?,
                    "duration_s" => s.duration = num(value)?,
                    "fs_hz" => s.fs = num(value)?,
                    "settle_s" => s.settle = num(value)?,
                    "seed" => s.seed = value.parse().map_err(|_| format!("invalid seed `{value}`"))?,
                    "initial" => {
                        s.initial = match value {
                            "thermal" => InitialCondition::Thermal,
                            "rest" => InitialCondition::Rest,
                            _ => return Err(format!("initial must be thermal or rest, got `{value}`")),
                        }
                    }
                    "sweep_pressures_mbar" => self.sweep_pressures_mbar = num_list(value)?,
                    "calibration_pressure_mbar" => self.calibration_pressure_mbar = num(value)?,
                    _ => return Err(unknown()),
                }
            }
            "detection" => {
                let d = &mut self.detection;
                let slot = match key {
                    "split1_gain" => &mut d.detectors.split1_gain,
                    "split1_z" => &mut d.detectors.split1_z,
                    "split2_gain" => &mut d.detectors.split2_gain,
                    "split2_beta" => &mut d.detectors.split2_beta,
                    "pbs_alpha" => &mut d.detectors.pbs_alpha,
                    "pbs_leak" => &mut d.detectors.pbs_leak,
                    "f_lo_hz" => &mut d.f_lo_hz,
                    _ => return Err(unknown()),
                };
                *slot = num(value)?;
            }
            "fit" => {
                let f = &mut self.fit;
                match key {
                    "free" => {
                        let mut free = Vec::new();
                        for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                            let p = FreeParameter::parse(item).ok_or_else(|| format!("unknown free parameter `{item}`"))?;
                            if free.contains(&p) {
                                return Err(format!("free parameter `{item}` listed twice"));
                            }
                            free.push(p);
                        }
                        f.free = free;
                    }
                    "r_min_nm" => f.r_min_nm = num(value)?,
                    "r_max_nm" => f.r_max_nm = num(value)?,
                    "eps_min" => f.eps_min = num(value)?,
                    "eps_max" => f.eps_max = num(value)?,
                    "starts" => f.starts = value.parse().map_err(|_| format!("invalid start count `{value}`"))?,
                    _ => {
                        if let Some(k) = key.strip_prefix("f_").and_then(|k| k.strip_suffix("_hz")) {
                            let i = FIT_NAMES.iter().position(|n| *n == k).ok_or_else(unknown)?;
                            f.f_hz[i] = num(value)?;
                        } else if let Some(k) = key.strip_prefix("sigma_").and_then(|k| k.strip_suffix("_hz")) {
                            let i = FIT_NAMES.iter().position(|n| *n == k).ok_or_else(unknown)?;
                            f.sigma_hz[i] = num(value)?;
                        } else {
                            return Err(unknown());
                        }
                    }
                }
            }
            _ => return Err(format!("unknown section [{section}]")),
        }
        Ok(())
    }

    /// Checks that every derived physical object can be built.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.environment()?.validate()?;
        self.simulation.block_len()?;
        if self.sweep_pressures_mbar.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one pressure".into()));
        }
        if self.sweep_pressures_mbar.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("sweep pressures must be finite and non-negative".into()));
        }
        if !(self.calibration_pressure_mbar > 0.0) {
            return Err(Error::InvalidParameter("calibration pressure must be positive".into()));
        }
        if !(self.detection.f_lo_hz >= 0.0) {
            return Err(Error::InvalidParameter("f_lo_hz must be non-negative".into()));
        }
        let f = &self.fit;
        if !(10.0 <= f.r_min_nm && f.r_min_nm < f.r_max_nm && f.r_max_nm <= 500.0) {
            return Err(Error::InvalidParameter("fit radius bounds must satisfy 10 ≤ r_min < r_max ≤ 500 nm".into()));
        }
        if !(1.0 < f.eps_min && f.eps_min < f.eps_max) {
            return Err(Error::InvalidParameter("fit ε_r bounds must satisfy 1 < eps_min < eps_max".into()));
        }
        if f.sigma_hz.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("fit uncertainties must be positive".into()));
        }
        if f.free.is_empty() || f.free.len() > 5 {
            return Err(Error::InvalidParameter("fit needs between one and five free parameters".into()));
        }
        Ok(())
    }

    pub fn particle_params(&self) -> ParticleParams {
        let p = &self.particle;
        ParticleParams {
            r1: p.r1_nm * 1e-9,
            r2: p.r2_nm * 1e-9,
            r3: p.r3_nm * 1e-9,
            rho: p.density_kg_m3,
            eps_r: p.eps_r,
        }
    }

    pub fn tweezer_params(&self) -> TweezerParams {
        let t = &self.tweezer;
        TweezerParams {
            wavelength: t.wavelength_nm * 1e-9,
            power: t.power_w,
            w_par: t.w_par_nm * 1e-9,
            w_perp: t.w_perp_nm * 1e-9,
            psi: t.psi_deg.to_radians(),
            theta: t.theta_deg.to_radians(),
            tilt: t.tilt_deg.to_radians(),
        }
    }

    pub fn cavity_params(&self) -> CavityParams {
        let c = &self.cavity;
        CavityParams {
            length: c.length_mm * 1e-3,
            kappa: TWO_PI * c.kappa_hz,
            kappa_in: TWO_PI * c.kappa_in_hz,
            waist: c.waist_um * 1e-6,
            detuning: TWO_PI * c.detuning_hz,
            y0: c.y0_lambda * self.tweezer.wavelength_nm * 1e-9,
            mode_pol: CavityParams::mode_basis(c.mode_basis_deg.to_radians()),
        }
    }

    pub fn optical_setup(&self) -> OpticalSetup {
        OpticalSetup {
            tweezer: self.tweezer_params(),
            cavity: self.cavity_params(),
            cavity_enabled: self.cavity.enabled,
            scattering_force: self.tweezer.scattering_force,
        }
    }

    pub fn particle(&self) -> Result<Particle> {
        self.particle_params().derive()
    }

    pub fn model(&self) -> Result<OpticalModel> {
        OpticalModel::new(self.optical_setup(), self.particle()?)
    }

    pub fn environment(&self) -> Result<Environment> {
        let e = &self.environment;
        let env = Environment {
            pressure_mbar: e.pressure_mbar,
            temperature: e.temperature_k,
            damping: if e.damping_custom {
                DampingModel::Custom(e.damping_hz_mbar)
            } else {
                DampingModel::Table
            },
            recoil: e.recoil_enabled.then_some(RecoilNoise {
                force_psd: e.recoil_force_psd,
                torque_psd: e.recoil_torque_psd,
            }),
        };
        env.validate()?;
        Ok(env)
    }

    pub fn dynamics(&self) -> Result<Dynamics> {
        Dynamics::new(self.model()?, self.environment()?)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let p = &self.particle;
        section(&mut s, "particle");
        kv(&mut s, "r1_nm", p.r1_nm);
        kv(&mut s, "r2_nm", p.r2_nm);
        kv(&mut s, "r3_nm", p.r3_nm);
        kv(&mut s, "density_kg_m3", p.density_kg_m3);
        kv(&mut s, "eps_r", p.eps_r);

        let t = &self.tweezer;
        section(&mut s, "tweezer");
        kv(&mut s, "power_w", t.power_w);
        kv(&mut s, "wavelength_nm", t.wavelength_nm);
        kv(&mut s, "w_par_nm", t.w_par_nm);
        kv(&mut s, "w_perp_nm", t.w_perp_nm);
        kv(&mut s, "psi_deg", t.psi_deg);
        kv(&mut s, "theta_deg", t.theta_deg);
        kv(&mut s, "tilt_deg", t.tilt_deg);
        kv(&mut s, "scattering_force", t.scattering_force);

        let c = &self.cavity;
        section(&mut s, "cavity");
        kv(&mut s, "enabled", c.enabled);
        kv(&mut s, "length_mm", c.length_mm);
        kv(&mut s, "kappa_hz", c.kappa_hz);
        kv(&mut s, "kappa_in_hz", c.kappa_in_hz);
        kv(&mut s, "waist_um", c.waist_um);
        kv(&mut s, "detuning_hz", c.detuning_hz);
        kv(&mut s, "y0_lambda", c.y0_lambda);
        kv(&mut s, "mode_basis_deg", c.mode_basis_deg);

        let e = &self.environment;
        section(&mut s, "environment");
        kv(&mut s, "pressure_mbar", e.pressure_mbar);
        kv(&mut s, "temperature_k", e.temperature_k);
        kv(&mut s, "damping_model", if e.damping_custom { "custom" } else { "table" });
        for (name, v) in DAMPING_NAMES.iter().zip(e.damping_hz_mbar) {
            kv(&mut s, &format!("damping_{name}_hz_mbar"), v);
        }
        kv(&mut s, "recoil_enabled", e.recoil_enabled);
        kv(&mut s, "recoil_force_psd_n2_hz", e.recoil_force_psd);
        kv(&mut s, "recoil_torque_psd_n2m2_hz", e.recoil_torque_psd);

        let m = &self.simulation;
        section(&mut s, "simulation");
        kv(&mut s, "dt_s", m.dt);
        kv(&mut s, "duration_s", m.duration);
        kv(&mut s, "fs_hz", m.fs);
        kv(&mut s, "settle_s", m.settle);
        kv(&mut s, "seed", m.seed);
        kv(
            &mut s,
            "initial",
            match m.initial {
                InitialCondition::Thermal => "thermal",
                InitialCondition::Rest => "rest",
            },
        );
        kv(&mut s, "sweep_pressures_mbar", join(&self.sweep_pressures_mbar));
        kv(&mut s, "calibration_pressure_mbar", self.calibration_pressure_mbar);

        let d = &self.detection;
        section(&mut s, "detection");
        kv(&mut s, "split1_gain", d.detectors.split1_gain);
        kv(&mut s, "split1_z", d.detectors.split1_z);
        kv(&mut s, "split2_gain", d.detectors.split2_gain);
        kv(&mut s, "split2_beta", d.detectors.split2_beta);
        kv(&mut s, "pbs_alpha", d.detectors.pbs_alpha);
        kv(&mut s, "pbs_leak", d.detectors.pbs_leak);
        kv(&mut s, "f_lo_hz", d.f_lo_hz);

        let f = &self.fit;
        section(&mut s, "fit");
        for (i, name) in FIT_NAMES.iter().enumerate() {
            kv(&mut s, &format!("f_{name}_hz"), f.f_hz[i]);
        }
        for (i, name) in FIT_NAMES.iter().enumerate() {
            kv(&mut s, &format!("sigma_{name}_hz"), f.sigma_hz[i]);
        }
        let free: Vec<&str> = f.free.iter().map(FreeParameter::name).collect();
        kv(&mut s, "free", free.join(", "));
        kv(&mut s, "r_min_nm", f.r_min_nm);
        kv(&mut s, "r_max_nm", f.r_max_nm);
        kv(&mut s, "eps_min", f.eps_min);
        kv(&mut s, "eps_max", f.eps_max);
        kv(&mut s, "starts", f.starts);
        s
    }

    /// SHA-256 of the serialized settings, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.serialize().as_bytes()))
    }
}

const SECTIONS: [&str; 7] = ["particle", "tweezer", "cavity", "environment", "simulation", "detection", "fit"];

fn cfg_err(line: usize, message: &str) -> Error {
    Error::Config {
        line,
        message: message.to_string(),
    }
}

fn num(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("invalid number `{value}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite number `{value}`"));
    }
    Ok(v)
}

fn num_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(num)
        .collect()
}

fn boolean(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn section(s: &mut String, name: &str) {
    if !s.is_empty() {
        s.push('\n');
    }
    let _ = writeln!(s, "[{name}]");
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key} = {value}");
}
