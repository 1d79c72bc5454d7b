//! Stochastic equations of motion for the particle and the two cavity modes.
//!
//! Deterministic drift is advanced with classical RK4; thermal force and
//! torque noise is added afterwards as Euler–Maruyama increments.
//! Translational damping acts along the tweezer beam axes (polarization
//! major axis, minor axis, propagation) and rotational damping per body
//! axis, with the α, β, γ coefficients on body axes 1, 2, 3.

mod simulate;
mod trace;

pub use simulate::{initial_state, simulate, simulate_with, InitialCondition, SimulationParams};
pub use trace::{col, read_trace, write_trace, TraceRecord, NCOLS, TRACE_HEADER};

use nalgebra::{Matrix3, Quaternion, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constants::{K_B, TWO_PI};
use crate::error::{Error, Result};
use crate::optics::OpticalModel;
use crate::rigidbody::{EulerAngles, Orientation};

/// Gas damping coefficients `γ_i/2π` per mbar for (x, y, z, α, β, γ).
pub const PAPER_DAMPING_HZ_PER_MBAR: [f64; 6] = [533.0, 751.0, 758.0, 646.0, 702.0, 694.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingModel {
    Table,
    /// User coefficients in Hz/mbar, same layout as the table.
    Custom([f64; 6]),
}

impl DampingModel {
    pub fn coefficients(&self) -> [f64; 6] {
        match self {
            DampingModel::Table => PAPER_DAMPING_HZ_PER_MBAR,
            DampingModel::Custom(c) => *c,
        }
    }
}

/// Extra white force/torque noise strengths in N²/Hz and (N·m)²/Hz, in the
/// same convention as [`thermal_noise_amplitudes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoilNoise {
    pub force_psd: f64,
    pub torque_psd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub pressure_mbar: f64,
    pub temperature: f64,
    pub damping: DampingModel,
    pub recoil: Option<RecoilNoise>,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            pressure_mbar: 2.5,
            temperature: 300.0,
            damping: DampingModel::Table,
            recoil: None,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_mbar >= 0.0 && self.pressure_mbar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pressure must be non-negative, got {}",
                self.pressure_mbar
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gas temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.damping.coefficients().iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidParameter("damping coefficients must be non-negative".into()));
        }
        if let Some(r) = self.recoil {
            if !(r.force_psd >= 0.0 && r.torque_psd >= 0.0) {
                return Err(Error::InvalidParameter("recoil noise PSDs must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Damping rates γ_i (rad/s) for (x, y, z, α, β, γ).
pub fn damping_coefficients(env: &Environment) -> Result<[f64; 6]> {
    env.validate()?;
    Ok(env.damping.coefficients().map(|c| TWO_PI * c * env.pressure_mbar))
}

/// Noise strengths `S` (increments have variance `S·dt`): `2mγk_BT` for the
/// three translations and `2I_iγ_ik_BT` for the body axes.
pub fn thermal_noise_amplitudes(env: &Environment, mass: f64, inertia: &Vector3<f64>) -> Result<[f64; 6]> {
    let g = damping_coefficients(env)?;
    let kt = K_B * env.temperature;
    let mut s = [0.0; 6];
    for i in 0..3 {
        s[i] = 2.0 * mass * g[i] * kt;
        s[i + 3] = 2.0 * inertia[i] * g[i + 3] * kt;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub r: Vector3<f64>,
    pub p: Vector3<f64>,
    pub q: Orientation,
    /// Angular momentum in body axes.
    pub l: Vector3<f64>,
    pub a: Complex64,
    pub b: Complex64,
}

impl SystemState {
    pub fn at_rest(r: Vector3<f64>, q: Orientation) -> Self {
        Self {
            t: 0.0,
            r,
            p: Vector3::zeros(),
            q,
            l: Vector3::zeros(),
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn omega_body(&self, inertia: &Vector3<f64>) -> Vector3<f64> {
        self.l.component_div(inertia)
    }

    pub fn euler(&self) -> EulerAngles {
        self.q.to_euler().0
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.r.iter().all(|x| x.is_finite())
            && self.p.iter().all(|x| x.is_finite())
            && self.q.components().iter().all(|x| x.is_finite())
            && self.l.iter().all(|x| x.is_finite())
            && self.a.is_finite()
            && self.b.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
struct Derivative {
    r: Vector3<f64>,
    p: Vector3<f64>,
    q: Quaternion<f64>,
    l: Vector3<f64>,
    a: Complex64,
    b: Complex64,
}

/// `ȧ, ḃ` from the cavity equations at the instantaneous particle coordinates.
pub fn cavity_derivative(model: &OpticalModel, state: &SystemState) -> [Complex64; 2] {
    if !model.setup.cavity_enabled {
        return [Complex64::new(0.0, 0.0); 2];
    }
    let cav = &model.setup.cavity;
    let lin = Complex64::new(-cav.kappa, cav.detuning);
    let drive = model.cavity_drive(state);
    [lin * state.a + drive[0], lin * state.b + drive[1]]
}

/// Equations of motion bound to an optical model and an environment.
#[derive(Debug, Clone)]
pub struct Dynamics {
    model: OpticalModel,
    env: Environment,
    gamma: [f64; 6],
    trans_damping: Matrix3<f64>,
    beam: Matrix3<f64>,
    noise_sd: [f64; 6],
}

impl Dynamics {
    pub fn new(model: OpticalModel, env: Environment) -> Result<Self> {
        let gamma = damping_coefficients(&env)?;
        let p = &model.particle;
        let mut s = thermal_noise_amplitudes(&env, p.mass, &p.inertia)?;
        if let Some(rec) = env.recoil {
            for (i, v) in s.iter_mut().enumerate() {
                *v += if i < 3 { rec.force_psd } else { rec.torque_psd };
            }
        }
        let beam = model.setup.tweezer.beam_frame();
        let trans_damping =
            beam * Matrix3::from_diagonal(&Vector3::new(gamma[0], gamma[1], gamma[2])) * beam.transpose();
        Ok(Self {
            model,
            env,
            gamma,
            trans_damping,
            beam,
            noise_sd: s.map(f64::sqrt),
        })
    }

    pub fn model(&self) -> &OpticalModel {
        &self.model
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn damping(&self) -> [f64; 6] {
        self.gamma
    }

    fn derivative(&self, r: &Vector3<f64>, p: &Vector3<f64>, q: &Quaternion<f64>, l: &Vector3<f64>, a: Complex64, b: Complex64) -> Derivative {
        let particle = &self.model.particle;
        let orient = Orientation::from_quaternion_unchecked(*q / q.norm());
        let ev = self.model.evaluate(r, &orient, a, b);
        let omega = l.component_div(&particle.inertia);
        let dq = q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5;
        let rot_damp = Vector3::new(self.gamma[3] * l.x, self.gamma[4] * l.y, self.gamma[5] * l.z);
        let (da, db) = if self.model.setup.cavity_enabled {
            let cav = &self.model.setup.cavity;
            let lin = Complex64::new(-cav.kappa, cav.detuning);
            (lin * a + ev.drive[0], lin * b + ev.drive[1])
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        };
        Derivative {
            r: p / particle.mass,
            p: ev.force + ev.scattering - self.trans_damping * p,
            q: dq,
            l: l.cross(&omega) + ev.torque_body - rot_damp,
            a: da,
            b: db,
        }
    }

    /// Deterministic RK4 step of length `dt`.
    pub fn drift_step(&self, s: &SystemState, dt: f64) -> SystemState {
        let q0 = *s.q.quaternion();
        let k1 = self.derivative(&s.r, &s.p, &q0, &s.l, s.a, s.b);
        let h = 0.5 * dt;
        let k2 = self.derivative(
            &(s.r + k1.r * h),
            &(s.p + k1.p * h),
            &(q0 + k1.q * h),
            &(s.l + k1.l * h),
            s.a + k1.a * h,
            s.b + k1.b * h,
        );
        let k3 = self.derivative(
            &(s.r + k2.r * h),
            &(s.p + k2.p * h),
            &(q0 + k2.q * h),
            &(s.l + k2.l * h),
            s.a + k2.a * h,
            s.b + k2.b * h,
        );
        let k4 = self.derivative(
            &(s.r + k3.r * dt),
            &(s.p + k3.p * dt),
            &(q0 + k3.q * dt),
            &(s.l + k3.l * dt),
            s.a + k3.a * dt,
            s.b + k3.b * dt,
        );
        let w = dt / 6.0;
        let q = q0 + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * w;
        SystemState {
            t: s.t + dt,
            r: s.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * w,
            p: s.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * w,
            q: Orientation::from_quaternion_unchecked(q).normalized(),
            l: s.l + (k1.l + k2.l * 2.0 + k3.l * 2.0 + k4.l) * w,
            a: s.a + (k1.a + k2.a * 2.0 + k3.a * 2.0 + k4.a) * w,
            b: s.b + (k1.b + k2.b * 2.0 + k3.b * 2.0 + k4.b) * w,
        }
    }

    /// One stochastic step; fails if the new state is not finite.
    pub fn step<R: Rng + ?Sized>(&self, s: &SystemState, dt: f64, rng: &mut R) -> Result<SystemState> {
        let mut next = self.drift_step(s, dt);
        if self.noise_sd.iter().any(|&v| v > 0.0) {
            let sq = dt.sqrt();
            let mut n = [0.0; 6];
            for (i, v) in n.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = z * self.noise_sd[i] * sq;
            }
            next.p += self.beam * Vector3::new(n[0], n[1], n[2]);
            next.l += Vector3::new(n[3], n[4], n[5]);
        }
        if !next.is_finite() {
            return Err(Error::IntegrationDiverged { last_good_t: s.t });
        }
        Ok(next)
    }

    /// Kinetic plus rotational plus optical energy (J).
    pub fn energy(&self, s: &SystemState) -> f64 {
        let p = &self.model.particle;
        let omega = s.omega_body(&p.inertia);
        s.p.norm_squared() / (2.0 * p.mass) + 0.5 * s.l.dot(&omega) + self.model.optical_potential(s).total()
    }
}
