//! Tweezer and cavity fields, the optical potential and its gradients.
//!
//! All fields are complex phasors at the tweezer laser frequency with the
//! physical field `Re[E e^{-iωt}]`. The potential of the particle is
//! `H_opt = −(ε₀V/4) E*·χ(Ω)·E` with `E = E_tw + a·U₁ + b·U₂`, where `a` and
//! `b` are the two cavity mode amplitudes in units of √photons.
//!
//! The tweezer is an astigmatic paraxial Gaussian beam. Its frame is spanned
//! by the polarization major axis (waist `w_par`), the minor axis (`w_perp`)
//! and the propagation direction; it is the lab frame rotated by `theta`
//! about z and then tilted by `tilt` about x.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::constants::{C_LIGHT, EPS0, HBAR, TWO_PI};
use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::rigidbody::{rot_x, rot_z, Orientation, Particle};

pub type CVec3 = Vector3<Complex64>;

/// Complex field at a point (V/m), rotating frame of the tweezer laser.
pub type FieldSample = CVec3;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweezerParams {
    pub wavelength: f64,
    pub power: f64,
    /// Waist along the polarization major axis.
    pub w_par: f64,
    pub w_perp: f64,
    /// Ellipticity angle, `e_p = cos ψ e_x + i sin ψ e_y`.
    pub psi: f64,
    /// Rotation of the polarization ellipse about z.
    pub theta: f64,
    /// Tilt of the propagation axis about lab x, towards the cavity axis.
    pub tilt: f64,
}

impl TweezerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        if !(self.power >= 0.0) {
            return Err(Error::InvalidParameter("tweezer power must be non-negative".into()));
        }
        let min_waist = self.wavelength / 4.0;
        if !(self.w_par > min_waist && self.w_perp > min_waist) {
            return Err(Error::InvalidParameter(format!(
                "tweezer waists must exceed λ/4 = {min_waist:e} m"
            )));
        }
        if !(0.0..=PI / 4.0 + 1e-12).contains(&self.psi) {
            return Err(Error::InvalidParameter(format!(
                "ellipticity ψ must lie in [0, π/4], got {}",
                self.psi
            )));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TWO_PI / self.wavelength
    }

    /// Peak focal amplitude `E₀ = √(4P/(π ε₀ c w∥ w⊥))`.
    pub fn peak_amplitude(&self) -> f64 {
        (4.0 * self.power / (PI * EPS0 * C_LIGHT * self.w_par * self.w_perp)).sqrt()
    }

    pub fn rayleigh_ranges(&self) -> [f64; 2] {
        [
            PI * self.w_par * self.w_par / self.wavelength,
            PI * self.w_perp * self.w_perp / self.wavelength,
        ]
    }

    /// Columns: polarization major axis, minor axis, propagation direction.
    pub fn beam_frame(&self) -> Matrix3<f64> {
        rot_x(self.tilt) * rot_z(self.theta)
    }

    /// `e_t = R(θ, e_z)(cos ψ e_x + i sin ψ e_y)` (tilted with the beam).
    pub fn polarization(&self) -> CVec3 {
        let b = self.beam_frame();
        let par = b.column(0).into_owned();
        let perp = b.column(1).into_owned();
        par.map(|x| Complex64::new(x * self.psi.cos(), 0.0))
            + perp.map(|x| Complex64::new(0.0, x * self.psi.sin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub length: f64,
    /// Amplitude decay rate (half linewidth), rad/s.
    pub kappa: f64,
    pub kappa_in: f64,
    pub waist: f64,
    /// Laser minus cavity resonance, rad/s.
    pub detuning: f64,
    /// Offset of the trap centre from the nearest antinode along y, m.
    pub y0: f64,
    /// Polarizations of the two modes, unit vectors in the x–z plane.
    pub mode_pol: [Vector3<f64>; 2],
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidParameter("cavity length must be positive".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter("cavity linewidth must be positive".into()));
        }
        if !(self.kappa_in >= 0.0 && self.kappa_in <= self.kappa) {
            return Err(Error::InvalidParameter("need 0 ≤ κ_in ≤ κ".into()));
        }
        if !(self.waist > 0.0) {
            return Err(Error::InvalidParameter("cavity waist must be positive".into()));
        }
        for p in &self.mode_pol {
            if (p.norm() - 1.0).abs() > 1e-9 || p.y.abs() > 1e-12 {
                return Err(Error::InvalidParameter(
                    "cavity mode polarizations must be unit vectors in the x–z plane".into(),
                ));
            }
        }
        Ok(())
    }

    /// Mode polarizations obtained by rotating (e_x, e_z) by `angle` about y.
    pub fn mode_basis(angle: f64) -> [Vector3<f64>; 2] {
        let (s, c) = angle.sin_cos();
        [Vector3::new(c, 0.0, -s), Vector3::new(s, 0.0, c)]
    }

    pub fn mode_volume(&self) -> f64 {
        PI / 4.0 * self.waist * self.waist * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSetup {
    pub tweezer: TweezerParams,
    pub cavity: CavityParams,
    pub cavity_enabled: bool,
    pub scattering_force: bool,
}

/// The three bilinear parts of the optical potential (J).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTerms {
    pub tweezer: f64,
    pub dispersive: f64,
    pub coherent: f64,
    /// Imaginary part of `E*·χ·E` scaled like the potential; zero up to rounding.
    pub imaginary: f64,
}

impl PotentialTerms {
    pub fn total(&self) -> f64 {
        self.tweezer + self.dispersive + self.coherent
    }
}

/// Everything the equations of motion need from one field evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub force: Vector3<f64>,
    pub scattering: Vector3<f64>,
    pub torque_body: Vector3<f64>,
    /// `−(i/ħ) ∂H_opt/∂a*` and the same for `b`.
    pub drive: [Complex64; 2],
}

/// Optical model bound to a particle, with the per-evaluation constants cached.
#[derive(Debug, Clone)]
pub struct OpticalModel {
    pub setup: OpticalSetup,
    pub particle: Particle,
    k: f64,
    e0: f64,
    z_r: [f64; 2],
    beam: Matrix3<f64>,
    pol: CVec3,
    e_photon: f64,
    /// ε₀V/4
    coupling: f64,
    sigma_scat: f64,
}

struct TweezerLocal {
    field: CVec3,
    /// ∇E = field ⊗ grad_log (lab frame)
    grad_log: CVec3,
}

struct ModeLocal {
    profile: f64,
    grad: Vector3<f64>,
}

impl OpticalModel {
    pub fn new(setup: OpticalSetup, particle: Particle) -> Result<Self> {
        setup.tweezer.validate()?;
        setup.cavity.validate()?;
        let tw = &setup.tweezer;
        let k = tw.wavenumber();
        let omega = C_LIGHT * k;
        let alpha_over_eps0 = particle.volume * particle.chi_mean();
        Ok(Self {
            setup,
            particle,
            k,
            e0: tw.peak_amplitude(),
            z_r: tw.rayleigh_ranges(),
            beam: tw.beam_frame(),
            pol: tw.polarization(),
            e_photon: (2.0 * HBAR * omega / (EPS0 * setup.cavity.mode_volume())).sqrt(),
            coupling: EPS0 * particle.volume / 4.0,
            sigma_scat: k.powi(4) / (6.0 * PI) * alpha_over_eps0 * alpha_over_eps0,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    /// Phasor amplitude of one cavity photon at an antinode on axis (V/m).
    pub fn cavity_photon_amplitude(&self) -> f64 {
        self.e_photon
    }

    pub fn scattering_cross_section(&self) -> f64 {
        self.sigma_scat
    }

    /// ε₀V_p/4
    pub fn coupling_prefactor(&self) -> f64 {
        self.coupling
    }

    fn tweezer_local(&self, r: &Vector3<f64>) -> TweezerLocal {
        let c = self.beam.transpose() * r;
        let (u, v, w) = (c.x, c.y, c.z);
        let k = self.k;
        let q = [Complex64::new(w, -self.z_r[0]), Complex64::new(w, -self.z_r[1])];
        let q0 = [Complex64::new(0.0, -self.z_r[0]), Complex64::new(0.0, -self.z_r[1])];
        let mut env = (I * k * w).exp();
        let transverse = [u, v];
        let mut g_w = I * k;
        for i in 0..2 {
            let inv_q = q[i].inv();
            env *= (q0[i] * inv_q).sqrt() * (I * k * transverse[i] * transverse[i] * 0.5 * inv_q).exp();
            g_w += -0.5 * inv_q - I * k * transverse[i] * transverse[i] * 0.5 * inv_q * inv_q;
        }
        let g_beam = CVec3::new(I * k * u / q[0], I * k * v / q[1], g_w);
        let beam_c = self.beam.map(|x| Complex64::new(x, 0.0));
        TweezerLocal {
            field: self.pol * (env * self.e0),
            grad_log: beam_c * g_beam,
        }
    }

    fn mode_local(&self, r: &Vector3<f64>) -> ModeLocal {
        let cav = &self.setup.cavity;
        let w2 = cav.waist * cav.waist;
        let gauss = (-(r.x * r.x + r.z * r.z) / w2).exp();
        let (s, c) = (self.k * (r.y + cav.y0)).sin_cos();
        let profile = self.e_photon * c * gauss;
        let grad = Vector3::new(
            -2.0 * r.x / w2 * profile,
            -self.e_photon * self.k * s * gauss,
            -2.0 * r.z / w2 * profile,
        );
        ModeLocal { profile, grad }
    }

    pub fn tweezer_field(&self, r: &Vector3<f64>) -> FieldSample {
        self.tweezer_local(r).field
    }

    /// Field of cavity mode `mode` (0 or 1) per unit amplitude.
    pub fn cavity_mode_field(&self, r: &Vector3<f64>, mode: usize) -> Vector3<f64> {
        self.setup.cavity.mode_pol[mode] * self.mode_local(r).profile
    }

    /// Tweezer intensity `ε₀c|E|²/2`.
    pub fn tweezer_intensity(&self, r: &Vector3<f64>) -> f64 {
        0.5 * EPS0 * C_LIGHT * self.tweezer_field(r).norm_squared()
    }

    fn cavity_amplitudes(&self, state: &SystemState) -> (Complex64, Complex64) {
        if self.setup.cavity_enabled {
            (state.a, state.b)
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        }
    }

    fn cavity_field(&self, profile: f64, a: Complex64, b: Complex64) -> CVec3 {
        let [e1, e2] = self.setup.cavity.mode_pol;
        e1.map(|x| a * (x * profile)) + e2.map(|x| b * (x * profile))
    }

    pub fn total_field(&self, state: &SystemState) -> FieldSample {
        let (a, b) = self.cavity_amplitudes(state);
        let tw = self.tweezer_field(&state.r);
        if !self.setup.cavity_enabled {
            return tw;
        }
        tw + self.cavity_field(self.mode_local(&state.r).profile, a, b)
    }

    pub fn optical_potential(&self, state: &SystemState) -> PotentialTerms {
        let chi = to_complex(&self.particle.susceptibility_lab(&state.q));
        let (a, b) = self.cavity_amplitudes(state);
        let tw = self.tweezer_field(&state.r);
        let cav = if self.setup.cavity_enabled {
            self.cavity_field(self.mode_local(&state.r).profile, a, b)
        } else {
            CVec3::zeros()
        };
        let form = |x: &CVec3, y: &CVec3| x.conjugate().dot(&(chi * y));
        let tt = form(&tw, &tw);
        let cc = form(&cav, &cav);
        let cs = form(&tw, &cav) + form(&cav, &tw);
        let c = self.coupling;
        PotentialTerms {
            tweezer: -c * tt.re,
            dispersive: -c * cc.re,
            coherent: -c * cs.re,
            imaginary: -c * (tt.im + cc.im + cs.im),
        }
    }

    /// Single pass over fields for the equations of motion.
    pub fn evaluate(&self, r: &Vector3<f64>, q: &Orientation, a: Complex64, b: Complex64) -> Evaluation {
        let rot = q.rotation_matrix();
        let chi_lab = rot * Matrix3::from_diagonal(&self.particle.chi) * rot.transpose();
        let tw = self.tweezer_local(r);
        let c2 = 2.0 * self.coupling;

        let (e, w, mode) = if self.setup.cavity_enabled {
            let m = self.mode_local(r);
            let e = tw.field + self.cavity_field(m.profile, a, b);
            (e, mul_real(&chi_lab, &e), Some(m))
        } else {
            (tw.field, mul_real(&chi_lab, &tw.field), None)
        };
        let wc = w.conjugate();

        // F_j = 2c Re[(χE)*·∂_jE]
        let w_tw = wc.dot(&tw.field);
        let mut force = tw.grad_log.map(|g| (g * w_tw).re * c2);
        let mut drive = [Complex64::new(0.0, 0.0); 2];
        if let Some(m) = &mode {
            let [e1, e2] = self.setup.cavity.mode_pol;
            let p1 = wc.dot(&e1.map(|x| Complex64::new(x, 0.0)));
            let p2 = wc.dot(&e2.map(|x| Complex64::new(x, 0.0)));
            force += m.grad * ((a * p1 + b * p2).re * c2);
            // ȧ ∋ i(c/ħ) U₁·χ·E
            let scale = I * (self.coupling / HBAR * m.profile);
            drive[0] = scale * p1.conj();
            drive[1] = scale * p2.conj();
        }

        // τ_lab = 2c Re[(χE) × E*]
        let chi = &self.particle.chi;
        let torque_body = if chi.x == chi.y && chi.y == chi.z {
            Vector3::zeros()
        } else {
            let t = w.cross(&e.conjugate());
            rot.transpose() * t.map(|z| z.re * c2)
        };

        let scattering = if self.setup.scattering_force {
            self.scattering_from(&tw)
        } else {
            Vector3::zeros()
        };
        Evaluation {
            force,
            scattering,
            torque_body,
            drive,
        }
    }

    fn scattering_from(&self, tw: &TweezerLocal) -> Vector3<f64> {
        let intensity = 0.5 * EPS0 * C_LIGHT * tw.field.norm_squared();
        let kvec = tw.grad_log.map(|g| g.im);
        let n = kvec.norm();
        if n == 0.0 {
            return Vector3::zeros();
        }
        kvec * (self.sigma_scat * intensity / C_LIGHT / n)
    }

    /// Conservative optical force `−∇_r H_opt` at fixed orientation and amplitudes.
    pub fn force(&self, state: &SystemState) -> Vector3<f64> {
        let (a, b) = self.cavity_amplitudes(state);
        self.evaluate(&state.r, &state.q, a, b).force
    }

    /// Conservative optical torque in body axes.
    pub fn torque(&self, state: &SystemState) -> Vector3<f64> {
        let (a, b) = self.cavity_amplitudes(state);
        self.evaluate(&state.r, &state.q, a, b).torque_body
    }

    /// Rayleigh scattering force along the local tweezer wavevector; zero when
    /// switched off in the setup.
    pub fn scattering_force(&self, state: &SystemState) -> Vector3<f64> {
        if !self.setup.scattering_force {
            return Vector3::zeros();
        }
        self.scattering_from(&self.tweezer_local(&state.r))
    }

    /// Coherent and dispersive drive of both modes, `−(i/ħ)∂H_opt/∂a*`.
    pub fn cavity_drive(&self, state: &SystemState) -> [Complex64; 2] {
        let (a, b) = self.cavity_amplitudes(state);
        self.evaluate(&state.r, &state.q, a, b).drive
    }

    /// Cavity amplitudes that make the cavity equations stationary at fixed
    /// particle coordinates (dispersive cross-coupling included).
    pub fn steady_cavity(&self, r: &Vector3<f64>, q: &Orientation) -> (Complex64, Complex64) {
        if !self.setup.cavity_enabled {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let cav = &self.setup.cavity;
        let chi = self.particle.susceptibility_lab(q);
        let m = self.mode_local(r);
        let tw = self.tweezer_local(r).field;
        let g = self.coupling / HBAR;
        let [e1, e2] = cav.mode_pol;
        let u = [e1 * m.profile, e2 * m.profile];
        // 0 = (iΔ − κ)a + i g U₁·χ·(E_tw + aU₁ + bU₂)
        let dd = |i: usize, j: usize| g * u[i].dot(&(chi * u[j]));
        let src = |i: usize| {
            let cu = (chi * u[i]).map(|x| Complex64::new(x, 0.0));
            I * g * cu.dot(&tw)
        };
        let base = Complex64::new(-cav.kappa, cav.detuning);
        let m11 = base + I * dd(0, 0);
        let m22 = base + I * dd(1, 1);
        let m12 = I * dd(0, 1);
        let (s1, s2) = (-src(0), -src(1));
        let det = m11 * m22 - m12 * m12;
        ((s1 * m22 - m12 * s2) / det, (m11 * s2 - m12 * s1) / det)
    }
}

fn to_complex(m: &Matrix3<f64>) -> Matrix3<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn mul_real(m: &Matrix3<f64>, v: &CVec3) -> CVec3 {
    CVec3::new(
        v[0] * m[(0, 0)] + v[1] * m[(0, 1)] + v[2] * m[(0, 2)],
        v[0] * m[(1, 0)] + v[1] * m[(1, 1)] + v[2] * m[(1, 2)],
        v[0] * m[(2, 0)] + v[1] * m[(2, 1)] + v[2] * m[(2, 2)],
    )
}
