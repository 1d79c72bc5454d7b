//! Orientation algebra, inertia and the anisotropic susceptibility of an
//! ellipsoidal particle.
//!
//! Orientations are stored as unit quaternions (scalar first). Euler angles use
//! the z-y'-z'' convention, `R = Rz(α)·Ry(β)·Rz(γ)`, and are only a view for I/O
//! and analysis: the third angle diffuses freely at high pressure and the
//! chart is singular at β ∈ {0, π}.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Quaternion, Vector3};

use crate::error::{Error, Result};
use crate::quad;

/// Below this |sin β| the split between α and γ is not meaningful.
pub const GIMBAL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }
}

/// Rotation matrix mapping body-frame vectors to the lab frame.
pub fn rotation_matrix(angles: EulerAngles) -> Matrix3<f64> {
    rot_z(angles.alpha) * rot_y(angles.beta) * rot_z(angles.gamma)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Unit quaternion, scalar first, mapping body to lab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation(Quaternion<f64>);

impl Default for Orientation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Orientation {
    pub fn identity() -> Self {
        Self(Quaternion::new(1.0, 0.0, 0.0, 0.0))
    }

    /// Builds from raw components and normalizes.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self(Quaternion::new(w, x, y, z)).normalized()
    }

    pub fn from_quaternion_unchecked(q: Quaternion<f64>) -> Self {
        Self(q)
    }

    pub fn quaternion(&self) -> &Quaternion<f64> {
        &self.0
    }

    /// `[w, x, y, z]`
    pub fn components(&self) -> [f64; 4] {
        [self.0.w, self.0.i, self.0.j, self.0.k]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(self) -> Self {
        let n = self.0.norm();
        Self(self.0 / n)
    }

    /// Sign convention used at I/O boundaries: scalar part non-negative.
    pub fn canonical(self) -> Self {
        if self.0.w < 0.0 {
            Self(-self.0)
        } else {
            self
        }
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self(Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z))
    }

    /// `exp(φ/2)` for a rotation vector φ.
    pub fn from_rotation_vector(phi: Vector3<f64>) -> Self {
        let angle = phi.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        Self::from_axis_angle(phi / angle, angle)
    }

    pub fn from_euler(angles: EulerAngles) -> Self {
        let qa = Self::from_axis_angle(Vector3::z(), angles.alpha);
        let qb = Self::from_axis_angle(Vector3::y(), angles.beta);
        let qg = Self::from_axis_angle(Vector3::z(), angles.gamma);
        qa.compose(&qb).compose(&qg)
    }

    /// Hamilton product `self ⊗ other`: apply `other` first, in the body frame.
    pub fn compose(&self, other: &Orientation) -> Orientation {
        Self(self.0 * other.0)
    }

    /// Rotates the body by the rotation vector `phi` expressed in body axes.
    pub fn rotate_body(&self, phi: Vector3<f64>) -> Orientation {
        self.compose(&Self::from_rotation_vector(phi)).normalized()
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let q = &self.0;
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Euler angles with β ∈ [0, π], α, γ ∈ (−π, π]. The flag is set at the
    /// gimbal configurations, where γ is returned as 0 and α carries the
    /// whole rotation about z.
    pub fn to_euler(&self) -> (EulerAngles, bool) {
        euler_from_matrix(&self.rotation_matrix())
    }
}

pub fn euler_from_matrix(r: &Matrix3<f64>) -> (EulerAngles, bool) {
    let sb = (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
    let beta = sb.atan2(r[(2, 2)]);
    if sb < GIMBAL_EPS {
        let alpha = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return (EulerAngles::new(alpha, beta, 0.0), true);
    }
    let alpha = r[(1, 2)].atan2(r[(0, 2)]);
    let gamma = r[(2, 1)].atan2(-r[(2, 0)]);
    (EulerAngles::new(alpha, beta, gamma), false)
}

/// Nearest-branch continuation of a wrapped angle.
pub fn unwrap_next(previous: f64, wrapped: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let d = (wrapped - previous).rem_euclid(two_pi);
    let d = if d > PI { d - two_pi } else { d };
    previous + d
}

/// Unwraps a sampled angle series in place.
pub fn unwrap_series(angles: &mut [f64]) {
    for i in 1..angles.len() {
        angles[i] = unwrap_next(angles[i - 1], angles[i]);
    }
}

/// Triaxial ellipsoid: semi-axes in metres, density, relative permittivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub rho: f64,
    pub eps_r: f64,
}

impl ParticleParams {
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.r1 * self.r2 * self.r3
    }

    pub fn mass(&self) -> f64 {
        self.rho * self.volume()
    }

    /// Principal moments `I_i = (m/5)(R_j² + R_k²)`.
    pub fn inertia(&self) -> Vector3<f64> {
        let m5 = self.mass() / 5.0;
        let (a, b, c) = (self.r1 * self.r1, self.r2 * self.r2, self.r3 * self.r3);
        Vector3::new(m5 * (b + c), m5 * (a + c), m5 * (a + b))
    }

    fn validate(&self) -> Result<()> {
        for (name, r) in [("r1", self.r1), ("r2", self.r2), ("r3", self.r3)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {r}")));
            }
        }
        if !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("density must be positive, got {}", self.rho)));
        }
        if !(self.eps_r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "relative permittivity must be positive, got {}",
                self.eps_r
            )));
        }
        Ok(())
    }

    /// Precomputes the derived quantities used on every force evaluation.
    pub fn derive(&self) -> Result<Particle> {
        self.validate()?;
        let chi = body_susceptibility(self)?;
        Ok(Particle {
            params: *self,
            volume: self.volume(),
            mass: self.mass(),
            inertia: self.inertia(),
            chi: Vector3::from(chi),
        })
    }
}

/// Particle parameters together with derived mass, inertia and susceptibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub params: ParticleParams,
    pub volume: f64,
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub chi: Vector3<f64>,
}

impl Particle {
    pub fn susceptibility_lab(&self, q: &Orientation) -> Matrix3<f64> {
        susceptibility_lab(q, &self.chi)
    }

    /// Orientation-averaged susceptibility.
    pub fn chi_mean(&self) -> f64 {
        self.chi.sum() / 3.0
    }
}

/// Depolarization factors of a triaxial ellipsoid.
pub fn depolarization_factors(r1: f64, r2: f64, r3: f64) -> Result<[f64; 3]> {
    for r in [r1, r2, r3] {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("semi-axis must be positive, got {r}")));
        }
    }
    let scale = r1.max(r2).max(r3);
    let a = [r1 / scale, r2 / scale, r3 / scale];
    let sq = [a[0] * a[0], a[1] * a[1], a[2] * a[2]];
    let prefactor = 0.5 * a[0] * a[1] * a[2];
    // s = c·tan²u maps [0, ∞) onto [0, π/2)
    let c = sq[0];
    let mut out = [0.0; 3];
    for (i, l) in out.iter_mut().enumerate() {
        let integrand = |u: f64| {
            if u >= FRAC_PI_2 {
                return 0.0;
            }
            let t = u.tan();
            let s = c * t * t;
            let sec2 = 1.0 + t * t;
            let ds = 2.0 * c * t * sec2;
            ds / ((s + sq[i]) * ((s + sq[0]) * (s + sq[1]) * (s + sq[2])).sqrt())
        };
        *l = prefactor * quad::integrate(integrand, 0.0, FRAC_PI_2, 1e-12);
    }
    Ok(out)
}

/// Body-frame susceptibility `χ_i = (ε_r − 1)/(1 + L_i(ε_r − 1))`.
pub fn body_susceptibility(params: &ParticleParams) -> Result<[f64; 3]> {
    if !(params.eps_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative permittivity must be positive, got {}",
            params.eps_r
        )));
    }
    let l = depolarization_factors(params.r1, params.r2, params.r3)?;
    let e = params.eps_r - 1.0;
    Ok(l.map(|li| e / (1.0 + li * e)))
}

/// `χ_lab = R χ_body Rᵀ`.
pub fn susceptibility_lab(q: &Orientation, chi_body: &Vector3<f64>) -> Matrix3<f64> {
    let r = q.rotation_matrix();
    r * Matrix3::from_diagonal(chi_body) * r.transpose()
}
