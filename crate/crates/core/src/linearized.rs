//! Equilibrium, harmonic trap frequencies and the gyroscopically coupled
//! libration pair.
//!
//! Small displacements are described by generalized coordinates
//! `(u, v, w, φ₁, φ₂, φ₃)`: a lab displacement `r = r₀ + B·(u, v, w)` in the
//! tweezer beam frame `B` and a body-axis rotation `q = q₀ ⊗ exp(φ/2)`. The
//! conjugate generalized force is `(Bᵀ·F, τ_body)`. At the aligned
//! equilibrium body axes 1, 2, 3 correspond to α, β and γ.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix5, SMatrix, Vector3, Vector5, Vector6};
use num_complex::Complex64;

use crate::constants::K_B;
use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::optics::OpticalModel;
use crate::rigidbody::{EulerAngles, Orientation};

pub type Matrix6 = SMatrix<f64, 6, 6>;

pub const DOF_NAMES: [&str; 6] = ["x", "y", "z", "alpha", "beta", "gamma"];

const MAX_NEWTON: usize = 100;
const GRADIENT_TOL: f64 = 1e-22;
const STEP_TRANS: f64 = 1e-11;
const STEP_ROT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub r: Vector3<f64>,
    pub q: Orientation,
    pub angles: EulerAngles,
    /// Stationary cavity amplitudes at the equilibrium (zero without cavity).
    pub a: Complex64,
    pub b: Complex64,
    /// Norm of the generalized force over the five confined coordinates.
    pub residual: f64,
    pub iterations: usize,
}

impl EquilibriumPoint {
    pub fn state(&self) -> SystemState {
        SystemState {
            a: self.a,
            b: self.b,
            ..SystemState::at_rest(self.r, self.q)
        }
    }
}

/// Angular frequencies (rad/s) in the order x, y, z, α, β, γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpectrum {
    pub omega: [f64; 6],
    pub confined: [bool; 6],
    pub equilibrium: EquilibriumPoint,
}

impl TrapSpectrum {
    pub fn frequencies_hz(&self) -> [f64; 6] {
        self.omega.map(|w| w / (2.0 * PI))
    }
}

fn displaced(model: &OpticalModel, r0: &Vector3<f64>, q0: &Orientation, x: &Vector6<f64>) -> (Vector3<f64>, Orientation) {
    let beam = model.setup.tweezer.beam_frame();
    let r = r0 + beam * Vector3::new(x[0], x[1], x[2]);
    let q = q0.rotate_body(Vector3::new(x[3], x[4], x[5]));
    (r, q)
}

/// Generalized force `(Bᵀ·F, τ_body)` at fixed cavity amplitudes.
pub fn generalized_force(
    model: &OpticalModel,
    r: &Vector3<f64>,
    q: &Orientation,
    a: Complex64,
    b: Complex64,
    include_scattering: bool,
) -> Vector6<f64> {
    let ev = model.evaluate(r, q, a, b);
    let mut f = ev.force;
    if include_scattering {
        f += ev.scattering;
    }
    let fb = model.setup.tweezer.beam_frame().transpose() * f;
    Vector6::new(fb.x, fb.y, fb.z, ev.torque_body.x, ev.torque_body.y, ev.torque_body.z)
}

/// Generalized force with the cavity amplitudes at their stationary values.
fn static_force(model: &OpticalModel, r: &Vector3<f64>, q: &Orientation) -> Vector6<f64> {
    let (a, b) = model.steady_cavity(r, q);
    generalized_force(model, r, q, a, b, true)
}

fn steps() -> [f64; 6] {
    [STEP_TRANS, STEP_TRANS, STEP_TRANS, STEP_ROT, STEP_ROT, STEP_ROT]
}

/// Newton iteration for the stationary point over translation and the two
/// confined rotations; the spin angle about the long axis stays fixed.
/// Starts from the focus with the long axis along the polarization.
pub fn find_equilibrium(model: &OpticalModel) -> Result<EquilibriumPoint> {
    let tw = &model.setup.tweezer;
    let start = Orientation::from_euler(EulerAngles::new(tw.theta, FRAC_PI_2, 0.0));
    find_equilibrium_from(model, Vector3::zeros(), start)
}

/// Whether `r` has left the focal region, beyond twice the waist or twice
/// the Rayleigh range.
fn escaped(model: &OpticalModel, r: &Vector3<f64>) -> bool {
    let tw = &model.setup.tweezer;
    let rb = tw.beam_frame().transpose() * r;
    let w = tw.w_par.max(tw.w_perp);
    let [z1, z2] = tw.rayleigh_ranges();
    rb.x.hypot(rb.y) > 2.0 * w || rb.z.abs() > 2.0 * z1.max(z2)
}

pub fn find_equilibrium_from(model: &OpticalModel, r_start: Vector3<f64>, q_start: Orientation) -> Result<EquilibriumPoint> {
    let mut r = r_start;
    let mut q = q_start;
    let h = steps();
    let residual_of = |g: &Vector6<f64>| Vector5::new(g[0], g[1], g[2], g[3], g[4]);
    let mut g = static_force(model, &r, &q);
    let mut res = residual_of(&g).norm();
    let mut iterations = 0;
    while res >= GRADIENT_TOL {
        if iterations == MAX_NEWTON {
            return Err(Error::NoEquilibrium { iterations, residual: res });
        }
        iterations += 1;
        // Jacobian of the generalized force (negative stiffness)
        let mut jac = Matrix5::zeros();
        for j in 0..5 {
            let mut dx = Vector6::zeros();
            dx[j] = h[j];
            let (rp, qp) = displaced(model, &r, &q, &dx);
            let (rm, qm) = displaced(model, &r, &q, &(-dx));
            let d = (static_force(model, &rp, &qp) - static_force(model, &rm, &qm)) / (2.0 * h[j]);
            for i in 0..5 {
                jac[(i, j)] = d[i];
            }
        }
        let rhs = -residual_of(&g);
        // least squares when singular: directions with no restoring force
        // (a sphere's rotations) are left alone
        let step = match jac.lu().solve(&rhs) {
            Some(step) => step,
            None => {
                let svd = jac.svd(true, true);
                let tol = 1e-10 * svd.singular_values.max();
                svd.solve(&rhs, tol)
                    .map_err(|_| Error::NoEquilibrium { iterations, residual: res })?
            }
        };
        let weights: Vector5<f64> = Vector5::from_fn(|i, _| 1.0 / jac[(i, i)].abs().max(f64::MIN_POSITIVE));
        let merit = |g: &Vector6<f64>| (0..5).map(|i| g[i] * g[i] * weights[i]).sum::<f64>();
        let m0 = merit(&g);
        let mut lambda = 1.0;
        loop {
            let x = Vector6::new(
                lambda * step[0],
                lambda * step[1],
                lambda * step[2],
                lambda * step[3],
                lambda * step[4],
                0.0,
            );
            let (rn, qn) = displaced(model, &r, &q, &x);
            let gn = static_force(model, &rn, &qn);
            if merit(&gn) < m0 || lambda < 1e-6 {
                r = rn;
                q = qn;
                g = gn;
                break;
            }
            lambda *= 0.5;
        }
        let new_res = residual_of(&g).norm();
        if !new_res.is_finite() {
            return Err(Error::NoEquilibrium { iterations, residual: res });
        }
        if new_res >= res && lambda < 1e-6 {
            return Err(Error::NoEquilibrium {
                iterations,
                residual: new_res,
            });
        }
        if escaped(model, &r) {
            return Err(Error::NoEquilibrium {
                iterations,
                residual: new_res,
            });
        }
        res = new_res;
    }
    let (a, b) = model.steady_cavity(&r, &q);
    let (angles, _) = q.to_euler();
    Ok(EquilibriumPoint {
        r,
        q,
        angles,
        a,
        b,
        residual: res,
        iterations,
    })
}

/// Stiffness matrix `K = −∂Q/∂x` of the tweezer potential in generalized
/// coordinates at `eq`, with the cavity fields set to zero; their back-action
/// is left to the full dynamics. Central differences with one Richardson extrapolation; symmetrized.
pub fn stiffness_matrix(model: &OpticalModel, eq: &EquilibriumPoint, include_scattering: bool) -> Matrix6 {
    let h = steps();
    let zero = Complex64::new(0.0, 0.0);
    let force = |x: &Vector6<f64>| {
        let (r, q) = displaced(model, &eq.r, &eq.q, x);
        generalized_force(model, &r, &q, zero, zero, include_scattering)
    };
    let mut k = Matrix6::zeros();
    for j in 0..6 {
        let diff = |hj: f64| {
            let mut dx = Vector6::zeros();
            dx[j] = hj;
            (force(&dx) - force(&(-dx))) / (2.0 * hj)
        };
        let d = (diff(0.5 * h[j]) * 4.0 - diff(h[j])) / 3.0;
        for i in 0..6 {
            k[(i, j)] = -d[i];
        }
    }
    (k + k.transpose()) * 0.5
}

/// Generalized masses `(m, m, m, I₁, I₂, I₃)`.
pub fn mass_metric(model: &OpticalModel) -> Vector6<f64> {
    let p = &model.particle;
    Vector6::new(p.mass, p.mass, p.mass, p.inertia.x, p.inertia.y, p.inertia.z)
}

/// Harmonic trap frequencies from the mass-weighted stiffness at the
/// tweezer equilibrium. Each normal mode is labelled by its dominant
/// coordinate.
pub fn trap_frequencies(model: &OpticalModel) -> Result<TrapSpectrum> {
    let eq = find_tweezer_equilibrium(model)?;
    spectrum_at(model, &eq)
}

/// Stationary point of the tweezer alone (gradient and scattering force),
/// where the tweezer torque vanishes and [`stiffness_matrix`] is a Hessian.
pub fn find_tweezer_equilibrium(model: &OpticalModel) -> Result<EquilibriumPoint> {
    let mut bare = model.clone();
    bare.setup.cavity_enabled = false;
    find_equilibrium(&bare)
}

pub fn spectrum_at(model: &OpticalModel, eq: &EquilibriumPoint) -> Result<TrapSpectrum> {
    let k = stiffness_matrix(model, eq, false);
    let m = mass_metric(model);
    let inv_sqrt = m.map(|x| 1.0 / x.sqrt());
    let dyn_matrix = Matrix6::from_fn(|i, j| k[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = dyn_matrix.symmetric_eigen();

    // Curvature scale for deciding that a rotational direction is flat.
    let tw = &model.setup.tweezer;
    let e0 = tw.peak_amplitude();
    let p = &model.particle;
    let rot_scale = model.coupling_prefactor() * e0 * e0 * p.chi.max() / p.inertia.min();
    let trans_scale = model.coupling_prefactor() * e0 * e0 * p.chi.max() * model.wavenumber().powi(2) / p.mass;

    // Greedy assignment of eigenvectors to coordinates by weight.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(36);
    for mode in 0..6 {
        let v = eig.eigenvectors.column(mode);
        for dof in 0..6 {
            pairs.push((v[dof] * v[dof], mode, dof));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut mode_of = [usize::MAX; 6];
    let mut used = [false; 6];
    for (_, mode, dof) in pairs {
        if mode_of[dof] == usize::MAX && !used[mode] {
            mode_of[dof] = mode;
            used[mode] = true;
        }
    }

    let mut omega = [0.0; 6];
    let mut confined = [false; 6];
    for dof in 0..6 {
        let lambda = eig.eigenvalues[mode_of[dof]];
        let scale = if dof < 3 { trans_scale } else { rot_scale };
        let flat = 1e-8 * scale;
        if lambda > flat {
            omega[dof] = lambda.sqrt();
            confined[dof] = true;
        } else if lambda < -flat {
            return Err(Error::Instability { dof: DOF_NAMES[dof] });
        }
    }
    if (p.params.r1 - p.params.r2).abs() <= 1e-12 * p.params.r1.max(p.params.r2) {
        omega[5] = 0.0;
        confined[5] = false;
    }
    Ok(TrapSpectrum {
        omega,
        confined,
        equilibrium: *eq,
    })
}

/// Depth of the π-periodic tweezer potential for rotations about the long
/// axis at the equilibrium of the other coordinates, in kelvin.
pub fn gamma_trap_depth(model: &OpticalModel, eq: &EquilibriumPoint) -> f64 {
    const SAMPLES: usize = 720;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..SAMPLES {
        let g = PI * i as f64 / SAMPLES as f64;
        let q = eq.q.rotate_body(Vector3::new(0.0, 0.0, g));
        let u = model.optical_potential(&SystemState::at_rest(eq.r, q)).tweezer;
        lo = lo.min(u);
        hi = hi.max(u);
    }
    (hi - lo) / K_B
}

/// `(ω₊, ω₋)` of the gyroscopically coupled α–β pair.
pub fn coupled_mode_frequencies(omega_alpha: f64, omega_beta: f64, omega_c: f64) -> (f64, f64) {
    let (a2, b2, c2) = (omega_alpha * omega_alpha, omega_beta * omega_beta, omega_c * omega_c);
    let s = a2 + b2 + c2;
    let q = (4.0 * b2 * c2 + (c2 + a2 - b2).powi(2)).sqrt();
    let plus2 = 0.5 * (s + q);
    if plus2 == 0.0 {
        return (0.0, 0.0);
    }
    // ω₊²ω₋² = ω_α²ω_β²; avoids cancellation in (S − Q)/2
    let minus2 = a2 * b2 / plus2;
    (plus2.sqrt(), minus2.sqrt())
}

/// Spin-coupling rate `ω_c = (I₃/I₁)·ω₃` for a body-axis spin rate `ω₃`.
pub fn spin_coupling(inertia: &Vector3<f64>, omega3: f64) -> f64 {
    inertia.z / inertia.x * omega3
}

/// Stationary position statistics of the harmonic model at temperature `t`:
/// variance `k_BT/K_ii` per coordinate, `None` where not confined.
pub fn thermal_variances(spectrum: &TrapSpectrum, model: &OpticalModel, t: f64) -> [Option<f64>; 6] {
    let m = mass_metric(model);
    let mut out = [None; 6];
    for i in 0..6 {
        if spectrum.confined[i] {
            out[i] = Some(K_B * t / (m[i] * spectrum.omega[i] * spectrum.omega[i]));
        }
    }
    out
}
