use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::trace::{TraceRecord, NCOLS};
use super::{Dynamics, SystemState};
use crate::analysis::detector::{detector_signals, DetectorParams};
use crate::config::Config;
use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::linearized::{find_equilibrium, mass_metric, trap_frequencies};
use crate::rigidbody::unwrap_next;

/// Largest initial rotation drawn for a thermal start (rad).
const MAX_INITIAL_ROTATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// At the equilibrium with zero velocities and stationary cavity fields.
    Rest,
    /// Harmonic thermal sample at the gas temperature around the equilibrium.
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams {
    pub dt: f64,
    pub duration: f64,
    pub fs: f64,
    /// Time integrated before recording starts.
    pub settle: f64,
    pub seed: u64,
    pub initial: InitialCondition,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            dt: 1e-8,
            duration: 1e-3,
            fs: 5e6,
            settle: 0.0,
            seed: 0,
            initial: InitialCondition::Thermal,
        }
    }
}

impl SimulationParams {
    /// Integration steps per output sample.
    pub fn block_len(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidParameter(format!("fs must be positive, got {}", self.fs)));
        }
        if !(self.duration >= 0.0 && self.settle >= 0.0) {
            return Err(Error::InvalidParameter("duration and settle time must be non-negative".into()));
        }
        let ratio = 1.0 / (self.fs * self.dt);
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * n {
            return Err(Error::InvalidParameter(format!(
                "1/(fs·dt) = {ratio} must be a positive integer"
            )));
        }
        Ok(n as usize)
    }
}

/// Starting state drawn with `rng` (unused for [`InitialCondition::Rest`]).
pub fn initial_state<R: Rng + ?Sized>(dynamics: &Dynamics, kind: InitialCondition, rng: &mut R) -> Result<SystemState> {
    let model = dynamics.model();
    let eq = find_equilibrium(model)?;
    if kind == InitialCondition::Rest {
        return Ok(eq.state());
    }
    let spectrum = trap_frequencies(model)?;
    let kt = K_B * dynamics.environment().temperature;
    let m = mass_metric(model);
    let mut x = [0.0; 6];
    for (i, xi) in x.iter_mut().enumerate() {
        if spectrum.confined[i] {
            let sd = (kt / (m[i] * spectrum.omega[i] * spectrum.omega[i])).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            *xi = z * sd;
            if i >= 3 {
                *xi = xi.clamp(-MAX_INITIAL_ROTATION, MAX_INITIAL_ROTATION);
            }
        }
    }
    let beam = model.setup.tweezer.beam_frame();
    let r = eq.r + beam * Vector3::new(x[0], x[1], x[2]);
    let q = eq.q.rotate_body(Vector3::new(x[3], x[4], x[5]));
    let mut draw = |var: f64| {
        let z: f64 = rng.sample(StandardNormal);
        z * var.sqrt()
    };
    let p = Vector3::new(draw(m[0] * kt), draw(m[1] * kt), draw(m[2] * kt));
    let l = Vector3::new(draw(m[3] * kt), draw(m[4] * kt), draw(m[5] * kt));
    let (a, b) = model.steady_cavity(&r, &q);
    Ok(SystemState {
        t: 0.0,
        r,
        p,
        q,
        l,
        a,
        b,
    })
}

/// Full run from a configuration: builds the model, draws the initial state
/// and records the decimated trace. The RNG is ChaCha8 seeded from the
/// configured 64-bit seed.
pub fn simulate(config: &Config) -> Result<TraceRecord> {
    let dynamics = config.dynamics()?;
    let params = config.simulation;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start = initial_state(&dynamics, params.initial, &mut rng)?;
    let mut trace = simulate_with(&dynamics, &params, &config.detection.detectors, start, &mut rng)?;
    trace.provenance.push(("config_hash".into(), config.hash()));
    Ok(trace)
}

/// Integrates from `start`, discarding `params.settle`, then records
/// block averages of `1/(fs·dt)` steps.
pub fn simulate_with<R: Rng + ?Sized>(
    dynamics: &Dynamics,
    params: &SimulationParams,
    detection: &DetectorParams,
    start: SystemState,
    rng: &mut R,
) -> Result<TraceRecord> {
    let block = params.block_len()?;
    let mut trace = TraceRecord::new(params.fs);
    trace.provenance.push(("seed".into(), params.seed.to_string()));
    trace.provenance.push(("dt_s".into(), format!("{:e}", params.dt)));
    let settle_steps = (params.settle / params.dt).round() as u64;
    let samples = (params.duration * params.fs + 1e-9).floor() as usize;
    trace.rows.reserve(samples);

    let mut s = start;
    for _ in 0..settle_steps {
        s = dynamics.step(&s, params.dt, rng)?;
    }

    let model = dynamics.model();
    let tweezer = &model.setup.tweezer;
    let inertia = model.particle.inertia;
    let (first, _) = s.q.to_euler();
    let (mut alpha, mut gamma) = (first.alpha, first.gamma);
    let inv = 1.0 / block as f64;
    for k in 0..samples {
        let mut acc = [0.0; NCOLS];
        for _ in 0..block {
            s = dynamics.step(&s, params.dt, rng)?;
            let (mut ang, _) = s.q.to_euler();
            alpha = unwrap_next(alpha, ang.alpha);
            gamma = unwrap_next(gamma, ang.gamma);
            ang.alpha = alpha;
            ang.gamma = gamma;
            let w = s.omega_body(&inertia);
            let det = detector_signals(&s.r, &ang, tweezer, detection);
            let row = [
                0.0, s.r.x, s.r.y, s.r.z, ang.alpha, ang.beta, ang.gamma, w.x, w.y, w.z, s.a.re, s.a.im, s.b.re,
                s.b.im, det[0], det[1], det[2],
            ];
            for i in 1..NCOLS {
                acc[i] += row[i];
            }
        }
        for v in acc.iter_mut() {
            *v *= inv;
        }
        acc[0] = k as f64 / params.fs;
        trace.rows.push(acc);
    }
    Ok(trace)
}
