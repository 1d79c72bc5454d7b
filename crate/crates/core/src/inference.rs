//! Ellipsoid geometry from measured trap frequencies.
//!
//! Bounded Levenberg–Marquardt on the uncertainty-weighted residuals of the
//! five confined frequencies (x, y, z, α, β), with the harmonic spectrum of
//! [`crate::linearized`] as the forward model and several starting points
//! fitted in parallel. Radii are canonicalized to `R1 ≤ R2 ≤ R3` before every
//! model evaluation.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Config, FreeParameter};
use crate::dynamics::damping_coefficients;
use crate::error::{Error, Result};
use crate::linearized::trap_frequencies;

/// Fewest starting points used by [`fit_geometry`].
pub const MIN_STARTS: usize = 5;
/// Relative forward-difference step of the Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-4;
/// Singular values below this fraction of the largest mark a flat direction.
pub const DEGENERACY_RCOND: f64 = 1e-6;

const MAX_ITERATIONS: usize = 200;
const MAX_LAMBDA: f64 = 1e12;
const START_SPREAD: f64 = 0.3;
const OBS_NAMES: [&str; 5] = ["x", "y", "z", "alpha", "beta"];

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    /// Fixed parameters and the initial guess for the free ones.
    pub base: Config,
    pub observed_hz: [f64; 5],
    pub sigma_hz: [f64; 5],
    pub free: Vec<FreeParameter>,
    /// Bounds in configuration units (nm for radii).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub starts: usize,
    /// Seed for the scattered starting points.
    pub seed: u64,
}

fn get(config: &Config, p: FreeParameter) -> f64 {
    match p {
        FreeParameter::R1 => config.particle.r1_nm,
        FreeParameter::R2 => config.particle.r2_nm,
        FreeParameter::R3 => config.particle.r3_nm,
        FreeParameter::EpsR => config.particle.eps_r,
    }
}

fn set(config: &mut Config, p: FreeParameter, v: f64) {
    match p {
        FreeParameter::R1 => config.particle.r1_nm = v,
        FreeParameter::R2 => config.particle.r2_nm = v,
        FreeParameter::R3 => config.particle.r3_nm = v,
        FreeParameter::EpsR => config.particle.eps_r = v,
    }
}

fn canonicalize(config: &mut Config) {
    let p = &mut config.particle;
    let mut r = [p.r1_nm, p.r2_nm, p.r3_nm];
    r.sort_by(f64::total_cmp);
    [p.r1_nm, p.r2_nm, p.r3_nm] = r;
}

impl FitProblem {
    pub fn from_config(config: &Config) -> Result<Self> {
        let f = &config.fit;
        let (lower, upper) = f
            .free
            .iter()
            .map(|p| match p {
                FreeParameter::EpsR => (f.eps_min, f.eps_max),
                _ => (f.r_min_nm, f.r_max_nm),
            })
            .unzip();
        let problem = Self {
            base: config.clone(),
            observed_hz: f.f_hz,
            sigma_hz: f.sigma_hz,
            free: f.free.clone(),
            lower,
            upper,
            starts: f.starts,
            seed: config.simulation.seed,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.free.len();
        if n == 0 || n > self.observed_hz.len() {
            return Err(Error::InvalidParameter(format!(
                "{n} free parameters for {} observations",
                self.observed_hz.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidParameter("one bound pair per free parameter required".into()));
        }
        for (i, p) in self.free.iter().enumerate() {
            if self.free[..i].contains(p) {
                return Err(Error::InvalidParameter(format!("free parameter {} listed twice", p.name())));
            }
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("bad bounds [{lo}, {hi}] for {}", p.name())));
            }
            if *p != FreeParameter::EpsR && (lo < 10.0 || hi > 500.0) {
                return Err(Error::InvalidParameter("radius bounds must lie within 10..500 nm".into()));
            }
            let v = get(&self.base, *p);
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "initial {} = {v} outside [{lo}, {hi}]",
                    p.name()
                )));
            }
        }
        if self.observed_hz.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::InvalidParameter("observed frequencies must be finite".into()));
        }
        if self.sigma_hz.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("uncertainties must be positive".into()));
        }
        Ok(())
    }

    pub fn initial(&self) -> Vec<f64> {
        self.free.iter().map(|p| get(&self.base, *p)).collect()
    }

    /// Configuration with the free parameters set to `params`, radii sorted.
    pub fn config_at(&self, params: &[f64]) -> Config {
        let mut c = self.base.clone();
        for (p, v) in self.free.iter().zip(params) {
            set(&mut c, *p, *v);
        }
        canonicalize(&mut c);
        c
    }

    /// Model frequencies (Hz) for x, y, z, α, β; zero where unconfined.
    pub fn forward(&self, params: &[f64]) -> Result<[f64; 5]> {
        let spectrum = trap_frequencies(&self.config_at(params).model()?)?;
        let f = spectrum.frequencies_hz();
        Ok([f[0], f[1], f[2], f[3], f[4]])
    }

    fn residuals(&self, params: &[f64]) -> Result<DVector<f64>> {
        let f = self.forward(params)?;
        Ok(DVector::from_fn(5, |i, _| (f[i] - self.observed_hz[i]) / self.sigma_hz[i]))
    }

    /// Weighted Jacobian by forward differences, stepping inward at the
    /// upper bound.
    fn jacobian(&self, params: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = params.len();
        let mut j = DMatrix::zeros(5, n);
        for k in 0..n {
            let mut h = JACOBIAN_STEP * params[k].abs().max(1e-3);
            if params[k] + h > self.upper[k] {
                h = -h;
            }
            let mut p = params.to_vec();
            p[k] += h;
            let r = self.residuals(&p)?;
            j.set_column(k, &((r - r0) / h));
        }
        Ok(j)
    }

    fn project(&self, params: &mut [f64]) {
        for (k, v) in params.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }

    fn start_points(&self) -> Vec<Vec<f64>> {
        let n = self.starts.max(MIN_STARTS);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let x0 = self.initial();
        let mut out = vec![x0.clone()];
        for _ in 1..n {
            let mut p: Vec<f64> = x0
                .iter()
                .map(|v| v * (rng.random_range(-START_SPREAD..START_SPREAD) as f64).exp())
                .collect();
            self.project(&mut p);
            out.push(p);
        }
        out
    }
}

/// Direction in parameter space along which the residuals barely change.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyWarning {
    /// Singular value relative to the largest one.
    pub relative_singular_value: f64,
    pub direction: Vec<(FreeParameter, f64)>,
}

impl fmt::Display for DegeneracyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "degenerate direction (s/s_max = {:.1e}):", self.relative_singular_value)?;
        for (p, v) in &self.direction {
            write!(f, " {:+.3}·{}", v, p.name())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub free: Vec<FreeParameter>,
    /// Best-fit values in configuration units, radii canonicalized.
    pub params: Vec<f64>,
    /// `(JᵀJ)⁺` of the weighted residuals.
    pub covariance: DMatrix<f64>,
    pub model_hz: [f64; 5],
    /// `(model − observed)/σ` per observable.
    pub residuals: [f64; 5],
    pub residual_norm: f64,
    /// Residual norm at the configured initial guess.
    pub initial_residual_norm: f64,
    /// Residual norms of the accepted iterations of the winning start.
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub starts: usize,
    pub starts_converged: usize,
    pub warnings: Vec<DegeneracyWarning>,
    /// `γ_y/γ_x` and `γ_z/γ_x` of the configured damping model.
    pub damping_ratios: [f64; 2],
}

impl FitResult {
    pub fn uncertainties(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }

    /// Norm of the projection of the normalized `direction` onto the span of
    /// the flagged flat directions; 1 when it lies entirely inside.
    pub fn degenerate_overlap(&self, direction: &[(FreeParameter, f64)]) -> f64 {
        let n = self.free.len();
        let mut d = DVector::zeros(n);
        for (p, v) in direction {
            if let Some(i) = self.free.iter().position(|q| q == p) {
                d[i] = *v;
            }
        }
        let norm = d.norm();
        if norm == 0.0 {
            return 0.0;
        }
        d /= norm;
        self.warnings
            .iter()
            .map(|w| {
                let dot: f64 = w
                    .direction
                    .iter()
                    .map(|(p, v)| self.free.iter().position(|q| q == p).map_or(0.0, |i| d[i] * v))
                    .sum();
                dot * dot
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn value(&self, p: FreeParameter) -> Option<f64> {
        self.free.iter().position(|q| *q == p).map(|i| self.params[i])
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "converged: {} ({} of {} starts, {} iterations)\n",
            self.converged, self.starts_converged, self.starts, self.iterations
        ));
        for ((p, v), e) in self.free.iter().zip(&self.params).zip(self.uncertainties()) {
            let unit = if *p == FreeParameter::EpsR { "" } else { " nm" };
            s.push_str(&format!("{:>6} = {v:.4} ± {e:.4}{unit}\n", p.name()));
        }
        for i in 0..5 {
            s.push_str(&format!(
                "{:>6}: model {:.1} Hz, residual {:+.3} σ\n",
                OBS_NAMES[i], self.model_hz[i], self.residuals[i]
            ));
        }
        s.push_str(&format!(
            "residual norm {:.4e} (initial {:.4e})\n",
            self.residual_norm, self.initial_residual_norm
        ));
        s.push_str(&format!(
            "damping ratios (report only): γy/γx = {:.4}, γz/γx = {:.4}\n",
            self.damping_ratios[0], self.damping_ratios[1]
        ));
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

struct StartOutcome {
    params: Vec<f64>,
    cost: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn cost(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

fn lm_from(problem: &FitProblem, start: Vec<f64>) -> Result<StartOutcome> {
    let n = start.len();
    let mut p = start;
    let mut r = problem.residuals(&p)?;
    let mut c = cost(&r);
    let mut history = vec![c.sqrt()];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = problem.jacobian(&p, &r)?;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-12 * (1.0 + c) {
            converged = true;
            break;
        }
        let mut a = jtj.clone();
        for i in 0..n {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let step = a.lu().solve(&(-&g));
        let Some(step) = step else {
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                break;
            }
            continue;
        };
        let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
        problem.project(&mut trial);
        let moved = trial.iter().zip(&p).map(|(t, x)| (t - x).abs() / x.abs().max(1e-3)).fold(0.0, f64::max);
        let trial_r = problem.residuals(&trial).ok();
        match trial_r {
            Some(tr) if cost(&tr) < c => {
                let tc = cost(&tr);
                let rel = (c - tc) / c.max(f64::MIN_POSITIVE);
                p = trial;
                r = tr;
                c = tc;
                history.push(c.sqrt());
                lambda = (lambda / 3.0).max(1e-12);
                if rel < 1e-12 || moved < 1e-12 || c < 1e-24 {
                    converged = true;
                    break;
                }
                jac = problem.jacobian(&p, &r)?;
            }
            _ => {
                lambda *= 4.0;
                if lambda > MAX_LAMBDA || moved < 1e-12 {
                    // no descent left at the resolution of the finite differences
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok(StartOutcome {
        params: p,
        cost: c,
        history,
        iterations,
        converged,
    })
}

fn degeneracies(free: &[FreeParameter], jac: &DMatrix<f64>) -> Vec<DegeneracyWarning> {
    let n = free.len();
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let s_max = svd.singular_values.max();
    let mut out = Vec::new();
    for i in 0..n {
        let s = svd.singular_values[i];
        let rel = if s_max > 0.0 { s / s_max } else { 0.0 };
        if rel < DEGENERACY_RCOND {
            let direction = free.iter().enumerate().map(|(k, p)| (*p, v_t[(i, k)])).collect();
            out.push(DegeneracyWarning {
                relative_singular_value: rel,
                direction,
            });
        }
    }
    out
}

/// Maps best-fit values back onto the free labels after sorting the radii.
fn canonical_params(problem: &FitProblem, params: &[f64]) -> Vec<f64> {
    let c = problem.config_at(params);
    problem.free.iter().map(|p| get(&c, *p)).collect()
}

pub fn fit_geometry(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let initial_residual_norm = problem.residuals(&problem.initial())?.norm();
    let starts = problem.start_points();
    let outcomes: Vec<Result<StartOutcome>> = starts.into_par_iter().map(|s| lm_from(problem, s)).collect();
    let n_starts = outcomes.len();

    let outcomes: Vec<StartOutcome> = outcomes.into_iter().filter_map(Result::ok).collect();
    let best_any = outcomes.iter().map(|o| o.cost.sqrt()).fold(f64::INFINITY, f64::min);
    let starts_converged = outcomes.iter().filter(|o| o.converged).count();
    let Some(best) = outcomes
        .into_iter()
        .filter(|o| o.converged)
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
    else {
        return Err(Error::FitFailed { best_residual: best_any });
    };

    let params = canonical_params(problem, &best.params);
    let r = problem.residuals(&params)?;
    let jac = problem.jacobian(&params, &r)?;
    let jtj = jac.transpose() * &jac;
    let covariance = jtj
        .clone()
        .pseudo_inverse(DEGENERACY_RCOND * DEGENERACY_RCOND * jtj.amax())
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let model_hz = problem.forward(&params)?;
    let residuals = [r[0], r[1], r[2], r[3], r[4]];
    let gamma = damping_coefficients(&problem.base.environment()?)?;

    Ok(FitResult {
        free: problem.free.clone(),
        warnings: degeneracies(&problem.free, &jac),
        params,
        covariance,
        model_hz,
        residuals,
        residual_norm: r.norm(),
        initial_residual_norm,
        history: best.history,
        converged: best.converged,
        iterations: best.iterations,
        starts: n_starts,
        starts_converged,
        damping_ratios: [gamma[1] / gamma[0], gamma[2] / gamma[0]],
    })
}

/// One row per free parameter: `parameter,value,sigma`, then the per-observable
/// residuals as `obs_<name>,model_hz,residual_sigma`.
pub fn write_fit_csv(result: &FitResult, path: &Path, provenance: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in provenance {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!("# converged = {}\n", result.converged));
    for w in &result.warnings {
        s.push_str(&format!("# warning: {w}\n"));
    }
    s.push_str("name,value,sigma\n");
    for ((p, v), e) in result.free.iter().zip(&result.params).zip(result.uncertainties()) {
        s.push_str(&format!("{},{v:e},{e:e}\n", p.name()));
    }
    for i in 0..5 {
        s.push_str(&format!("obs_{},{:e},{:e}\n", OBS_NAMES[i], result.model_hz[i], result.residuals[i]));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
