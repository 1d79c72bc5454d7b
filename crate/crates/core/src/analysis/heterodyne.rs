//! Balanced heterodyne of a cavity amplitude against a shifted local oscillator.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `s(t) = 2·Re[a(t)·e^{−i2πf_LO t}]` sampled at `fs`, mean removed.
/// `f_max` is the highest mechanical frequency of interest; the upper
/// sideband must stay below Nyquist.
pub fn heterodyne_timeseries(a: &[Complex64], f_lo: f64, fs: f64, f_max: f64) -> Result<Vec<f64>> {
    if !(fs > 2.0 * (f_lo + f_max)) {
        return Err(Error::Aliasing {
            fs,
            f_max: f_lo + f_max,
        });
    }
    let w = 2.0 * PI * f_lo / fs;
    let mut s: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(n, z)| 2.0 * (z * Complex64::from_polar(1.0, -w * n as f64)).re)
        .collect();
    if !s.is_empty() {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        for v in s.iter_mut() {
            *v -= mean;
        }
    }
    Ok(s)
}
