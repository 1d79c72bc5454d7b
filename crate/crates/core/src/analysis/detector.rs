//! Lowest-order models of the three balanced detectors.
//!
//! Positions enter in tweezer beam coordinates normalized by the waists:
//! `u` along the polarization major axis, `v` along the minor axis, `w` along
//! the propagation direction.
//!
//! - `split1 = g₁·u/w⊥ + c₁z·w/w∥`
//! - `split2 = g₂·v/w∥ + c₂β·(β − π/2)`
//! - `pbs    = c₃α·(α − θ) + leak·(u/w⊥ + v/w∥)`

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use crate::optics::TweezerParams;
use crate::rigidbody::EulerAngles;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub split1_gain: f64,
    pub split1_z: f64,
    pub split2_gain: f64,
    pub split2_beta: f64,
    pub pbs_alpha: f64,
    pub pbs_leak: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            split1_gain: 1.0,
            split1_z: 0.3,
            split2_gain: 1.0,
            split2_beta: 0.05,
            pbs_alpha: 1.0,
            pbs_leak: 0.05,
        }
    }
}

impl DetectorParams {
    pub fn zero() -> Self {
        Self {
            split1_gain: 0.0,
            split1_z: 0.0,
            split2_gain: 0.0,
            split2_beta: 0.0,
            pbs_alpha: 0.0,
            pbs_leak: 0.0,
        }
    }
}

/// Returns `[split1, split2, pbs]`.
pub fn detector_signals(
    r: &Vector3<f64>,
    angles: &EulerAngles,
    tweezer: &TweezerParams,
    coeffs: &DetectorParams,
) -> [f64; 3] {
    let c = tweezer.beam_frame().transpose() * r;
    let u = c.x / tweezer.w_perp;
    let v = c.y / tweezer.w_par;
    let w = c.z / tweezer.w_par;
    [
        coeffs.split1_gain * u + coeffs.split1_z * w,
        coeffs.split2_gain * v + coeffs.split2_beta * (angles.beta - FRAC_PI_2),
        coeffs.pbs_alpha * (angles.alpha - tweezer.theta) + coeffs.pbs_leak * (u + v),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweezer() -> TweezerParams {
        TweezerParams {
            wavelength: 1064e-9,
            power: 0.235,
            w_par: 831e-9,
            w_perp: 771e-9,
            psi: 0.25,
            theta: 0.4,
            tilt: 0.0,
        }
    }

    fn aligned() -> EulerAngles {
        EulerAngles::new(0.4, FRAC_PI_2, 0.0)
    }

    #[test]
    fn minor_axis_displacement_only_moves_split2() {
        let tw = tweezer();
        let d = DetectorParams {
            pbs_leak: 0.0,
            ..Default::default()
        };
        let perp = tw.beam_frame().column(1).into_owned();
        let s0 = detector_signals(&Vector3::zeros(), &aligned(), &tw, &d);
        let s1 = detector_signals(&(perp * 10e-9), &aligned(), &tw, &d);
        let s2 = detector_signals(&(perp * 20e-9), &aligned(), &tw, &d);
        assert!((s1[0] - s0[0]).abs() < 1e-15);
        assert!((s2[1] - 2.0 * s1[1]).abs() < 1e-15);
        assert!(s1[1] > 0.0);
    }

    #[test]
    fn alpha_excursion_reaches_pbs_only() {
        let tw = tweezer();
        let d = DetectorParams::default();
        let mut ang = aligned();
        ang.alpha += 1e-3;
        let s = detector_signals(&Vector3::zeros(), &ang, &tw, &d);
        assert_eq!(s[0], 0.0);
        assert!((s[2] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let s = detector_signals(
            &Vector3::new(1e-8, -2e-8, 3e-8),
            &EulerAngles::new(0.1, 1.2, 0.3),
            &tweezer(),
            &DetectorParams::zero(),
        );
        assert_eq!(s, [0.0; 3]);
    }
}
