//! Simulation and analysis of an anisotropic nanoparticle levitated in an
//! elliptically polarized optical tweezer and cooled by coherent scattering
//! into two orthogonally polarized cavity modes.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod inference;
pub mod linearized;
pub mod optics;
pub mod quad;
pub mod rigidbody;
pub mod sweep;

pub use config::Config;
pub use error::{Error, Result};
