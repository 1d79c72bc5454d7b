//! Detector models, spectral estimation and temperature calibration.

pub mod calibration;
pub mod detector;
pub mod heterodyne;
pub mod spectral;

pub use calibration::{default_readouts, effective_temperature, CalibrationRecord, Channel, Dof, Readout};
pub use detector::{detector_signals, DetectorParams};
pub use heterodyne::heterodyne_timeseries;
pub use spectral::{band_area, spectrogram, welch_psd, NoiseFloor, SpectralEstimate, Spectrogram, Window};
