//! Welch power spectral densities, spectrograms and band integration.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    /// Periodic Hann window.
    Hann,
}

impl Window {
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        })
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            _ => Err(Error::InvalidInput(format!("unknown window `{s}`"))),
        }
    }
}

/// One-sided PSD on a uniform frequency grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub window: Window,
    pub segment_len: usize,
    pub overlap: f64,
    pub averages: usize,
    pub fs: f64,
}

impl SpectralEstimate {
    pub fn resolution(&self) -> f64 {
        self.fs / self.segment_len as f64
    }

    /// Frequency of the largest PSD value inside `[f_lo, f_hi]`.
    pub fn peak_frequency(&self, f_lo: f64, f_hi: f64) -> Option<f64> {
        self.freqs
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, _)| *f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Centre time of each column (s).
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `psd[column][frequency]`
    pub psd: Vec<Vec<f64>>,
    pub window: Window,
    pub segment_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn column(&self, i: usize) -> SpectralEstimate {
        SpectralEstimate {
            freqs: self.freqs.clone(),
            psd: self.psd[i].clone(),
            window: self.window,
            segment_len: self.segment_len,
            overlap: 0.0,
            averages: 1,
            fs: self.freqs.get(1).map_or(0.0, |df| df * self.segment_len as f64),
        }
    }
}

struct Periodogram {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    scale: f64,
    buf: Vec<Complex64>,
}

impl Periodogram {
    fn new(n: usize, window: Window, fs: f64) -> Self {
        let w = window.coefficients(n);
        let power: f64 = w.iter().map(|x| x * x).sum();
        Self {
            fft: FftPlanner::new().plan_fft_forward(n),
            window: w,
            scale: 1.0 / (fs * power),
            buf: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Adds the one-sided periodogram of `seg − mean` into `acc`.
    fn accumulate(&mut self, seg: &[f64], mean: f64, acc: &mut [f64]) {
        let n = seg.len();
        for ((b, x), w) in self.buf.iter_mut().zip(seg).zip(&self.window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        self.fft.process(&mut self.buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let mut p = self.buf[k].norm_sqr() * self.scale;
            if k != 0 && !(n % 2 == 0 && k == n / 2) {
                p *= 2.0;
            }
            *a += p;
        }
    }
}

fn check_inputs(series: &[f64], fs: f64, segment_len: usize) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidInput(format!("sample rate must be positive, got {fs}")));
    }
    if segment_len == 0 || segment_len > series.len() {
        return Err(Error::InvalidInput(format!(
            "segment length {segment_len} must be in 1..={}",
            series.len()
        )));
    }
    Ok(())
}

fn grid(n: usize, fs: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| k as f64 * fs / n as f64).collect()
}

/// Welch estimate: segments of `segment_len` samples advanced by
/// `segment_len − round(overlap·segment_len)`, global mean removed,
/// normalized by the window power.
pub fn welch_psd(series: &[f64], fs: f64, segment_len: usize, overlap: f64, window: Window) -> Result<SpectralEstimate> {
    check_inputs(series, fs, segment_len)?;
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::InvalidInput(format!("overlap must be in [0, 0.9], got {overlap}")));
    }
    let hop = (segment_len - (overlap * segment_len as f64).round() as usize).max(1);
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut pg = Periodogram::new(segment_len, window, fs);
    let mut acc = vec![0.0; segment_len / 2 + 1];
    let mut averages = 0;
    let mut start = 0;
    while start + segment_len <= series.len() {
        pg.accumulate(&series[start..start + segment_len], mean, &mut acc);
        averages += 1;
        start += hop;
    }
    for a in acc.iter_mut() {
        *a /= averages as f64;
    }
    Ok(SpectralEstimate {
        freqs: grid(segment_len, fs),
        psd: acc,
        window,
        segment_len,
        overlap,
        averages,
        fs,
    })
}

/// Short-time periodograms of `segment_len` samples every `hop` samples.
pub fn spectrogram(series: &[f64], fs: f64, segment_len: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    check_inputs(series, fs, segment_len)?;
    if hop == 0 {
        return Err(Error::InvalidInput("spectrogram hop must be positive".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut pg = Periodogram::new(segment_len, window, fs);
    let mut times = Vec::new();
    let mut columns = Vec::new();
    let mut start = 0;
    while start + segment_len <= series.len() {
        let mut col = vec![0.0; segment_len / 2 + 1];
        pg.accumulate(&series[start..start + segment_len], mean, &mut col);
        times.push((start as f64 + 0.5 * segment_len as f64) / fs);
        columns.push(col);
        start += hop;
    }
    Ok(Spectrogram {
        times,
        freqs: grid(segment_len, fs),
        psd: columns,
        window,
        segment_len,
        hop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloor {
    None,
    /// Median PSD of the two flanking bands, each `width` Hz wide.
    FlankingMedian { width: f64 },
}

/// Trapezoidal integral of the PSD over `[f_lo, f_hi]`, optionally minus a
/// flat floor estimated from the neighbouring bands.
pub fn band_area(est: &SpectralEstimate, f_lo: f64, f_hi: f64, floor: NoiseFloor) -> Result<f64> {
    if !(f_lo < f_hi) {
        return Err(Error::InvalidInput(format!("inverted band [{f_lo}, {f_hi}]")));
    }
    let f_max = *est.freqs.last().unwrap_or(&0.0);
    if f_lo < 0.0 || f_hi > f_max + 1e-9 * f_max.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "band [{f_lo}, {f_hi}] outside the grid [0, {f_max}]"
        )));
    }
    let idx: Vec<usize> = (0..est.freqs.len())
        .filter(|&i| est.freqs[i] >= f_lo && est.freqs[i] <= f_hi)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "band [{f_lo}, {f_hi}] narrower than the resolution {}",
            est.resolution()
        )));
    }
    let mut area = 0.0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        area += 0.5 * (est.psd[i] + est.psd[j]) * (est.freqs[j] - est.freqs[i]);
    }
    if let NoiseFloor::FlankingMedian { width } = floor {
        let mut flank: Vec<f64> = est
            .freqs
            .iter()
            .zip(&est.psd)
            .filter(|(f, _)| (**f >= f_lo - width && **f < f_lo) || (**f > f_hi && **f <= f_hi + width))
            .map(|(_, p)| *p)
            .collect();
        if flank.is_empty() {
            return Err(Error::InvalidInput("no flanking bins for noise-floor estimate".into()));
        }
        flank.sort_by(f64::total_cmp);
        let m = flank.len();
        let median = if m % 2 == 1 {
            flank[m / 2]
        } else {
            0.5 * (flank[m / 2 - 1] + flank[m / 2])
        };
        let span = est.freqs[*idx.last().unwrap()] - est.freqs[idx[0]];
        area -= median * span;
    }
    Ok(area)
}

pub fn write_psd_csv(est: &SpectralEstimate, path: &Path, provenance: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!(
        "# window = {}\n# segment_len = {}\n# overlap = {}\n# averages = {}\n# fs_hz = {:e}\n",
        est.window, est.segment_len, est.overlap, est.averages, est.fs
    ));
    for (k, v) in provenance {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str("freq_hz,psd\n");
    for (f, p) in est.freqs.iter().zip(&est.psd) {
        text.push_str(&format!("{f:e},{p:e}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// First row: column centre times; first column: frequencies. Gzip when the
/// path ends in `.gz`.
pub fn write_spectrogram_csv(sg: &Spectrogram, path: &Path, provenance: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!(
        "# window = {}\n# segment_len = {}\n# hop = {}\n",
        sg.window, sg.segment_len, sg.hop
    ));
    for (k, v) in provenance {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str("freq_hz\\time_s");
    for t in &sg.times {
        text.push_str(&format!(",{t:e}"));
    }
    text.push('\n');
    for (i, f) in sg.freqs.iter().enumerate() {
        text.push_str(&format!("{f:e}"));
        for col in &sg.psd {
            text.push_str(&format!(",{:e}", col[i]));
        }
        text.push('\n');
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(text.as_bytes()).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut f = file;
        f.write_all(text.as_bytes())
    };
    res.map_err(|e| Error::io(path, e))
}
