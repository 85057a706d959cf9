//! Correlation evidence between microphone pairs.
//!
//! Frames are zero-padded to twice their length before any transform used
//! for correlation, so the lag vectors are linear (not circular)
//! correlations over lags `-(L-1) ..= L-1`.
//!
//! Sign convention: `gcc_phat(X_l, X_m)` keeps `X_l * conj(X_m)`, so a pair
//! whose TDOA is `tau_lm` peaks at lag `tau_lm * f_s`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MicArray;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized forward DFT in place.
pub fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Inverse DFT in place, scaled by `1/N` so it inverts [`fft_forward`].
pub fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= s);
}

/// Signed frequency of DFT bin `k` of an `n`-point transform.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k <= n_f / 2.0 {
        k * sample_rate / n_f
    } else {
        (k - n_f) * sample_rate / n_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann if len == 1 => vec![1.0],
            Window::Hann => (0..len)
                .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (len - 1) as f64).cos()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub frame_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: Window,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            frame_len: 4096,
            hop: 4096,
            window: Window::Rectangular,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || !self.frame_len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "frame length {} is not a power of two",
                self.frame_len
            )));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::invalid(format!(
                "hop {} must be in 1..={}",
                self.hop, self.frame_len
            )));
        }
        Ok(())
    }

    /// Number of complete frames in a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }
}

/// Frame `index`: samples `[index * hop, index * hop + L)`, windowed.
pub fn frame_signal(x: &[f64], cfg: &FrameConfig, index: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let start = index * cfg.hop;
    let end = start + cfg.frame_len;
    if end > x.len() {
        return Err(Error::invalid(format!(
            "frame {index} needs samples up to {end}, signal has {}",
            x.len()
        )));
    }
    let w = cfg.window.coefficients(cfg.frame_len);
    Ok(x[start..end].iter().zip(w).map(|(s, w)| s * w).collect())
}

/// Frame `index` of every channel.
pub fn frame_channels(channels: &[Vec<f64>], cfg: &FrameConfig, index: usize) -> Result<Vec<Vec<f64>>> {
    channels.iter().map(|x| frame_signal(x, cfg, index)).collect()
}

/// Frequency band `[lo, hi]` in Hz, applied to |f|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::invalid(format!("invalid band [{lo}, {hi}]")));
        }
        Ok(Band { lo, hi })
    }

    pub fn full(sample_rate: f64) -> Band {
        Band { lo: 0.0, hi: sample_rate / 2.0 }
    }

    pub fn contains(&self, f: f64) -> bool {
        let f = f.abs();
        f >= self.lo && f <= self.hi
    }

    /// Same band with its upper edge capped at `hi`.
    pub fn capped(&self, hi: f64) -> Band {
        Band { lo: self.lo, hi: self.hi.min(hi) }
    }
}

/// Default analysis band: `[0, min(f_s/2, c / (2 d_min))]`, the upper edge
/// being the spatial-aliasing limit of the closest microphone pair.
pub fn analysis_band(array: &MicArray) -> Band {
    let nyquist = array.sample_rate() / 2.0;
    let alias = array.speed_of_sound() / (2.0 * array.min_spacing());
    Band { lo: 0.0, hi: nyquist.min(alias) }
}

/// How the analysis band is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum BandPolicy {
    /// [`analysis_band`].
    #[default]
    AntiAliasing,
    /// `[0, f_s/2]`.
    Full,
    /// `[0, hi]`; smooths the map for coarse searches.
    LowPass { hi: f64 },
    Explicit { lo: f64, hi: f64 },
}

impl BandPolicy {
    pub fn resolve(&self, array: &MicArray) -> Result<Band> {
        let nyquist = array.sample_rate() / 2.0;
        let band = match *self {
            BandPolicy::AntiAliasing => analysis_band(array),
            BandPolicy::Full => Band::full(array.sample_rate()),
            BandPolicy::LowPass { hi } => Band::new(0.0, hi)?,
            BandPolicy::Explicit { lo, hi } => Band::new(lo, hi)?,
        };
        if band.hi > nyquist * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "band edge {} Hz exceeds Nyquist {nyquist} Hz",
                band.hi
            )));
        }
        Ok(band)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub bins: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SpectralFrame {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        bin_frequency(k, self.bins.len(), self.sample_rate)
    }

    /// The analysis frequencies, one per bin, in bin order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.frequency(k)).collect()
    }
}

/// Forward DFT of a frame.
pub fn spectrum(frame: &[f64], sample_rate: f64) -> SpectralFrame {
    let mut bins: Vec<Complex64> = frame.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut bins);
    SpectralFrame { bins, sample_rate }
}

/// DFT of the frame zero-padded to twice its length.
pub fn padded_spectrum(frame: &[f64], sample_rate: f64) -> SpectralFrame {
    let mut padded = frame.to_vec();
    padded.resize(frame.len() * 2, 0.0);
    spectrum(&padded, sample_rate)
}

/// Real part of the inverse DFT.
pub fn inverse_spectrum(s: &SpectralFrame) -> Vec<f64> {
    let mut buf = s.bins.clone();
    fft_inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

/// Stability floor of the PHAT_beta denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Floor {
    Absolute(f64),
    /// Multiple of the mean in-band `|X_l X_m*|^beta`.
    Relative(f64),
}

impl Default for Floor {
    fn default() -> Self {
        Floor::Relative(1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GccConfig {
    pub beta: f64,
    pub gamma: Floor,
    pub band: Band,
}

impl GccConfig {
    /// Conventional PHAT (`beta = 1`) with the default relative floor.
    pub fn phat(band: Band) -> Self {
        GccConfig { beta: 1.0, gamma: Floor::default(), band }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta {} outside [0, 1]", self.beta)));
        }
        let g = match self.gamma {
            Floor::Absolute(g) | Floor::Relative(g) => g,
        };
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("gamma {g} must be non-negative")));
        }
        Band::new(self.band.lo, self.band.hi).map(|_| ())
    }
}

/// Weighted cross-spectrum of one pair over all DFT bins; bins outside the
/// band are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGcc {
    pub bins: Vec<Complex64>,
    pub sample_rate: f64,
    pub band: Band,
}

impl SpectralGcc {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bin spacing in Hz.
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.bins.len() as f64
    }

    /// Contiguous range of non-negative-frequency bins inside the band.
    ///
    /// The negative-frequency half mirrors it by conjugate symmetry, so
    /// steering sums only need these.
    pub fn steering_bins(&self) -> std::ops::Range<usize> {
        let n = self.bins.len();
        let df = self.bin_width();
        let lo = (self.band.lo / df - 1e-9).ceil().max(0.0) as usize;
        let hi = ((self.band.hi / df + 1e-9).floor() as usize).min(n / 2);
        if lo > hi {
            0..0
        } else {
            lo..hi + 1
        }
    }
}

/// GCC-PHAT_beta: `X_l X_m* / (|X_l X_m*|^beta + gamma)`, zeroed outside the
/// band. Bins with a zero denominator are set to zero.
pub fn gcc_phat(xl: &SpectralFrame, xm: &SpectralFrame, cfg: &GccConfig) -> Result<SpectralGcc> {
    cfg.validate()?;
    if xl.len() != xm.len() || xl.sample_rate != xm.sample_rate {
        return Err(Error::invalid("spectral frames do not share analysis frequencies"));
    }
    let n = xl.len();
    let cross: Vec<Complex64> = xl.bins.iter().zip(&xm.bins).map(|(a, b)| a * b.conj()).collect();
    let in_band: Vec<bool> = (0..n).map(|k| cfg.band.contains(xl.frequency(k))).collect();
    let weight = |c: &Complex64| c.norm().powf(cfg.beta);

    let gamma = match cfg.gamma {
        Floor::Absolute(g) => g,
        Floor::Relative(r) => {
            let (sum, count) = cross
                .iter()
                .zip(&in_band)
                .filter(|(_, &b)| b)
                .fold((0.0, 0usize), |(s, c), (x, _)| (s + weight(x), c + 1));
            if count == 0 {
                0.0
            } else {
                r * sum / count as f64
            }
        }
    };

    let bins = cross
        .iter()
        .zip(&in_band)
        .map(|(c, &b)| {
            if !b {
                return Complex64::new(0.0, 0.0);
            }
            let denom = weight(c) + gamma;
            if denom == 0.0 || !denom.is_finite() {
                Complex64::new(0.0, 0.0)
            } else {
                c / denom
            }
        })
        .collect();
    Ok(SpectralGcc { bins, sample_rate: xl.sample_rate, band: cfg.band })
}

/// Correlation values over symmetric integer lags `-(K) ..= K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagVector {
    pub values: Vec<f64>,
    pub sample_rate: f64,
}

impl LagVector {
    pub fn new(values: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if values.len() % 2 == 0 {
            return Err(Error::invalid("lag vector must have odd length"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("lag vector is not finite"));
        }
        Ok(LagVector { values, sample_rate })
    }

    /// Largest representable |lag| in samples.
    pub fn max_lag(&self) -> i64 {
        (self.values.len() / 2) as i64
    }

    pub fn at(&self, lag: i64) -> Option<f64> {
        let i = lag + self.max_lag();
        (0..self.values.len() as i64)
            .contains(&i)
            .then(|| self.values[i as usize])
    }

    /// Lag of each entry, in samples.
    pub fn lags(&self) -> impl Iterator<Item = i64> + '_ {
        let k = self.max_lag();
        (0..self.values.len() as i64).map(move |i| i - k)
    }

    /// Lag of the maximum value (lowest lag on ties).
    pub fn argmax_lag(&self) -> i64 {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best as i64 - self.max_lag()
    }

    /// Peak magnitude over mean magnitude.
    pub fn peak_to_average(&self) -> f64 {
        let mean = self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64;
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mean == 0.0 {
            0.0
        } else {
            peak / mean
        }
    }

    /// Back to a band-limited cross-spectrum of `2 (K + 1)` bins.
    pub fn to_spectral(&self, band: Band) -> SpectralGcc {
        let k = self.max_lag() as usize;
        let n = 2 * (k + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (lag, v) in self.lags().zip(&self.values) {
            buf[lag.rem_euclid(n as i64) as usize] = Complex64::new(*v, 0.0);
        }
        fft_forward(&mut buf);
        for (i, b) in buf.iter_mut().enumerate() {
            if !band.contains(bin_frequency(i, n, self.sample_rate)) {
                *b = Complex64::new(0.0, 0.0);
            }
        }
        SpectralGcc { bins: buf, sample_rate: self.sample_rate, band }
    }
}

/// Inverse transform of a weighted cross-spectrum, re-indexed so that lag 0
/// sits in the middle.
pub fn temporal_gcc(g: &SpectralGcc) -> LagVector {
    let n = g.bins.len();
    let mut buf = g.bins.clone();
    fft_inverse(&mut buf);
    let k = (n / 2).saturating_sub(1) as i64;
    let values = (-k..=k)
        .map(|lag| buf[lag.rem_euclid(n as i64) as usize].re)
        .collect();
    LagVector { values, sample_rate: g.sample_rate }
}

/// Linear cross-correlation `r[tau] = sum_n x_l[n] x_m[n - tau]` for
/// `|tau| <= L - 1`.
pub fn cross_correlation(xl: &[f64], xm: &[f64], sample_rate: f64) -> Result<LagVector> {
    if xl.len() != xm.len() || xl.is_empty() {
        return Err(Error::invalid("frames must be non-empty and of equal length"));
    }
    let a = padded_spectrum(xl, sample_rate);
    let b = padded_spectrum(xm, sample_rate);
    let cross = SpectralGcc {
        bins: a.bins.iter().zip(&b.bins).map(|(x, y)| x * y.conj()).collect(),
        sample_rate,
        band: Band::full(sample_rate),
    };
    Ok(temporal_gcc(&cross))
}

/// GCC-PHAT_beta of every canonical pair from time-domain frames.
pub fn gcc_all_pairs(frames: &[Vec<f64>], array: &MicArray, cfg: &GccConfig) -> Result<Vec<SpectralGcc>> {
    check_frames(frames, array)?;
    let spectra: Vec<SpectralFrame> = frames
        .iter()
        .map(|f| padded_spectrum(f, array.sample_rate()))
        .collect();
    array
        .pairs()
        .iter()
        .map(|p| gcc_phat(&spectra[p.l], &spectra[p.m], cfg))
        .collect()
}

/// Plain cross-correlation of every canonical pair.
pub fn cc_all_pairs(frames: &[Vec<f64>], array: &MicArray) -> Result<Vec<LagVector>> {
    check_frames(frames, array)?;
    array
        .pairs()
        .iter()
        .map(|p| cross_correlation(&frames[p.l], &frames[p.m], array.sample_rate()))
        .collect()
}

fn check_frames(frames: &[Vec<f64>], array: &MicArray) -> Result<()> {
    if frames.len() != array.len() {
        return Err(Error::invalid(format!(
            "{} frames for {} microphones",
            frames.len(),
            array.len()
        )));
    }
    let len = frames[0].len();
    if len == 0 || frames.iter().any(|f| f.len() != len) {
        return Err(Error::invalid("frames must be non-empty and of equal length"));
    }
    Ok(())
}
