//! Ground-truth multichannel signals under the free-field propagation model
//! `x_m(t) = sum_n a_m(u_n) s_n(t - tau_m(u_n)) + e_m(t)`, with optional
//! convolution by externally supplied room impulse responses.
//!
//! Attenuation is the frequency-independent `1/r`. Fractional delays are
//! realized with a 64-tap Hann-windowed sinc. Noise is white, Gaussian,
//! spatially uncorrelated and calibrated so that the realized per-channel
//! SNR equals the request exactly.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MicArray, Point3};

/// Half-length of the interpolation kernel; the kernel has `2 * HALF_TAPS` taps.
pub const HALF_TAPS: usize = 32;

/// Sources closer than this to a microphone are rejected (1/r singularity).
pub const MIN_SOURCE_DISTANCE: f64 = 1e-3;

/// Fractional parts closer than this to an integer are snapped to it.
const INTEGER_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub position: Point3,
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub room_dims: Point3,
    pub sources: Vec<Source>,
    pub sample_rate: f64,
    /// Ratio of summed source power to noise power per channel, dB.
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.room_dims;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0 && d.is_finite()) {
            return Err(Error::invalid("room dimensions must be positive"));
        }
        if self.sources.is_empty() {
            return Err(Error::invalid("scene has no sources"));
        }
        let len = self.sources[0].signal.len();
        for (i, s) in self.sources.iter().enumerate() {
            if !inside_open_box(&s.position, &d) {
                return Err(Error::invalid(format!(
                    "source {i} at {:?} is not strictly inside the room",
                    s.position.to_array()
                )));
            }
            if s.signal.len() != len {
                return Err(Error::invalid("source signals must have equal lengths"));
            }
            if s.signal.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("source {i} signal is not finite")));
            }
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("snr_db is NaN"));
        }
        Ok(())
    }
}

fn inside_open_box(p: &Point3, d: &Point3) -> bool {
    p.x > 0.0 && p.x < d.x && p.y > 0.0 && p.y < d.y && p.z > 0.0 && p.z < d.z
}

/// Impulse responses of one source, one per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct RirSet {
    pub sample_rate: f64,
    pub responses: Vec<Vec<f64>>,
}

/// Windowed-sinc interpolation kernel value at offset `x` samples.
fn kernel(x: f64) -> f64 {
    let half = HALF_TAPS as f64;
    if x.abs() >= half {
        return 0.0;
    }
    let window = 0.5 * (1.0 + (PI * x / half).cos());
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    window * sinc
}

/// Splits a delay in samples into integer and fractional parts, snapping
/// near-integers so integer delays are reproduced exactly.
fn split_delay(delay: f64) -> (i64, f64) {
    let nearest = delay.round();
    if (delay - nearest).abs() < INTEGER_SNAP {
        return (nearest as i64, 0.0);
    }
    let whole = delay.floor();
    (whole as i64, delay - whole)
}

/// Adds `gain * s(n - delay)` to `out[n]` for `n` in `range`, where `delay`
/// is in (possibly fractional) samples.
pub fn render_delayed(
    signal: &[f64],
    delay: f64,
    gain: f64,
    out: &mut [f64],
    range: std::ops::Range<usize>,
) {
    let (whole, frac) = split_delay(delay);
    let taps: Vec<(i64, f64)> = if frac == 0.0 {
        vec![(0, 1.0)]
    } else {
        (-(HALF_TAPS as i64) + 1..=HALF_TAPS as i64)
            .map(|j| (j, kernel(j as f64 - frac)))
            .collect()
    };
    let len = signal.len() as i64;
    let end = range.end.min(out.len());
    for (j, h) in taps {
        let c = gain * h;
        let shift = whole + j;
        // out[n] += c * s[n - shift] with 0 <= n - shift < len
        let lo = (range.start as i64).max(shift);
        let hi = (end as i64).min(len + shift);
        if lo >= hi {
            continue;
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let src = &signal[(lo as i64 - shift) as usize..(hi as i64 - shift) as usize];
        for (o, s) in out[lo..hi].iter_mut().zip(src) {
            *o += c * s;
        }
    }
}

/// Output length for a free-field rendering with the given maximum delay.
pub fn rendered_len(signal_len: usize, max_delay_samples: f64) -> usize {
    signal_len + max_delay_samples.max(0.0).ceil() as usize + HALF_TAPS
}

fn check_distances(positions: &[Point3], array: &MicArray) -> Result<()> {
    for (i, u) in positions.iter().enumerate() {
        for (m, v) in array.positions().iter().enumerate() {
            if u.distance(v) < MIN_SOURCE_DISTANCE {
                return Err(Error::invalid(format!(
                    "source {i} is closer than {MIN_SOURCE_DISTANCE} m to microphone {m}"
                )));
            }
        }
    }
    Ok(())
}

/// Renders the noiseless free-field image of every source at every
/// microphone and sums them per channel.
pub fn render_free_field(sources: &[Source], array: &MicArray) -> Result<Vec<Vec<f64>>> {
    let positions: Vec<Point3> = sources.iter().map(|s| s.position).collect();
    check_distances(&positions, array)?;
    let fs = array.sample_rate();
    let c = array.speed_of_sound();
    let len = sources.iter().map(|s| s.signal.len()).max().unwrap_or(0);
    let max_delay = positions
        .iter()
        .flat_map(|u| array.positions().iter().map(move |v| u.distance(v) / c * fs))
        .fold(0.0, f64::max);
    let out_len = rendered_len(len, max_delay);
    Ok(array
        .positions()
        .par_iter()
        .map(|v| {
            let mut out = vec![0.0; out_len];
            for s in sources {
                let r = s.position.distance(v);
                render_delayed(&s.signal, r / c * fs, 1.0 / r, &mut out, 0..out_len);
            }
            out
        })
        .collect())
}

/// Full free-field synthesis: source images plus calibrated noise.
pub fn synthesize_free_field(scene: &SceneSpec, array: &MicArray) -> Result<Vec<Vec<f64>>> {
    scene.validate()?;
    if scene.sample_rate != array.sample_rate() {
        return Err(Error::invalid(format!(
            "scene sample rate {} does not match array sample rate {}",
            scene.sample_rate,
            array.sample_rate()
        )));
    }
    let clean = render_free_field(&scene.sources, array)?;
    add_noise(&clean, scene.snr_db, scene.seed)
}

/// Free-field rendering of one source that moves stepwise: during output
/// samples `[k * step, (k + 1) * step)` it sits at `positions[k]`. The last
/// position is held until the signal ends.
pub fn render_stepwise(
    signal: &[f64],
    positions: &[Point3],
    step: usize,
    array: &MicArray,
) -> Result<Vec<Vec<f64>>> {
    if positions.is_empty() || step == 0 {
        return Err(Error::invalid("stepwise rendering needs positions and a positive step"));
    }
    check_distances(positions, array)?;
    let fs = array.sample_rate();
    let c = array.speed_of_sound();
    let out_len = signal.len();
    Ok(array
        .positions()
        .par_iter()
        .map(|v| {
            let mut out = vec![0.0; out_len];
            let mut start = 0;
            for (k, u) in positions.iter().enumerate() {
                let end = if k + 1 == positions.len() { out_len } else { (start + step).min(out_len) };
                if start >= end {
                    break;
                }
                let r = u.distance(v);
                render_delayed(signal, r / c * fs, 1.0 / r, &mut out, start..end);
                start = end;
            }
            out
        })
        .collect())
}

/// Full linear convolution of `signal` with each impulse response.
pub fn convolve_rir(signal: &[f64], rirs: &RirSet) -> Result<Vec<Vec<f64>>> {
    if signal.is_empty() {
        return Err(Error::invalid("empty source signal"));
    }
    if rirs.responses.is_empty() || rirs.responses.iter().any(|h| h.is_empty()) {
        return Err(Error::invalid("empty impulse response"));
    }
    let out_lens: Vec<usize> = rirs.responses.iter().map(|h| signal.len() + h.len() - 1).collect();
    let n = out_lens.iter().max().unwrap().next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut s_spec: Vec<Complex64> = signal
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fwd.process(&mut s_spec);

    Ok(rirs
        .responses
        .iter()
        .zip(out_lens)
        .map(|(h, out_len)| {
            let mut buf: Vec<Complex64> = h
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                .take(n)
                .collect();
            fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&s_spec) {
                *b *= s;
            }
            inv.process(&mut buf);
            let scale = 1.0 / n as f64;
            buf[..out_len].iter().map(|v| v.re * scale).collect()
        })
        .collect())
}

/// Mean power of a signal.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise to every channel at `snr_db` relative to that
/// channel's own power. Channel `m` draws from stream `m` of a generator
/// seeded with `seed`.
pub fn add_noise(signals: &[Vec<f64>], snr_db: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if signals.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signals must be finite"));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("snr_db is NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signals.to_vec());
    }
    signals
        .par_iter()
        .enumerate()
        .map(|(m, x)| {
            let p_signal = power(x);
            if p_signal == 0.0 {
                return Err(Error::invalid(format!(
                    "channel {m} is silent; SNR is undefined"
                )));
            }
            let p_target = p_signal / 10f64.powf(snr_db / 10.0);
            let mut noise = gaussian_noise(x.len(), seed, m as u64);
            let scale = (p_target / power(&noise)).sqrt();
            for (n, s) in noise.iter_mut().zip(x) {
                *n = s + *n * scale;
            }
            Ok(noise)
        })
        .collect()
}

fn gaussian_noise(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Excitation signals for simulated scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseColor {
    White,
    Pink,
}

/// Unit-power noise excitation of `n` samples.
pub fn noise_signal(color: NoiseColor, n: usize, seed: u64) -> Vec<f64> {
    let white = gaussian_noise(n, seed, u64::MAX);
    let mut x = match color {
        NoiseColor::White => white,
        NoiseColor::Pink => pink_filter(&white),
    };
    let p = power(&x);
    if p > 0.0 {
        let s = p.sqrt().recip();
        x.iter_mut().for_each(|v| *v *= s);
    }
    x
}

// Paul Kellet's economy 1/f filter.
fn pink_filter(white: &[f64]) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    white
        .iter()
        .map(|&w| {
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}
