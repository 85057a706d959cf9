//! File formats: multichannel WAV, CSV maps and PGM rasters.

use std::io::Write;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::srp::SrpMap;

/// Decoded multichannel audio, one vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

/// Reads 16-bit PCM or 32-bit float WAV.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let n = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::invalid(format!(
                "unsupported WAV encoding: {bits}-bit {format:?}; use 16-bit PCM or 32-bit float"
            )))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n.max(1)); n];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n].push(v);
    }
    Ok(Audio { channels, sample_rate: spec.sample_rate as f64 })
}

/// Writes 32-bit float WAV.
pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let len = channels.first().map_or(0, Vec::len);
    if channels.is_empty() || channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("WAV output needs channels of equal length"));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..len {
        for c in channels {
            writer.write_sample(c[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// `x,y,z,score` rows in grid order.
pub fn write_map_csv<W: Write>(map: &SrpMap, mut out: W) -> Result<()> {
    writeln!(out, "x,y,z,score")?;
    for (p, s) in map.points.iter().zip(&map.scores) {
        writeln!(out, "{},{},{},{}", p.x, p.y, p.z, s)?;
    }
    Ok(())
}

/// Raster layout of a map with at most two non-trivial grid axes:
/// `(width, height, axes)` where `axes` are the grid axes along columns and
/// rows.
fn raster_layout(map: &SrpMap) -> Result<(usize, usize, [usize; 2])> {
    let shape = map.shape.ok_or_else(|| Error::invalid("map has no regular shape to rasterize"))?;
    let active: Vec<usize> = (0..3).filter(|&a| shape[a] > 1).collect();
    match active.as_slice() {
        [] => Ok((1, 1, [0, 1])),
        [a] => Ok((shape[*a], 1, [*a, (*a + 1) % 3])),
        [a, b] => Ok((shape[*a], shape[*b], [*a, *b])),
        _ => Err(Error::invalid("PGM export needs a grid with at most two non-trivial axes")),
    }
}

/// Pixel `(row, column)` of grid entry `index`; the first row holds the
/// largest coordinate along the vertical axis.
pub fn pgm_pixel(map: &SrpMap, index: usize) -> Result<(usize, usize)> {
    let (_, height, axes) = raster_layout(map)?;
    let shape = map.shape.expect("checked by raster_layout");
    let idx = [index / (shape[1] * shape[2]), (index / shape[2]) % shape[1], index % shape[2]];
    Ok((height - 1 - if height > 1 { idx[axes[1]] } else { 0 }, idx[axes[0]]))
}

/// 16-bit binary PGM (P5) of a 2D map, scores scaled linearly so the
/// minimum is black and the maximum white.
pub fn map_to_pgm(map: &SrpMap) -> Result<Vec<u8>> {
    let (width, height, _) = raster_layout(map)?;
    let lo = map.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut pixels = vec![0u16; width * height];
    for (i, s) in map.scores.iter().enumerate() {
        let (r, c) = pgm_pixel(map, i)?;
        let v = if span > 0.0 { ((s - lo) / span * 65535.0).round() } else { 0.0 };
        pixels[r * width + c] = v as u16;
    }
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}
