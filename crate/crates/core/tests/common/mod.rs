#![allow(dead_code)]

use rand::Rng;
use xsrp::synth::{noise_signal, synthesize_free_field, NoiseColor, SceneSpec, Source};
use xsrp::{MicArray, Point3};

pub const FS: f64 = 16_000.0;
pub const C: f64 = 343.0;

pub fn uniform_in<R: Rng>(rng: &mut R, lo: Point3, hi: Point3) -> Point3 {
    Point3::new(
        rng.random_range(lo.x..hi.x),
        rng.random_range(lo.y..hi.y),
        rng.random_range(lo.z..hi.z),
    )
}

/// `m` microphones uniform in the room.
pub fn random_array<R: Rng>(rng: &mut R, room: Point3, m: usize) -> MicArray {
    let mics = (0..m).map(|_| uniform_in(rng, Point3::ORIGIN, room)).collect();
    MicArray::new(mics, FS, C).unwrap()
}

/// Eight microphones on the vertices of a cube inscribed in a sphere.
pub fn spherical_array(center: Point3, radius: f64) -> MicArray {
    let s = radius / 3f64.sqrt();
    let mut mics = Vec::new();
    for i in 0..8 {
        let sign = |b: usize| if i & b == 0 { -1.0 } else { 1.0 };
        mics.push(center + Point3::new(sign(1) * s, sign(2) * s, sign(4) * s));
    }
    MicArray::new(mics, FS, C).unwrap()
}

/// Free-field scene; returns one frame of `len` samples per channel,
/// starting at `start`.
pub fn scene_frame(
    array: &MicArray,
    room: Point3,
    sources: &[(Point3, NoiseColor)],
    snr_db: f64,
    seed: u64,
    start: usize,
    len: usize,
) -> Vec<Vec<f64>> {
    let n = start + len;
    let sources = sources
        .iter()
        .enumerate()
        .map(|(i, (p, color))| Source {
            position: *p,
            signal: noise_signal(*color, n, seed.wrapping_mul(31).wrapping_add(i as u64 + 1)),
        })
        .collect();
    let scene = SceneSpec { room_dims: room, sources, sample_rate: FS, snr_db, seed };
    let ch = synthesize_free_field(&scene, array).unwrap();
    ch.iter().map(|c| c[start..start + len].to_vec()).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
