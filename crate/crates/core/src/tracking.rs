//! Particle-filter tracking of a moving source with Langevin kinematics.
//!
//! Each axis follows `v <- a v + b N(0, 1)`, `p <- p + v dt` with
//! `a = exp(-alpha dt)` and `b = beta sqrt(1 - a)`. Particles are weighted
//! by `max(SRP, 0)^kappa` evaluated at their positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{gcc_all_pairs, GccConfig};
use crate::geometry::{MicArray, Point3};
use crate::grids::Volume;
use crate::search::{src_search, SearchConfig, SearchMode};
use crate::srp::{FreqScorer, PointScorer, Steering};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Point3,
    pub velocity: Point3,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinParams {
    /// Damping rate per axis, 1/s.
    pub alpha: [f64; 3],
    /// Steady-state speed scale per axis, m/s.
    pub beta: [f64; 3],
    /// Time step, seconds.
    pub dt: f64,
}

impl Default for LangevinParams {
    fn default() -> Self {
        LangevinParams { alpha: [2.0; 3], beta: [0.5; 3], dt: 0.256 }
    }
}

impl LangevinParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite()))
            || self.beta.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
            || !(self.dt > 0.0 && self.dt.is_finite())
        {
            return Err(Error::config("Langevin parameters need alpha > 0, beta >= 0, dt > 0"));
        }
        Ok(())
    }

    /// Damping factor `a` per axis.
    pub fn damping(&self) -> [f64; 3] {
        self.alpha.map(|al| (-al * self.dt).exp())
    }

    /// Excitation factor `b` per axis.
    pub fn excitation(&self) -> [f64; 3] {
        let a = self.damping();
        [0, 1, 2].map(|i| self.beta[i] * (1.0 - a[i]).sqrt())
    }

    /// Stationary velocity variance `b^2 / (1 - a^2)` per axis.
    pub fn stationary_variance(&self) -> [f64; 3] {
        let (a, b) = (self.damping(), self.excitation());
        [0, 1, 2].map(|i| b[i] * b[i] / (1.0 - a[i] * a[i]))
    }
}

/// Initial particle cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum TrackerInit {
    /// Uniform over the room.
    Uniform,
    /// Gaussian cloud of standard deviation `spread` (meters) around an SRC
    /// estimate from the first frame.
    FirstFrame { spread: f64 },
}

impl Default for TrackerInit {
    fn default() -> Self {
        TrackerInit::FirstFrame { spread: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub particles: usize,
    /// Weight exponent applied to rectified SRP scores.
    pub kappa: f64,
    pub langevin: LangevinParams,
    /// Resample when the effective sample size drops below this fraction
    /// of the particle count.
    pub resample_below: f64,
    pub init: TrackerInit,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            particles: 500,
            kappa: 20.0,
            langevin: LangevinParams::default(),
            resample_below: 0.5,
            init: TrackerInit::default(),
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.langevin.validate()?;
        if self.particles == 0 {
            return Err(Error::config("the tracker needs at least one particle"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be positive"));
        }
        if !(0.0..=1.0).contains(&self.resample_below) {
            return Err(Error::config("resample_below must lie in [0, 1]"));
        }
        if let TrackerInit::FirstFrame { spread } = self.init {
            if !(spread >= 0.0 && spread.is_finite()) {
                return Err(Error::config("initial spread must be non-negative"));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer used to derive independent per-particle seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn particle_rng(seed: u64, frame: usize, q: usize, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed ^ purpose) ^ frame as u64) ^ q as u64))
}

const PREDICT: u64 = 0x5052_4544;
const RESAMPLE: u64 = 0x5245_5341;
const INIT: u64 = 0x494E_4954;
const INIT_SEARCH: u64 = 0x5352_4348;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub particles: Vec<Particle>,
    pub frame_index: usize,
    pub seed: u64,
    pub room: Volume,
}

impl TrackerState {
    /// `q` particles uniform in the room with velocities drawn from the
    /// stationary Langevin distribution and uniform weights.
    pub fn new(room: &Volume, q: usize, params: &LangevinParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if q == 0 {
            return Err(Error::invalid("the tracker needs at least one particle"));
        }
        let sd = params.stationary_variance().map(f64::sqrt);
        let particles = (0..q)
            .map(|i| {
                let mut rng = particle_rng(seed, 0, i, INIT);
                let position = room.sample_interior(&mut rng);
                let mut v = [0.0; 3];
                for (a, x) in v.iter_mut().enumerate() {
                    *x = sd[a] * rng.sample::<f64, _>(StandardNormal);
                }
                Particle { position, velocity: v.into(), weight: 1.0 / q as f64 }
            })
            .collect();
        Ok(TrackerState { particles, frame_index: 0, seed, room: *room })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum(w^2)`.
    pub fn ess(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }
}

/// One Langevin step for every particle, clamped to the room.
pub fn predict(state: &mut TrackerState, params: &LangevinParams) {
    let (a, b) = (params.damping(), params.excitation());
    let (lo, hi) = (state.room.min(), state.room.max());
    let (seed, frame) = (state.seed, state.frame_index);
    state.particles.par_iter_mut().enumerate().for_each(|(q, p)| {
        let mut rng = particle_rng(seed, frame, q, PREDICT);
        let (mut pos, mut vel) = (p.position, p.velocity);
        for ax in 0..3 {
            let noise: f64 = if b[ax] > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            let v = a[ax] * vel.axis(ax) + b[ax] * noise;
            vel = vel.with_axis(ax, v);
            pos = pos.with_axis(ax, (pos.axis(ax) + v * params.dt).clamp(lo.axis(ax), hi.axis(ax)));
        }
        p.position = pos;
        p.velocity = vel;
    });
}

/// Sets weights to `max(score, 0)^kappa`, normalized. Returns `false` and
/// falls back to uniform weights when no particle scores above zero.
pub fn update_weights(state: &mut TrackerState, scorer: &dyn PointScorer, kappa: f64) -> bool {
    let positions: Vec<Point3> = state.particles.iter().map(|p| p.position).collect();
    let scores = scorer.score_all(&positions);
    // Dividing by the largest score before the power only changes the
    // normalizing constant and keeps large exponents finite.
    let top = scores.iter().copied().fold(0.0f64, f64::max);
    let raw: Vec<f64> = if top > 0.0 && top.is_finite() {
        scores.iter().map(|s| (s.max(0.0) / top).powf(kappa)).collect()
    } else {
        vec![0.0; scores.len()]
    };
    let total: f64 = raw.iter().sum();
    let q = state.particles.len() as f64;
    if !(total > 0.0 && total.is_finite()) {
        log::warn!("frame {}: every particle scored <= 0; using uniform weights", state.frame_index);
        state.particles.iter_mut().for_each(|p| p.weight = 1.0 / q);
        return false;
    }
    for (p, w) in state.particles.iter_mut().zip(raw) {
        p.weight = w / total;
    }
    true
}

/// Systematic resampling with one uniform offset; weights become uniform.
pub fn resample(state: &mut TrackerState) {
    let q = state.particles.len();
    let mut rng = particle_rng(state.seed, state.frame_index, 0, RESAMPLE);
    let u0: f64 = rng.random::<f64>() / q as f64;
    let mut out = Vec::with_capacity(q);
    let mut cum = state.particles[0].weight;
    let mut j = 0;
    for i in 0..q {
        let u = u0 + i as f64 / q as f64;
        while u > cum && j + 1 < q {
            j += 1;
            cum += state.particles[j].weight;
        }
        out.push(Particle { weight: 1.0 / q as f64, ..state.particles[j] });
    }
    state.particles = out;
}

/// Weighted mean position.
pub fn estimate(state: &TrackerState) -> Point3 {
    state.particles.iter().fold(Point3::ORIGIN, |acc, p| acc + p.position * p.weight)
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: usize,
    pub t_seconds: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub ess: f64,
}

impl TrackPoint {
    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }
}

/// Particle filter over a sequence of scorers (one per frame).
#[derive(Debug, Clone)]
pub struct Tracker {
    pub cfg: TrackerConfig,
    pub state: TrackerState,
}

impl Tracker {
    pub fn new(room: &Volume, cfg: &TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let state = TrackerState::new(room, cfg.particles, &cfg.langevin, cfg.seed)?;
        Ok(Tracker { cfg: cfg.clone(), state })
    }

    /// Predict, weight, resample when the ESS is low, estimate. Frame 0
    /// skips the prediction so the initial cloud is weighted as drawn.
    pub fn step(&mut self, scorer: &dyn PointScorer) -> Result<TrackPoint> {
        if self.state.frame_index > 0 {
            predict(&mut self.state, &self.cfg.langevin);
        } else if let TrackerInit::FirstFrame { spread } = self.cfg.init {
            self.seed_around_search(scorer, spread)?;
        }
        update_weights(&mut self.state, scorer, self.cfg.kappa);
        let ess = self.state.ess();
        if ess < self.cfg.resample_below * self.state.len() as f64 {
            resample(&mut self.state);
        }
        let p = estimate(&self.state);
        let frame = self.state.frame_index;
        self.state.frame_index += 1;
        Ok(TrackPoint { frame, t_seconds: frame as f64 * self.cfg.langevin.dt, x: p.x, y: p.y, z: p.z, ess })
    }

    fn seed_around_search(&mut self, scorer: &dyn PointScorer, spread: f64) -> Result<()> {
        let search = SearchConfig {
            mode: SearchMode::Src,
            points_per_iter: 1000,
            seed: self.cfg.seed,
            ..Default::default()
        };
        let center = src_search(scorer, &self.state.room, &search)?.estimate;
        let (lo, hi) = (self.state.room.min(), self.state.room.max());
        let seed = self.cfg.seed;
        for (q, p) in self.state.particles.iter_mut().enumerate() {
            let mut rng = particle_rng(seed, 0, q, INIT_SEARCH);
            let mut pos = center;
            for ax in 0..3 {
                let x = center.axis(ax) + spread * rng.sample::<f64, _>(StandardNormal);
                pos = pos.with_axis(ax, x.clamp(lo.axis(ax), hi.axis(ax)));
            }
            p.position = pos;
        }
        Ok(())
    }
}

/// Tracks a source over frames of multichannel audio, scoring particles
/// with the frequency-domain SRP kernel.
pub fn track(
    frames: &[Vec<Vec<f64>>],
    array: &MicArray,
    room: &Volume,
    gcc: &GccConfig,
    cfg: &TrackerConfig,
) -> Result<Vec<TrackPoint>> {
    if frames.is_empty() {
        return Err(Error::invalid("tracking needs at least one frame"));
    }
    let mut tracker = Tracker::new(room, cfg)?;
    frames
        .iter()
        .map(|f| {
            let scorer = FreqScorer::new(gcc_all_pairs(f, array, gcc)?, array, Steering::Exact)?;
            tracker.step(&scorer)
        })
        .collect()
}
