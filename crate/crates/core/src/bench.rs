//! Complexity sweeps: predicted operation counts against measured kernel
//! counters and wall time.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{gcc_all_pairs, temporal_gcc, Band, GccConfig};
use crate::geometry::{MicArray, Point3};
use crate::grids::CandidateGrid;
use crate::search::complexity_estimate;
use crate::srp::{srp_freq_map_with, srp_time_map_with, FreqScorer, MapDomain, PointScorer, Steering, TimeScorer};
use crate::synth::{noise_signal, NoiseColor};

fn default_domains() -> Vec<MapDomain> {
    vec![MapDomain::Time, MapDomain::Frequency]
}

fn default_repeats() -> usize {
    3
}

fn default_room() -> [f64; 3] {
    [6.0, 5.0, 3.0]
}

fn default_sample_rate() -> f64 {
    16_000.0
}

/// Cartesian product of grid sizes, frame lengths and microphone counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSweep {
    pub grid_sizes: Vec<usize>,
    pub frame_lens: Vec<usize>,
    pub mic_counts: Vec<usize>,
    #[serde(default = "default_domains")]
    pub domains: Vec<MapDomain>,
    /// Wall time is the minimum over this many runs.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_room")]
    pub room: [f64; 3],
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
}

impl BenchSweep {
    pub fn validate(&self) -> Result<()> {
        if self.grid_sizes.is_empty() || self.frame_lens.is_empty() || self.mic_counts.is_empty() || self.domains.is_empty() {
            return Err(Error::config("sweep lists must be non-empty"));
        }
        if self.grid_sizes.contains(&0) || self.frame_lens.iter().any(|&l| l < 2) || self.mic_counts.iter().any(|&m| m < 2) {
            return Err(Error::config("sweep needs G >= 1, L >= 2 and M >= 2"));
        }
        if let Some(d) = self.domains.iter().find(|d| !matches!(d, MapDomain::Time | MapDomain::Frequency)) {
            return Err(Error::config(format!("bench sweeps time and frequency maps only, got {d:?}")));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be >= 1"));
        }
        if !(self.sample_rate > 0.0) || self.room.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::config("sample_rate and room must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub domain: MapDomain,
    pub mics: usize,
    pub frame_len: usize,
    pub grid_size: usize,
    pub pairs: usize,
    pub bins: usize,
    pub predicted_ops: f64,
    pub kernel_evaluations: u64,
    /// Features plus map, seconds.
    pub seconds: f64,
    pub map_seconds: f64,
}

pub const CSV_HEADER: &str =
    "domain,mics,frame_len,grid_size,pairs,bins,predicted_ops,kernel_evaluations,seconds,map_seconds";

impl BenchRow {
    pub fn csv(&self) -> String {
        let domain = match self.domain {
            MapDomain::Time => "time",
            MapDomain::Frequency => "frequency",
            MapDomain::Volumetric => "volumetric",
            MapDomain::Weighted => "weighted",
        };
        format!(
            "{domain},{},{},{},{},{},{},{},{:.6},{:.6}",
            self.mics, self.frame_len, self.grid_size, self.pairs, self.bins, self.predicted_ops, self.kernel_evaluations, self.seconds, self.map_seconds
        )
    }
}

/// Times one cell: GCC-PHAT features of white-noise frames followed by a map
/// over `g` random candidates.
pub fn bench_cell(sweep: &BenchSweep, domain: MapDomain, m: usize, l: usize, g: usize) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed ^ ((m as u64) << 40) ^ ((l as u64) << 20) ^ g as u64);
    let room = Point3::from(sweep.room);
    let draw = |rng: &mut ChaCha8Rng| {
        Point3::new(rng.random_range(0.0..room.x), rng.random_range(0.0..room.y), rng.random_range(0.0..room.z))
    };
    let mics: Vec<Point3> = (0..m).map(|_| draw(&mut rng)).collect();
    let array = MicArray::new(mics, sweep.sample_rate, 343.0)?;
    let grid = CandidateGrid::from_points((0..g).map(|_| draw(&mut rng)).collect())?;
    let frames: Vec<Vec<f64>> = (0..m).map(|i| noise_signal(NoiseColor::White, l, sweep.seed + i as u64)).collect();
    let gcc_cfg = GccConfig::phat(Band::full(sweep.sample_rate));

    let mut best: Option<BenchRow> = None;
    for _ in 0..sweep.repeats {
        let t0 = Instant::now();
        let gccs = gcc_all_pairs(&frames, &array, &gcc_cfg)?;
        let (bins, kernels, t1) = match domain {
            MapDomain::Time => {
                let lags = gccs.iter().map(temporal_gcc).collect();
                let scorer = TimeScorer::new(lags, &array, Steering::Exact)?;
                let t1 = Instant::now();
                std::hint::black_box(srp_time_map_with(&scorer, &grid));
                (0, scorer.counter().kernels(), t1)
            }
            _ => {
                let scorer = FreqScorer::new(gccs, &array, Steering::Exact)?;
                let t1 = Instant::now();
                std::hint::black_box(srp_freq_map_with(&scorer, &grid));
                (scorer.num_bins(), scorer.counter().kernels(), t1)
            }
        };
        let row = BenchRow {
            domain,
            mics: m,
            frame_len: l,
            grid_size: g,
            pairs: array.pairs().len(),
            bins,
            predicted_ops: complexity_estimate(m, l, g, domain)?,
            kernel_evaluations: kernels,
            seconds: t0.elapsed().as_secs_f64(),
            map_seconds: t1.elapsed().as_secs_f64(),
        };
        if best.as_ref().map_or(true, |b| row.seconds < b.seconds) {
            best = Some(row);
        }
    }
    Ok(best.expect("repeats >= 1"))
}

pub fn run_sweep(sweep: &BenchSweep) -> Result<Vec<BenchRow>> {
    sweep.validate()?;
    let mut rows = Vec::new();
    for &domain in &sweep.domains {
        for &m in &sweep.mic_counts {
            for &l in &sweep.frame_lens {
                for &g in &sweep.grid_sizes {
                    rows.push(bench_cell(sweep, domain, m, l, g)?);
                }
            }
        }
    }
    Ok(rows)
}
