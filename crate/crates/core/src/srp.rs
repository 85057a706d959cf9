//! Steered response power maps.
//!
//! A map assigns each candidate the sum over canonical pairs of that pair's
//! correlation evidence at the candidate's theoretical TDOA:
//!
//! * time domain: the lag vector read at `round(tau_lm(u) * f_s)`;
//! * frequency domain: `sum_f Re[G_lm(f) exp(+j 2 pi f tau_lm(u))]` over the
//!   non-negative in-band bins (the negative half is the conjugate mirror and
//!   would only double every score);
//! * volumetric: lag values pooled over the TDOA interval a cuboid spans.
//!
//! Cartesian candidates use the exact TDOA, DOA candidates the far-field one.
//! Scores are not normalized by the number of pairs or bins.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::{Band, LagVector, SpectralGcc};
use crate::geometry::{max_tdoa_unchecked, tdoa_far_field_unchecked, tdoa_unchecked, MicArray, MicPair, Point3};
use crate::grids::{CandidateGrid, GridKind, Volume, VolumeGrid};

/// Default widening of volumetric TDOA bounds, in samples.
pub const DEFAULT_GUARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapDomain {
    Time,
    Frequency,
    Volumetric,
    Weighted,
}

/// Scores aligned with a set of candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SrpMap {
    /// Candidate points (volume centers for volumetric maps).
    pub points: Vec<Point3>,
    pub scores: Vec<f64>,
    pub kind: GridKind,
    pub shape: Option<[usize; 3]>,
    pub domain: MapDomain,
    pub band: Option<Band>,
    pub frame: Option<usize>,
}

impl SrpMap {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the first maximal score.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.scores.iter().enumerate() {
            if best.map_or(true, |b| *s > self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Counts SRP evaluations: `points` candidates scored and `kernels`
/// elementary pair (time) or pair-bin (frequency) projections.
#[derive(Debug, Default)]
pub struct EvalCounter {
    points: AtomicU64,
    kernels: AtomicU64,
}

impl EvalCounter {
    pub fn points(&self) -> u64 {
        self.points.load(Ordering::Relaxed)
    }

    pub fn kernels(&self) -> u64 {
        self.kernels.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.points.store(0, Ordering::Relaxed);
        self.kernels.store(0, Ordering::Relaxed);
    }

    /// Records work done by a scorer.
    pub fn record(&self, points: u64, kernels: u64) {
        self.points.fetch_add(points, Ordering::Relaxed);
        self.kernels.fetch_add(kernels, Ordering::Relaxed);
    }
}

/// How candidate coordinates map to TDOAs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steering {
    /// Positions; exact TDOA.
    Exact,
    /// Unit directions; plane-wave TDOA.
    FarField,
}

impl Steering {
    pub fn for_grid(kind: GridKind) -> Steering {
        if kind.is_doa() {
            Steering::FarField
        } else {
            Steering::Exact
        }
    }

    #[inline]
    pub fn tdoa(self, u: &Point3, pair: MicPair, array: &MicArray) -> f64 {
        match self {
            Steering::Exact => tdoa_unchecked(u, pair, array),
            Steering::FarField => tdoa_far_field_unchecked(u, pair, array),
        }
    }
}

/// Anything that assigns an SRP value to a single candidate.
pub trait PointScorer: Sync {
    fn score(&self, u: &Point3) -> f64;

    fn counter(&self) -> &EvalCounter;

    /// Scores many candidates in parallel; each score is computed
    /// independently so the result does not depend on partitioning.
    fn score_all(&self, points: &[Point3]) -> Vec<f64> {
        points.par_iter().map(|p| self.score(p)).collect()
    }
}

/// Time-domain SRP from per-pair lag vectors.
#[derive(Debug)]
pub struct TimeScorer {
    lags: Vec<LagVector>,
    array: MicArray,
    steering: Steering,
    counter: EvalCounter,
}

impl TimeScorer {
    pub fn new(lags: Vec<LagVector>, array: &MicArray, steering: Steering) -> Result<Self> {
        if lags.len() != array.pairs().len() {
            return Err(Error::invalid(format!(
                "{} lag vectors for {} microphone pairs",
                lags.len(),
                array.pairs().len()
            )));
        }
        Ok(TimeScorer { lags, array: array.clone(), steering, counter: EvalCounter::default() })
    }

    pub fn lags(&self) -> &[LagVector] {
        &self.lags
    }
}

impl PointScorer for TimeScorer {
    fn score(&self, u: &Point3) -> f64 {
        let fs = self.array.sample_rate();
        let mut total = 0.0;
        for (pair, lag) in self.array.pairs().iter().zip(&self.lags) {
            let k = (self.steering.tdoa(u, *pair, &self.array) * fs).round() as i64;
            // Lags beyond the vector contribute nothing; they only occur when
            // the frame is shorter than the pair's TDOA range.
            total += lag.at(k).unwrap_or(0.0);
        }
        self.counter.record(1, self.lags.len() as u64);
        total
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

/// Frequency-domain SRP from per-pair weighted cross-spectra.
#[derive(Debug)]
pub struct FreqScorer {
    gccs: Vec<SpectralGcc>,
    array: MicArray,
    steering: Steering,
    bins: std::ops::Range<usize>,
    bin_width: f64,
    counter: EvalCounter,
}

impl FreqScorer {
    pub fn new(gccs: Vec<SpectralGcc>, array: &MicArray, steering: Steering) -> Result<Self> {
        if gccs.len() != array.pairs().len() {
            return Err(Error::invalid(format!(
                "{} cross-spectra for {} microphone pairs",
                gccs.len(),
                array.pairs().len()
            )));
        }
        let first = &gccs[0];
        if gccs
            .iter()
            .any(|g| g.len() != first.len() || g.band != first.band || g.sample_rate != first.sample_rate)
        {
            return Err(Error::invalid("cross-spectra do not share analysis frequencies"));
        }
        let bins = first.steering_bins();
        if bins.is_empty() {
            log::warn!("analysis band contains no bins; the map will be all zero");
        }
        Ok(FreqScorer {
            bin_width: first.bin_width(),
            bins,
            gccs,
            array: array.clone(),
            steering,
            counter: EvalCounter::default(),
        })
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn band(&self) -> Band {
        self.gccs[0].band
    }

    /// Per-bin contributions `Re[G(f) e^{j 2 pi f tau}]` of one pair.
    fn pair_terms(&self, gcc: &SpectralGcc, tau: f64, mut sink: impl FnMut(f64)) {
        let w = 2.0 * std::f64::consts::PI * self.bin_width * tau;
        let step = Complex64::from_polar(1.0, w);
        let mut phasor = Complex64::from_polar(1.0, w * self.bins.start as f64);
        for g in &gcc.bins[self.bins.clone()] {
            sink(g.re * phasor.re - g.im * phasor.im);
            phasor *= step;
        }
    }
}

impl PointScorer for FreqScorer {
    fn score(&self, u: &Point3) -> f64 {
        let mut total = 0.0;
        for (pair, gcc) in self.array.pairs().iter().zip(&self.gccs) {
            let tau = self.steering.tdoa(u, *pair, &self.array);
            let mut s = 0.0;
            self.pair_terms(gcc, tau, |v| s += v);
            total += s;
        }
        self.counter.record(1, (self.gccs.len() * self.bins.len()) as u64);
        total
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

fn map_from_scorer(scorer: &dyn PointScorer, grid: &CandidateGrid, domain: MapDomain, band: Option<Band>) -> SrpMap {
    SrpMap {
        scores: scorer.score_all(&grid.points),
        points: grid.points.clone(),
        kind: grid.kind,
        shape: grid.shape,
        domain,
        band,
        frame: None,
    }
}

/// Time-domain map over a candidate grid.
pub fn srp_time_map(lags: &[LagVector], grid: &CandidateGrid, array: &MicArray) -> Result<SrpMap> {
    let scorer = TimeScorer::new(lags.to_vec(), array, Steering::for_grid(grid.kind))?;
    Ok(srp_time_map_with(&scorer, grid))
}

pub fn srp_time_map_with(scorer: &TimeScorer, grid: &CandidateGrid) -> SrpMap {
    map_from_scorer(scorer, grid, MapDomain::Time, None)
}

/// Frequency-domain map over a candidate grid.
pub fn srp_freq_map(gccs: &[SpectralGcc], grid: &CandidateGrid, array: &MicArray) -> Result<SrpMap> {
    let scorer = FreqScorer::new(gccs.to_vec(), array, Steering::for_grid(grid.kind))?;
    Ok(srp_freq_map_with(&scorer, grid))
}

pub fn srp_freq_map_with(scorer: &FreqScorer, grid: &CandidateGrid) -> SrpMap {
    map_from_scorer(scorer, grid, MapDomain::Frequency, Some(scorer.band()))
}

/// Per-pair correlation features in either domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Lags(Vec<LagVector>),
    Spectra(Vec<SpectralGcc>),
}

impl Features {
    pub fn domain(&self) -> MapDomain {
        match self {
            Features::Lags(_) => MapDomain::Time,
            Features::Spectra(_) => MapDomain::Frequency,
        }
    }

    /// Lag vectors, converting spectra with the inverse transform.
    pub fn to_lags(&self) -> Vec<LagVector> {
        match self {
            Features::Lags(l) => l.clone(),
            Features::Spectra(s) => s.iter().map(crate::features::temporal_gcc).collect(),
        }
    }

    /// Point scorer in the features' own domain.
    pub fn scorer(&self, array: &MicArray, steering: Steering) -> Result<Box<dyn PointScorer>> {
        Ok(match self {
            Features::Lags(l) => Box::new(TimeScorer::new(l.clone(), array, steering)?),
            Features::Spectra(s) => Box::new(FreqScorer::new(s.clone(), array, steering)?),
        })
    }

    /// Time- or frequency-domain map over `grid`.
    pub fn map(&self, grid: &CandidateGrid, array: &MicArray) -> Result<SrpMap> {
        match self {
            Features::Lags(l) => srp_time_map(l, grid, array),
            Features::Spectra(s) => srp_freq_map(s, grid, array),
        }
    }
}

/// TDOA interval spanned by a volume for one pair, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaBounds {
    pub min: f64,
    pub max: f64,
}

/// Whether the ray `origin + t * dir, t >= 0` meets the box.
fn ray_hits_box(origin: Point3, dir: Point3, volume: &Volume) -> bool {
    let (lo, hi) = (volume.min(), volume.max());
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let (o, d) = (origin.axis(a), dir.axis(a));
        if d.abs() < 1e-300 {
            if o < lo.axis(a) || o > hi.axis(a) {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo.axis(a) - o) / d, (hi.axis(a) - o) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Parameters `t` where `|p(t) - a| - |p(t) - b|` is stationary on the line
/// `p(t) = origin + t * dir` (unit `dir`). With `t_x`, `h_x` the foot and
/// distance of `x` from the line the condition reduces to
/// `(t - t_a) h_b = +-(t - t_b) h_a`.
fn line_critical_points(origin: Point3, dir: Point3, a: Point3, b: Point3) -> impl Iterator<Item = f64> {
    let foot = |x: Point3| {
        let t = (x - origin).dot(&dir);
        (t, (x - origin - dir * t).norm())
    };
    let ((ta, ha), (tb, hb)) = (foot(a), foot(b));
    let eps = 1e-12 * (ha + hb);
    [(hb - ha, ta * hb - tb * ha), (hb + ha, ta * hb + tb * ha)]
        .into_iter()
        .filter(move |(den, _)| den.abs() > eps)
        .map(|(den, num)| num / den)
}

/// Points of the box where the TDOA of `(a, b)` can take its extremes
/// besides the vertices: stationary points inside edges and faces. The
/// function has no stationary points in the open interior off the baseline.
fn box_critical_points(volume: &Volume, a: Point3, b: Point3) -> Vec<Point3> {
    let (lo, hi) = (volume.min(), volume.max());
    let mut out = Vec::new();
    for k in 0..3 {
        let dir = Point3::ORIGIN.with_axis(k, 1.0);
        let len = hi.axis(k) - lo.axis(k);
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        // Edges along axis k.
        if len > 0.0 {
            for (ci, cj) in [(lo.axis(i), lo.axis(j)), (lo.axis(i), hi.axis(j)), (hi.axis(i), lo.axis(j)), (hi.axis(i), hi.axis(j))] {
                let origin = lo.with_axis(i, ci).with_axis(j, cj);
                for t in line_critical_points(origin, dir, a, b) {
                    if (0.0..=len).contains(&t) {
                        out.push(origin + dir * t);
                    }
                }
            }
        }
        // Faces normal to axis k: in-plane stationary points lie on the line
        // through the projections of both microphones.
        for c in [lo.axis(k), hi.axis(k)] {
            let (pa, pb) = (a.with_axis(k, c), b.with_axis(k, c));
            let span = pb - pa;
            let candidates: Vec<Point3> = match span.normalized() {
                Some(w) if span.norm() > 1e-12 => line_critical_points(pa, w, a, b).map(|t| pa + w * t).collect(),
                _ => vec![pa],
            };
            out.extend(candidates.into_iter().filter(|p| volume.contains(p, 1e-12)).map(|p| p.with_axis(k, c)));
        }
    }
    out
}

/// Exact TDOA range of a cuboid, widened by `guard` samples per side and
/// clamped to the pair's physical range.
///
/// Extremes come from the eight vertices, stationary points on edges and
/// faces, and the baseline rays beyond each microphone, where the global
/// extremes `+-|v_l - v_m| / c` are attained.
pub fn tdoa_bounds(volume: &Volume, pair: MicPair, array: &MicArray, guard: f64) -> TdoaBounds {
    let limit = max_tdoa_unchecked(pair, array);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let p = array.positions();
    let (min, max) = (volume.min(), volume.max());
    let clamp = |u: Point3| Point3::new(u.x.clamp(min.x, max.x), u.y.clamp(min.y, max.y), u.z.clamp(min.z, max.z));
    for v in volume.vertices().into_iter().chain(box_critical_points(volume, p[pair.l], p[pair.m])) {
        let t = tdoa_unchecked(&clamp(v), pair, array);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    let baseline = p[pair.m] - p[pair.l];
    if ray_hits_box(p[pair.m], baseline, volume) {
        hi = limit;
    }
    if ray_hits_box(p[pair.l], -baseline, volume) {
        lo = -limit;
    }
    let g = guard / array.sample_rate();
    TdoaBounds { min: (lo - g).max(-limit), max: (hi + g).min(limit) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Sum,
    Mean,
    Max,
}

/// Volumetric SRP over a volume grid from lag vectors.
pub fn vsrp_map(
    lags: &[LagVector],
    volumes: &VolumeGrid,
    array: &MicArray,
    pooling: Pooling,
    guard: f64,
) -> Result<SrpMap> {
    let scorer = VolumeScorer::new(lags.to_vec(), array, pooling, guard)?;
    Ok(vsrp_map_with(&scorer, volumes))
}

pub fn vsrp_map_with(scorer: &VolumeScorer, volumes: &VolumeGrid) -> SrpMap {
    SrpMap {
        scores: scorer.score_volumes(&volumes.volumes),
        points: volumes.centers(),
        kind: GridKind::Cartesian3d,
        shape: None,
        domain: MapDomain::Volumetric,
        band: None,
        frame: None,
    }
}

/// Pools lag values over the TDOA interval of each volume.
#[derive(Debug)]
pub struct VolumeScorer {
    lags: Vec<LagVector>,
    array: MicArray,
    pooling: Pooling,
    guard: f64,
    counter: EvalCounter,
}

impl VolumeScorer {
    pub fn new(lags: Vec<LagVector>, array: &MicArray, pooling: Pooling, guard: f64) -> Result<Self> {
        if lags.len() != array.pairs().len() {
            return Err(Error::invalid("one lag vector per microphone pair is required"));
        }
        if !(guard >= 0.0 && guard.is_finite()) {
            return Err(Error::invalid("guard must be non-negative"));
        }
        Ok(VolumeScorer { lags, array: array.clone(), pooling, guard, counter: EvalCounter::default() })
    }

    pub fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    pub fn score_volume(&self, volume: &Volume) -> f64 {
        let fs = self.array.sample_rate();
        let mut total = 0.0;
        let mut pooled = 0u64;
        for (pair, lag) in self.array.pairs().iter().zip(&self.lags) {
            let b = tdoa_bounds(volume, *pair, &self.array, self.guard);
            let k = lag.max_lag();
            let lo = ((b.min * fs).round() as i64).max(-k);
            let hi = ((b.max * fs).round() as i64).min(k);
            if lo > hi {
                continue;
            }
            let values = &lag.values[(lo + k) as usize..=(hi + k) as usize];
            pooled += values.len() as u64;
            total += match self.pooling {
                Pooling::Sum => values.iter().fold(0.0, |a, v| a + v),
                Pooling::Mean => values.iter().fold(0.0, |a, v| a + v) / values.len() as f64,
                Pooling::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
        }
        self.counter.record(1, pooled);
        total
    }

    pub fn score_volumes(&self, volumes: &[Volume]) -> Vec<f64> {
        volumes.par_iter().map(|v| self.score_volume(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCombinator {
    #[default]
    Sum,
    Product,
    Hamacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqCombinator {
    #[default]
    Sum,
    Product,
}

/// Weighted SRP settings. Empty weight lists mean unit weights; a pair
/// weight of `inf` (written `"inf"` in JSON) drops the pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsrpConfig {
    pub pair_combinator: PairCombinator,
    pub freq_combinator: FreqCombinator,
    #[serde(serialize_with = "ser_weights", deserialize_with = "de_weights")]
    pub pair_weights: Vec<f64>,
    #[serde(serialize_with = "ser_weights", deserialize_with = "de_weights")]
    pub freq_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightRepr {
    Num(f64),
    Text(String),
}

fn ser_weights<S: Serializer>(w: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let repr: Vec<WeightRepr> = w
        .iter()
        .map(|v| if v.is_infinite() { WeightRepr::Text("inf".into()) } else { WeightRepr::Num(*v) })
        .collect();
    repr.serialize(s)
}

fn de_weights<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let repr = Vec::<WeightRepr>::deserialize(d)?;
    repr.into_iter()
        .map(|r| match r {
            WeightRepr::Num(v) => Ok(v),
            WeightRepr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            WeightRepr::Text(t) => Err(serde::de::Error::custom(format!("invalid weight {t:?}"))),
        })
        .collect()
}

/// Per-pair, per-bin steered values for every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFreqScores {
    pub num_pairs: usize,
    pub num_bins: usize,
    pub num_points: usize,
    /// Layout `[pair][bin][point]`.
    pub data: Vec<f64>,
}

impl PairFreqScores {
    pub fn get(&self, pair: usize, bin: usize) -> &[f64] {
        let start = (pair * self.num_bins + bin) * self.num_points;
        &self.data[start..start + self.num_points]
    }

    /// Same tensor without pair `index`.
    pub fn without_pair(&self, index: usize) -> PairFreqScores {
        let block = self.num_bins * self.num_points;
        let mut data = self.data.clone();
        data.drain(index * block..(index + 1) * block);
        PairFreqScores { num_pairs: self.num_pairs - 1, data, ..*self }
    }
}

/// Builds the tensor consumed by [`wsrp_map`]; memory is
/// `P * |F| * G` values.
pub fn pairwise_freq_scores(gccs: &[SpectralGcc], grid: &CandidateGrid, array: &MicArray) -> Result<PairFreqScores> {
    let scorer = FreqScorer::new(gccs.to_vec(), array, Steering::for_grid(grid.kind))?;
    let nb = scorer.num_bins();
    let n = grid.len();
    let per_point: Vec<Vec<f64>> = grid
        .points
        .par_iter()
        .map(|u| {
            let mut row = Vec::with_capacity(scorer.gccs.len() * nb);
            for (pair, gcc) in array.pairs().iter().zip(&scorer.gccs) {
                let tau = scorer.steering.tdoa(u, *pair, array);
                scorer.pair_terms(gcc, tau, |v| row.push(v));
            }
            row
        })
        .collect();
    let p = scorer.gccs.len();
    let mut data = vec![0.0; p * nb * n];
    for (i, row) in per_point.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            data[j * n + i] = *v;
        }
    }
    Ok(PairFreqScores { num_pairs: p, num_bins: nb, num_points: n, data })
}

/// Min-max normalization to [0, 1]; constant maps become 1 when positive
/// and 0 otherwise.
fn normalize01(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        values.iter().map(|v| (v - lo) / span).collect()
    } else {
        let c = if hi > 0.0 { 1.0 } else { 0.0 };
        vec![c; values.len()]
    }
}

/// Hamacher product t-norm.
pub fn hamacher(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        a * b / (a + b - a * b)
    }
}

/// Weighted combination of pairwise, per-frequency scores.
///
/// Frequency values are divided by `k_f` and combined per pair; each pair
/// map is divided by `k_lm` and the pair maps are combined. Product and
/// Hamacher combinators act on maps min-max normalized to [0, 1].
pub fn wsrp_map(scores: &PairFreqScores, grid: &CandidateGrid, cfg: &WsrpConfig) -> Result<SrpMap> {
    let (p, nb, n) = (scores.num_pairs, scores.num_bins, scores.num_points);
    if n != grid.len() {
        return Err(Error::invalid("score tensor does not match the grid"));
    }
    let pair_w = weights_or_unit(&cfg.pair_weights, p, "pair")?;
    let freq_w = weights_or_unit(&cfg.freq_weights, nb, "frequency")?;
    if freq_w.iter().any(|w| w.is_infinite()) {
        return Err(Error::invalid("frequency weights must be finite"));
    }

    let mut pair_maps = Vec::with_capacity(p);
    for (pi, &kp) in pair_w.iter().enumerate() {
        if kp.is_infinite() {
            continue;
        }
        let combined = match cfg.freq_combinator {
            FreqCombinator::Sum => {
                let mut acc = vec![0.0; n];
                for (f, &kf) in freq_w.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(scores.get(pi, f)) {
                        *a += v / kf;
                    }
                }
                acc
            }
            FreqCombinator::Product => {
                let mut acc = vec![1.0; n];
                for (f, &kf) in freq_w.iter().enumerate() {
                    let scaled: Vec<f64> = scores.get(pi, f).iter().map(|v| v / kf).collect();
                    for (a, v) in acc.iter_mut().zip(normalize01(&scaled)) {
                        *a *= v;
                    }
                }
                acc
            }
        };
        pair_maps.push(combined.into_iter().map(|v| v / kp).collect::<Vec<f64>>());
    }
    if pair_maps.is_empty() {
        return Err(Error::invalid("every microphone pair is excluded"));
    }

    let global = match cfg.pair_combinator {
        PairCombinator::Sum => {
            let mut acc = vec![0.0; n];
            for m in &pair_maps {
                for (a, v) in acc.iter_mut().zip(m) {
                    *a += v;
                }
            }
            acc
        }
        PairCombinator::Product => {
            let mut acc = vec![1.0; n];
            for m in &pair_maps {
                for (a, v) in acc.iter_mut().zip(normalize01(m)) {
                    *a *= v;
                }
            }
            acc
        }
        PairCombinator::Hamacher => {
            let mut maps = pair_maps.iter().map(|m| normalize01(m));
            let mut acc = maps.next().expect("at least one pair");
            for m in maps {
                for (a, v) in acc.iter_mut().zip(m) {
                    *a = hamacher(*a, v);
                }
            }
            acc
        }
    };
    Ok(SrpMap {
        points: grid.points.clone(),
        scores: global,
        kind: grid.kind,
        shape: grid.shape,
        domain: MapDomain::Weighted,
        band: None,
        frame: None,
    })
}

fn weights_or_unit(w: &[f64], n: usize, what: &str) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Ok(vec![1.0; n]);
    }
    if w.len() != n {
        return Err(Error::invalid(format!("{} {what} weights for {n} entries", w.len())));
    }
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid(format!("{what} weights must be positive")));
    }
    Ok(w.to_vec())
}
