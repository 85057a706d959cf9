//! Several simultaneous sources: iterated localize-and-cancel with a
//! TDOA-domain notch, and minimum-distance peak picking on a single map.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::LagVector;
use crate::geometry::{MicArray, Point3};
use crate::grids::{bounding_region, CandidateGrid};
use crate::search::{argmax_search, refine_search, src_search, CellScorer, SearchConfig, SearchMode, SearchResult};
use crate::srp::{Features, SrpMap, Steering};

/// Default notch half-width in samples.
pub const DEFAULT_NOTCH_SAMPLES: f64 = 2.0;

/// Number of sources to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCount {
    Fixed(usize),
    /// Keep going while peaks stay above `score_floor` times the first.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiConfig {
    pub n_sources: SourceCount,
    /// Notch width, seconds; `None` means two samples.
    pub notch_sigma: Option<f64>,
    pub min_source_distance: f64,
    pub score_floor: f64,
    /// Upper bound on sources found in auto mode.
    pub max_sources: usize,
}

impl Default for MultiConfig {
    fn default() -> Self {
        MultiConfig {
            n_sources: SourceCount::Fixed(1),
            notch_sigma: None,
            min_source_distance: 0.5,
            score_floor: 0.4,
            max_sources: 4,
        }
    }
}

impl MultiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == SourceCount::Fixed(0) {
            return Err(Error::config("n_sources must be at least 1"));
        }
        if let Some(s) = self.notch_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("notch_sigma must be positive"));
            }
        }
        if !(self.min_source_distance >= 0.0) {
            return Err(Error::config("min_source_distance must be non-negative"));
        }
        if !(self.score_floor.is_finite()) || self.max_sources == 0 {
            return Err(Error::config("score_floor must be finite and max_sources at least 1"));
        }
        Ok(())
    }

    pub fn sigma(&self, sample_rate: f64) -> f64 {
        self.notch_sigma.unwrap_or(DEFAULT_NOTCH_SAMPLES / sample_rate)
    }

    fn limit(&self) -> usize {
        match self.n_sources {
            SourceCount::Fixed(n) => n,
            SourceCount::Auto => self.max_sources,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub position: Point3,
    pub score: f64,
}

/// Source estimates in non-increasing score order; serializes as
/// `[{"x":..,"y":..,"z":..,"score":..}, ..]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateSet {
    pub estimates: Vec<Estimate>,
}

#[derive(Serialize, Deserialize)]
struct EstimateRow {
    x: f64,
    y: f64,
    z: f64,
    score: f64,
}

impl Serialize for EstimateSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.estimates.len()))?;
        for e in &self.estimates {
            let p = e.position;
            seq.serialize_element(&EstimateRow { x: p.x, y: p.y, z: p.z, score: e.score })?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EstimateSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<EstimateRow>::deserialize(d)?;
        Ok(EstimateSet {
            estimates: rows
                .into_iter()
                .map(|r| Estimate { position: Point3::new(r.x, r.y, r.z), score: r.score })
                .collect(),
        })
    }
}

impl EstimateSet {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.estimates.iter().map(|e| e.position).collect()
    }

    fn sort(&mut self) {
        self.estimates.sort_by(|a, b| b.score.total_cmp(&a.score));
    }
}

/// Multiplies a lag vector by the inverted Gaussian
/// `1 - exp(-(tau - tdoa_hat)^2 / (2 sigma^2))`.
pub fn deemphasize(lag: &LagVector, tdoa_hat: f64, sigma: f64) -> Result<LagVector> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("notch sigma must be positive"));
    }
    let fs = lag.sample_rate;
    if !tdoa_hat.is_finite() || (tdoa_hat * fs).abs() > lag.max_lag() as f64 {
        return Err(Error::invalid(format!("TDOA {tdoa_hat} s lies outside the lag range")));
    }
    let values = lag
        .lags()
        .zip(&lag.values)
        .map(|(k, v)| {
            let d = k as f64 / fs - tdoa_hat;
            v * -(-d * d / (2.0 * sigma * sigma)).exp_m1()
        })
        .collect();
    Ok(LagVector { values, sample_rate: fs })
}

/// Notches every pair's features at the TDOAs of `estimate`. Spectral
/// features go through the lag domain and back into their band.
pub fn cancel_source(features: &Features, estimate: &Point3, array: &MicArray, steering: Steering, sigma: f64) -> Result<Features> {
    let notch = |lags: &[LagVector]| -> Result<Vec<LagVector>> {
        array
            .pairs()
            .iter()
            .zip(lags)
            .map(|(pair, lag)| deemphasize(lag, steering.tdoa(estimate, *pair, array), sigma))
            .collect()
    };
    Ok(match features {
        Features::Lags(l) => Features::Lags(notch(l)?),
        Features::Spectra(s) => {
            let band = s[0].band;
            let notched = notch(&features.to_lags())?;
            Features::Spectra(notched.iter().map(|l| l.to_spectral(band)).collect())
        }
    })
}

/// One localization pass: exhaustive search over the map (skipping
/// candidates within `min_distance` of earlier estimates) or an iterative
/// search over the grid's bounding box.
pub fn search_features(
    features: &Features,
    grid: &CandidateGrid,
    array: &MicArray,
    search: &SearchConfig,
    previous: &[Point3],
    min_distance: f64,
) -> Result<SearchResult> {
    let steering = Steering::for_grid(grid.kind);
    match search.mode {
        SearchMode::Exhaustive => {
            let mut map = features.map(grid, array)?;
            if !previous.is_empty() && min_distance > 0.0 {
                for (p, s) in map.points.iter().zip(map.scores.iter_mut()) {
                    if previous.iter().any(|q| p.distance(q) < min_distance) {
                        *s = f64::NEG_INFINITY;
                    }
                }
            }
            argmax_search(&map)
        }
        SearchMode::Refine | SearchMode::Src => {
            let region = bounding_region(&grid.points, 0.0)?;
            let scorer = features.scorer(array, steering)?;
            if search.mode == SearchMode::Refine {
                refine_search(CellScorer::Centers(scorer.as_ref()), &region, search)
            } else {
                src_search(scorer.as_ref(), &region, search)
            }
        }
    }
}

/// Localize, notch the estimate's TDOAs out of every pair, repeat.
pub fn localize_multi(
    features: &Features,
    grid: &CandidateGrid,
    array: &MicArray,
    cfg: &MultiConfig,
    search: &SearchConfig,
) -> Result<EstimateSet> {
    cfg.validate()?;
    let limit = cfg.limit();
    if limit >= 3 {
        log::warn!("cancellation residue grows quickly beyond two sources; later estimates are unreliable");
    }
    let steering = Steering::for_grid(grid.kind);
    let sigma = cfg.sigma(array.sample_rate());
    let mut current = features.clone();
    let mut out = EstimateSet::default();
    while out.len() < limit {
        let previous = out.positions();
        let r = search_features(&current, grid, array, search, &previous, cfg.min_source_distance)?;
        if !r.score.is_finite() {
            log::warn!("no admissible candidate left after {} sources", out.len());
            break;
        }
        if cfg.n_sources == SourceCount::Auto {
            let accept = match out.estimates.first() {
                None => r.score > 0.0,
                Some(first) => r.score >= cfg.score_floor * first.score,
            };
            if !accept {
                if out.is_empty() {
                    log::warn!("no source above the score floor");
                }
                break;
            }
        }
        out.estimates.push(Estimate { position: r.estimate, score: r.score });
        if out.len() < limit {
            current = cancel_source(&current, &r.estimate, array, steering, sigma)?;
        }
    }
    out.sort();
    Ok(out)
}

/// Greedy descending-score selection of up to `n` map peaks at least
/// `min_distance` apart.
pub fn pick_peaks(map: &SrpMap, n: usize, min_distance: f64) -> Result<EstimateSet> {
    if n == 0 {
        return Err(Error::invalid("at least one peak must be requested"));
    }
    let mut order: Vec<usize> = (0..map.len()).collect();
    order.sort_by(|&a, &b| map.scores[b].total_cmp(&map.scores[a]).then(a.cmp(&b)));
    let mut out = EstimateSet::default();
    for i in order {
        if out.len() == n {
            break;
        }
        let p = map.points[i];
        if out.estimates.iter().all(|e| e.position.distance(&p) >= min_distance) {
            out.estimates.push(Estimate { position: p, score: map.scores[i] });
        }
    }
    if out.len() < n {
        log::warn!("only {} of {n} peaks satisfy the minimum distance", out.len());
    }
    Ok(out)
}
