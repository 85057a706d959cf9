//! Maximum search over SRP maps: exhaustive argmax, coarse-to-fine
//! subdivision and stochastic region contraction (SRC).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grids::{bounding_region, sample_boundary_with, subdivide, CandidateGrid, Volume};
use crate::srp::{MapDomain, PointScorer, SrpMap, VolumeScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Exhaustive,
    Refine,
    Src,
}

/// Where SRC draws its first candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrcInit {
    /// On the surface of the search region.
    Boundary,
    /// Uniformly inside the search region.
    #[default]
    Volume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub max_iters: usize,
    /// Candidates drawn per SRC iteration.
    pub points_per_iter: usize,
    /// Cells (refine) or samples (SRC) kept per iteration.
    pub top_k: usize,
    /// Stop once every region edge is below this length, meters.
    pub min_region_edge: f64,
    pub seed: u64,
    /// Inflation of the SRC bounding region around the kept samples, meters.
    pub margin: f64,
    pub src_init: SrcInit,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::Exhaustive,
            max_iters: 20,
            points_per_iter: 100,
            top_k: 10,
            min_region_edge: 0.05,
            seed: 0,
            margin: 0.0,
            src_init: SrcInit::Volume,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.points_per_iter == 0 || self.top_k == 0 {
            return Err(Error::config("search counts must be at least 1"));
        }
        if !(self.min_region_edge > 0.0 && self.min_region_edge.is_finite()) {
            return Err(Error::config("min_region_edge must be positive"));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::config("margin must be non-negative"));
        }
        Ok(())
    }
}

/// One iteration of an iterative search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub region_min: [f64; 3],
    pub region_max: [f64; 3],
    pub best: [f64; 3],
    pub best_score: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub estimate: Point3,
    pub score: f64,
    /// Candidates scored.
    pub evaluations: u64,
    /// Elementary pair or pair-bin projections performed.
    pub kernel_evaluations: u64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    /// Search trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.trace {
            out.push_str(&serde_json::to_string(t).expect("trace entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Maximum of a map; ties go to the lowest index.
pub fn argmax_search(map: &SrpMap) -> Result<SearchResult> {
    let i = map.argmax().ok_or_else(|| Error::invalid("cannot search an empty map"))?;
    Ok(SearchResult {
        estimate: map.points[i],
        score: map.scores[i],
        evaluations: map.len() as u64,
        kernel_evaluations: 0,
        iterations: 1,
        trace: Vec::new(),
    })
}

/// What a coarse-to-fine search scores for each cell.
#[derive(Clone, Copy)]
pub enum CellScorer<'a> {
    /// Point SRP at the cell center.
    Centers(&'a dyn PointScorer),
    /// Pooled volumetric SRP over the whole cell.
    Volumes(&'a VolumeScorer),
}

impl CellScorer<'_> {
    fn score(&self, cells: &[Volume]) -> Vec<f64> {
        match self {
            CellScorer::Centers(s) => {
                let centers: Vec<Point3> = cells.iter().map(|c| c.center).collect();
                s.score_all(&centers)
            }
            CellScorer::Volumes(s) => s.score_volumes(cells),
        }
    }

    fn counts(&self) -> (u64, u64) {
        let c = match self {
            CellScorer::Centers(s) => s.counter(),
            CellScorer::Volumes(s) => s.counter(),
        };
        (c.points(), c.kernels())
    }
}

/// Indices of the `k` highest scores, best first; ties keep index order.
fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn trace_entry(iteration: usize, region: &Volume, best: (Point3, f64), evaluations: u64) -> TraceEntry {
    TraceEntry {
        iteration,
        region_min: region.min().to_array(),
        region_max: region.max().to_array(),
        best: best.0.to_array(),
        best_score: best.1,
        evaluations,
    }
}

/// Coarse-to-fine search state: every retained cell is halved along each
/// axis of positive extent, the children are scored and the `top_k` best
/// are kept. Finishes after `max_iters` rounds or when every retained edge
/// is below `min_region_edge`.
#[derive(Debug, Clone)]
pub struct RefineState {
    cfg: SearchConfig,
    cells: Vec<Volume>,
    best: Option<(Point3, f64)>,
    iteration: usize,
    evaluations: u64,
    trace: Vec<TraceEntry>,
    finished: bool,
}

impl RefineState {
    pub fn new(region: &Volume, cfg: &SearchConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(RefineState {
            cfg: cfg.clone(),
            cells: vec![*region],
            best: None,
            iteration: 0,
            evaluations: 0,
            trace: Vec::new(),
            finished: false,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn best(&self) -> Option<(Point3, f64)> {
        self.best
    }

    /// Children of the retained cells, to be scored next.
    pub fn candidates(&self) -> Result<Vec<Volume>> {
        if self.finished {
            return Err(Error::invalid("refinement has already finished"));
        }
        let mut children = Vec::with_capacity(self.cells.len() * 8);
        for cell in &self.cells {
            let e = cell.edges();
            let factors = [0, 1, 2].map(|a| if e.axis(a) > 0.0 { 2 } else { 1 });
            children.extend(subdivide(cell, factors)?);
        }
        Ok(children)
    }

    pub fn absorb(&mut self, children: &[Volume], scores: &[f64]) -> Result<()> {
        if children.len() != scores.len() || children.is_empty() {
            return Err(Error::invalid("scores must align with a non-empty cell set"));
        }
        self.iteration += 1;
        self.evaluations += children.len() as u64;
        let keep = top_indices(scores, self.cfg.top_k);
        let top = (children[keep[0]].center, scores[keep[0]]);
        if self.best.map_or(true, |b| top.1 > b.1) {
            self.best = Some(top);
        }
        self.cells = keep.iter().map(|&i| children[i]).collect();
        let corners: Vec<Point3> = self.cells.iter().flat_map(|c| [c.min(), c.max()]).collect();
        let hull = bounding_region(&corners, 0.0)?;
        self.trace.push(trace_entry(self.iteration, &hull, top, self.evaluations));
        let largest = self
            .cells
            .iter()
            .map(|c| {
                let e = c.edges();
                e.x.max(e.y).max(e.z)
            })
            .fold(0.0, f64::max);
        if self.iteration >= self.cfg.max_iters || largest < self.cfg.min_region_edge {
            self.finished = true;
        }
        Ok(())
    }

    pub fn result(&self, kernel_evaluations: u64) -> Result<SearchResult> {
        let (estimate, score) = self.best.ok_or_else(|| Error::invalid("no refinement round has run"))?;
        Ok(SearchResult {
            estimate,
            score,
            evaluations: self.evaluations,
            kernel_evaluations,
            iterations: self.iteration,
            trace: self.trace.clone(),
        })
    }
}

/// Coarse-to-fine search over `region`; see [`RefineState`].
pub fn refine_search(scorer: CellScorer<'_>, region: &Volume, cfg: &SearchConfig) -> Result<SearchResult> {
    let mut state = RefineState::new(region, cfg)?;
    let k0 = scorer.counts().1;
    while !state.is_finished() {
        let cells = state.candidates()?;
        let scores = scorer.score(&cells);
        state.absorb(&cells, &scores)?;
    }
    state.result(scorer.counts().1 - k0)
}

/// Stochastic region contraction as an explicit state machine so callers
/// can interleave their own scoring.
///
/// Iteration 0 samples the initial region's surface or interior according
/// to `src_init`; later iterations sample the current region uniformly. After scoring, the
/// region becomes the bounding box of the `top_k` samples (inflated by
/// `margin`) intersected with the previous region, so its diameter never
/// grows.
#[derive(Debug, Clone)]
pub struct SrcState {
    cfg: SearchConfig,
    region: Volume,
    rng: ChaCha8Rng,
    iteration: usize,
    best: Option<(Point3, f64)>,
    trace: Vec<TraceEntry>,
    evaluations: u64,
    finished: bool,
}

impl SrcState {
    pub fn new(region: &Volume, cfg: &SearchConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SrcState {
            cfg: cfg.clone(),
            region: *region,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            iteration: 0,
            best: None,
            trace: Vec::new(),
            evaluations: 0,
            finished: false,
        })
    }

    pub fn region(&self) -> &Volume {
        &self.region
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn best(&self) -> Option<(Point3, f64)> {
        self.best
    }

    /// Candidates for the current iteration.
    pub fn candidates(&mut self) -> Result<CandidateGrid> {
        if self.finished {
            return Err(Error::invalid("SRC search has already finished"));
        }
        let n = self.cfg.points_per_iter;
        if self.iteration == 0 && self.cfg.src_init == SrcInit::Boundary {
            sample_boundary_with(&self.region, n, &mut self.rng)
        } else {
            let points = (0..n).map(|_| self.region.sample_interior(&mut self.rng)).collect();
            CandidateGrid::from_points(points)
        }
    }

    /// Feeds back the scores of the last `candidates()` call.
    pub fn absorb(&mut self, points: &[Point3], scores: &[f64]) -> Result<()> {
        if points.len() != scores.len() || points.is_empty() {
            return Err(Error::invalid("scores must align with a non-empty candidate set"));
        }
        let keep = top_indices(scores, self.cfg.top_k);
        let top = (points[keep[0]], scores[keep[0]]);
        if self.best.map_or(true, |b| top.1 > b.1) {
            self.best = Some(top);
        }
        self.evaluations += points.len() as u64;
        let kept: Vec<Point3> = keep.iter().map(|&i| points[i]).collect();
        self.region = bounding_region(&kept, self.cfg.margin)?.clip_to(&self.region);
        self.iteration += 1;
        self.trace.push(trace_entry(self.iteration, &self.region, top, self.evaluations));
        let e = self.region.edges();
        if self.iteration >= self.cfg.max_iters || e.x.max(e.y).max(e.z) < self.cfg.min_region_edge {
            self.finished = true;
        }
        Ok(())
    }

    pub fn result(&self, kernel_evaluations: u64) -> Result<SearchResult> {
        let (estimate, score) = self.best.ok_or_else(|| Error::invalid("no SRC iteration has run"))?;
        Ok(SearchResult {
            estimate,
            score,
            evaluations: self.evaluations,
            kernel_evaluations,
            iterations: self.iteration,
            trace: self.trace.clone(),
        })
    }
}

/// Stochastic region contraction over `region`; returns the best sample
/// seen across all iterations.
pub fn src_search(scorer: &dyn PointScorer, region: &Volume, cfg: &SearchConfig) -> Result<SearchResult> {
    let mut state = SrcState::new(region, cfg)?;
    let k0 = scorer.counter().kernels();
    while !state.is_finished() {
        let grid = state.candidates()?;
        let scores = scorer.score_all(&grid.points);
        state.absorb(&grid.points, &scores)?;
    }
    state.result(scorer.counter().kernels() - k0)
}

/// Real multiplications and divisions of one SRP localization with `m`
/// microphones, frame length `l` and `g` candidates.
pub fn complexity_estimate(m: usize, l: usize, g: usize, domain: MapDomain) -> Result<f64> {
    if m < 2 || l == 0 || g == 0 {
        return Err(Error::invalid("complexity needs M >= 2, L >= 1 and G >= 1"));
    }
    let (m, l, g) = (m as f64, l as f64, g as f64);
    let p = m * (m - 1.0) / 2.0;
    let common = m * l * l.log2() + p * l;
    match domain {
        MapDomain::Frequency | MapDomain::Weighted => Ok(common + g * p * l),
        MapDomain::Time | MapDomain::Volumetric => Ok(common + g * p),
    }
}
