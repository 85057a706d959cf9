//! Configurable localization pipeline.
//!
//! A run builds an initial candidate grid and the pair features, then loops
//! while the grid is non-empty: build a map on the grid, search it (which may
//! append an estimate), optionally update the features and the grid. Without
//! updaters the loop runs once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{cc_all_pairs, gcc_all_pairs, BandPolicy, Floor, FrameConfig, GccConfig};
use crate::geometry::{MicArray, Point3};
use crate::grids::{cartesian_grid, doa_grid, CandidateGrid, Volume, VolumeGrid};
use crate::multisource::{cancel_source, search_features, Estimate, EstimateSet, MultiConfig, SourceCount};
use crate::search::{argmax_search, RefineState, SearchConfig, SearchMode, SrcState};
use crate::srp::{
    pairwise_freq_scores, vsrp_map, wsrp_map, Features, MapDomain, Pooling, SrpMap, Steering, VolumeScorer,
    WsrpConfig, DEFAULT_GUARD,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum GridConfig {
    /// Regular lattice over the room, spacing in meters. Planar grids sit at
    /// height `plane_z`.
    Cartesian {
        resolution: f64,
        #[serde(default)]
        planar: bool,
        #[serde(default)]
        plane_z: f64,
    },
    /// Azimuth-only directions, resolution in degrees.
    DoaAzimuth { resolution_deg: f64 },
    /// Azimuth-elevation directions, resolutions in degrees.
    DoaAzEl { azimuth_deg: f64, elevation_deg: f64 },
    /// Room split into `counts` congruent cuboids per axis.
    Volumes { counts: [usize; 3] },
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Cartesian { resolution: 0.1, planar: false, plane_z: 0.0 }
    }
}

impl GridConfig {
    pub fn is_doa(&self) -> bool {
        matches!(self, GridConfig::DoaAzimuth { .. } | GridConfig::DoaAzEl { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum FeatureConfig {
    /// Plain cross-correlation.
    Cc,
    GccPhat {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        gamma: Floor,
        #[serde(default)]
        band: BandPolicy,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::GccPhat { beta: 1.0, gamma: Floor::default(), band: BandPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum MapConfig {
    Time,
    Frequency,
    Volumetric {
        #[serde(default)]
        pooling: Pooling,
        #[serde(default = "default_guard")]
        guard: f64,
    },
    Weighted {
        #[serde(default)]
        wsrp: WsrpConfig,
    },
}

fn default_guard() -> f64 {
    DEFAULT_GUARD
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig::Frequency
    }
}

impl MapConfig {
    fn needs_spectra(&self) -> bool {
        matches!(self, MapConfig::Frequency | MapConfig::Weighted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum FeatureUpdater {
    #[default]
    None,
    /// Notch each estimate out of the features and search again.
    Deemphasize {
        #[serde(default)]
        multi: MultiConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridUpdater {
    #[default]
    None,
    /// Stochastic region contraction.
    Contract,
    /// Coarse-to-fine cell subdivision.
    Subdivide,
}

/// Default safety cap on loop iterations.
pub const DEFAULT_MAX_LOOP_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub features: FeatureConfig,
    pub map: MapConfig,
    pub search: SearchConfig,
    pub feature_updater: FeatureUpdater,
    pub grid_updater: GridUpdater,
    pub frame: FrameConfig,
    pub max_loop_iters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: GridConfig::default(),
            features: FeatureConfig::default(),
            map: MapConfig::default(),
            search: SearchConfig::default(),
            feature_updater: FeatureUpdater::None,
            grid_updater: GridUpdater::None,
            frame: FrameConfig::default(),
            max_loop_iters: DEFAULT_MAX_LOOP_ITERS,
        }
    }
}

/// Every incompatibility in `cfg`; empty means the configuration can run.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<String> {
    let mut out = Vec::new();
    let volumetric = matches!(cfg.map, MapConfig::Volumetric { .. });
    let volumes = matches!(cfg.grid, GridConfig::Volumes { .. });
    let multi = matches!(cfg.feature_updater, FeatureUpdater::Deemphasize { .. });

    if cfg.grid.is_doa() && volumetric {
        out.push("DOA grids cannot be combined with volumetric maps".to_string());
    }
    if matches!(cfg.features, FeatureConfig::Cc) && cfg.map.needs_spectra() {
        out.push("cross-correlation features provide lag vectors only; frequency and weighted maps need gcc_phat features".to_string());
    }
    if volumetric && !volumes {
        out.push("volumetric maps need a volumes grid".to_string());
    }
    if volumes && !volumetric {
        out.push("a volumes grid needs a volumetric map".to_string());
    }
    match cfg.grid_updater {
        GridUpdater::Contract => {
            if cfg.search.mode != SearchMode::Src {
                out.push("the contract grid updater needs the src searcher".to_string());
            }
            if !matches!(cfg.map, MapConfig::Time | MapConfig::Frequency) {
                out.push("region contraction scores points with time or frequency maps".to_string());
            }
        }
        GridUpdater::Subdivide => {
            if cfg.search.mode != SearchMode::Refine {
                out.push("the subdivide grid updater needs the refine searcher".to_string());
            }
            if matches!(cfg.map, MapConfig::Weighted { .. }) {
                out.push("subdivision does not support weighted maps".to_string());
            }
        }
        GridUpdater::None => {}
    }
    if cfg.grid_updater != GridUpdater::None && cfg.grid.is_doa() {
        out.push("grid updaters work on Cartesian regions, not DOA grids".to_string());
    }
    if multi {
        if cfg.grid_updater != GridUpdater::None {
            out.push("de-emphasis runs its searcher to completion per source; use grid_updater none".to_string());
        }
        if !matches!(cfg.map, MapConfig::Time | MapConfig::Frequency) {
            out.push("de-emphasis needs time or frequency maps".to_string());
        }
    } else {
        match (cfg.search.mode, cfg.grid_updater) {
            (SearchMode::Src, g) if g != GridUpdater::Contract => {
                out.push("the src searcher needs the contract grid updater".to_string())
            }
            (SearchMode::Refine, g) if g != GridUpdater::Subdivide => {
                out.push("the refine searcher needs the subdivide grid updater".to_string())
            }
            _ => {}
        }
    }
    if let Err(e) = cfg.search.validate() {
        out.push(e.to_string());
    }
    if let Err(e) = cfg.frame.validate() {
        out.push(e.to_string());
    }
    if let FeatureUpdater::Deemphasize { multi } = &cfg.feature_updater {
        if let Err(e) = multi.validate() {
            out.push(e.to_string());
        }
    }
    if cfg.max_loop_iters == 0 {
        out.push("max_loop_iters must be at least 1".to_string());
    }
    match cfg.grid {
        GridConfig::Cartesian { resolution, .. } if !(resolution > 0.0 && resolution.is_finite()) => {
            out.push("grid resolution must be positive".to_string())
        }
        GridConfig::Volumes { counts } if counts.contains(&0) => {
            out.push("volume counts must be at least 1".to_string())
        }
        _ => {}
    }
    out
}

/// Result of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub estimates: EstimateSet,
    /// The last map built, if the run built full maps.
    pub map: Option<SrpMap>,
    pub loop_iterations: usize,
    /// Candidates scored over the whole run.
    pub evaluations: u64,
}

/// The configured search region: the room, flattened to the grid plane for
/// planar Cartesian grids.
pub fn search_region(cfg: &PipelineConfig, room: Point3) -> Result<Volume> {
    match cfg.grid {
        GridConfig::Cartesian { planar: true, plane_z, .. } => {
            Volume::from_corners(Point3::new(0.0, 0.0, plane_z), Point3::new(room.x, room.y, plane_z))
        }
        _ => Volume::room(room),
    }
}

enum Grid {
    Points(CandidateGrid),
    Volumes(VolumeGrid),
}

/// Builds the initial candidate grid.
pub fn initial_grid(cfg: &GridConfig, room: Option<Point3>) -> Result<Option<CandidateGrid>> {
    let need_room = || room.ok_or_else(|| Error::config("room dimensions are required for Cartesian grids"));
    Ok(Some(match *cfg {
        GridConfig::Cartesian { resolution, planar, plane_z } => {
            let g = cartesian_grid(need_room()?, [resolution; 3], planar)?;
            if planar {
                g.lifted(plane_z)
            } else {
                g
            }
        }
        GridConfig::DoaAzimuth { resolution_deg } => doa_grid(resolution_deg.to_radians(), None)?,
        GridConfig::DoaAzEl { azimuth_deg, elevation_deg } => {
            doa_grid(azimuth_deg.to_radians(), Some(elevation_deg.to_radians()))?
        }
        GridConfig::Volumes { .. } => return Ok(None),
    }))
}

/// Pair features for one frame, in the domain the map needs.
pub fn compute_features(frames: &[Vec<f64>], array: &MicArray, cfg: &PipelineConfig) -> Result<Features> {
    match cfg.features {
        FeatureConfig::Cc => Ok(Features::Lags(cc_all_pairs(frames, array)?)),
        FeatureConfig::GccPhat { beta, gamma, band } => {
            let gcc = GccConfig { beta, gamma, band: band.resolve(array)? };
            let spectra = Features::Spectra(gcc_all_pairs(frames, array, &gcc)?);
            Ok(if cfg.map.needs_spectra() { spectra } else { Features::Lags(spectra.to_lags()) })
        }
    }
}

fn build_map(features: &Features, grid: &Grid, array: &MicArray, cfg: &MapConfig) -> Result<SrpMap> {
    match (grid, cfg) {
        (Grid::Points(g), MapConfig::Time | MapConfig::Frequency) => features.map(g, array),
        (Grid::Points(g), MapConfig::Weighted { wsrp }) => match features {
            Features::Spectra(s) => wsrp_map(&pairwise_freq_scores(s, g, array)?, g, wsrp),
            Features::Lags(_) => Err(Error::config("weighted maps need spectral features")),
        },
        (Grid::Volumes(v), MapConfig::Volumetric { pooling, guard }) => {
            vsrp_map(&features.to_lags(), v, array, *pooling, *guard)
        }
        _ => Err(Error::config("grid and map types do not match")),
    }
}

/// Runs the pipeline on one frame (one slice per channel).
pub fn x_srp(frames: &[Vec<f64>], array: &MicArray, room: Option<Point3>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let problems = validate_config(cfg);
    if !problems.is_empty() {
        return Err(Error::config(problems.join("; ")));
    }
    let mut features = compute_features(frames, array, cfg)?;
    let region = || -> Result<Volume> {
        search_region(cfg, room.ok_or_else(|| Error::config("room dimensions are required for Cartesian grids"))?)
    };

    // Iterative searchers own their grid sequence.
    let mut src = None;
    let mut refine = None;
    let mut grid: Option<Grid> = match cfg.grid_updater {
        GridUpdater::Contract => {
            let mut state = SrcState::new(&region()?, &cfg.search)?;
            let g = state.candidates()?;
            src = Some(state);
            Some(Grid::Points(g))
        }
        GridUpdater::Subdivide => {
            let state = RefineState::new(&region()?, &cfg.search)?;
            let cells = state.candidates()?;
            refine = Some(state);
            Some(Grid::Volumes(VolumeGrid { volumes: cells }))
        }
        GridUpdater::None => Some(match initial_grid(&cfg.grid, room)? {
            Some(g) => Grid::Points(g),
            None => {
                let GridConfig::Volumes { counts } = cfg.grid else { unreachable!() };
                Grid::Volumes(VolumeGrid::partition(&region()?, counts)?)
            }
        }),
    };

    let multi = match &cfg.feature_updater {
        FeatureUpdater::Deemphasize { multi } => Some(multi.clone()),
        FeatureUpdater::None => None,
    };
    let mut estimates = EstimateSet::default();
    let mut last_map = None;
    let mut loops = 0;
    let mut evaluations = 0u64;

    while let Some(g) = grid.take() {
        if loops == cfg.max_loop_iters {
            log::warn!("pipeline stopped at the {} iteration cap", cfg.max_loop_iters);
            break;
        }
        loops += 1;

        if let Some(m) = &multi {
            // One source per pass; the searcher runs to completion.
            let Grid::Points(points) = &g else { unreachable!("validated") };
            let limit = match m.n_sources {
                SourceCount::Fixed(n) => n,
                SourceCount::Auto => m.max_sources,
            };
            let previous = estimates.positions();
            let r = search_features(&features, points, array, &cfg.search, &previous, m.min_source_distance)?;
            evaluations += r.evaluations;
            let accept = r.score.is_finite()
                && match (m.n_sources, estimates.estimates.first()) {
                    (SourceCount::Fixed(_), _) => true,
                    (SourceCount::Auto, None) => r.score > 0.0,
                    (SourceCount::Auto, Some(first)) => r.score >= m.score_floor * first.score,
                };
            if !accept {
                break;
            }
            estimates.estimates.push(Estimate { position: r.estimate, score: r.score });
            if estimates.len() < limit {
                let steering = Steering::for_grid(points.kind);
                features = cancel_source(&features, &r.estimate, array, steering, m.sigma(array.sample_rate()))?;
                grid = Some(g);
            }
            continue;
        }

        if let Some(state) = src.as_mut() {
            let Grid::Points(points) = &g else { unreachable!() };
            let scorer = features.scorer(array, Steering::Exact)?;
            let scores = scorer.score_all(&points.points);
            evaluations += scores.len() as u64;
            state.absorb(&points.points, &scores)?;
            if state.is_finished() {
                let (p, s) = state.best().expect("absorbed at least once");
                estimates.estimates.push(Estimate { position: p, score: s });
            } else {
                grid = Some(Grid::Points(state.candidates()?));
            }
            continue;
        }

        if let Some(state) = refine.as_mut() {
            let Grid::Volumes(cells) = &g else { unreachable!() };
            let scores = match &cfg.map {
                MapConfig::Volumetric { pooling, guard } => {
                    VolumeScorer::new(features.to_lags(), array, *pooling, *guard)?.score_volumes(&cells.volumes)
                }
                _ => features.scorer(array, Steering::Exact)?.score_all(&cells.centers()),
            };
            evaluations += scores.len() as u64;
            state.absorb(&cells.volumes, &scores)?;
            if state.is_finished() {
                let (p, s) = state.best().expect("absorbed at least once");
                estimates.estimates.push(Estimate { position: p, score: s });
            } else {
                grid = Some(Grid::Volumes(VolumeGrid { volumes: state.candidates()? }));
            }
            continue;
        }

        let map = build_map(&features, &g, array, &cfg.map)?;
        let r = argmax_search(&map)?;
        evaluations += r.evaluations;
        estimates.estimates.push(Estimate { position: r.estimate, score: r.score });
        last_map = Some(map);
    }

    if multi.is_some() {
        estimates.estimates.sort_by(|a, b| b.score.total_cmp(&a.score));
    }
    Ok(PipelineOutput { estimates, map: last_map, loop_iterations: loops, evaluations })
}

/// The map domain a configuration produces.
pub fn map_domain(cfg: &MapConfig) -> MapDomain {
    match cfg {
        MapConfig::Time => MapDomain::Time,
        MapConfig::Frequency => MapDomain::Frequency,
        MapConfig::Volumetric { .. } => MapDomain::Volumetric,
        MapConfig::Weighted { .. } => MapDomain::Weighted,
    }
}
