mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xsrp::features::{gcc_all_pairs, temporal_gcc, BandPolicy, GccConfig, LagVector};
use xsrp::grids::{cartesian_grid, doa_grid, Volume, VolumeGrid};
use xsrp::multisource::{localize_multi, MultiConfig, SourceCount};
use xsrp::pipeline::{
    compute_features, initial_grid, x_srp, FeatureConfig, FeatureUpdater, GridConfig, GridUpdater, MapConfig,
    PipelineConfig,
};
use xsrp::search::{argmax_search, refine_search, src_search, CellScorer, SearchConfig, SearchMode};
use xsrp::srp::{
    pairwise_freq_scores, srp_freq_map, srp_time_map, vsrp_map, wsrp_map, Pooling, Steering, VolumeScorer, WsrpConfig,
};
use xsrp::synth::NoiseColor;
use xsrp::{Features, MicArray, Point3};

const ROOM: Point3 = Point3 { x: 4.0, y: 3.0, z: 2.5 };

fn scene(seed: u64, sources: &[Point3]) -> (MicArray, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let array = random_array(&mut rng, ROOM, 6);
    let sources: Vec<_> = sources.iter().map(|p| (*p, NoiseColor::White)).collect();
    (array.clone(), scene_frame(&array, ROOM, &sources, 20.0, seed, 512, 2048))
}

fn band_limited() -> FeatureConfig {
    FeatureConfig::GccPhat { beta: 1.0, gamma: Default::default(), band: BandPolicy::LowPass { hi: 1000.0 } }
}

fn coarse() -> GridConfig {
    GridConfig::Cartesian { resolution: 0.25, planar: false, plane_z: 0.0 }
}

#[test]
fn conventional_pipeline_is_map_then_argmax() {
    let (array, frames) = scene(1, &[Point3::new(1.2, 2.0, 1.1)]);
    let cfg = PipelineConfig { grid: coarse(), features: band_limited(), ..Default::default() };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let band = BandPolicy::LowPass { hi: 1000.0 }.resolve(&array).unwrap();
    let gccs = gcc_all_pairs(&frames, &array, &GccConfig::phat(band)).unwrap();
    let grid = cartesian_grid(ROOM, [0.25; 3], false).unwrap();
    let map = srp_freq_map(&gccs, &grid, &array).unwrap();
    let r = argmax_search(&map).unwrap();
    assert_eq!(out.loop_iterations, 1);
    assert_eq!(out.estimates.len(), 1);
    assert_eq!(out.estimates.estimates[0].position, r.estimate);
    assert_eq!(out.estimates.estimates[0].score, r.score);
    assert_eq!(out.map.unwrap(), map);
    assert_eq!(out.evaluations, grid.len() as u64);
}

#[test]
fn time_map_pipeline_matches_time_map() {
    let (array, frames) = scene(2, &[Point3::new(2.5, 1.0, 1.4)]);
    let cfg = PipelineConfig { grid: coarse(), features: band_limited(), map: MapConfig::Time, ..Default::default() };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let lags = compute_features(&frames, &array, &cfg).unwrap().to_lags();
    let map = srp_time_map(&lags, &cartesian_grid(ROOM, [0.25; 3], false).unwrap(), &array).unwrap();
    assert_eq!(out.map.unwrap(), map);
}

#[test]
fn contract_loop_equals_src_search() {
    let (array, frames) = scene(3, &[Point3::new(1.0, 1.5, 1.0)]);
    let search = SearchConfig { mode: SearchMode::Src, points_per_iter: 300, seed: 9, ..Default::default() };
    let cfg = PipelineConfig {
        features: band_limited(),
        map: MapConfig::Time,
        search: search.clone(),
        grid_updater: GridUpdater::Contract,
        ..Default::default()
    };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let features = compute_features(&frames, &array, &cfg).unwrap();
    let scorer = features.scorer(&array, Steering::Exact).unwrap();
    let r = src_search(scorer.as_ref(), &Volume::room(ROOM).unwrap(), &search).unwrap();
    assert_eq!(out.estimates.estimates[0].position, r.estimate);
    assert_eq!(out.estimates.estimates[0].score, r.score);
    assert_eq!(out.evaluations, r.evaluations);
    assert_eq!(out.loop_iterations, r.iterations);
}

#[test]
fn subdivide_loop_equals_refine_search() {
    let (array, frames) = scene(4, &[Point3::new(3.0, 2.0, 0.8)]);
    let search = SearchConfig { mode: SearchMode::Refine, top_k: 4, min_region_edge: 0.1, ..Default::default() };
    let cfg = PipelineConfig {
        grid: GridConfig::Volumes { counts: [2, 2, 2] },
        features: band_limited(),
        map: MapConfig::Volumetric { pooling: Pooling::Max, guard: 1.0 },
        search: search.clone(),
        grid_updater: GridUpdater::Subdivide,
        ..Default::default()
    };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let lags = compute_features(&frames, &array, &cfg).unwrap().to_lags();
    let scorer = VolumeScorer::new(lags, &array, Pooling::Max, 1.0).unwrap();
    let r = refine_search(CellScorer::Volumes(&scorer), &Volume::room(ROOM).unwrap(), &search).unwrap();
    assert_eq!(out.estimates.estimates[0].position, r.estimate);
    assert_eq!(out.estimates.estimates[0].score, r.score);
    assert_eq!(out.evaluations, r.evaluations);
}

#[test]
fn volumes_grid_equals_vsrp_map() {
    let (array, frames) = scene(5, &[Point3::new(0.7, 0.9, 1.6)]);
    let cfg = PipelineConfig {
        grid: GridConfig::Volumes { counts: [8, 6, 5] },
        features: band_limited(),
        map: MapConfig::Volumetric { pooling: Pooling::Sum, guard: 1.0 },
        ..Default::default()
    };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let lags = compute_features(&frames, &array, &cfg).unwrap().to_lags();
    let cells = VolumeGrid::partition(&Volume::room(ROOM).unwrap(), [8, 6, 5]).unwrap();
    assert_eq!(out.map.unwrap(), vsrp_map(&lags, &cells, &array, Pooling::Sum, 1.0).unwrap());
}

#[test]
fn weighted_map_pipeline_equals_wsrp() {
    let (array, frames) = scene(6, &[Point3::new(2.0, 2.2, 1.2)]);
    let wsrp = WsrpConfig { pair_combinator: xsrp::srp::PairCombinator::Hamacher, ..Default::default() };
    let cfg = PipelineConfig {
        grid: GridConfig::Cartesian { resolution: 0.5, planar: false, plane_z: 0.0 },
        features: band_limited(),
        map: MapConfig::Weighted { wsrp: wsrp.clone() },
        ..Default::default()
    };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let Features::Spectra(gccs) = compute_features(&frames, &array, &cfg).unwrap() else { panic!("spectra expected") };
    let grid = initial_grid(&cfg.grid, Some(ROOM)).unwrap().unwrap();
    let map = wsrp_map(&pairwise_freq_scores(&gccs, &grid, &array).unwrap(), &grid, &wsrp).unwrap();
    assert_eq!(out.map.unwrap(), map);
}

#[test]
fn deemphasis_loop_equals_localize_multi() {
    let (array, frames) = scene(7, &[Point3::new(1.0, 1.0, 1.0), Point3::new(3.0, 2.2, 1.5)]);
    let multi = MultiConfig { n_sources: SourceCount::Fixed(2), ..Default::default() };
    let cfg = PipelineConfig {
        grid: GridConfig::Cartesian { resolution: 0.1, planar: false, plane_z: 0.0 },
        features: band_limited(),
        map: MapConfig::Time,
        feature_updater: FeatureUpdater::Deemphasize { multi: multi.clone() },
        ..Default::default()
    };
    let out = x_srp(&frames, &array, Some(ROOM), &cfg).unwrap();
    let features = compute_features(&frames, &array, &cfg).unwrap();
    let grid = initial_grid(&cfg.grid, Some(ROOM)).unwrap().unwrap();
    let set = localize_multi(&features, &grid, &array, &multi, &SearchConfig::default()).unwrap();
    assert_eq!(out.estimates, set);
    assert_eq!(out.loop_iterations, 2);
    for truth in [Point3::new(1.0, 1.0, 1.0), Point3::new(3.0, 2.2, 1.5)] {
        assert!(set.positions().iter().any(|p| p.distance(&truth) < 0.2), "{set:?}");
    }
}

#[test]
fn doa_pipeline_finds_direction() {
    let center = Point3::new(2.0, 1.5, 1.2);
    let array = spherical_array(center, 0.05);
    let dir = Point3::new(-0.6, 0.8, 0.0);
    let frames = scene_frame(&array, ROOM, &[(center + dir * 1.2, NoiseColor::White)], 30.0, 8, 256, 2048);
    let cfg = PipelineConfig { grid: GridConfig::DoaAzimuth { resolution_deg: 2.0 }, ..Default::default() };
    let out = x_srp(&frames, &array, None, &cfg).unwrap();
    let est = out.estimates.estimates[0].position;
    assert!(xsrp::geometry::great_circle(&est, &dir).to_degrees() <= 4.0, "{est:?}");
    assert_eq!(out.map.unwrap().len(), doa_grid(2f64.to_radians(), None).unwrap().len());
}

#[test]
fn time_and_frequency_agree_on_a_noiseless_scene() {
    // The source sits on the grid; both maps peak there.
    let src = Point3::new(1.5, 1.0, 1.25);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let array = random_array(&mut rng, ROOM, 6);
    let frames = scene_frame(&array, ROOM, &[(src, NoiseColor::White)], f64::INFINITY, 11, 512, 2048);
    let band = BandPolicy::Full.resolve(&array).unwrap();
    let gccs = gcc_all_pairs(&frames, &array, &GccConfig::phat(band)).unwrap();
    let lags: Vec<LagVector> = gccs.iter().map(temporal_gcc).collect();
    let grid = cartesian_grid(ROOM, [0.25; 3], false).unwrap();
    let t = srp_time_map(&lags, &grid, &array).unwrap();
    let f = srp_freq_map(&gccs, &grid, &array).unwrap();
    assert_eq!(t.points[t.argmax().unwrap()], src);
    assert_eq!(f.points[f.argmax().unwrap()], src);
}
