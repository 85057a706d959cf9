//! Steered response power localization toolkit.
//!
//! Time-, frequency-, volumetric- and weighted-domain SRP maps, grid and
//! stochastic-region-contraction searches, multi-source peak extraction,
//! particle-filter tracking and a configurable pipeline composing them.

pub mod bench;
pub mod error;
pub mod features;
pub mod geometry;
pub mod grids;
pub mod io;
pub mod multisource;
pub mod pipeline;
pub mod search;
pub mod srp;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
pub use features::{Band, BandPolicy, FrameConfig, GccConfig, LagVector, SpectralGcc};
pub use geometry::{MicArray, MicPair, Point3, SphericalDirection};
pub use grids::{CandidateGrid, GridKind, Volume, VolumeGrid};
pub use multisource::{EstimateSet, MultiConfig};
pub use pipeline::{x_srp, PipelineConfig, PipelineOutput};
pub use search::{SearchConfig, SearchMode, SearchResult};
pub use srp::{Features, MapDomain, SrpMap};
pub use tracking::{TrackPoint, TrackerConfig};
