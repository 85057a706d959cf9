//! Candidate search spaces: Cartesian position grids, DOA grids, cuboid
//! volumes and the sampling helpers used by iterative searches.
//!
//! Cartesian grids index from 1: points sit at `g * R` for
//! `g = 1 ..= floor(D / R)`, so the shell at the origin corner is excluded.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Cartesian2d,
    Cartesian3d,
    DoaAzimuth,
    DoaAzEl,
}

impl GridKind {
    pub fn is_doa(self) -> bool {
        matches!(self, GridKind::DoaAzimuth | GridKind::DoaAzEl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub kind: GridKind,
    /// Positions, or unit direction vectors for DOA kinds.
    pub points: Vec<Point3>,
    /// Per-axis spacing: meters for Cartesian kinds, `[azimuth, elevation, 0]`
    /// radians for DOA kinds.
    pub resolution: [f64; 3],
    /// Point counts per axis when the points form a regular lattice, with
    /// the last axis varying fastest.
    pub shape: Option<[usize; 3]>,
}

impl CandidateGrid {
    /// An unstructured set of Cartesian candidates.
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("candidate grid is empty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("candidate grid has non-finite points"));
        }
        Ok(CandidateGrid {
            kind: GridKind::Cartesian3d,
            points,
            resolution: [0.0; 3],
            shape: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Planar grid moved to height `z`.
    pub fn lifted(mut self, z: f64) -> Self {
        self.points.iter_mut().for_each(|p| p.z = z);
        self
    }

    /// Same grid translated by `offset` (Cartesian kinds only).
    pub fn translated(&self, offset: Point3) -> Self {
        let mut g = self.clone();
        if !g.kind.is_doa() {
            g.points.iter_mut().for_each(|p| *p = *p + offset);
        }
        g
    }
}

fn axis_count(dim: f64, res: f64) -> usize {
    (dim / res + COUNT_EPS).floor() as usize
}

/// Uniform Cartesian grid over a room; `planar` grids have `z = 0`.
pub fn cartesian_grid(room: Point3, resolution: [f64; 3], planar: bool) -> Result<CandidateGrid> {
    let axes = if planar { 2 } else { 3 };
    let dims = room.to_array();
    for a in 0..axes {
        if !(dims[a] > 0.0 && dims[a].is_finite()) {
            return Err(Error::invalid("room dimensions must be positive"));
        }
        if !(resolution[a] > 0.0 && resolution[a].is_finite()) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
    }
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(3);
    for a in 0..3 {
        if a >= axes {
            coords.push(vec![0.0]);
            continue;
        }
        let n = axis_count(dims[a], resolution[a]);
        if n == 0 {
            log::warn!(
                "resolution {} exceeds room dimension {} on axis {a}; using a single point",
                resolution[a],
                dims[a]
            );
            coords.push(vec![dims[a]]);
        } else {
            coords.push((1..=n).map(|g| g as f64 * resolution[a]).collect());
        }
    }
    let shape = [coords[0].len(), coords[1].len(), coords[2].len()];
    let mut points = Vec::with_capacity(shape.iter().product());
    for &x in &coords[0] {
        for &y in &coords[1] {
            for &z in &coords[2] {
                points.push(Point3::new(x, y, z));
            }
        }
    }
    let mut res = resolution;
    if planar {
        res[2] = 0.0;
    }
    Ok(CandidateGrid {
        kind: if planar { GridKind::Cartesian2d } else { GridKind::Cartesian3d },
        points,
        resolution: res,
        shape: Some(shape),
    })
}

/// Circular (`elevation_res = None`) or spherical azimuth-elevation grid of
/// unit direction vectors. Azimuths are `R, 2R, ..., 2 pi`; elevations step
/// uniformly from -pi/2 to pi/2 with each pole appearing once.
pub fn doa_grid(azimuth_res: f64, elevation_res: Option<f64>) -> Result<CandidateGrid> {
    let check = |r: f64| r > 0.0 && r <= TAU + COUNT_EPS;
    if !check(azimuth_res) || !elevation_res.map_or(true, check) {
        return Err(Error::invalid("angular resolution must be in (0, 2 pi]"));
    }
    let n_az = axis_count(TAU, azimuth_res).max(1);
    let azimuths: Vec<f64> = (1..=n_az).map(|k| k as f64 * azimuth_res).collect();
    match elevation_res {
        None => Ok(CandidateGrid {
            kind: GridKind::DoaAzimuth,
            points: azimuths
                .iter()
                .map(|phi| Point3::new(phi.cos(), phi.sin(), 0.0))
                .collect(),
            resolution: [azimuth_res, 0.0, 0.0],
            shape: Some([n_az, 1, 1]),
        }),
        Some(el_res) => {
            let n_el = axis_count(PI, el_res);
            let mut points = Vec::new();
            for j in 0..=n_el {
                let theta = (-FRAC_PI_2 + j as f64 * el_res).min(FRAC_PI_2);
                let (st, ct) = theta.sin_cos();
                if (theta.abs() - FRAC_PI_2).abs() < 1e-12 {
                    points.push(Point3::new(0.0, 0.0, theta.signum()));
                    continue;
                }
                points.extend(azimuths.iter().map(|phi| Point3::new(ct * phi.cos(), ct * phi.sin(), st)));
            }
            Ok(CandidateGrid {
                kind: GridKind::DoaAzEl,
                points,
                resolution: [azimuth_res, el_res, 0.0],
                shape: None,
            })
        }
    }
}

/// Axis-aligned cuboid `|x_a - center_a| <= half_extents_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub center: Point3,
    pub half_extents: Point3,
}

impl Volume {
    pub fn new(center: Point3, half_extents: Point3) -> Result<Self> {
        let h = half_extents;
        if !center.is_finite() || !h.is_finite() || h.x < 0.0 || h.y < 0.0 || h.z < 0.0 {
            return Err(Error::invalid("volume needs a finite center and non-negative extents"));
        }
        Ok(Volume { center, half_extents })
    }

    pub fn from_corners(lo: Point3, hi: Point3) -> Result<Self> {
        Volume::new((lo + hi) * 0.5, (hi - lo) * 0.5)
    }

    /// The whole room `[0, D]`.
    pub fn room(dims: Point3) -> Result<Self> {
        Volume::from_corners(Point3::ORIGIN, dims)
    }

    pub fn min(&self) -> Point3 {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Point3 {
        self.center + self.half_extents
    }

    /// Full edge lengths.
    pub fn edges(&self) -> Point3 {
        self.half_extents * 2.0
    }

    pub fn measure(&self) -> f64 {
        let e = self.edges();
        e.x * e.y * e.z
    }

    pub fn diameter(&self) -> f64 {
        self.edges().norm()
    }

    pub fn vertices(&self) -> [Point3; 8] {
        let (c, h) = (self.center, self.half_extents);
        let mut out = [Point3::ORIGIN; 8];
        for (i, v) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *v = c + Point3::new(sx * h.x, sy * h.y, sz * h.z);
        }
        out
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (0..3).all(|a| (p.axis(a) - self.center.axis(a)).abs() <= self.half_extents.axis(a) + tol)
    }

    /// Intersection with another box; empty overlaps collapse onto the
    /// nearest face of `self`.
    pub fn clip_to(&self, outer: &Volume) -> Volume {
        let (lo, hi) = (self.min(), self.max());
        let (olo, ohi) = (outer.min(), outer.max());
        let mut nlo = Point3::ORIGIN;
        let mut nhi = Point3::ORIGIN;
        for a in 0..3 {
            let l = lo.axis(a).clamp(olo.axis(a), ohi.axis(a));
            let h = hi.axis(a).clamp(olo.axis(a), ohi.axis(a));
            nlo = nlo.with_axis(a, l.min(h));
            nhi = nhi.with_axis(a, h.max(l));
        }
        Volume::from_corners(nlo, nhi).expect("clipped box is finite")
    }

    /// Uniform sample from the interior.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Point3 {
        let lo = self.min();
        let e = self.edges();
        Point3::new(
            lo.x + rng.random::<f64>() * e.x,
            lo.y + rng.random::<f64>() * e.y,
            lo.z + rng.random::<f64>() * e.z,
        )
    }
}

/// Non-overlapping volumes covering a region.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub volumes: Vec<Volume>,
}

impl VolumeGrid {
    /// Splits `region` into `counts` congruent cells per axis.
    pub fn partition(region: &Volume, counts: [usize; 3]) -> Result<Self> {
        Ok(VolumeGrid { volumes: subdivide(region, counts)? })
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn centers(&self) -> Vec<Point3> {
        self.volumes.iter().map(|v| v.center).collect()
    }
}

/// Splits a cuboid into `f0 * f1 * f2` congruent children; the last axis
/// varies fastest.
pub fn subdivide(volume: &Volume, factors: [usize; 3]) -> Result<Vec<Volume>> {
    if factors.iter().any(|&f| f == 0) {
        return Err(Error::invalid("subdivision factors must be at least 1"));
    }
    let lo = volume.min();
    let e = volume.edges();
    let step = Point3::new(e.x / factors[0] as f64, e.y / factors[1] as f64, e.z / factors[2] as f64);
    let half = step * 0.5;
    let mut out = Vec::with_capacity(factors.iter().product());
    for i in 0..factors[0] {
        for j in 0..factors[1] {
            for k in 0..factors[2] {
                let center = lo
                    + Point3::new(
                        (i as f64 + 0.5) * step.x,
                        (j as f64 + 0.5) * step.y,
                        (k as f64 + 0.5) * step.z,
                    );
                out.push(Volume { center, half_extents: half });
            }
        }
    }
    Ok(out)
}

/// `n` points uniform over the surface of `region`, faces chosen with
/// probability proportional to their area.
pub fn sample_boundary(region: &Volume, n: usize, seed: u64) -> Result<CandidateGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_boundary_with(region, n, &mut rng)
}

pub(crate) fn sample_boundary_with<R: Rng>(region: &Volume, n: usize, rng: &mut R) -> Result<CandidateGrid> {
    if n == 0 {
        return Err(Error::invalid("boundary sample count must be at least 1"));
    }
    let e = region.edges();
    // Faces 2a and 2a+1 are the low/high faces normal to axis a.
    let areas = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
    let lo = region.min();
    let hi = region.max();
    let points = match WeightedIndex::new(areas) {
        Ok(faces) => (0..n)
            .map(|_| {
                let face = faces.sample(rng);
                let axis = face / 2;
                let p = region.sample_interior(rng);
                p.with_axis(axis, if face % 2 == 0 { lo.axis(axis) } else { hi.axis(axis) })
            })
            .collect(),
        // Degenerate (flat or point) regions: every point is on the boundary.
        Err(_) => (0..n).map(|_| region.sample_interior(rng)).collect(),
    };
    CandidateGrid::from_points(points)
}

/// Smallest axis-aligned box containing `points`, inflated by `margin`.
pub fn bounding_region(points: &[Point3], margin: f64) -> Result<Volume> {
    let first = *points
        .first()
        .ok_or_else(|| Error::invalid("bounding region of an empty point set"))?;
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::invalid("margin must be non-negative"));
    }
    let (mut lo, mut hi) = (first, first);
    for p in points {
        for a in 0..3 {
            lo = lo.with_axis(a, lo.axis(a).min(p.axis(a)));
            hi = hi.with_axis(a, hi.axis(a).max(p.axis(a)));
        }
    }
    let m = Point3::new(margin, margin, margin);
    Volume::from_corners(lo - m, hi + m)
}
