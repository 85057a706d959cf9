//! Propagation geometry: points, microphone arrays, time of flight and
//! time differences of arrival (exact and far-field), plus their bounds.
//!
//! Everything here is a pure function of immutable inputs.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Minimum separation between two microphones of an array, in meters.
pub const MIN_MIC_SPACING: f64 = 1e-9;

/// A point (or vector) in 3D Cartesian space, meters.
///
/// Planar scenarios use `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component `axis` (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {axis} out of range"),
        }
    }

    pub fn with_axis(mut self, axis: usize, value: f64) -> Self {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            2 => self.z = value,
            _ => panic!("axis index {axis} out of range"),
        }
        self
    }

    pub fn component_mul(&self, other: &Point3) -> Point3 {
        Point3::new(self.x * other.x, self.y * other.y, self.z * other.z)
    }

    pub fn normalized(&self) -> Option<Point3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| *self * (1.0 / n))
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Direction (and optional range) relative to an array reference point.
///
/// Azimuth is measured in the x-y plane from the x axis, elevation from the
/// horizontal plane towards +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    pub azimuth: f64,
    pub elevation: f64,
    pub range: Option<f64>,
}

impl SphericalDirection {
    pub fn new(azimuth: f64, elevation: f64, range: Option<f64>) -> Result<Self> {
        use std::f64::consts::{FRAC_PI_2, TAU};
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::invalid("non-finite angle"));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::invalid(format!("elevation {elevation} outside [-pi/2, pi/2]")));
        }
        if let Some(r) = range {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("range must be positive, got {r}")));
            }
        }
        Ok(SphericalDirection {
            azimuth: azimuth.rem_euclid(TAU),
            elevation,
            range,
        })
    }

    pub fn unit_vector(&self) -> Point3 {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        Point3::new(ce * ca, ce * sa, se)
    }

    /// Position relative to `reference`; far-field directions place the point
    /// at unit distance.
    pub fn to_point(&self, reference: Point3) -> Point3 {
        reference + self.unit_vector() * self.range.unwrap_or(1.0)
    }

    pub fn from_vector(v: Point3) -> Result<Self> {
        let r = v.norm();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("cannot take the direction of a zero vector"));
        }
        let elevation = (v.z / r).clamp(-1.0, 1.0).asin();
        SphericalDirection::new(v.y.atan2(v.x), elevation, Some(r))
    }

    /// Great-circle angle between two directions, radians.
    pub fn angle_to(&self, other: &SphericalDirection) -> f64 {
        great_circle(&self.unit_vector(), &other.unit_vector())
    }
}

/// Angle between two (not necessarily unit) vectors, radians.
pub fn great_circle(a: &Point3, b: &Point3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Microphone pair in canonical order `l < m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MicPair {
    pub l: usize,
    pub m: usize,
}

impl MicPair {
    pub fn new(l: usize, m: usize) -> Result<Self> {
        if l >= m {
            return Err(Error::invalid(format!("pair ({l}, {m}) is not in canonical order")));
        }
        Ok(MicPair { l, m })
    }
}

/// All canonical pairs of `m` microphones, lexicographic.
pub fn canonical_pairs(m: usize) -> Vec<MicPair> {
    (0..m)
        .flat_map(|l| (l + 1..m).map(move |m| MicPair { l, m }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MicArrayRepr", into = "MicArrayRepr")]
pub struct MicArray {
    positions: Vec<Point3>,
    sample_rate: f64,
    speed_of_sound: f64,
    pairs: Vec<MicPair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MicArrayRepr {
    positions: Vec<Point3>,
    sample_rate: f64,
    #[serde(default = "default_c")]
    speed_of_sound: f64,
}

fn default_c() -> f64 {
    SPEED_OF_SOUND
}

impl TryFrom<MicArrayRepr> for MicArray {
    type Error = Error;
    fn try_from(r: MicArrayRepr) -> Result<Self> {
        MicArray::new(r.positions, r.sample_rate, r.speed_of_sound)
    }
}

impl From<MicArray> for MicArrayRepr {
    fn from(a: MicArray) -> Self {
        MicArrayRepr {
            positions: a.positions,
            sample_rate: a.sample_rate,
            speed_of_sound: a.speed_of_sound,
        }
    }
}

impl MicArray {
    pub fn new(positions: Vec<Point3>, sample_rate: f64, speed_of_sound: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("a microphone array needs at least two microphones"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::invalid(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("microphone {i} has non-finite coordinates")));
        }
        let pairs = canonical_pairs(positions.len());
        for p in &pairs {
            if positions[p.l].distance(&positions[p.m]) < MIN_MIC_SPACING {
                return Err(Error::invalid(format!(
                    "microphones {} and {} are coincident",
                    p.l, p.m
                )));
            }
        }
        Ok(MicArray {
            positions,
            sample_rate,
            speed_of_sound,
            pairs,
        })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Canonical pairs, `P = M(M-1)/2` of them.
    pub fn pairs(&self) -> &[MicPair] {
        &self.pairs
    }

    pub fn centroid(&self) -> Point3 {
        let sum = self.positions.iter().fold(Point3::ORIGIN, |acc, p| acc + *p);
        sum * (1.0 / self.len() as f64)
    }

    /// Smallest inter-microphone distance.
    pub fn min_spacing(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| self.positions[p.l].distance(&self.positions[p.m]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest inter-microphone distance.
    pub fn aperture(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| self.positions[p.l].distance(&self.positions[p.m]))
            .fold(0.0, f64::max)
    }

    /// Same geometry translated by `offset`.
    pub fn translated(&self, offset: Point3) -> MicArray {
        MicArray {
            positions: self.positions.iter().map(|p| *p + offset).collect(),
            ..self.clone()
        }
    }

    fn check_pair(&self, pair: MicPair) -> Result<()> {
        if pair.l >= pair.m || pair.m >= self.len() {
            return Err(Error::invalid(format!(
                "pair ({}, {}) invalid for {} microphones",
                pair.l,
                pair.m,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Time of flight between `u` and `v` in seconds.
pub fn tof(u: &Point3, v: &Point3, c: f64) -> Result<f64> {
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::invalid("non-finite coordinates"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("speed of sound must be positive, got {c}")));
    }
    Ok(u.distance(v) / c)
}

/// Time difference of arrival `tof(u, v_l) - tof(u, v_m)`.
///
/// Negative values mean the wavefront reaches microphone `l` first.
pub fn tdoa(u: &Point3, pair: MicPair, array: &MicArray) -> Result<f64> {
    array.check_pair(pair)?;
    if !u.is_finite() {
        return Err(Error::invalid("non-finite coordinates"));
    }
    Ok(tdoa_unchecked(u, pair, array))
}

#[inline]
pub(crate) fn tdoa_unchecked(u: &Point3, pair: MicPair, array: &MicArray) -> f64 {
    let p = array.positions();
    (u.distance(&p[pair.l]) - u.distance(&p[pair.m])) / array.speed_of_sound()
}

/// Plane-wave TDOA for a source in unit direction `direction` seen from the
/// array: `(v_m - v_l) . direction / c`.
///
/// This is the limit of [`tdoa`] for a source receding along `direction`.
pub fn tdoa_far_field(direction: &Point3, pair: MicPair, array: &MicArray) -> Result<f64> {
    array.check_pair(pair)?;
    if !direction.is_finite() || (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("far-field direction must be a unit vector"));
    }
    Ok(tdoa_far_field_unchecked(direction, pair, array))
}

#[inline]
pub(crate) fn tdoa_far_field_unchecked(direction: &Point3, pair: MicPair, array: &MicArray) -> f64 {
    let p = array.positions();
    (p[pair.m] - p[pair.l]).dot(direction) / array.speed_of_sound()
}

/// Largest possible |TDOA| for the pair, attained on the baseline extension.
pub fn max_tdoa(pair: MicPair, array: &MicArray) -> Result<f64> {
    array.check_pair(pair)?;
    Ok(max_tdoa_unchecked(pair, array))
}

#[inline]
pub(crate) fn max_tdoa_unchecked(pair: MicPair, array: &MicArray) -> f64 {
    let p = array.positions();
    p[pair.l].distance(&p[pair.m]) / array.speed_of_sound()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_mics() -> MicArray {
        MicArray::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
            16_000.0,
            343.0,
        )
        .unwrap()
    }

    fn pair01() -> MicPair {
        MicPair::new(0, 1).unwrap()
    }

    #[test]
    fn tof_examples() {
        let u = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(tof(&u, &u, 343.0).unwrap(), 0.0);
        let far = Point3::new(343.0, 0.0, 0.0);
        assert!((tof(&far, &Point3::ORIGIN, 343.0).unwrap() - 1.0).abs() < 1e-15);
        let t = tof(&Point3::new(1.0, 0.0, 0.0), &Point3::ORIGIN, 343.0).unwrap();
        assert!((t - 2.9155e-3).abs() < 1e-7);
        assert!(tof(&Point3::new(f64::NAN, 0.0, 0.0), &u, 343.0).is_err());
    }

    #[test]
    fn tdoa_examples() {
        let a = two_mics();
        let mid = Point3::new(0.5, 3.0, -1.0);
        assert!(tdoa(&mid, pair01(), &a).unwrap().abs() < 1e-15);

        // Beyond v_m on the baseline: v_l is farther.
        let beyond = Point3::new(4.0, 0.0, 0.0);
        let t = tdoa(&beyond, pair01(), &a).unwrap();
        assert!((t - 1.0 / 343.0).abs() < 1e-15);
        assert!((t - max_tdoa(pair01(), &a).unwrap()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.3);
            let oracle = tof(&u, &a.positions()[0], 343.0).unwrap()
                - tof(&u, &a.positions()[1], 343.0).unwrap();
            assert!((tdoa(&u, pair01(), &a).unwrap() - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn far_field_examples() {
        let a = two_mics();
        let perp = Point3::new(0.0, 1.0, 0.0);
        assert_eq!(tdoa_far_field(&perp, pair01(), &a).unwrap(), 0.0);
        let along = Point3::new(1.0, 0.0, 0.0);
        let t = tdoa_far_field(&along, pair01(), &a).unwrap();
        assert!((t.abs() - 1.0 / 343.0).abs() < 1e-15);
        assert!(tdoa_far_field(&Point3::new(1.0, 1.0, 0.0), pair01(), &a).is_err());

        // A source at 100x the aperture is well approximated by the plane wave.
        let dir = Point3::new(0.6, 0.8, 0.0);
        let exact = tdoa(&(a.centroid() + dir * 100.0), pair01(), &a).unwrap();
        let ff = tdoa_far_field(&dir, pair01(), &a).unwrap();
        assert!((exact - ff).abs() < 0.01 * max_tdoa(pair01(), &a).unwrap());
    }

    #[test]
    fn far_field_convergence_is_monotone() {
        let a = two_mics();
        let dir = Point3::new(0.3, 0.5, 0.2).normalized().unwrap();
        let ff = tdoa_far_field(&dir, pair01(), &a).unwrap();
        let errs: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|r| {
                let u = a.centroid() + dir * (r * a.aperture());
                (tdoa(&u, pair01(), &a).unwrap() - ff).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn max_tdoa_examples() {
        let a = MicArray::new(
            vec![Point3::ORIGIN, Point3::new(0.0, 0.343, 0.0)],
            48_000.0,
            343.0,
        )
        .unwrap();
        assert!((max_tdoa(pair01(), &a).unwrap() - 1.0e-3).abs() < 1e-15);

        let coincident = MicArray::new(
            vec![Point3::ORIGIN, Point3::new(1e-10, 0.0, 0.0)],
            48_000.0,
            343.0,
        );
        assert!(coincident.is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = two_mics();
        let bound = max_tdoa(pair01(), &a).unwrap();
        for _ in 0..10_000 {
            let u = Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            assert!(tdoa(&u, pair01(), &a).unwrap().abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hyperboloid_locus_has_constant_tdoa() {
        // Foci at (-a, 0, 0) and (a, 0, 0); the branch x > 0 of
        // x^2/A^2 - (y^2 + z^2)/B^2 = 1 has distance difference 2A.
        let half = 0.7;
        let a = MicArray::new(
            vec![Point3::new(-half, 0.0, 0.0), Point3::new(half, 0.0, 0.0)],
            16_000.0,
            343.0,
        )
        .unwrap();
        let big_a = 0.4;
        let big_b = (half * half - big_a * big_a).sqrt();
        let expected = 2.0 * big_a / 343.0;
        for i in 0..40 {
            let t = -2.0 + 0.1 * i as f64;
            for j in 0..12 {
                let phi = j as f64 * std::f64::consts::TAU / 12.0;
                let u = Point3::new(
                    big_a * t.cosh(),
                    big_b * t.sinh() * phi.cos(),
                    big_b * t.sinh() * phi.sin(),
                );
                let got = tdoa(&u, pair01(), &a).unwrap();
                assert!((got - expected).abs() < 1e-12, "t={t} phi={phi}: {got}");
            }
        }
    }

    #[test]
    fn swapped_pair_negates_exactly() {
        let a = MicArray::new(
            vec![Point3::new(0.1, 0.2, 0.3), Point3::new(1.4, -0.5, 0.9)],
            16_000.0,
            343.0,
        )
        .unwrap();
        let u = Point3::new(2.0, 1.0, -0.4);
        let p = a.positions();
        let forward = (u.distance(&p[0]) - u.distance(&p[1])) / 343.0;
        let swapped = (u.distance(&p[1]) - u.distance(&p[0])) / 343.0;
        assert_eq!(tdoa(&u, pair01(), &a).unwrap(), forward);
        assert_eq!(forward, -swapped);
    }

    #[test]
    fn pairs_are_lexicographic() {
        let pairs = canonical_pairs(4);
        let expect = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        assert_eq!(pairs.len(), 6);
        for (p, (l, m)) in pairs.iter().zip(expect) {
            assert_eq!((p.l, p.m), (l, m));
        }
        assert!(MicPair::new(2, 1).is_err());
    }

    #[test]
    fn spherical_round_trip() {
        let d = SphericalDirection::new(100f64.to_radians(), 60f64.to_radians(), Some(2.0)).unwrap();
        let back = SphericalDirection::from_vector(d.to_point(Point3::ORIGIN)).unwrap();
        assert!((back.azimuth - d.azimuth).abs() < 1e-12);
        assert!((back.elevation - d.elevation).abs() < 1e-12);
        assert!(SphericalDirection::new(0.0, 2.0, None).is_err());
    }

    #[test]
    fn array_serde_rejects_coincident() {
        let json = r#"{"positions": [[0,0,0],[0,0,0]], "sample_rate": 16000}"#;
        assert!(serde_json::from_str::<MicArray>(json).is_err());
        let json = r#"{"positions": [[0,0,0],[1,0,0]], "sample_rate": 16000}"#;
        let a: MicArray = serde_json::from_str(json).unwrap();
        assert_eq!(a.speed_of_sound(), 343.0);
    }
}
