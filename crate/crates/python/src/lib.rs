//! Python bindings. Positions are `(x, y, z)` tuples, multichannel audio is
//! a list of per-channel float lists, and configurations are passed as JSON
//! strings with the same schema as the command-line tool.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use xsrp::features::{gcc_all_pairs, temporal_gcc, BandPolicy, GccConfig};
use xsrp::grids::Volume;
use xsrp::pipeline::{validate_config, x_srp, PipelineConfig};
use xsrp::search::complexity_estimate as estimate_ops;
use xsrp::synth::{noise_signal, synthesize_free_field, NoiseColor, SceneSpec, Source};
use xsrp::tracking::{track as run_tracker, TrackerConfig};
use xsrp::{MapDomain, Point3};

type Xyz = (f64, f64, f64);

fn err(e: xsrp::Error) -> PyErr {
    match e {
        xsrp::Error::Io(_) | xsrp::Error::Wav(_) => PyOSError::new_err(e.to_string()),
        xsrp::Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn pt(p: Xyz) -> Point3 {
    Point3::new(p.0, p.1, p.2)
}

fn parse<T: serde::de::DeserializeOwned>(json: &str) -> PyResult<T> {
    serde_json::from_str(json).map_err(|e| PyValueError::new_err(format!("invalid configuration: {e}")))
}

fn domain(name: &str) -> PyResult<MapDomain> {
    match name {
        "time" => Ok(MapDomain::Time),
        "frequency" => Ok(MapDomain::Frequency),
        "volumetric" => Ok(MapDomain::Volumetric),
        "weighted" => Ok(MapDomain::Weighted),
        _ => Err(PyValueError::new_err(format!("unknown map domain {name:?}"))),
    }
}

fn gcc_config(array: &xsrp::MicArray, band_hi: Option<f64>) -> PyResult<GccConfig> {
    let policy = band_hi.map_or(BandPolicy::AntiAliasing, |hi| BandPolicy::LowPass { hi });
    Ok(GccConfig { band: policy.resolve(array).map_err(err)?, ..GccConfig::phat(xsrp::Band::full(array.sample_rate())) })
}

/// Microphone positions with their sampling rate and speed of sound.
#[pyclass(name = "MicArray", frozen, module = "pyxsrp")]
struct PyMicArray {
    inner: xsrp::MicArray,
}

#[pymethods]
impl PyMicArray {
    #[new]
    #[pyo3(signature = (mics, sample_rate, speed_of_sound = 343.0))]
    fn new(mics: Vec<Xyz>, sample_rate: f64, speed_of_sound: f64) -> PyResult<Self> {
        let inner = xsrp::MicArray::new(mics.into_iter().map(pt).collect(), sample_rate, speed_of_sound).map_err(err)?;
        Ok(PyMicArray { inner })
    }

    #[getter]
    fn positions(&self) -> Vec<Xyz> {
        self.inner.positions().iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    #[getter]
    fn sample_rate(&self) -> f64 {
        self.inner.sample_rate()
    }

    #[getter]
    fn speed_of_sound(&self) -> f64 {
        self.inner.speed_of_sound()
    }

    /// Canonical pairs `(l, m)` with `l < m`, in feature order.
    fn pairs(&self) -> Vec<(usize, usize)> {
        self.inner.pairs().iter().map(|p| (p.l, p.m)).collect()
    }

    /// `tof(u, v_l) - tof(u, v_m)` in seconds.
    fn tdoa(&self, point: Xyz, l: usize, m: usize) -> PyResult<f64> {
        let pair = xsrp::MicPair::new(l, m).map_err(err)?;
        if m >= self.inner.len() {
            return Err(PyValueError::new_err(format!("microphone {m} out of range")));
        }
        xsrp::geometry::tdoa(&pt(point), pair, &self.inner).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("MicArray({} mics, fs={} Hz)", self.inner.len(), self.inner.sample_rate())
    }
}

/// Free-field scene of static noise sources plus white sensor noise.
#[pyfunction]
#[pyo3(signature = (array, room, sources, num_samples, snr_db = 20.0, seed = 0, color = "white"))]
fn simulate(
    array: &PyMicArray,
    room: Xyz,
    sources: Vec<Xyz>,
    num_samples: usize,
    snr_db: f64,
    seed: u64,
    color: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let color = match color {
        "white" => NoiseColor::White,
        "pink" => NoiseColor::Pink,
        _ => return Err(PyValueError::new_err(format!("unknown noise color {color:?}"))),
    };
    let sources = sources
        .into_iter()
        .enumerate()
        .map(|(i, p)| Source { position: pt(p), signal: noise_signal(color, num_samples, seed.wrapping_add(i as u64 + 1)) })
        .collect();
    let scene = SceneSpec { room_dims: pt(room), sources, sample_rate: array.inner.sample_rate(), snr_db, seed };
    let mut out = synthesize_free_field(&scene, &array.inner).map_err(err)?;
    out.iter_mut().for_each(|c| c.truncate(num_samples));
    Ok(out)
}

/// GCC-PHAT lag vectors, one per pair; entry `k` is lag `k - (L - 1)`.
#[pyfunction]
#[pyo3(signature = (frames, array, band_hi = None))]
fn gcc_phat(frames: Vec<Vec<f64>>, array: &PyMicArray, band_hi: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    let cfg = gcc_config(&array.inner, band_hi)?;
    let gccs = gcc_all_pairs(&frames, &array.inner, &cfg).map_err(err)?;
    Ok(gccs.iter().map(|g| temporal_gcc(g).values).collect())
}

/// Default pipeline configuration as JSON.
#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&PipelineConfig::default()).expect("config serializes")
}

/// Every incompatibility in a pipeline configuration; empty when runnable.
#[pyfunction]
fn validate(config_json: &str) -> PyResult<Vec<String>> {
    Ok(validate_config(&parse(config_json)?))
}

fn run(config_json: &str, frames: Vec<Vec<f64>>, array: &PyMicArray, room: Option<Xyz>) -> PyResult<xsrp::PipelineOutput> {
    let cfg: PipelineConfig = parse(config_json)?;
    x_srp(&frames, &array.inner, room.map(pt), &cfg).map_err(err)
}

/// Runs the pipeline on one frame; returns `[(x, y, z, score)]`.
#[pyfunction]
#[pyo3(signature = (config_json, frames, array, room = None))]
fn localize(config_json: &str, frames: Vec<Vec<f64>>, array: &PyMicArray, room: Option<Xyz>) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let out = run(config_json, frames, array, room)?;
    Ok(out.estimates.estimates.iter().map(|e| (e.position.x, e.position.y, e.position.z, e.score)).collect())
}

/// The map a single-pass pipeline builds: `(points, scores)`.
#[pyfunction]
#[pyo3(signature = (config_json, frames, array, room = None))]
fn srp_map(config_json: &str, frames: Vec<Vec<f64>>, array: &PyMicArray, room: Option<Xyz>) -> PyResult<(Vec<Xyz>, Vec<f64>)> {
    let map = run(config_json, frames, array, room)?
        .map
        .ok_or_else(|| PyValueError::new_err("this pipeline does not build a full map"))?;
    Ok((map.points.iter().map(|p| (p.x, p.y, p.z)).collect(), map.scores))
}

/// Particle-filter trajectory over a list of frames; returns
/// `[(t_seconds, x, y, z, ess)]`.
#[pyfunction]
#[pyo3(signature = (frames, array, room, tracker_json = "{}", band_hi = None))]
fn track(
    frames: Vec<Vec<Vec<f64>>>,
    array: &PyMicArray,
    room: Xyz,
    tracker_json: &str,
    band_hi: Option<f64>,
) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let cfg: TrackerConfig = parse(tracker_json)?;
    let gcc = gcc_config(&array.inner, band_hi)?;
    let room = Volume::room(pt(room)).map_err(err)?;
    let points = run_tracker(&frames, &array.inner, &room, &gcc, &cfg).map_err(err)?;
    Ok(points.iter().map(|p| (p.t_seconds, p.x, p.y, p.z, p.ess)).collect())
}

/// Predicted operation count for `m` mics, frame length `l`, `g` candidates.
#[pyfunction]
#[pyo3(signature = (m, l, g, domain_name = "frequency"))]
fn complexity_estimate(m: usize, l: usize, g: usize, domain_name: &str) -> PyResult<f64> {
    estimate_ops(m, l, g, domain(domain_name)?).map_err(err)
}

/// `(channels, sample_rate)` from a 16-bit PCM or 32-bit float WAV file.
#[pyfunction]
fn read_wav(path: std::path::PathBuf) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let a = xsrp::io::read_wav(&path).map_err(err)?;
    Ok((a.channels, a.sample_rate))
}

#[pyfunction]
fn write_wav(path: std::path::PathBuf, channels: Vec<Vec<f64>>, sample_rate: u32) -> PyResult<()> {
    xsrp::io::write_wav(&path, &channels, sample_rate).map_err(err)
}

#[pymodule]
fn pyxsrp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMicArray>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(gcc_phat, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(srp_map, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    Ok(())
}
