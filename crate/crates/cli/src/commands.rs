use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use xsrp::bench::{run_sweep, BenchSweep, CSV_HEADER};
use xsrp::features::{frame_channels, gcc_all_pairs, FrameConfig};
use xsrp::geometry::tdoa;
use xsrp::grids::Volume;
use xsrp::io::{map_to_pgm, read_wav, write_map_csv, write_wav, Audio};
use xsrp::pipeline::{validate_config, x_srp, FeatureUpdater, GridUpdater};
use xsrp::srp::{FreqScorer, Steering};
use xsrp::synth::{add_noise, noise_signal, render_stepwise};
use xsrp::tracking::Tracker;
use xsrp::{EstimateSet, MicArray, Point3};

use crate::config::RunConfig;
use crate::error::{usage, CliError, CliResult};
use crate::manifest::{manifest_path, write_file, RunManifest};

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::ConfigParse { path: path.display().to_string(), source })
}

fn create(path: &Path) -> CliResult<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write { path: path.display().to_string(), source }
}

#[derive(Serialize)]
struct PairTdoa {
    l: usize,
    m: usize,
    tdoa_s: f64,
}

#[derive(Serialize)]
struct SourceTruth {
    position: [f64; 3],
    velocity: Option<[f64; 3]>,
    /// TDOAs at `position` (t = 0).
    tdoas: Vec<PairTdoa>,
    /// `[t, x, y, z]` per rendering step, moving sources only.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trajectory: Vec<[f64; 4]>,
}

#[derive(Serialize)]
struct GroundTruth {
    sample_rate: f64,
    speed_of_sound: f64,
    samples: usize,
    mics: Vec<[f64; 3]>,
    sources: Vec<SourceTruth>,
}

/// Writes `scene.wav`, `truth.json` and `manifest.json` into `out_dir`.
pub fn simulate(config_path: &Path, out_dir: &Path) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg: RunConfig = load_json(config_path)?;
    let scene = cfg.scene.as_ref().ok_or_else(|| usage("simulate needs a \"scene\" section"))?;
    let array = cfg.array.build()?;
    let room = cfg.require_room()?;
    let fs = array.sample_rate();
    if !(scene.duration_s > 0.0) || scene.step == 0 || scene.sources.is_empty() {
        return Err(xsrp::Error::Config("scene needs sources, a positive duration and a positive step".into()).into());
    }
    if fs.fract() != 0.0 || fs > u32::MAX as f64 {
        return Err(xsrp::Error::Config(format!("sample rate {fs} must be a whole number of hertz")).into());
    }
    let n = (scene.duration_s * fs).round() as usize;
    let steps = n.div_ceil(scene.step);
    let inside = |p: &Point3| p.x > 0.0 && p.x < room.x && p.y > 0.0 && p.y < room.y && p.z > 0.0 && p.z < room.z;

    let mut mix = vec![vec![0.0; n]; array.len()];
    let mut truth = Vec::new();
    for (i, s) in scene.sources.iter().enumerate() {
        let p0 = Point3::from(s.position);
        let positions: Vec<Point3> = match s.velocity {
            None => vec![p0],
            Some(v) => (0..steps)
                .map(|k| p0 + Point3::from(v) * (((k * scene.step) as f64 + scene.step as f64 / 2.0) / fs))
                .collect(),
        };
        if let Some(p) = positions.iter().find(|p| !inside(p)) {
            return Err(xsrp::Error::InvalidArgument(format!(
                "source {i} at {:?} is not strictly inside the room {:?}",
                p.to_array(),
                room.to_array()
            ))
            .into());
        }
        let signal = noise_signal(s.signal, n, scene.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
        let image = render_stepwise(&signal, &positions, scene.step, &array)?;
        for (acc, ch) in mix.iter_mut().zip(&image) {
            for (a, v) in acc.iter_mut().zip(ch) {
                *a += v;
            }
        }
        let tdoas = array
            .pairs()
            .iter()
            .map(|pair| Ok(PairTdoa { l: pair.l, m: pair.m, tdoa_s: tdoa(&p0, *pair, &array)? }))
            .collect::<xsrp::Result<_>>()?;
        let trajectory = match s.velocity {
            None => Vec::new(),
            Some(_) => positions
                .iter()
                .enumerate()
                .map(|(k, p)| [(k * scene.step) as f64 / fs, p.x, p.y, p.z])
                .collect(),
        };
        truth.push(SourceTruth { position: s.position, velocity: s.velocity, tdoas, trajectory });
    }
    let noisy = add_noise(&mix, scene.snr_db, scene.seed)?;
    let render_s = t0.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
    let wav = out_dir.join("scene.wav");
    write_wav(&wav, &noisy, fs as u32)?;
    let truth_path = out_dir.join("truth.json");
    let gt = GroundTruth {
        sample_rate: fs,
        speed_of_sound: array.speed_of_sound(),
        samples: n,
        mics: cfg.array.mics.clone(),
        sources: truth,
    };
    write_file(&truth_path, serde_json::to_string_pretty(&gt).map_err(xsrp::Error::from)?.as_bytes())?;

    let mut manifest = RunManifest::new("simulate", &cfg, scene.seed)?;
    manifest.input(config_path)?;
    manifest.output(&wav)?;
    manifest.output(&truth_path)?;
    manifest.time("render", render_s);
    manifest.time("total", t0.elapsed().as_secs_f64());
    manifest.write(&out_dir.join("manifest.json"))
}

fn load_audio(path: &Path, array: &MicArray) -> CliResult<Audio> {
    let audio = read_wav(path)?;
    if audio.channels.len() != array.len() {
        return Err(xsrp::Error::InvalidArgument(format!(
            "{} has {} channels but the array has {} microphones",
            path.display(),
            audio.channels.len(),
            array.len()
        ))
        .into());
    }
    if audio.sample_rate != array.sample_rate() {
        return Err(xsrp::Error::InvalidArgument(format!(
            "{} is sampled at {} Hz but the array is configured for {} Hz; resample first",
            path.display(),
            audio.sample_rate,
            array.sample_rate()
        ))
        .into());
    }
    Ok(audio)
}

fn frames_of(audio: &Audio, fc: &FrameConfig) -> CliResult<usize> {
    fc.validate()?;
    let n = fc.num_frames(audio.channels[0].len());
    if n == 0 {
        return Err(xsrp::Error::InvalidArgument(format!(
            "audio is shorter than one {}-sample frame",
            fc.frame_len
        ))
        .into());
    }
    Ok(n)
}

#[derive(Serialize)]
struct FrameEstimates<'a> {
    frame: usize,
    t_seconds: f64,
    estimates: &'a EstimateSet,
    loop_iterations: usize,
    evaluations: u64,
}

/// Map exports are chosen by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Pgm,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(MapFormat::Csv),
            Some("pgm") => Ok(MapFormat::Pgm),
            _ => Err(usage(format!("--export-map needs a .csv or .pgm path, got {}", path.display()))),
        }
    }
}

pub fn localize(
    config_path: &Path,
    wav_path: &Path,
    out_path: &Path,
    export: Option<(&Path, usize)>,
) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg: RunConfig = load_json(config_path)?;
    let array = cfg.array.build()?;
    let pipeline = &cfg.pipeline;
    let problems = validate_config(pipeline);
    if !problems.is_empty() {
        return Err(xsrp::Error::Config(problems.join("; ")).into());
    }
    if !pipeline.grid.is_doa() {
        cfg.require_room()?;
    }
    let format = export.map(|(p, _)| MapFormat::from_path(p)).transpose()?;
    if export.is_some()
        && (pipeline.grid_updater != GridUpdater::None || pipeline.feature_updater != FeatureUpdater::None)
    {
        return Err(usage("--export-map needs a single-pass pipeline (no grid or feature updater)"));
    }
    let audio = load_audio(wav_path, &array)?;
    let n_frames = frames_of(&audio, &pipeline.frame)?;
    if let Some((_, k)) = export {
        if k >= n_frames {
            return Err(usage(format!("--map-frame {k} is past the last frame ({})", n_frames - 1)));
        }
    }
    let load_s = t0.elapsed().as_secs_f64();

    let mut out = create(out_path)?;
    let t1 = Instant::now();
    let mut exported = None;
    for i in 0..n_frames {
        let frames = frame_channels(&audio.channels, &pipeline.frame, i)?;
        let r = x_srp(&frames, &array, cfg.room(), pipeline)?;
        let line = FrameEstimates {
            frame: i,
            t_seconds: (i * pipeline.frame.hop) as f64 / array.sample_rate(),
            estimates: &r.estimates,
            loop_iterations: r.loop_iterations,
            evaluations: r.evaluations,
        };
        let text = serde_json::to_string(&line).map_err(xsrp::Error::from)?;
        writeln!(out, "{text}").map_err(write_err(out_path))?;
        if export.is_some_and(|(_, k)| k == i) {
            exported = r.map;
        }
    }
    out.flush().map_err(write_err(out_path))?;
    drop(out);
    let run_s = t1.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new("localize", &cfg, pipeline.search.seed)?;
    manifest.input(config_path)?;
    manifest.input(wav_path)?;
    manifest.output(out_path)?;
    if let (Some((path, _)), Some(format)) = (export, format) {
        let map = exported.ok_or_else(|| xsrp::Error::Config("the pipeline produced no map to export".into()))?;
        match format {
            MapFormat::Csv => {
                let mut w = create(path)?;
                write_map_csv(&map, &mut w)?;
                w.flush().map_err(write_err(path))?;
            }
            MapFormat::Pgm => write_file(path, &map_to_pgm(&map)?)?,
        }
        manifest.output(path)?;
    }
    manifest.time("load", load_s);
    manifest.time("localize", run_s);
    manifest.time("total", t0.elapsed().as_secs_f64());
    manifest.write(&manifest_path(out_path))
}

pub fn track(config_path: &Path, wav_path: &Path, out_path: &Path) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg: RunConfig = load_json(config_path)?;
    let array = cfg.array.build()?;
    let room = Volume::room(cfg.require_room()?)?;
    let gcc = cfg.gcc(&array)?;
    cfg.tracker.validate()?;
    let audio = load_audio(wav_path, &array)?;
    let fc = &cfg.pipeline.frame;
    let n_frames = frames_of(&audio, fc)?;
    let hop_s = fc.hop as f64 / array.sample_rate();
    if (cfg.tracker.langevin.dt - hop_s).abs() > 1e-9 {
        log::warn!("tracker dt {} s differs from the frame hop {hop_s} s", cfg.tracker.langevin.dt);
    }
    let load_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut tracker = Tracker::new(&room, &cfg.tracker)?;
    let mut out = create(out_path)?;
    for i in 0..n_frames {
        let frames = frame_channels(&audio.channels, fc, i)?;
        let scorer = FreqScorer::new(gcc_all_pairs(&frames, &array, &gcc)?, &array, Steering::Exact)?;
        let point = tracker.step(&scorer)?;
        let text = serde_json::to_string(&point).map_err(xsrp::Error::from)?;
        writeln!(out, "{text}").map_err(write_err(out_path))?;
    }
    out.flush().map_err(write_err(out_path))?;
    drop(out);

    let mut manifest = RunManifest::new("track", &cfg, cfg.tracker.seed)?;
    manifest.input(config_path)?;
    manifest.input(wav_path)?;
    manifest.output(out_path)?;
    manifest.time("load", load_s);
    manifest.time("track", t1.elapsed().as_secs_f64());
    manifest.time("total", t0.elapsed().as_secs_f64());
    manifest.write(&manifest_path(out_path))
}

pub fn bench(config_path: &Path, out_path: &Path) -> CliResult<()> {
    let t0 = Instant::now();
    let sweep: BenchSweep = load_json(config_path)?;
    let rows = run_sweep(&sweep)?;
    let mut out = create(out_path)?;
    writeln!(out, "{CSV_HEADER}").map_err(write_err(out_path))?;
    for r in &rows {
        writeln!(out, "{}", r.csv()).map_err(write_err(out_path))?;
    }
    out.flush().map_err(write_err(out_path))?;
    drop(out);

    let mut manifest = RunManifest::new("bench", &sweep, sweep.seed)?;
    manifest.input(config_path)?;
    manifest.output(out_path)?;
    manifest.time("sweep", rows.iter().map(|r| r.seconds).sum());
    manifest.time("total", t0.elapsed().as_secs_f64());
    manifest.write(&manifest_path(out_path))
}
