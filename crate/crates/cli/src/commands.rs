//! The six CLI verbs.

use std::path::{Path, PathBuf};

use qoct_core::analysis::singular_value_ratio;
use qoct_core::coincidence::{accumulate, match_pairs, normalize, MatchStats};
use qoct_core::events::{simulate_run, ClickModel, RunConfig, TimeTag};
use qoct_core::interferometer::{biphoton_jsa, biphoton_joint_spectrum};
use qoct_core::io::{csv, pgm, qtag};
use qoct_core::reconstruct::{ascan_for_mode, bscan, peak_metrics, rolloff, AScan, BScan, RolloffCurve, SpectrumMode};
use qoct_core::scene::{Scene, SceneObject};
use qoct_core::spectral::{JointSpectrum, SpectrumKind};

use crate::config::{Config, SourceModel};
use crate::error::{data, CliError};
use crate::output::write_atomic;

type Res<T> = std::result::Result<T, CliError>;

pub const JOINT_FILE: &str = "joint.csv";
pub const TAGS_FILE: &str = "tags.qtag";
pub const MC_JOINT_FILE: &str = "joint_mc.csv";
pub const ROLLOFF_FILE: &str = "rolloff.csv";
pub const COMPARE_FILE: &str = "compare.txt";

/// Analytic joint spectrum for the configured source and object.
pub fn simulate_joint(cfg: &Config) -> Res<JointSpectrum> {
    joint_for_scene(cfg, cfg.scene()?)
}

pub fn joint_for_scene(cfg: &Config, scene: &Scene) -> Res<JointSpectrum> {
    let grid = cfg.grid()?;
    let js = match cfg.source()?.model {
        SourceModel::Coherent => cfg.coherent_setup()?.joint_spectrum(scene, &grid)?,
        SourceModel::Biphoton => {
            let jsa = biphoton_jsa(&cfg.biphoton(None)?, &grid)?;
            biphoton_joint_spectrum(&jsa, &scene.transfer(&grid, grid.center()))?
        }
    };
    Ok(js)
}

pub fn write_simulate_joint(cfg: &Config, out: &Path) -> Res<PathBuf> {
    let js = simulate_joint(cfg)?;
    write_joint(&out.join(JOINT_FILE), &js, cfg)
}

fn write_joint(path: &Path, js: &JointSpectrum, cfg: &Config) -> Res<PathBuf> {
    let meta = cfg.provenance();
    write_atomic(path, |mut w| csv::write_joint(&mut w, js, &meta))
}

fn coherent_only(cfg: &Config, verb: &str) -> Res<()> {
    match cfg.source()?.model {
        SourceModel::Coherent => Ok(()),
        SourceModel::Biphoton => Err(CliError::Config(format!("{verb} supports the coherent source only"))),
    }
}

/// Per-bin click probabilities of the analytic model for the Monte Carlo.
pub fn click_model(cfg: &Config) -> Res<ClickModel> {
    coherent_only(cfg, "simulate-tags")?;
    let grid = cfg.grid()?;
    let (p_a, p_b) = cfg.coherent_setup()?.click_probabilities(cfg.scene()?, &grid)?;
    Ok(ClickModel { grid, p_a, p_b })
}

pub fn run_config(cfg: &Config, seed: Option<u64>) -> Res<RunConfig> {
    let mut run = cfg.run()?;
    if let Some(s) = seed {
        run.rng_seed = s;
    }
    Ok(run)
}

pub fn simulate_tags(cfg: &Config, seed: Option<u64>) -> Res<(Vec<TimeTag>, RunConfig)> {
    let run = run_config(cfg, seed)?;
    let model = click_model(cfg)?;
    let (fa, fb) = cfg.fibers()?;
    Ok((simulate_run(&model, &fa, &fb, &run)?, run))
}

fn meta_path(tags: &Path) -> PathBuf {
    let mut s = tags.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_simulate_tags(cfg: &Config, seed: Option<u64>, out: &Path) -> Res<(PathBuf, usize)> {
    let (tags, run) = simulate_tags(cfg, seed)?;
    let path = out.join(TAGS_FILE);
    write_atomic(&path, |mut w| qtag::write_qtag(&mut w, &tags))?;
    let meta = format!(
        "config_hash={}\nn_pulses={}\nseed={}\nrecords={}\n",
        cfg.hash,
        run.n_pulses,
        run.rng_seed,
        tags.len()
    );
    write_atomic(&meta_path(&path), |w| Ok(w.write_all(meta.as_bytes())?))?;
    Ok((path, tags.len()))
}

/// Histogram of matched pairs per pulse on the configured grid.
pub fn process_tags(cfg: &Config, tags: &[TimeTag], n_pulses: u64) -> Res<(JointSpectrum, MatchStats)> {
    let grid = cfg.grid()?;
    let (fa, fb) = cfg.fibers()?;
    let (pairs, stats) = match_pairs(tags, &grid, &fa, &fb).map_err(data)?;
    let counts = accumulate(&pairs, &grid);
    let mut js = normalize(&counts, n_pulses).map_err(data)?;
    js.metadata.insert("n_pulses".into(), n_pulses.to_string());
    for kv in stats.summary_line().split_whitespace() {
        if let Some((k, v)) = kv.split_once('=') {
            js.metadata.insert(format!("match_{k}"), v.to_string());
        }
    }
    Ok((js, stats))
}

/// Pulse count of a tag file: from its `.meta` sidecar when present,
/// otherwise from the config.
pub fn tag_file_pulses(cfg: &Config, tags: &Path) -> Res<u64> {
    match std::fs::read_to_string(meta_path(tags)) {
        Ok(text) => text
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "n_pulses")
            .and_then(|(_, v)| v.trim().parse().ok())
            .ok_or_else(|| CliError::Data(format!("{} has no valid n_pulses", meta_path(tags).display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(cfg.run()?.n_pulses),
        Err(e) => Err(e.into()),
    }
}

pub fn read_tags(path: &Path) -> Res<Vec<TimeTag>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    qtag::read_qtag(&mut f).map_err(data)
}

pub fn write_process_tags(cfg: &Config, tags_path: &Path, out: &Path) -> Res<(PathBuf, MatchStats)> {
    let tags = read_tags(tags_path)?;
    let n = tag_file_pulses(cfg, tags_path)?;
    let (js, stats) = process_tags(cfg, &tags, n)?;
    Ok((write_joint(&out.join(MC_JOINT_FILE), &js, cfg)?, stats))
}

/// The efficiency-weighted analytic pair probability that the Monte Carlo
/// estimates (no dark counts).
pub fn expected_pair_spectrum(cfg: &Config) -> Res<JointSpectrum> {
    let m = click_model(cfg)?;
    let (fa, fb) = cfg.fibers()?;
    let pa: Vec<f64> = m.p_a.iter().map(|p| p * fa.efficiency).collect();
    let pb: Vec<f64> = m.p_b.iter().map(|p| p * fb.efficiency).collect();
    Ok(JointSpectrum::outer(m.grid, &pa, m.grid, &pb, SpectrumKind::Probability)?)
}

pub fn read_joint(path: &Path) -> Res<JointSpectrum> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    csv::read_joint(f).map_err(data)
}

pub fn reconstruct_one(cfg: &Config, js: &JointSpectrum, mode: SpectrumMode) -> Res<AScan> {
    ascan_for_mode(js, mode, &cfg.reconstruct).map_err(data)
}

/// Scenes for the lateral positions of a B-scan: the object shifted by
/// `gap_step` per column.
pub fn lateral_scenes(cfg: &Config) -> Res<Vec<Scene>> {
    let b = cfg.bscan.as_ref().ok_or_else(|| CliError::Config("missing [bscan] section".into()))?;
    let base = cfg.scene()?;
    (0..b.positions)
        .map(|i| {
            let shift = i as f64 * b.gap_step;
            let object = match &base.object {
                SceneObject::Mirror(m) => SceneObject::Mirror(qoct_core::scene::MirrorObject::new(
                    m.reflectivity(),
                    m.opd() + shift,
                )?),
                SceneObject::Stack(s) => SceneObject::Stack(qoct_core::scene::LayerStack::new(
                    s.air_gap() + shift,
                    s.layers().to_vec(),
                    s.back_amplitude(),
                )?),
            };
            Ok(Scene { object, dispersion: base.dispersion })
        })
        .collect()
}

pub fn simulate_bscan(cfg: &Config) -> Res<BScan> {
    let b = cfg.bscan.as_ref().ok_or_else(|| CliError::Config("missing [bscan] section".into()))?;
    let jss = lateral_scenes(cfg)?
        .iter()
        .map(|s| joint_for_scene(cfg, s))
        .collect::<Res<Vec<_>>>()?;
    Ok(bscan(&jss, b.mode, &cfg.reconstruct)?)
}

fn write_bscan_files(cfg: &Config, b: &BScan, mode: SpectrumMode, floor_db: f64, out: &Path) -> Res<Vec<PathBuf>> {
    let mut meta = cfg.provenance();
    meta.insert("mode".into(), mode.as_str().into());
    meta.insert("floor_db".into(), floor_db.to_string());
    let stem = format!("bscan_{}", mode.as_str());
    let csv_path = write_atomic(&out.join(format!("{stem}.csv")), |mut w| csv::write_bscan(&mut w, b, &meta))?;
    let comments: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let grey = b.grey16(floor_db);
    let pgm_path = write_atomic(&out.join(format!("{stem}.pgm")), |mut w| {
        pgm::write_pgm16(&mut w, b.columns.len(), b.depth.len(), &grey, &comments)
    })?;
    Ok(vec![csv_path, pgm_path])
}

/// `reconstruct`: one input gives an A-scan, several give a B-scan. With no
/// inputs the B-scan is simulated from the config's `[bscan]` section.
pub fn write_reconstruct(cfg: &Config, inputs: &[PathBuf], mode: Option<SpectrumMode>, out: &Path) -> Res<Vec<PathBuf>> {
    let floor_db = cfg.bscan.as_ref().map_or(qoct_core::reconstruct::DEFAULT_LOG_FLOOR_DB, |b| b.floor_db);
    match inputs {
        [] => {
            let b = cfg.bscan.as_ref().ok_or_else(|| {
                CliError::Config("reconstruct needs input spectra or a [bscan] section".into())
            })?;
            let mode = mode.unwrap_or(b.mode);
            let mut c = cfg.clone();
            if let Some(bs) = c.bscan.as_mut() {
                bs.mode = mode;
            }
            let image = simulate_bscan(&c)?;
            write_bscan_files(cfg, &image, mode, floor_db, out)
        }
        [one] => {
            let mode = mode.unwrap_or(cfg.mode);
            let js = read_joint(one)?;
            let a = reconstruct_one(cfg, &js, mode)?;
            let mut meta = cfg.provenance();
            meta.insert("mode".into(), mode.as_str().into());
            meta.insert("source_file".into(), one.display().to_string());
            if let Some(w) = cfg.peak_window {
                let p = peak_metrics(&a, w).map_err(data)?;
                meta.insert("peak_position_um".into(), (p.position * 1e6).to_string());
                meta.insert("peak_fwhm_um".into(), (p.fwhm * 1e6).to_string());
                meta.insert("peak_height".into(), p.height.to_string());
                meta.insert("peak_ambiguous".into(), p.ambiguous.to_string());
            }
            let path = out.join(format!("ascan_{}.csv", mode.as_str()));
            Ok(vec![write_atomic(&path, |mut w| csv::write_ascan(&mut w, &a, &meta))?])
        }
        many => {
            let mode = mode.unwrap_or(cfg.mode);
            let jss = many.iter().map(|p| read_joint(p)).collect::<Res<Vec<_>>>()?;
            let image = bscan(&jss, mode, &cfg.reconstruct).map_err(data)?;
            write_bscan_files(cfg, &image, mode, floor_db, out)
        }
    }
}

/// Mirror depth sweep using the configured source and spectrometer.
pub fn rolloff_curve(cfg: &Config) -> Res<RolloffCurve> {
    let r = cfg.rolloff.as_ref().ok_or_else(|| CliError::Config("missing [rolloff] section".into()))?;
    let reflectivity = match cfg.scene.as_ref().map(|s| &s.object) {
        Some(SceneObject::Mirror(m)) => m.reflectivity(),
        _ => 1.0,
    };
    let scans = r
        .depths
        .iter()
        .map(|&z| {
            let scene = Scene::mirror(reflectivity, z)?;
            let js = joint_for_scene(cfg, &scene)?;
            Ok(ascan_for_mode(&js, r.mode, &cfg.reconstruct)?)
        })
        .collect::<Res<Vec<_>>>()?;
    Ok(rolloff(&scans, &r.depths, r.half_window)?)
}

pub fn write_rolloff(cfg: &Config, out: &Path) -> Res<PathBuf> {
    let curve = rolloff_curve(cfg)?;
    let mut meta = cfg.provenance();
    if let Some(r) = &cfg.rolloff {
        meta.insert("mode".into(), r.mode.as_str().into());
    }
    write_atomic(&out.join(ROLLOFF_FILE), |mut w| csv::write_rolloff(&mut w, &curve, &meta))
}

/// Classical vs biphoton figures of merit for a mirror object.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub classical_fwhm: f64,
    pub biphoton_fwhm: f64,
    /// Dispersion runs: the mirror at the dispersion OPD without and with
    /// the extra quadratic phase.
    pub classical_fwhm_deep: f64,
    pub classical_fwhm_dispersed: f64,
    /// Gaussian-chirp prediction for the classical broadening factor.
    pub predicted_broadening: f64,
    pub biphoton_fwhm_deep: f64,
    pub biphoton_fwhm_dispersed: f64,
    pub classical_svr: f64,
    pub biphoton_svr: f64,
}

impl CompareReport {
    pub fn resolution_ratio(&self) -> f64 {
        self.biphoton_fwhm / self.classical_fwhm
    }

    pub fn classical_broadening(&self) -> f64 {
        self.classical_fwhm_dispersed / self.classical_fwhm_deep
    }

    pub fn biphoton_change(&self) -> f64 {
        self.biphoton_fwhm_dispersed / self.biphoton_fwhm_deep - 1.0
    }

    pub fn lines(&self) -> Vec<String> {
        let um = |v: f64| format!("{:.4}", v * 1e6);
        vec![
            format!("classical_fwhm_um={}", um(self.classical_fwhm)),
            format!("biphoton_fwhm_um={}", um(self.biphoton_fwhm)),
            format!("resolution_ratio={:.4}", self.resolution_ratio()),
            format!("classical_fwhm_deep_um={}", um(self.classical_fwhm_deep)),
            format!("classical_fwhm_dispersed_um={}", um(self.classical_fwhm_dispersed)),
            format!("classical_broadening={:.4}", self.classical_broadening()),
            format!("predicted_broadening={:.4}", self.predicted_broadening),
            format!("biphoton_fwhm_deep_um={}", um(self.biphoton_fwhm_deep)),
            format!("biphoton_fwhm_dispersed_um={}", um(self.biphoton_fwhm_dispersed)),
            format!("biphoton_fwhm_change={:.4}", self.biphoton_change()),
            format!("classical_sv_ratio={:.3e}", self.classical_svr),
            format!("biphoton_sv_ratio={:.3e}", self.biphoton_svr),
        ]
    }
}

/// Default peak window around a mirror: half to one and a half times its OPD.
fn mirror_window(explicit: Option<(f64, f64)>, scene: &Scene) -> Res<(f64, f64)> {
    if let Some(w) = explicit {
        return Ok(w);
    }
    match &scene.object {
        SceneObject::Mirror(m) if m.opd() > 0.0 => Ok((0.5 * m.opd(), 1.5 * m.opd())),
        _ => Err(CliError::Config("compare needs a mirror at positive OPD or [reconstruct] peak_min_um/peak_max_um".into())),
    }
}

pub fn compare(cfg: &Config) -> Res<CompareReport> {
    let c = cfg.compare.as_ref().ok_or_else(|| CliError::Config("missing [compare] section".into()))?;
    let grid = cfg.grid()?;
    let plain = Scene { dispersion: None, ..cfg.scene()?.clone() };
    let deep = match (c.dispersion_opd, &plain.object) {
        (None, _) => plain.clone(),
        (Some(z), SceneObject::Mirror(m)) => Scene::mirror(m.reflectivity(), z)?,
        (Some(_), SceneObject::Stack(_)) => {
            return Err(CliError::Config("[compare] dispersion_opd_um needs a mirror object".into()))
        }
    };
    let window = mirror_window(cfg.peak_window, &plain)?;
    let deep_window = if c.dispersion_opd.is_some() { mirror_window(None, &deep)? } else { window };
    let dispersed = deep.clone().with_dispersion(c.gvd, c.length);
    let setup = cfg.coherent_setup()?;
    let jsa = biphoton_jsa(&cfg.biphoton(Some(c.rho))?, &grid)?;
    let mut rc = cfg.reconstruct.clone();
    rc.n_diagonals = c.n_diagonals;

    let fwhm = |js: &JointSpectrum, mode: SpectrumMode, w: (f64, f64)| -> Res<f64> {
        let a = ascan_for_mode(js, mode, &rc)?;
        Ok(peak_metrics(&a, w)?.fwhm)
    };
    let quantum = |s: &Scene| biphoton_joint_spectrum(&jsa, &s.transfer(&grid, grid.center()));
    let classical = setup.joint_spectrum(&plain, &grid)?;
    let biphoton = quantum(&plain)?;

    let s = setup.source.profile().sigma_omega / std::f64::consts::SQRT_2;
    let a = c.gvd * c.length;
    Ok(CompareReport {
        classical_fwhm: fwhm(&classical, SpectrumMode::Row, window)?,
        biphoton_fwhm: fwhm(&biphoton, SpectrumMode::Diagonal, window)?,
        classical_fwhm_deep: fwhm(&setup.joint_spectrum(&deep, &grid)?, SpectrumMode::Row, deep_window)?,
        classical_fwhm_dispersed: fwhm(&setup.joint_spectrum(&dispersed, &grid)?, SpectrumMode::Row, deep_window)?,
        predicted_broadening: (1.0 + (a * s * s).powi(2)).sqrt(),
        biphoton_fwhm_deep: fwhm(&quantum(&deep)?, SpectrumMode::Diagonal, deep_window)?,
        biphoton_fwhm_dispersed: fwhm(&quantum(&dispersed)?, SpectrumMode::Diagonal, deep_window)?,
        classical_svr: singular_value_ratio(&classical),
        biphoton_svr: singular_value_ratio(&biphoton),
    })
}

pub fn write_compare(cfg: &Config, out: &Path) -> Res<(PathBuf, CompareReport)> {
    let report = compare(cfg)?;
    let mut text = format!("config_hash={}\n", cfg.hash);
    for l in report.lines() {
        text.push_str(&l);
        text.push('\n');
    }
    let path = write_atomic(&out.join(COMPARE_FILE), |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok((path, report))
}
