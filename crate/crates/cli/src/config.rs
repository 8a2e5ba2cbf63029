//! Run configuration in the `key = value` / `[section]` format.
//!
//! Units follow the names of the keys (`_nm`, `_um`, `_km`, `_ps`, `_fs`,
//! `_fs2_per_mm`, `_deg`, `_mhz`, `_hz`). Every section is optional at parse
//! time; commands ask for what they need and fail with a config error when
//! it is missing.

use std::collections::BTreeMap;
use std::path::Path;

use qoct_core::events::{FiberSpectrometer, RunConfig};
use qoct_core::interferometer::{BeamSplitter, BiphotonSource, CoherentSetup, CoherentSource, PortB};
use qoct_core::io::kv::{self, Section};
use qoct_core::reconstruct::{AScanConfig, DiagonalOrientation, ReconstructConfig, SpectrumMode, Window};
use qoct_core::scene::{scene_from_sections, Scene, FS2_PER_MM};
use qoct_core::spectral::{make_grid, wavelength_width_to_omega, GaussianProfile, SpectralGrid, SPEED_OF_LIGHT};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const NM: f64 = 1e-9;
const UM: f64 = 1e-6;

type Res<T> = std::result::Result<T, CliError>;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<qoct_core::Error> for CliError {
    fn from(e: qoct_core::Error) -> Self {
        match e {
            qoct_core::Error::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    Coherent,
    Biphoton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub model: SourceModel,
    pub center_wavelength: f64,
    pub sigma_lambda: f64,
    pub sigma_prime_lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rep_rate: f64,
    pub photons_per_alpha_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub center_wavelength: f64,
    pub span_wavelength: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub tau: f64,
    /// Spectrometer resolution in wavelength (m), converted at the centre.
    pub bin_width_lambda: Option<f64>,
    pub bin_subsamples: usize,
    pub port_b: PortB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloffConfig {
    pub depths: Vec<f64>,
    pub half_window: f64,
    pub mode: SpectrumMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BScanConfig {
    pub positions: usize,
    /// Air-gap change per lateral step (m), for tilted objects.
    pub gap_step: f64,
    pub mode: SpectrumMode,
    pub floor_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub rho: f64,
    pub gvd: f64,
    pub length: f64,
    pub n_diagonals: usize,
    /// Mirror OPD for the dispersion runs (m); the object's OPD when unset.
    pub dispersion_opd: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub hash: String,
    pub source: Option<SourceConfig>,
    pub grid: Option<GridConfig>,
    pub splitter: BeamSplitter,
    pub model: ModelConfig,
    pub scene: Option<Scene>,
    pub fiber_a: Option<FiberSpectrometer>,
    pub fiber_b: Option<FiberSpectrometer>,
    pub run: Option<RunConfig>,
    pub reconstruct: ReconstructConfig,
    pub mode: SpectrumMode,
    /// Peak search window for reports (m).
    pub peak_window: Option<(f64, f64)>,
    pub rolloff: Option<RolloffConfig>,
    pub bscan: Option<BScanConfig>,
    pub compare: Option<CompareConfig>,
}

const OBJECT_SECTIONS: [&str; 4] = ["mirror", "stack", "layer", "dispersion"];
const KNOWN: [&str; 14] = [
    "source", "grid", "beamsplitter", "model", "mirror", "stack", "layer", "dispersion", "fiber_a", "fiber_b", "run",
    "reconstruct", "rolloff", "bscan",
];

fn hash_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_enum<T>(s: &mut Section, key: &str, default: T, f: impl Fn(&str) -> Option<T>) -> Res<T> {
    match s.get::<String>(key)? {
        None => Ok(default),
        Some(v) => f(&v).ok_or_else(|| cfg_err(format!("[{}] {key}: unknown value '{v}'", s.name))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Res<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Res<Self> {
        let mut sections = kv::parse(text)?;
        let mut singles: BTreeMap<String, Section> = BTreeMap::new();
        let mut object = Vec::new();
        let mut compare = None;
        for s in sections.drain(..) {
            let name = s.name.clone();
            if name == "compare" {
                compare = Some(s);
                continue;
            }
            if !KNOWN.contains(&name.as_str()) {
                return Err(cfg_err(format!("line {}: unknown section [{name}]", s.line)));
            }
            if OBJECT_SECTIONS.contains(&name.as_str()) {
                object.push(s);
            } else if singles.insert(name.clone(), s).is_some() {
                return Err(cfg_err(format!("section [{name}] appears more than once")));
            }
        }
        let scene = if object.is_empty() { None } else { Some(scene_from_sections(&mut object)?) };

        let source = match singles.remove("source") {
            None => None,
            Some(mut s) => {
                let model = parse_enum(&mut s, "model", SourceModel::Coherent, |v| match v {
                    "coherent" => Some(SourceModel::Coherent),
                    "biphoton" => Some(SourceModel::Biphoton),
                    _ => None,
                })?;
                let center: f64 = s.require("center_wavelength_nm")?;
                let sigma: f64 = s.require("sigma_nm")?;
                let sigma_p: f64 = s.get_or("sigma_prime_nm", sigma)?;
                let out = SourceConfig {
                    model,
                    center_wavelength: center * NM,
                    sigma_lambda: sigma * NM,
                    sigma_prime_lambda: sigma_p * NM,
                    alpha: s.get_or("alpha", 0.1)?,
                    rho: s.get_or("rho", -0.5)?,
                    rep_rate: s.get_or("rep_rate_mhz", 100.0)? * 1e6,
                    photons_per_alpha_sq: s.get_or("photons_per_alpha_sq", 100.0)?,
                };
                s.finish()?;
                Some(out)
            }
        };

        let grid = match singles.remove("grid") {
            None => None,
            Some(mut s) => {
                let center = match s.get::<f64>("center_wavelength_nm")? {
                    Some(c) => c * NM,
                    None => source
                        .as_ref()
                        .map(|x| x.center_wavelength)
                        .ok_or_else(|| cfg_err("[grid] needs center_wavelength_nm when there is no [source]"))?,
                };
                let out = GridConfig {
                    center_wavelength: center,
                    span_wavelength: s.require::<f64>("span_nm")? * NM,
                    points: s.require("points")?,
                };
                s.finish()?;
                Some(out)
            }
        };

        let splitter = match singles.remove("beamsplitter") {
            None => BeamSplitter::balanced(),
            Some(mut s) => {
                let out = BeamSplitter {
                    theta: s.get_or("theta_deg", 90.0f64)?.to_radians(),
                    phi_t: s.get_or("phi_t_deg", 0.0f64)?.to_radians(),
                    phi_r: s.get_or("phi_r_deg", 0.0f64)?.to_radians(),
                };
                s.finish()?;
                out
            }
        };

        let model = {
            let mut s = singles.remove("model").unwrap_or_else(|| Section::new("model"));
            let out = ModelConfig {
                tau: s.get_or("tau_fs", 0.0)? * 1e-15,
                bin_width_lambda: s.get::<f64>("bin_width_nm")?.map(|w| w * NM),
                bin_subsamples: s.get_or("bin_subsamples", 32)?,
                port_b: parse_enum(&mut s, "port_b", PortB::Printed, PortB::parse)?,
            };
            s.finish()?;
            out
        };

        let mut fiber = |name: &str| -> Res<Option<FiberSpectrometer>> {
            let Some(mut s) = singles.remove(name) else {
                return Ok(None);
            };
            let reference = match s.get::<f64>("ref_wavelength_nm")? {
                Some(w) => 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (w * NM),
                None => grid
                    .as_ref()
                    .map(|g| 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / g.center_wavelength)
                    .ok_or_else(|| cfg_err(format!("[{name}] needs ref_wavelength_nm or a [grid]")))?,
            };
            let f = FiberSpectrometer {
                length: s.get_or("length_km", 5.0)? * 1e3,
                beta1_ref: s.get_or("group_index", 1.468)? / SPEED_OF_LIGHT,
                beta2: s.get_or("gvd_fs2_per_mm", -23.0)? * FS2_PER_MM,
                ref_omega: reference,
                jitter_sigma: s.get_or("jitter_ps", 35.0)? * 1e-12,
                efficiency: s.get_or("efficiency", 0.65)?,
                time_bin: s.get_or("time_bin_ps", 1.0)? * 1e-12,
            };
            s.finish()?;
            Ok(Some(f.validated()?))
        };
        let fiber_a = fiber("fiber_a")?;
        let fiber_b = fiber("fiber_b")?;

        let run = match singles.remove("run") {
            None => None,
            Some(mut s) => {
                let n_pulses: u64 = s.require("n_pulses")?;
                if n_pulses == 0 {
                    return Err(cfg_err("[run] n_pulses must be at least 1"));
                }
                let out = RunConfig {
                    n_pulses,
                    rng_seed: s.get_or("seed", 1)?,
                    dark_count_rate: s.get_or("dark_count_rate_hz", 0.0)?,
                    rep_rate: source.as_ref().map_or(100e6, |x| x.rep_rate),
                };
                s.finish()?;
                Some(out)
            }
        };

        let (reconstruct, mode, peak_window) = {
            let mut s = singles.remove("reconstruct").unwrap_or_else(|| Section::new("reconstruct"));
            let mode = parse_enum(&mut s, "mode", SpectrumMode::Row, SpectrumMode::parse)?;
            let ascan = AScanConfig {
                zero_pad: s.get_or("zero_pad", 4)?,
                window: parse_enum(&mut s, "window", Window::None, Window::parse)?,
                remove_dc: s.get_or("remove_dc", false)?,
                depth_scale: 1.0,
            };
            let n_diagonals = s.get_or("n_diagonals", 20)?;
            let orientation = parse_enum(&mut s, "orientation", DiagonalOrientation::Anti, DiagonalOrientation::parse)?;
            let diagonal_depth_scale = s.get::<f64>("diagonal_depth_scale")?;
            let mut phase_poly = s.get_list::<f64>("phase_poly")?.unwrap_or_default();
            let gvd = s.get::<f64>("compensate_gvd_fs2_per_mm")?;
            let len = s.get::<f64>("compensate_length_mm")?;
            match (gvd, len) {
                (Some(g), Some(l)) => {
                    phase_poly.resize(phase_poly.len().max(3), 0.0);
                    phase_poly[2] += 0.5 * g * FS2_PER_MM * l * 1e-3;
                }
                (None, None) => {}
                _ => return Err(cfg_err("[reconstruct] compensate_gvd_fs2_per_mm and compensate_length_mm go together")),
            }
            let lo = s.get::<f64>("peak_min_um")?;
            let hi = s.get::<f64>("peak_max_um")?;
            s.finish()?;
            let window = match (lo, hi) {
                (Some(a), Some(b)) => Some((a * UM, b * UM)),
                (None, None) => None,
                _ => return Err(cfg_err("[reconstruct] peak_min_um and peak_max_um go together")),
            };
            let cfg = ReconstructConfig { ascan, n_diagonals, orientation, diagonal_depth_scale, phase_poly };
            (cfg, mode, window)
        };

        let rolloff = match singles.remove("rolloff") {
            None => None,
            Some(mut s) => {
                let depths = match s.get_list::<f64>("depths_um")? {
                    Some(d) => d,
                    None => {
                        let start: f64 = s.require("start_um")?;
                        let stop: f64 = s.require("stop_um")?;
                        let steps: usize = s.require("steps")?;
                        if steps < 2 {
                            return Err(cfg_err("[rolloff] steps must be at least 2"));
                        }
                        (0..steps).map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64).collect()
                    }
                };
                let out = RolloffConfig {
                    depths: depths.into_iter().map(|d| d * UM).collect(),
                    half_window: s.get_or("half_window_um", 20.0)? * UM,
                    mode: parse_enum(&mut s, "mode", mode, SpectrumMode::parse)?,
                };
                s.finish()?;
                Some(out)
            }
        };

        let bscan = match singles.remove("bscan") {
            None => None,
            Some(mut s) => {
                let out = BScanConfig {
                    positions: s.get_or("positions", 10)?,
                    gap_step: s.get_or("gap_step_um", 0.0)? * UM,
                    mode: parse_enum(&mut s, "mode", mode, SpectrumMode::parse)?,
                    floor_db: s.get_or("floor_db", qoct_core::reconstruct::DEFAULT_LOG_FLOOR_DB)?,
                };
                s.finish()?;
                if out.positions == 0 {
                    return Err(cfg_err("[bscan] positions must be at least 1"));
                }
                if !(out.floor_db < 0.0) {
                    return Err(cfg_err("[bscan] floor_db must be negative"));
                }
                Some(out)
            }
        };

        let compare = match compare {
            None => None,
            Some(mut s) => {
                let out = CompareConfig {
                    rho: s.get_or("rho", -0.99)?,
                    gvd: s.get_or("gvd_fs2_per_mm", 23.0)? * FS2_PER_MM,
                    length: s.get_or("length_mm", 0.0)? * 1e-3,
                    n_diagonals: s.get_or("n_diagonals", reconstruct.n_diagonals)?,
                    dispersion_opd: s.get::<f64>("dispersion_opd_um")?.map(|z| z * UM),
                };
                s.finish()?;
                Some(out)
            }
        };
        debug_assert!(singles.is_empty());

        Ok(Self {
            hash: hash_hex(text.as_bytes()),
            source,
            grid,
            splitter,
            model,
            scene,
            fiber_a,
            fiber_b,
            run,
            reconstruct,
            mode,
            peak_window,
            rolloff,
            bscan,
            compare,
        })
    }

    pub fn source(&self) -> Res<&SourceConfig> {
        self.source.as_ref().ok_or_else(|| cfg_err("missing [source] section"))
    }

    pub fn grid(&self) -> Res<SpectralGrid> {
        let g = self.grid.as_ref().ok_or_else(|| cfg_err("missing [grid] section"))?;
        Ok(make_grid(g.center_wavelength, g.span_wavelength, g.points)?)
    }

    pub fn scene(&self) -> Res<&Scene> {
        self.scene.as_ref().ok_or_else(|| cfg_err("missing object section ([mirror] or [stack])"))
    }

    pub fn run(&self) -> Res<RunConfig> {
        self.run.ok_or_else(|| cfg_err("missing [run] section"))
    }

    pub fn fibers(&self) -> Res<(FiberSpectrometer, FiberSpectrometer)> {
        let a = self.fiber_a.ok_or_else(|| cfg_err("missing [fiber_a] section"))?;
        let b = self.fiber_b.ok_or_else(|| cfg_err("missing [fiber_b] section"))?;
        Ok((a, b))
    }

    pub fn profile(&self) -> Res<GaussianProfile> {
        let s = self.source()?;
        Ok(GaussianProfile::from_wavelength(s.center_wavelength, s.sigma_lambda)?)
    }

    pub fn coherent_setup(&self) -> Res<CoherentSetup> {
        let s = self.source()?;
        let src = CoherentSource::new(s.alpha, self.profile()?, s.rep_rate)?;
        let mut setup = CoherentSetup::new(src, self.splitter);
        setup.tau = self.model.tau;
        setup.port_b = self.model.port_b;
        setup.photons_per_alpha_sq = s.photons_per_alpha_sq;
        setup.bin_subsamples = self.model.bin_subsamples;
        setup.bin_width = self
            .model
            .bin_width_lambda
            .map(|w| wavelength_width_to_omega(s.center_wavelength, w));
        Ok(setup)
    }

    /// Biphoton source with the configured correlation, or `rho` if given.
    pub fn biphoton(&self, rho: Option<f64>) -> Res<BiphotonSource> {
        let s = self.source()?;
        let sigma = wavelength_width_to_omega(s.center_wavelength, s.sigma_lambda);
        let sigma_p = wavelength_width_to_omega(s.center_wavelength, s.sigma_prime_lambda);
        let center = self.profile()?.center_omega;
        Ok(BiphotonSource::new(sigma, sigma_p, rho.unwrap_or(s.rho), center)?)
    }

    /// Metadata embedded in every output file.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("config_hash".to_string(), self.hash.clone()),
            ("generator".to_string(), format!("qoct {}", env!("CARGO_PKG_VERSION"))),
        ])
    }
}
