//! Object models and their spectral transfer functions `f(omega)`.
//!
//! Depths are optical path differences (OPD): a mirror at `opd = z` produces
//! fringes `exp(i omega z / c)` and an A-scan peak at `z`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::io::kv::Section;
use crate::spectral::{ComplexSpectrum, SpectralGrid, SPEED_OF_LIGHT};

/// Plane mirror with amplitude reflectivity `reflectivity` at OPD `opd` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorObject {
    reflectivity: f64,
    opd: f64,
}

impl MirrorObject {
    pub fn new(reflectivity: f64, opd: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectivity) {
            return invalid(format!("mirror reflectivity {reflectivity} outside [0, 1]"));
        }
        if !opd.is_finite() {
            return invalid("mirror OPD must be finite");
        }
        Ok(Self { reflectivity, opd })
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn opd(&self) -> f64 {
        self.opd
    }

    /// `R exp(i z (beta0 + beta1 (omega - omega_ref)))` with `beta0 = omega_ref / c`
    /// and `beta1 = 1 / c` (propagation in air).
    pub fn eval(&self, omega: f64, reference: f64) -> Complex64 {
        let beta0 = reference / SPEED_OF_LIGHT;
        let beta1 = 1.0 / SPEED_OF_LIGHT;
        let phase = self.opd * (beta0 + beta1 * (omega - reference));
        Complex64::from_polar(self.reflectivity, phase)
    }
}

pub fn mirror_transfer(grid: &SpectralGrid, obj: &MirrorObject) -> ComplexSpectrum {
    let reference = grid.center();
    let values = grid.omegas().into_iter().map(|w| obj.eval(w, reference)).collect();
    ComplexSpectrum::new(*grid, values).expect("unit phasors are finite")
}

/// One slab. `interface_amplitude` belongs to the interface at its top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    /// Physical thickness, m.
    pub thickness: f64,
    pub group_index: f64,
    pub interface_amplitude: f64,
    /// Group-velocity dispersion, s^2/m.
    pub gvd: f64,
}

/// Layered object under an air gap. Interfaces are the tops of every layer
/// plus the bottom of the last one (`back_amplitude`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    air_gap: f64,
    layers: Vec<Layer>,
    back_amplitude: f64,
}

impl LayerStack {
    pub fn new(air_gap: f64, layers: Vec<Layer>, back_amplitude: f64) -> Result<Self> {
        if layers.is_empty() {
            return invalid("layer stack needs at least one layer");
        }
        if !(air_gap.is_finite() && air_gap >= 0.0) {
            return invalid("air gap must be finite and non-negative");
        }
        for (i, l) in layers.iter().enumerate() {
            if !(l.thickness > 0.0 && l.thickness.is_finite()) {
                return invalid(format!("layer {i} thickness must be positive"));
            }
            if !(l.group_index > 0.0 && l.group_index.is_finite()) {
                return invalid(format!("layer {i} group index must be positive"));
            }
            if !(l.interface_amplitude.is_finite() && l.gvd.is_finite()) {
                return invalid(format!("layer {i} has non-finite parameters"));
            }
        }
        let energy: f64 = layers.iter().map(|l| l.interface_amplitude.powi(2)).sum::<f64>()
            + back_amplitude * back_amplitude;
        if !(energy <= 1.0) {
            return invalid(format!("sum of squared interface amplitudes {energy} exceeds 1"));
        }
        Ok(Self {
            air_gap,
            layers,
            back_amplitude,
        })
    }

    pub fn air_gap(&self) -> f64 {
        self.air_gap
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn back_amplitude(&self) -> f64 {
        self.back_amplitude
    }

    /// OPD of every interface, top to bottom: twice the accumulated optical
    /// (group) thickness.
    pub fn interface_opds(&self) -> Vec<f64> {
        let mut depth = 2.0 * self.air_gap;
        let mut out = vec![depth];
        for l in &self.layers {
            depth += 2.0 * l.group_index * l.thickness;
            out.push(depth);
        }
        out
    }

    fn amplitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .map(|l| l.interface_amplitude)
            .chain(std::iter::once(self.back_amplitude))
    }

    /// Single-scattering sum over interfaces.
    pub fn eval(&self, omega: f64, reference: f64) -> Complex64 {
        let d = omega - reference;
        let k = omega / SPEED_OF_LIGHT;
        let mut phase = 2.0 * self.air_gap * k;
        let mut total = Complex64::new(0.0, 0.0);
        let mut amps = self.amplitudes();
        for l in &self.layers {
            let r = amps.next().unwrap_or(0.0);
            total += Complex64::from_polar(r, phase);
            phase += 2.0 * (l.group_index * l.thickness * k + 0.5 * l.gvd * l.thickness * d * d);
        }
        total += Complex64::from_polar(self.back_amplitude, phase);
        total
    }
}

pub fn stack_transfer(grid: &SpectralGrid, obj: &LayerStack) -> Result<ComplexSpectrum> {
    let reference = grid.center();
    ComplexSpectrum::from_fn(*grid, |w| obj.eval(w, reference))
}

/// Multiplies `f` by `exp(i (beta2 / 2) L (omega - omega_c)^2)`, with
/// `omega_c` the grid centre.
pub fn add_dispersion(f: &ComplexSpectrum, beta2: f64, length: f64) -> Result<ComplexSpectrum> {
    if !(beta2.is_finite() && length.is_finite()) {
        return invalid("dispersion parameters must be finite");
    }
    let grid = f.grid();
    let disp = Dispersion { beta2, length };
    let values = (0..grid.len())
        .map(|k| f.values()[k] * disp.phasor(grid.detuning_at(k)))
        .collect();
    ComplexSpectrum::new(*grid, values)
}

/// Quadratic spectral phase of a dispersive path of `length` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    /// s^2/m
    pub beta2: f64,
    /// m
    pub length: f64,
}

impl Dispersion {
    pub fn phase(&self, detuning: f64) -> f64 {
        0.5 * self.beta2 * self.length * detuning * detuning
    }

    pub fn phasor(&self, detuning: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.phase(detuning))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneObject {
    Mirror(MirrorObject),
    Stack(LayerStack),
}

/// An object plus optional extra dispersion in the object arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub object: SceneObject,
    pub dispersion: Option<Dispersion>,
}

impl Scene {
    pub fn mirror(reflectivity: f64, opd: f64) -> Result<Self> {
        Ok(Self {
            object: SceneObject::Mirror(MirrorObject::new(reflectivity, opd)?),
            dispersion: None,
        })
    }

    pub fn with_dispersion(mut self, beta2: f64, length: f64) -> Self {
        self.dispersion = Some(Dispersion { beta2, length });
        self
    }

    /// `reference` is the frequency about which dispersion is expanded.
    pub fn eval(&self, omega: f64, reference: f64) -> Complex64 {
        let base = match &self.object {
            SceneObject::Mirror(m) => m.eval(omega, reference),
            SceneObject::Stack(s) => s.eval(omega, reference),
        };
        match &self.dispersion {
            Some(d) => base * d.phasor(omega - reference),
            None => base,
        }
    }

    pub fn transfer(&self, grid: &SpectralGrid, reference: f64) -> ComplexSpectrum {
        let values = grid.omegas().into_iter().map(|w| self.eval(w, reference)).collect();
        ComplexSpectrum::new(*grid, values).expect("object transfer is finite")
    }
}

const UM: f64 = 1e-6;
const MM: f64 = 1e-3;
/// fs^2/mm in s^2/m.
pub const FS2_PER_MM: f64 = 1e-27;

/// Builds a scene from `[mirror]`, `[stack]` + `[layer]`..., and optional
/// `[dispersion]` sections. Sections with other names are ignored; the
/// consumed ones must not contain unknown keys.
pub fn scene_from_sections(sections: &mut [Section]) -> Result<Scene> {
    let mut mirror = None;
    let mut stack_header: Option<(f64, f64)> = None;
    let mut layers = Vec::new();
    let mut dispersion = None;
    for s in sections.iter_mut() {
        match s.name.as_str() {
            "mirror" => {
                if mirror.is_some() {
                    return invalid("more than one [mirror] section");
                }
                let r = s.get_or("reflectivity", 1.0)?;
                let z: f64 = s.require("opd_um")?;
                s.finish()?;
                mirror = Some(MirrorObject::new(r, z * UM)?);
            }
            "stack" => {
                if stack_header.is_some() {
                    return invalid("more than one [stack] section");
                }
                let gap: f64 = s.get_or("air_gap_um", 0.0)?;
                let back: f64 = s.get_or("back_amplitude", 0.0)?;
                s.finish()?;
                stack_header = Some((gap * UM, back));
            }
            "layer" => {
                let thickness: f64 = s.require("thickness_um")?;
                let group_index: f64 = s.require("group_index")?;
                let interface_amplitude: f64 = s.require("interface_amplitude")?;
                let gvd: f64 = s.get_or("gvd_fs2_per_mm", 0.0)?;
                s.finish()?;
                layers.push(Layer {
                    thickness: thickness * UM,
                    group_index,
                    interface_amplitude,
                    gvd: gvd * FS2_PER_MM,
                });
            }
            "dispersion" => {
                let beta2: f64 = s.require("gvd_fs2_per_mm")?;
                let length: f64 = s.require("length_mm")?;
                s.finish()?;
                dispersion = Some(Dispersion {
                    beta2: beta2 * FS2_PER_MM,
                    length: length * MM,
                });
            }
            _ => {}
        }
    }
    let object = match (mirror, stack_header) {
        (Some(_), Some(_)) => return invalid("object has both [mirror] and [stack]"),
        (Some(m), None) => {
            if !layers.is_empty() {
                return invalid("[layer] sections need a [stack] section");
            }
            SceneObject::Mirror(m)
        }
        (None, Some((gap, back))) => SceneObject::Stack(LayerStack::new(gap, layers, back)?),
        (None, None) => return invalid("no [mirror] or [stack] object section"),
    };
    Ok(Scene { object, dispersion })
}

/// Parses a standalone object description file.
pub fn parse_object(text: &str) -> Result<Scene> {
    let mut sections = crate::io::kv::parse(text)?;
    if let Some(s) = sections
        .iter()
        .find(|s| !matches!(s.name.as_str(), "mirror" | "stack" | "layer" | "dispersion"))
    {
        return invalid(format!("unexpected section [{}] in object file", s.name));
    }
    scene_from_sections(&mut sections)
}
