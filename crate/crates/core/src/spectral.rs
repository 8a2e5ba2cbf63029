//! Spectral axes and the containers that live on them.
//!
//! Every spectrum in the crate is sampled on a [`SpectralGrid`], a uniform
//! angular-frequency axis. Model code works with detunings `omega - center`
//! internally; the grid itself always stores absolute frequencies in rad/s.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angular frequency (rad/s) of light with vacuum wavelength `lambda` (m).
pub fn wavelength_to_omega(lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda
}

/// Vacuum wavelength (m) of light with angular frequency `omega` (rad/s).
pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

/// Converts a wavelength-domain width to angular frequency using the local
/// derivative `|d omega / d lambda| = 2 pi c / lambda^2` at `center_wavelength`.
pub fn wavelength_width_to_omega(center_wavelength: f64, width: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * width / (center_wavelength * center_wavelength)
}

/// Uniform angular-frequency axis.
///
/// Sample `k` sits at `center + span * (k / (n - 1) - 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    center: f64,
    span: f64,
    n: usize,
}

impl SpectralGrid {
    pub fn new(center_omega: f64, span_omega: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return invalid(format!("grid needs at least 2 points, got {n_points}"));
        }
        if !(center_omega.is_finite() && span_omega.is_finite()) {
            return invalid("grid center and span must be finite");
        }
        if span_omega <= 0.0 {
            return invalid("grid span must be positive");
        }
        if center_omega - span_omega / 2.0 <= 0.0 {
            return invalid("grid must contain only positive frequencies");
        }
        Ok(Self {
            center: center_omega,
            span: span_omega,
            n: n_points,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample spacing in rad/s.
    pub fn spacing(&self) -> f64 {
        self.span / (self.n - 1) as f64
    }

    pub fn omega_at(&self, k: usize) -> f64 {
        self.center + self.detuning_at(k)
    }

    /// `omega_at(k) - center`, computed so that samples `k` and `n - 1 - k`
    /// are exact negatives of each other.
    pub fn detuning_at(&self, k: usize) -> f64 {
        let m = (self.n - 1) as f64;
        self.span * ((2.0 * k as f64 - m) / (2.0 * m))
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.omega_at(k)).collect()
    }

    pub fn first(&self) -> f64 {
        self.omega_at(0)
    }

    pub fn last(&self) -> f64 {
        self.omega_at(self.n - 1)
    }

    /// Outer edges of the first and last sample cells (half a spacing beyond
    /// the end samples).
    pub fn band_edges(&self) -> (f64, f64) {
        let h = self.spacing() / 2.0;
        (self.first() - h, self.last() + h)
    }

    /// Nearest sample index, or `None` when `omega` lies outside
    /// [`band_edges`](Self::band_edges).
    pub fn index_of(&self, omega: f64) -> Option<usize> {
        let x = (omega - self.first()) / self.spacing();
        if !x.is_finite() || x < -0.5 || x > (self.n - 1) as f64 + 0.5 {
            return None;
        }
        Some((x.round().max(0.0) as usize).min(self.n - 1))
    }

    /// Same axis moved by `offset` rad/s.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(self.center + offset, self.span, self.n)
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &'static str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(what))
        }
    }
}

/// Builds a grid from source wavelengths.
///
/// The grid is centred on `2 pi c / center_wavelength`. Its half-span is the
/// larger of the two distances from that centre to the band-edge frequencies,
/// so the short-wavelength edge is hit exactly and the long-wavelength edge is
/// covered with a small margin.
pub fn make_grid(
    center_wavelength: f64,
    span_wavelength: f64,
    n_points: usize,
) -> Result<SpectralGrid> {
    if n_points < 2 {
        return invalid(format!("grid needs at least 2 points, got {n_points}"));
    }
    if !(center_wavelength > 0.0 && span_wavelength > 0.0) {
        return invalid("wavelengths must be positive");
    }
    if span_wavelength >= 2.0 * center_wavelength {
        return invalid("wavelength span must be smaller than twice the centre wavelength");
    }
    let center = wavelength_to_omega(center_wavelength);
    let hi = wavelength_to_omega(center_wavelength - span_wavelength / 2.0);
    let lo = wavelength_to_omega(center_wavelength + span_wavelength / 2.0);
    let half = (hi - center).max(center - lo);
    SpectralGrid::new(center, 2.0 * half, n_points)
}

/// Complex amplitude sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "spectrum has {} values for a {}-point grid",
                values.len(),
                grid.len()
            ));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return invalid("spectrum values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.omegas().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: SpectralGrid, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sqr(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Pointwise product with another spectrum on the same grid.
    pub fn mul(&self, other: &ComplexSpectrum) -> Result<ComplexSpectrum> {
        self.grid.ensure_same(&other.grid, "spectrum product")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        ComplexSpectrum::new(self.grid, values)
    }
}

/// Gaussian spectral amplitude `exp(-(omega - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    pub center_omega: f64,
    pub sigma_omega: f64,
}

impl GaussianProfile {
    /// `sigma_lambda` is the wavelength-domain standard deviation of the
    /// amplitude, converted with the derivative at the centre wavelength.
    pub fn from_wavelength(center_wavelength: f64, sigma_lambda: f64) -> Result<Self> {
        if !(sigma_lambda > 0.0) {
            return invalid("spectral width must be positive");
        }
        if !(center_wavelength > 0.0) {
            return invalid("centre wavelength must be positive");
        }
        Ok(Self {
            center_omega: wavelength_to_omega(center_wavelength),
            sigma_omega: wavelength_width_to_omega(center_wavelength, sigma_lambda),
        })
    }

    pub fn value(&self, omega: f64) -> f64 {
        let d = (omega - self.center_omega) / self.sigma_omega;
        (-0.5 * d * d).exp()
    }

    pub fn sample(&self, grid: &SpectralGrid) -> ComplexSpectrum {
        let offset = grid.center() - self.center_omega;
        let values = (0..grid.len())
            .map(|k| {
                let d = (offset + grid.detuning_at(k)) / self.sigma_omega;
                Complex64::new((-0.5 * d * d).exp(), 0.0)
            })
            .collect();
        ComplexSpectrum {
            grid: *grid,
            values,
        }
    }
}

/// Peak-normalised real Gaussian amplitude on `grid`.
pub fn gaussian_amplitude(
    grid: &SpectralGrid,
    center_wavelength: f64,
    sigma_lambda: f64,
) -> Result<ComplexSpectrum> {
    Ok(GaussianProfile::from_wavelength(center_wavelength, sigma_lambda)?.sample(grid))
}

/// What the numbers in a [`JointSpectrum`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Probability per pulse of a coincidence in the cell; bounded by 1.
    Probability,
    /// Raw coincidence counts.
    Counts,
    /// Spectral density per unit `omega * omega'`.
    Density,
}

impl SpectrumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumKind::Probability => "probability",
            SpectrumKind::Counts => "counts",
            SpectrumKind::Density => "density",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "probability" => Some(SpectrumKind::Probability),
            "counts" => Some(SpectrumKind::Counts),
            "density" => Some(SpectrumKind::Density),
            _ => None,
        }
    }
}

/// Real non-negative map over `grid_a x grid_b`, stored row-major with rows
/// indexed by the channel-A frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    grid_a: SpectralGrid,
    grid_b: SpectralGrid,
    values: Vec<f64>,
    kind: SpectrumKind,
    pub metadata: BTreeMap<String, String>,
}

impl JointSpectrum {
    pub fn new(
        grid_a: SpectralGrid,
        grid_b: SpectralGrid,
        values: Vec<f64>,
        kind: SpectrumKind,
    ) -> Result<Self> {
        if values.len() != grid_a.len() * grid_b.len() {
            return invalid(format!(
                "joint spectrum has {} values, expected {}x{}",
                values.len(),
                grid_a.len(),
                grid_b.len()
            ));
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return invalid(format!("joint spectrum value {v} is not finite and non-negative"));
            }
            if kind == SpectrumKind::Probability && v > 1.0 {
                return invalid(format!("probability {v} exceeds 1"));
            }
        }
        Ok(Self {
            grid_a,
            grid_b,
            values,
            kind,
            metadata: BTreeMap::new(),
        })
    }

    /// `out[i][j] = a[i] * b[j]`.
    pub fn outer(
        grid_a: SpectralGrid,
        a: &[f64],
        grid_b: SpectralGrid,
        b: &[f64],
        kind: SpectrumKind,
    ) -> Result<Self> {
        if a.len() != grid_a.len() || b.len() != grid_b.len() {
            return invalid("outer product factors do not match their grids");
        }
        let mut values = Vec::with_capacity(a.len() * b.len());
        for &x in a {
            values.extend(b.iter().map(|&y| x * y));
        }
        Self::new(grid_a, grid_b, values, kind)
    }

    pub fn zeros(grid_a: SpectralGrid, grid_b: SpectralGrid, kind: SpectrumKind) -> Self {
        Self {
            grid_a,
            grid_b,
            values: vec![0.0; grid_a.len() * grid_b.len()],
            kind,
            metadata: BTreeMap::new(),
        }
    }

    pub fn grid_a(&self) -> &SpectralGrid {
        &self.grid_a
    }

    pub fn grid_b(&self) -> &SpectralGrid {
        &self.grid_b
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.grid_a.len()
    }

    pub fn cols(&self) -> usize {
        self.grid_b.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }
}
