//! From joint spectra to depth profiles: spectrum extraction, dispersion
//! compensation, A-scans, peak measurement, roll-off and B-scans.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::spectral::{ComplexSpectrum, JointSpectrum, SpectralGrid, SPEED_OF_LIGHT};

/// Mean over columns: one value per channel-A frequency.
pub fn row_mean(js: &JointSpectrum) -> Vec<f64> {
    let c = js.cols() as f64;
    (0..js.rows()).map(|i| js.row(i).iter().sum::<f64>() / c).collect()
}

/// Mean over rows: one value per channel-B frequency.
pub fn column_mean(js: &JointSpectrum) -> Vec<f64> {
    let mut out = vec![0.0; js.cols()];
    for i in 0..js.rows() {
        out.iter_mut().zip(js.row(i)).for_each(|(o, v)| *o += v);
    }
    let r = js.rows() as f64;
    out.iter_mut().for_each(|o| *o /= r);
    out
}

/// Which family of diagonals [`diagonal_mean`] walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalOrientation {
    /// Cells `(k, n - 1 - k + d)`: constant `omega + omega'`, the line along
    /// which anti-correlated photon pairs lie.
    #[default]
    Anti,
    /// Cells `(k, k + d)`: constant `omega - omega'`.
    Main,
}

impl DiagonalOrientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagonalOrientation::Anti => "anti",
            DiagonalOrientation::Main => "main",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "anti" => Some(DiagonalOrientation::Anti),
            "main" => Some(DiagonalOrientation::Main),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSpectrum {
    /// Indexed by the row (channel-A) frequency.
    pub values: Vec<f64>,
    /// True where some offsets fell outside the matrix; those cells are
    /// zero-padded before averaging.
    pub incomplete: Vec<bool>,
}

/// Averages `n_diagonals` neighbouring diagonals, offsets
/// `d in [-floor(n/2), ceil(n/2) - 1]`, onto the row coordinate.
pub fn diagonal_mean(
    js: &JointSpectrum,
    n_diagonals: usize,
    orientation: DiagonalOrientation,
) -> Result<DiagonalSpectrum> {
    let n = js.rows();
    if js.cols() != n {
        return invalid("diagonal spectrum needs a square joint spectrum");
    }
    if n_diagonals == 0 || n_diagonals >= n {
        return invalid(format!("n_diagonals = {n_diagonals} must be in [1, {})", n));
    }
    let lo = -((n_diagonals / 2) as i64);
    let hi = n_diagonals.div_ceil(2) as i64 - 1;
    let mut values = vec![0.0; n];
    let mut incomplete = vec![false; n];
    for k in 0..n {
        let base = match orientation {
            DiagonalOrientation::Anti => (n - 1 - k) as i64,
            DiagonalOrientation::Main => k as i64,
        };
        let mut sum = 0.0;
        for d in lo..=hi {
            let j = base + d;
            if (0..n as i64).contains(&j) {
                sum += js.get(k, j as usize);
            } else {
                incomplete[k] = true;
            }
        }
        values[k] = sum / n_diagonals as f64;
    }
    Ok(DiagonalSpectrum { values, incomplete })
}

/// Evaluates `sum_p c_p x^p`.
fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Multiplies by `exp(-i P(omega - omega_c))` where `coeffs[p]` multiplies the
/// `p`-th power of the detuning from the grid centre.
pub fn compensate_dispersion(spec: &ComplexSpectrum, coeffs: &[f64]) -> Result<ComplexSpectrum> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return invalid("phase polynomial coefficients must be finite");
    }
    let g = spec.grid();
    let values = (0..g.len())
        .map(|k| spec.values()[k] * Complex64::from_polar(1.0, -poly(coeffs, g.detuning_at(k))))
        .collect();
    ComplexSpectrum::new(*g, values)
}

pub fn real_spectrum(grid: &SpectralGrid, values: &[f64]) -> Result<ComplexSpectrum> {
    ComplexSpectrum::new(*grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl Window {
    pub fn as_str(&self) -> &'static str {
        match self {
            Window::None => "none",
            Window::Hann => "hann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Window::None),
            "hann" => Some(Window::Hann),
            _ => None,
        }
    }

    fn weight(&self, k: usize, n: usize) -> f64 {
        match self {
            Window::None => 1.0,
            Window::Hann => 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AScanConfig {
    pub zero_pad: usize,
    pub window: Window,
    /// Subtract the spectrum mean before windowing.
    pub remove_dc: bool,
    /// Multiplies the depth axis; 0.5 maps fringes that oscillate twice as
    /// fast (the biphoton diagonal) back to OPD.
    pub depth_scale: f64,
}

impl Default for AScanConfig {
    fn default() -> Self {
        Self {
            zero_pad: 4,
            window: Window::None,
            remove_dc: false,
            depth_scale: 1.0,
        }
    }
}

/// Depth profile. `depth` is OPD in metres, uniform, increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct AScan {
    pub depth: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl AScan {
    pub fn spacing(&self) -> f64 {
        self.depth[1] - self.depth[0]
    }

    /// The `depth >= 0` half.
    pub fn positive(&self) -> AScan {
        let start = self.depth.partition_point(|&d| d < 0.0);
        AScan {
            depth: self.depth[start..].to_vec(),
            magnitude: self.magnitude[start..].to_vec(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.magnitude.iter().map(|m| m * m).sum()
    }
}

/// `|DFT| / N` of the (windowed, zero-padded) spectrum, fft-shifted so that
/// depth runs from `-M/2` to `M/2 - 1` samples, `M = N * zero_pad`. Depth
/// sample `m` sits at `m * 2 pi c / (M * d_omega) * depth_scale`.
pub fn to_ascan(spec: &ComplexSpectrum, cfg: &AScanConfig) -> Result<AScan> {
    if cfg.zero_pad == 0 {
        return invalid("zero padding factor must be at least 1");
    }
    if !(cfg.depth_scale > 0.0 && cfg.depth_scale.is_finite()) {
        return invalid("depth scale must be positive");
    }
    let n = spec.len();
    let m = n * cfg.zero_pad;
    let mean = if cfg.remove_dc {
        spec.values().iter().sum::<Complex64>() / n as f64
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (k, v) in spec.values().iter().enumerate() {
        buf[k] = (v - mean) * cfg.window.weight(k, n);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let step = 2.0 * PI * SPEED_OF_LIGHT / (m as f64 * spec.grid().spacing()) * cfg.depth_scale;
    let half = (m / 2) as i64;
    let mut depth = Vec::with_capacity(m);
    let mut magnitude = Vec::with_capacity(m);
    for i in 0..m as i64 {
        let bin = i - half;
        depth.push(bin as f64 * step);
        magnitude.push(buf[bin.rem_euclid(m as i64) as usize].norm() / n as f64);
    }
    Ok(AScan { depth, magnitude })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMetrics {
    pub position: f64,
    pub height: f64,
    pub fwhm: f64,
    /// Another local maximum in the window is as tall as the chosen one.
    pub ambiguous: bool,
}

/// Tallest local maximum with `lo <= depth <= hi`. Position and height are
/// refined with a three-point parabola; the FWHM uses linear interpolation
/// between the samples bracketing half height (of the refined height).
pub fn peak_metrics(a: &AScan, window: (f64, f64)) -> Result<PeakMetrics> {
    let (lo, hi) = window;
    let n = a.magnitude.len();
    if n < 3 || a.depth.len() != n {
        return Err(Error::InvalidInput("A-scan too short".into()));
    }
    let y = &a.magnitude;
    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| a.depth[i] >= lo && a.depth[i] <= hi)
        .filter(|&i| y[i] >= y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.0)
        .collect();
    if !(lo <= hi) || candidates.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no local maximum in window [{lo}, {hi}]"
        )));
    }
    // first of the tallest; skip the second sample of a flat-topped pair
    let mut best = candidates[0];
    for &i in &candidates[1..] {
        if y[i] > y[best] {
            best = i;
        }
    }
    let ambiguous = candidates
        .iter()
        .any(|&i| i > best + 1 && y[i] == y[best]);
    let (ym, y0, yp) = (y[best - 1], y[best], y[best + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom < 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    let height = y0 - 0.25 * (ym - yp) * delta;
    let position = a.depth[best] + delta * a.spacing();
    let half = height / 2.0;
    let mut left = None;
    for i in (0..best).rev() {
        if y[i] < half {
            let t = (half - y[i]) / (y[i + 1] - y[i]);
            left = Some(a.depth[i] + t * a.spacing());
            break;
        }
    }
    let mut right = None;
    for i in best + 1..n {
        if y[i] < half {
            let t = (y[i - 1] - half) / (y[i - 1] - y[i]);
            right = Some(a.depth[i - 1] + t * a.spacing());
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Ok(PeakMetrics {
            position,
            height,
            fwhm: r - l,
            ambiguous,
        }),
        _ => Err(Error::InvalidInput("peak does not fall to half height inside the A-scan".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloffCurve {
    pub depths: Vec<f64>,
    pub heights: Vec<f64>,
    /// `10 log10(height / height[0])`.
    pub sensitivity_db: Vec<f64>,
    /// Depth of the first -6 dB crossing, linearly interpolated. `None` when
    /// the curve never drops that far.
    pub six_db_range: Option<f64>,
}

pub fn rolloff_from_heights(depths: &[f64], heights: &[f64]) -> Result<RolloffCurve> {
    if depths.len() != heights.len() {
        return invalid("depths and heights differ in length");
    }
    if depths.len() < 3 {
        return invalid("roll-off needs at least 3 depths");
    }
    if depths.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("roll-off depths must be strictly increasing");
    }
    if heights.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return invalid("peak heights must be positive");
    }
    let sensitivity_db: Vec<f64> = heights.iter().map(|h| 10.0 * (h / heights[0]).log10()).collect();
    let six_db_range = (1..depths.len()).find(|&i| sensitivity_db[i] <= -6.0).map(|i| {
        let (s0, s1) = (sensitivity_db[i - 1], sensitivity_db[i]);
        let t = (-6.0 - s0) / (s1 - s0);
        depths[i - 1] + t * (depths[i] - depths[i - 1])
    });
    Ok(RolloffCurve {
        depths: depths.to_vec(),
        heights: heights.to_vec(),
        sensitivity_db,
        six_db_range,
    })
}

/// Measures the peak nearest each known depth (within `half_window`) and
/// builds the roll-off curve.
pub fn rolloff(scans: &[AScan], depths: &[f64], half_window: f64) -> Result<RolloffCurve> {
    if scans.len() != depths.len() {
        return invalid("one A-scan per depth is required");
    }
    let heights = scans
        .iter()
        .zip(depths)
        .map(|(a, &d)| peak_metrics(a, (d - half_window, d + half_window)).map(|p| p.height))
        .collect::<Result<Vec<f64>>>()?;
    rolloff_from_heights(depths, &heights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    Row,
    Column,
    Diagonal,
}

impl SpectrumMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumMode::Row => "row",
            SpectrumMode::Column => "column",
            SpectrumMode::Diagonal => "diagonal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "row" => Some(SpectrumMode::Row),
            "column" => Some(SpectrumMode::Column),
            "diagonal" => Some(SpectrumMode::Diagonal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructConfig {
    pub ascan: AScanConfig,
    pub n_diagonals: usize,
    pub orientation: DiagonalOrientation,
    /// Depth scale for diagonal spectra. `None` picks 0.5 for joint spectra
    /// whose `model` metadata is `biphoton` and 1.0 otherwise.
    pub diagonal_depth_scale: Option<f64>,
    /// Phase polynomial removed before the transform (see
    /// [`compensate_dispersion`]).
    pub phase_poly: Vec<f64>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            ascan: AScanConfig::default(),
            n_diagonals: 20,
            orientation: DiagonalOrientation::Anti,
            diagonal_depth_scale: None,
            phase_poly: Vec::new(),
        }
    }
}

/// Extracts the requested 1-D spectrum (incomplete diagonal cells zeroed)
/// and the depth scale it needs.
pub fn extract_spectrum(js: &JointSpectrum, mode: SpectrumMode, cfg: &ReconstructConfig) -> Result<(ComplexSpectrum, f64)> {
    match mode {
        SpectrumMode::Row => Ok((real_spectrum(js.grid_a(), &row_mean(js))?, 1.0)),
        SpectrumMode::Column => Ok((real_spectrum(js.grid_b(), &column_mean(js))?, 1.0)),
        SpectrumMode::Diagonal => {
            let d = diagonal_mean(js, cfg.n_diagonals, cfg.orientation)?;
            let values: Vec<f64> = d
                .values
                .iter()
                .zip(&d.incomplete)
                .map(|(&v, &bad)| if bad { 0.0 } else { v })
                .collect();
            let scale = cfg.diagonal_depth_scale.unwrap_or_else(|| {
                if js.metadata.get("model").map(String::as_str) == Some("biphoton") {
                    0.5
                } else {
                    1.0
                }
            });
            Ok((real_spectrum(js.grid_a(), &values)?, scale))
        }
    }
}

/// Full pipeline for one joint spectrum: extract, compensate, transform.
pub fn ascan_for_mode(js: &JointSpectrum, mode: SpectrumMode, cfg: &ReconstructConfig) -> Result<AScan> {
    let (spec, scale) = extract_spectrum(js, mode, cfg)?;
    let spec = if cfg.phase_poly.is_empty() { spec } else { compensate_dispersion(&spec, &cfg.phase_poly)? };
    to_ascan(&spec, &AScanConfig { depth_scale: cfg.ascan.depth_scale * scale, ..cfg.ascan })
}

/// Lateral x depth image, linear magnitudes, positive depths only.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    pub depth: Vec<f64>,
    /// One column per joint spectrum, left to right.
    pub columns: Vec<Vec<f64>>,
}

pub const DEFAULT_LOG_FLOOR_DB: f64 = -40.0;

impl BScan {
    /// `10 log10(m / max)` clipped below at `floor_db`; an all-zero image
    /// maps to the floor everywhere.
    pub fn log_columns(&self, floor_db: f64) -> Vec<Vec<f64>> {
        let max = self.columns.iter().flatten().copied().fold(0.0, f64::max);
        self.columns
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&m| if max > 0.0 && m > 0.0 { (10.0 * (m / max).log10()).max(floor_db) } else { floor_db })
                    .collect()
            })
            .collect()
    }

    /// Log image as 16-bit grey levels (0 at the floor, 65535 at the maximum),
    /// row-major with depth increasing downwards.
    pub fn grey16(&self, floor_db: f64) -> Vec<u16> {
        let cols = self.log_columns(floor_db);
        let mut out = Vec::with_capacity(self.depth.len() * cols.len());
        for r in 0..self.depth.len() {
            for c in &cols {
                out.push((((c[r] - floor_db) / -floor_db) * 65535.0).round().clamp(0.0, 65535.0) as u16);
            }
        }
        out
    }
}

pub fn bscan(jss: &[JointSpectrum], mode: SpectrumMode, cfg: &ReconstructConfig) -> Result<BScan> {
    if jss.is_empty() {
        return invalid("B-scan needs at least one joint spectrum");
    }
    for js in &jss[1..] {
        js.grid_a().ensure_same(jss[0].grid_a(), "B-scan columns")?;
        js.grid_b().ensure_same(jss[0].grid_b(), "B-scan columns")?;
    }
    let scans = jss
        .par_iter()
        .map(|js| ascan_for_mode(js, mode, cfg).map(|a| a.positive()))
        .collect::<Result<Vec<AScan>>>()?;
    Ok(BScan {
        depth: scans[0].depth.clone(),
        columns: scans.into_iter().map(|a| a.magnitude).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, SpectrumKind};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> SpectralGrid {
        make_grid(1550e-9, 115e-9, n).unwrap()
    }

    #[test]
    fn row_and_column_means_of_outer_product() {
        let g = grid(8);
        let u: Vec<f64> = (0..8).map(|k| 0.1 + 0.05 * k as f64).collect();
        let v: Vec<f64> = (0..8).map(|k| 0.3 - 0.02 * k as f64).collect();
        let js = JointSpectrum::outer(g, &u, g, &v, SpectrumKind::Probability).unwrap();
        let mv = v.iter().sum::<f64>() / 8.0;
        for (r, x) in row_mean(&js).iter().zip(&u) {
            assert_relative_eq!(*r, x * mv, max_relative = 1e-14);
        }
        let sym = JointSpectrum::outer(g, &u, g, &u, SpectrumKind::Probability).unwrap();
        assert_eq!(row_mean(&sym), column_mean(&sym));
    }

    #[test]
    fn diagonal_examples() {
        let g = grid(6);
        let mut id = vec![0.0; 36];
        for k in 0..6 {
            id[k * 6 + k] = (k + 1) as f64;
        }
        let js = JointSpectrum::new(g, g, id, SpectrumKind::Counts).unwrap();
        let d = diagonal_mean(&js, 1, DiagonalOrientation::Main).unwrap();
        assert_eq!(d.values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(d.incomplete.iter().all(|x| !x));

        let c = JointSpectrum::new(g, g, vec![2.0; 36], SpectrumKind::Counts).unwrap();
        for orient in [DiagonalOrientation::Main, DiagonalOrientation::Anti] {
            let d = diagonal_mean(&c, 3, orient).unwrap();
            for k in 0..6 {
                if d.incomplete[k] {
                    assert!(d.values[k] < 2.0);
                } else {
                    assert_eq!(d.values[k], 2.0);
                }
            }
            assert_eq!(d.incomplete.iter().filter(|x| **x).count(), 2);
        }
        assert!(diagonal_mean(&c, 6, DiagonalOrientation::Anti).is_err());
        assert!(diagonal_mean(&c, 0, DiagonalOrientation::Anti).is_err());
    }

    #[test]
    fn even_diagonal_count_offsets() {
        // n = 2 uses offsets {-1, 0}
        let g = grid(4);
        let vals: Vec<f64> = (0..16).map(|x| x as f64).collect();
        let js = JointSpectrum::new(g, g, vals, SpectrumKind::Counts).unwrap();
        let d = diagonal_mean(&js, 2, DiagonalOrientation::Main).unwrap();
        assert_eq!(d.values[2], (js.get(2, 1) + js.get(2, 2)) / 2.0);
        assert!(d.incomplete[0] && !d.incomplete[3]);
    }

    #[test]
    fn constant_spectrum_peaks_at_zero_depth() {
        let g = grid(64);
        let s = ComplexSpectrum::constant(g, Complex64::new(1.0, 0.0));
        let a = to_ascan(&s, &AScanConfig::default()).unwrap();
        let (imax, _) = a.magnitude.iter().enumerate().fold((0, 0.0), |b, (i, &m)| if m > b.1 { (i, m) } else { b });
        assert_eq!(a.depth[imax], 0.0);
        assert_relative_eq!(a.magnitude[imax], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn cosine_fringe_lands_at_its_opd() {
        let g = grid(256);
        let period = 40.0 * g.spacing();
        let s = ComplexSpectrum::from_fn(g, |w| Complex64::new(1.0 + (2.0 * PI * w / period).cos(), 0.0)).unwrap();
        let a = to_ascan(&s, &AScanConfig::default()).unwrap().positive();
        let z = 2.0 * PI * SPEED_OF_LIGHT / period;
        let p = peak_metrics(&a, (z / 2.0, 2.0 * z)).unwrap();
        assert!((p.position - z).abs() < a.spacing() / 2.0, "{} vs {z}", p.position);
    }

    #[test]
    fn gaussian_peak_fwhm_oracle() {
        let step = 1e-6;
        let sigma = 7.3e-6;
        let depth: Vec<f64> = (-400..400).map(|i| i as f64 * step).collect();
        let magnitude = depth.iter().map(|d| (-(d - 13.2e-6f64).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let p = peak_metrics(&AScan { depth, magnitude }, (-1e-4, 1e-4)).unwrap();
        assert_relative_eq!(p.fwhm, 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma, max_relative = 0.01);
        assert!((p.position - 13.2e-6).abs() < 0.05 * step);
        assert!(!p.ambiguous);
    }

    #[test]
    fn equal_peaks_pick_first_and_flag() {
        let depth: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut magnitude = vec![0.0; 50];
        for c in [10usize, 30] {
            magnitude[c - 1] = 0.5;
            magnitude[c] = 1.0;
            magnitude[c + 1] = 0.5;
        }
        let p = peak_metrics(&AScan { depth, magnitude }, (0.0, 49.0)).unwrap();
        assert!(p.ambiguous);
        assert_relative_eq!(p.position, 10.0);
        assert_relative_eq!(p.fwhm, 2.0);
    }

    #[test]
    fn empty_peak_window_is_an_error() {
        let depth: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let magnitude: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        assert!(peak_metrics(&AScan { depth, magnitude }, (2.0, 8.0)).is_err());
    }

    #[test]
    fn rolloff_examples() {
        let d = [0.0, 1.0, 2.0, 3.0];
        let flat = rolloff_from_heights(&d, &[1.0; 4]).unwrap();
        assert_eq!(flat.six_db_range, None);
        // quartering per step is -6.02 dB per step in 10 log10 units
        let q = rolloff_from_heights(&d, &[1.0, 0.25, 0.0625, 0.015625]).unwrap();
        assert_relative_eq!(q.sensitivity_db[1], -6.0206, epsilon = 1e-4);
        let r = q.six_db_range.unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
        assert!(rolloff_from_heights(&d[..2], &[1.0, 1.0]).is_err());
        assert!(rolloff_from_heights(&[0.0, 2.0, 1.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn bscan_examples() {
        let g = grid(32);
        let u: Vec<f64> = (0..32).map(|k| 0.01 * (1.0 + (k as f64 * 0.9).cos())).collect();
        let js = JointSpectrum::outer(g, &u, g, &u, SpectrumKind::Probability).unwrap();
        let cfg = ReconstructConfig::default();
        let one = bscan(std::slice::from_ref(&js), SpectrumMode::Row, &cfg).unwrap();
        let a = ascan_for_mode(&js, SpectrumMode::Row, &cfg).unwrap().positive();
        assert_eq!(one.columns.len(), 1);
        assert_eq!(one.columns[0], a.magnitude);
        let zero = JointSpectrum::zeros(g, g, SpectrumKind::Probability);
        let z = bscan(&[zero.clone(), zero], SpectrumMode::Diagonal, &ReconstructConfig { n_diagonals: 4, ..cfg }).unwrap();
        assert!(z.columns.iter().flatten().all(|&v| v == 0.0));
        assert!(z.grey16(DEFAULT_LOG_FLOOR_DB).iter().all(|&v| v == 0));
        assert!(bscan(&[], SpectrumMode::Row, &ReconstructConfig::default()).is_err());
    }

    #[test]
    fn dispersion_compensation_identity() {
        let g = grid(16);
        let s = ComplexSpectrum::from_fn(g, |w| Complex64::new((w * 1e-13).sin(), 0.0)).unwrap();
        assert_eq!(compensate_dispersion(&s, &[]).unwrap(), s);
        assert_eq!(compensate_dispersion(&s, &[0.0, 0.0, 0.0]).unwrap(), s);
        assert_relative_eq!(poly(&[1.0, 2.0, 3.0], 2.0), 17.0);
    }

    proptest::proptest! {
        #[test]
        fn parseval(vals in proptest::collection::vec(-1.0f64..1.0, 8..64), pad in 1usize..6) {
            let g = grid(vals.len());
            let s = real_spectrum(&g, &vals).unwrap();
            let a = to_ascan(&s, &AScanConfig { zero_pad: pad, ..AScanConfig::default() }).unwrap();
            let n = vals.len() as f64;
            let expected = (pad as f64 * n) / (n * n) * vals.iter().map(|v| v * v).sum::<f64>();
            proptest::prop_assert!((a.energy() - expected).abs() <= 1e-9 * expected.max(1e-300));
        }

        #[test]
        fn depth_calibration(frac in 0.02f64..0.9) {
            let g = grid(256);
            let zmax = PI * SPEED_OF_LIGHT / g.spacing();
            let z = frac * zmax;
            let s = ComplexSpectrum::from_fn(g, |w| Complex64::from_polar(1.0, w * z / SPEED_OF_LIGHT)).unwrap();
            let a = to_ascan(&s, &AScanConfig::default()).unwrap();
            let p = peak_metrics(&a, (0.0, zmax)).unwrap();
            proptest::prop_assert!((p.position - z).abs() <= a.spacing() / 2.0);
        }
    }
}
