//! Comparison metrics for joint spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::spectral::{JointSpectrum, SpectrumKind};

/// Total-variation distance between two per-pulse coincidence distributions.
///
/// Each probability-kind spectrum is a sub-distribution; the remaining mass
/// is the "no coincidence" outcome, which is included:
/// `TV = (sum |p - q| + |sum p - sum q|) / 2`.
pub fn total_variation(p: &JointSpectrum, q: &JointSpectrum) -> Result<f64> {
    if p.kind() != SpectrumKind::Probability || q.kind() != SpectrumKind::Probability {
        return Err(Error::InvalidInput("total variation needs probability-kind spectra".into()));
    }
    p.grid_a().ensure_same(q.grid_a(), "total variation rows")?;
    p.grid_b().ensure_same(q.grid_b(), "total variation columns")?;
    let cells: f64 = p.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * (cells + (p.total() - q.total()).abs()))
}

/// Ratio of the second to the first singular value (0 for a zero matrix).
pub fn singular_value_ratio(js: &JointSpectrum) -> f64 {
    let m = DMatrix::from_row_slice(js.rows(), js.cols(), js.values());
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    match sv.as_slice() {
        [s1, s2, ..] if *s1 > 0.0 => s2 / s1,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeOrientation {
    /// Fringe wave-vector angle from the channel-A frequency axis, in
    /// degrees within [0, 90]. Near 0 or 90: fringes perpendicular to an axis.
    pub angle_deg: f64,
    /// Peak location in cycles per sample along A (rows) and B (columns).
    pub freq_a: f64,
    pub freq_b: f64,
}

/// Locates the dominant fringe in a joint spectrum.
///
/// The map is divided by `envelope` where the envelope exceeds
/// `threshold * max`, mean-subtracted over that region, Hann-windowed in
/// both directions and zero-padded 4x before a 2-D FFT. The strongest
/// component outside a small radius around DC gives the wave vector.
pub fn fringe_orientation(js: &JointSpectrum, envelope: &JointSpectrum, threshold: f64) -> Result<FringeOrientation> {
    js.grid_a().ensure_same(envelope.grid_a(), "fringe envelope rows")?;
    js.grid_b().ensure_same(envelope.grid_b(), "fringe envelope columns")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return invalid("envelope threshold must be in (0, 1)");
    }
    let (r, c) = (js.rows(), js.cols());
    let emax = envelope.max();
    if emax <= 0.0 {
        return invalid("envelope is zero");
    }
    let mut mask = vec![false; r * c];
    let mut ratio = vec![0.0; r * c];
    let (mut sum, mut count) = (0.0, 0usize);
    for idx in 0..r * c {
        let e = envelope.values()[idx];
        if e > threshold * emax {
            mask[idx] = true;
            ratio[idx] = js.values()[idx] / e;
            sum += ratio[idx];
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let hann = |k: usize, n: usize| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos());
    let pad = 4;
    let (pr, pc) = (r * pad, c * pad);
    let mut buf = vec![Complex64::new(0.0, 0.0); pr * pc];
    for i in 0..r {
        for j in 0..c {
            if mask[i * c + j] {
                buf[i * pc + j] = Complex64::new((ratio[i * c + j] - mean) * hann(i, r) * hann(j, c), 0.0);
            }
        }
    }
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(pc);
    for row in buf.chunks_mut(pc) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(pr);
    let mut col = vec![Complex64::new(0.0, 0.0); pr];
    for j in 0..pc {
        for i in 0..pr {
            col[i] = buf[i * pc + j];
        }
        col_fft.process(&mut col);
        for i in 0..pr {
            buf[i * pc + j] = col[i];
        }
    }
    let signed = |k: usize, n: usize| if k >= n / 2 { k as f64 - n as f64 } else { k as f64 };
    let dc_radius = 1.5 * pad as f64;
    let mut best = (0.0, 0.0, -1.0);
    for i in 0..pr {
        for j in 0..pc {
            let (ka, kb) = (signed(i, pr), signed(j, pc));
            if ka.hypot(kb) <= dc_radius {
                continue;
            }
            let p = buf[i * pc + j].norm_sqr();
            if p > best.2 {
                best = (ka, kb, p);
            }
        }
    }
    if best.2 <= 0.0 {
        return Err(Error::InvalidInput("no fringe component found".into()));
    }
    let (fa, fb) = (best.0 / pr as f64, best.1 / pc as f64);
    Ok(FringeOrientation {
        angle_deg: fb.abs().atan2(fa.abs()).to_degrees(),
        freq_a: fa,
        freq_b: fb,
    })
}
