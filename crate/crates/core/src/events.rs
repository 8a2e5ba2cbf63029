//! Photon-event Monte Carlo of the time-tagging fibre spectrometers.
//!
//! Each detector sits behind a long dispersive fibre that maps frequency to
//! arrival time, `tau_g(omega) = L (beta1 + beta2 (omega - omega_ref))`. A pulse
//! produces at most one click per channel; the clicked bin is drawn from the
//! analytic per-bin click probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralGrid, SPEED_OF_LIGHT};

/// Guard interval around the mapped band, in units of the timing jitter.
pub const GUARD_JITTERS: f64 = 5.0;

const FS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    A,
    B,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::A => 0,
            Channel::B => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Channel::A),
            1 => Some(Channel::B),
            _ => None,
        }
    }
}

/// One detector click. `arrival_fs` is measured from the sync of its own pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub pulse_index: u64,
    pub channel: Channel,
    pub arrival_fs: i64,
}

impl TimeTag {
    pub fn arrival_seconds(&self) -> f64 {
        self.arrival_fs as f64 * FS
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpectrometer {
    /// m
    pub length: f64,
    /// s/m at `ref_omega`
    pub beta1_ref: f64,
    /// s^2/m
    pub beta2: f64,
    /// rad/s
    pub ref_omega: f64,
    /// s
    pub jitter_sigma: f64,
    pub efficiency: f64,
    /// s
    pub time_bin: f64,
}

/// Result of mapping an arrival time back to frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapped {
    InBand(f64),
    /// Within the guard interval; frequency clamped to the nearest end sample.
    Clamped(f64),
    Discarded,
}

impl FiberSpectrometer {
    /// SMF-28-like spool: group index 1.468, 35 ps jitter, 65 % efficiency,
    /// 1 ps tagger resolution.
    pub fn smf28(length: f64, beta2: f64, ref_omega: f64) -> Result<Self> {
        Self {
            length,
            beta1_ref: 1.468 / SPEED_OF_LIGHT,
            beta2,
            ref_omega,
            jitter_sigma: 35e-12,
            efficiency: 0.65,
            time_bin: 1e-12,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return invalid("fibre length must be positive");
        }
        if !(self.beta2 != 0.0 && self.beta2.is_finite()) {
            return invalid("fibre GVD must be nonzero for an invertible mapping");
        }
        if !(self.beta1_ref.is_finite() && self.ref_omega > 0.0 && self.ref_omega.is_finite()) {
            return invalid("fibre beta1 and reference frequency must be finite");
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return invalid("jitter must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return invalid(format!("efficiency {} outside [0, 1]", self.efficiency));
        }
        if !(self.time_bin > 0.0 && self.time_bin.is_finite()) {
            return invalid("time bin must be positive");
        }
        Ok(self)
    }

    pub fn group_delay(&self, omega: f64) -> f64 {
        self.length * (self.beta1_ref + self.beta2 * (omega - self.ref_omega))
    }

    /// Exact inverse of [`group_delay`](Self::group_delay).
    pub fn omega_at_delay(&self, delay: f64) -> f64 {
        self.ref_omega + (delay / self.length - self.beta1_ref) / self.beta2
    }

    /// Frequency scatter caused by the timing jitter.
    pub fn omega_jitter(&self) -> f64 {
        self.jitter_sigma / (self.length * self.beta2.abs())
    }

    /// Arrival-time interval covered by the band of `grid`.
    pub fn band_times(&self, grid: &SpectralGrid) -> (f64, f64) {
        let (lo, hi) = grid.band_edges();
        let (a, b) = (self.group_delay(lo), self.group_delay(hi));
        (a.min(b), a.max(b))
    }

    pub fn arrival_to_omega(&self, arrival: f64, grid: &SpectralGrid) -> Mapped {
        let omega = self.omega_at_delay(arrival);
        let (lo, hi) = grid.band_edges();
        if (lo..=hi).contains(&omega) {
            return Mapped::InBand(omega);
        }
        let (t0, t1) = self.band_times(grid);
        let guard = GUARD_JITTERS * self.jitter_sigma;
        if arrival >= t0 - guard && arrival <= t1 + guard {
            Mapped::Clamped(omega.clamp(grid.first(), grid.last()))
        } else {
            Mapped::Discarded
        }
    }

    fn quantize_fs(&self, t: f64) -> i64 {
        let bins = (t / self.time_bin).round();
        (bins * self.time_bin / FS).round() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub n_pulses: u64,
    pub rng_seed: u64,
    /// Dark counts per second per detector.
    pub dark_count_rate: f64,
    /// Laser repetition rate, Hz. Only used to convert the dark-count rate.
    pub rep_rate: f64,
}

impl RunConfig {
    pub fn new(n_pulses: u64, rng_seed: u64) -> Self {
        Self {
            n_pulses,
            rng_seed,
            dark_count_rate: 0.0,
            rep_rate: 100e6,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return invalid("n_pulses must be at least 1");
        }
        if !(self.dark_count_rate >= 0.0 && self.dark_count_rate.is_finite()) {
            return invalid("dark count rate must be non-negative");
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return invalid("repetition rate must be positive");
        }
        Ok(())
    }
}

/// Per-bin click probabilities for both channels on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickModel {
    pub grid: SpectralGrid,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
}

struct ChannelSampler {
    channel: Channel,
    fiber: FiberSpectrometer,
    cdf: Vec<f64>,
    omegas: Vec<f64>,
    jitter: Option<Normal<f64>>,
    dark_prob: f64,
    band: (f64, f64),
}

impl ChannelSampler {
    fn new(channel: Channel, p: &[f64], grid: &SpectralGrid, fiber: FiberSpectrometer, cfg: &RunConfig) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::GridMismatch("click probabilities vs grid"));
        }
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(p.len());
        for &x in p {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidModel(format!("click probability {x} outside [0, 1]")));
            }
            acc += x * fiber.efficiency;
            cdf.push(acc);
        }
        if acc > 1.0 {
            return Err(Error::InvalidModel(format!(
                "channel {channel:?}: total click probability {acc} exceeds 1; lower alpha or refine bins"
            )));
        }
        let jitter = if fiber.jitter_sigma > 0.0 {
            Some(Normal::new(0.0, fiber.jitter_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            channel,
            fiber,
            cdf,
            omegas: grid.omegas(),
            jitter,
            dark_prob: -(-cfg.dark_count_rate / cfg.rep_rate).exp_m1(),
            band: fiber.band_times(grid),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng, pulse_index: u64) -> Option<TimeTag> {
        let u: f64 = rng.random();
        let total = *self.cdf.last().unwrap_or(&0.0);
        let t = if u < total {
            let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
            let mut t = self.fiber.group_delay(self.omegas[k]);
            if let Some(j) = &self.jitter {
                t += j.sample(rng);
            }
            t
        } else if self.dark_prob > 0.0 && rng.random::<f64>() < self.dark_prob {
            self.band.0 + rng.random::<f64>() * (self.band.1 - self.band.0)
        } else {
            return None;
        };
        Some(TimeTag {
            pulse_index,
            channel: self.channel,
            arrival_fs: self.fiber.quantize_fs(t),
        })
    }
}

const CHUNK: u64 = 1 << 14;

/// Generates the tag stream, sorted by pulse index with channel A first.
///
/// Pulse `i` draws from ChaCha8 seeded with `rng_seed` on stream `i`, so the
/// output does not depend on the thread count.
pub fn simulate_run(
    model: &ClickModel,
    fib_a: &FiberSpectrometer,
    fib_b: &FiberSpectrometer,
    cfg: &RunConfig,
) -> Result<Vec<TimeTag>> {
    cfg.validate()?;
    let fib_a = fib_a.validated()?;
    let fib_b = fib_b.validated()?;
    let a = ChannelSampler::new(Channel::A, &model.p_a, &model.grid, fib_a, cfg)?;
    let b = ChannelSampler::new(Channel::B, &model.p_b, &model.grid, fib_b, cfg)?;
    let base = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n_chunks = cfg.n_pulses.div_ceil(CHUNK);
    let chunks: Vec<Vec<TimeTag>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(cfg.n_pulses);
            let mut out = Vec::new();
            for pulse in start..end {
                let mut rng = base.clone();
                rng.set_stream(pulse);
                rng.set_word_pos(0);
                out.extend(a.sample(&mut rng, pulse));
                out.extend(b.sample(&mut rng, pulse));
            }
            out
        })
        .collect();
    Ok(chunks.concat())
}
