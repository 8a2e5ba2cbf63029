//! Time tags back to joint spectra: pulse matching, arrival-to-frequency
//! mapping and 2-D histogramming.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::events::{Channel, FiberSpectrometer, Mapped, TimeTag};
use crate::spectral::{JointSpectrum, SpectralGrid, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidencePair {
    pub pulse_index: u64,
    pub omega_a: f64,
    pub omega_b: f64,
}

/// Bookkeeping from [`match_pairs`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchStats {
    pub tags_a: u64,
    pub tags_b: u64,
    /// Pulses with a tag on both channels.
    pub coincident_pulses: u64,
    pub pairs: u64,
    pub clamped_a: u64,
    pub clamped_b: u64,
    pub discarded_a: u64,
    pub discarded_b: u64,
    /// Coincident pulses dropped because a tag fell outside the guard band.
    pub lost_pairs: u64,
    /// Tags beyond the first on a channel within one pulse.
    pub extra_tags: u64,
}

impl MatchStats {
    /// Single `key=value` line.
    pub fn summary_line(&self) -> String {
        format!(
            "tags_a={} tags_b={} coincident_pulses={} pairs={} clamped_a={} clamped_b={} discarded_a={} discarded_b={} lost_pairs={} extra_tags={}",
            self.tags_a,
            self.tags_b,
            self.coincident_pulses,
            self.pairs,
            self.clamped_a,
            self.clamped_b,
            self.discarded_a,
            self.discarded_b,
            self.lost_pairs,
            self.extra_tags
        )
    }
}

fn map_tag(fib: &FiberSpectrometer, tag: &TimeTag, grid: &SpectralGrid, clamped: &mut u64, discarded: &mut u64) -> Option<f64> {
    match fib.arrival_to_omega(tag.arrival_seconds(), grid) {
        Mapped::InBand(w) => Some(w),
        Mapped::Clamped(w) => {
            *clamped += 1;
            Some(w)
        }
        Mapped::Discarded => {
            *discarded += 1;
            None
        }
    }
}

/// Pairs up tags sharing a pulse index. The stream must be sorted by pulse
/// index; within a pulse the first tag on each channel is used.
pub fn match_pairs(
    tags: &[TimeTag],
    grid: &SpectralGrid,
    fib_a: &FiberSpectrometer,
    fib_b: &FiberSpectrometer,
) -> Result<(Vec<CoincidencePair>, MatchStats)> {
    if let Some(w) = tags.windows(2).find(|w| w[1].pulse_index < w[0].pulse_index) {
        return Err(Error::InvalidInput(format!(
            "tag stream not sorted by pulse index ({} after {})",
            w[1].pulse_index, w[0].pulse_index
        )));
    }
    let mut stats = MatchStats::default();
    let mut pairs = Vec::new();
    for group in tags.chunk_by(|x, y| x.pulse_index == y.pulse_index) {
        let mut first_a = None;
        let mut first_b = None;
        for t in group {
            let slot = match t.channel {
                Channel::A => {
                    stats.tags_a += 1;
                    &mut first_a
                }
                Channel::B => {
                    stats.tags_b += 1;
                    &mut first_b
                }
            };
            if slot.is_some() {
                stats.extra_tags += 1;
            } else {
                *slot = Some(*t);
            }
        }
        let (Some(a), Some(b)) = (first_a, first_b) else {
            continue;
        };
        stats.coincident_pulses += 1;
        let wa = map_tag(fib_a, &a, grid, &mut stats.clamped_a, &mut stats.discarded_a);
        let wb = map_tag(fib_b, &b, grid, &mut stats.clamped_b, &mut stats.discarded_b);
        match (wa, wb) {
            (Some(omega_a), Some(omega_b)) => {
                stats.pairs += 1;
                pairs.push(CoincidencePair {
                    pulse_index: a.pulse_index,
                    omega_a,
                    omega_b,
                });
            }
            _ => stats.lost_pairs += 1,
        }
    }
    Ok((pairs, stats))
}

/// A tag carrying only an absolute timestamp (fs since the start of the run).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawTag {
    pub channel: Channel,
    pub time_fs: i64,
}

/// Assigns pulse indices to raw timestamps for files without sync data.
///
/// A tag belongs to pulse `floor((t - tau_c + T/2) / T)`, where `tau_c` is the
/// channel's group delay at its reference frequency and `T` the repetition
/// period, i.e. a window of half a period either side of the expected arrival.
/// Tags that would land before pulse 0 are dropped. Output is sorted.
pub fn assign_pulses(
    raw: &[RawTag],
    rep_rate: f64,
    fib_a: &FiberSpectrometer,
    fib_b: &FiberSpectrometer,
) -> Result<Vec<TimeTag>> {
    if !(rep_rate > 0.0 && rep_rate.is_finite()) {
        return invalid("repetition rate must be positive");
    }
    let period_fs = 1e15 / rep_rate;
    let center = |fib: &FiberSpectrometer| fib.group_delay(fib.ref_omega) * 1e15;
    let (ca, cb) = (center(fib_a), center(fib_b));
    let mut out: Vec<TimeTag> = raw
        .iter()
        .filter_map(|r| {
            let c = if r.channel == Channel::A { ca } else { cb };
            let t = r.time_fs as f64;
            let pulse = ((t - c + period_fs / 2.0) / period_fs).floor();
            if pulse < 0.0 {
                return None;
            }
            Some(TimeTag {
                pulse_index: pulse as u64,
                channel: r.channel,
                arrival_fs: (t - pulse * period_fs).round() as i64,
            })
        })
        .collect();
    out.sort();
    Ok(out)
}

const SHARD: usize = 1 << 16;

/// Nearest-bin 2-D histogram (rows: channel A). Pairs outside the grid band
/// are skipped and counted in the `pairs_outside_grid` metadata entry.
pub fn accumulate(pairs: &[CoincidencePair], grid: &SpectralGrid) -> JointSpectrum {
    let n = grid.len();
    let (counts, outside) = pairs
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut h = vec![0u64; n * n];
            let mut outside = 0u64;
            for p in chunk {
                match (grid.index_of(p.omega_a), grid.index_of(p.omega_b)) {
                    (Some(i), Some(j)) => h[i * n + j] += 1,
                    _ => outside += 1,
                }
            }
            (h, outside)
        })
        .reduce(
            || (vec![0u64; n * n], 0),
            |(mut a, oa), (b, ob)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, oa + ob)
            },
        );
    let values = counts.into_iter().map(|c| c as f64).collect();
    JointSpectrum::new(*grid, *grid, values, SpectrumKind::Counts)
        .expect("counts are finite and non-negative")
        .with_meta("pairs", pairs.len())
        .with_meta("pairs_outside_grid", outside)
}

/// Counts per pulse.
pub fn normalize(js: &JointSpectrum, n_pulses: u64) -> Result<JointSpectrum> {
    if js.kind() != SpectrumKind::Counts {
        return Err(Error::InvalidInput(format!(
            "normalize expects counts, got {}",
            js.kind().as_str()
        )));
    }
    if n_pulses == 0 {
        return invalid("n_pulses must be at least 1");
    }
    let n = n_pulses as f64;
    let values = js.values().iter().map(|v| v / n).collect();
    let mut out = JointSpectrum::new(*js.grid_a(), *js.grid_b(), values, SpectrumKind::Probability)?;
    out.metadata = js.metadata.clone();
    out.metadata.insert("n_pulses".into(), n_pulses.to_string());
    Ok(out)
}
