//! Channel-sounding statistics over a stream of per-frame estimation
//! reports: power delay profile, Doppler power spectrum, and the RMS spreads,
//! all convertible from normalized grid units to physical units.
//!
//! Path geometry is static per scenario (cells keep their `(l, k)` identity
//! across frames); only gains evolve. The accumulator therefore keys the
//! slow-time gain sequences by cell, zero-filling the frames in which a cell
//! went undetected.

use crate::error::Error;
use crate::estimator::EstimationReport;
use crate::params::ChannelBounds;
use crate::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// Report bandwidth when a configuration names none.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 10.0e6;

/// Physical scaling of the normalized grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhysicalGrid {
    /// Signal bandwidth in Hz; delay resolution is its reciprocal.
    pub bandwidth_b: f64,
    /// `B/N` in Hz.
    pub subcarrier_spacing: f64,
    /// `N/B` in seconds.
    pub symbol_duration_t: f64,
    /// `(N + L_cpp)/B` in seconds; the slow-time sampling interval.
    pub frame_period: f64,
}

impl PhysicalGrid {
    pub fn new(bandwidth_hz: f64, n: usize, l_cpp: usize) -> Result<Self, Error> {
        if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
            return Err(Error::domain(format!(
                "bandwidth {bandwidth_hz} Hz must be positive and finite"
            )));
        }
        if n == 0 {
            return Err(Error::domain("frame size must be ≥ 1"));
        }
        Ok(PhysicalGrid {
            bandwidth_b: bandwidth_hz,
            subcarrier_spacing: bandwidth_hz / n as f64,
            symbol_duration_t: n as f64 / bandwidth_hz,
            frame_period: (n + l_cpp) as f64 / bandwidth_hz,
        })
    }

    /// Delay of one normalized sample, `1/B` seconds.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth_b
    }
}

/// Per-cell slow-time gain tracks, aligned by frame index.
#[derive(Clone, Debug)]
pub struct SoundingAccumulator {
    pub bounds: ChannelBounds,
    pub frame_count: usize,
    tracks: BTreeMap<(usize, i64), Vec<Complex64>>,
}

impl SoundingAccumulator {
    /// Frames×1 gain sequence of one cell, zero-filled where undetected.
    pub fn track(&self, l: usize, k: i64) -> Option<&[Complex64]> {
        self.tracks.get(&(l, k)).map(|v| v.as_slice())
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.tracks.keys().copied()
    }
}

/// Folds per-frame estimation reports into per-cell gain tracks. Reports must
/// share one configuration (witnessed by their bounds); a cell missing from a
/// frame contributes a zero gain for that frame.
pub fn accumulate(reports: &[EstimationReport]) -> Result<SoundingAccumulator, Error> {
    let first = reports.first().ok_or(Error::InsufficientData {
        what: "estimation reports",
        needed: 1,
        got: 0,
    })?;
    let bounds = first.bounds;
    let mut tracks: BTreeMap<(usize, i64), Vec<Complex64>> = BTreeMap::new();
    for (f, rep) in reports.iter().enumerate() {
        if rep.bounds != bounds {
            return Err(Error::config(
                "sounding-config-mismatch",
                format!(
                    "report {f} was produced under bounds {:?}, the stream started with {:?}",
                    rep.bounds, bounds
                ),
            ));
        }
        for path in &rep.paths {
            if path.l > bounds.l_max || path.k.unsigned_abs() as usize > bounds.k_max {
                return Err(Error::config(
                    "sounding-config-mismatch",
                    format!(
                        "report {f} contains cell (l={}, k={}) outside bounds {:?}",
                        path.l, path.k, bounds
                    ),
                ));
            }
            let track = tracks.entry((path.l, path.k)).or_default();
            track.resize(f, Complex64::new(0.0, 0.0));
            if track.len() == f {
                track.push(path.gain);
            } else {
                // A second detection of the same cell in one frame superposes.
                track[f] += path.gain;
            }
        }
    }
    for track in tracks.values_mut() {
        track.resize(reports.len(), Complex64::new(0.0, 0.0));
    }
    Ok(SoundingAccumulator {
        bounds,
        frame_count: reports.len(),
        tracks,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PdpEntry {
    pub delay_s: f64,
    /// Fraction of total received path power at this delay.
    pub power: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DpsEntry {
    pub doppler_hz: f64,
    /// Spectral mass of this bin; the bins sum to the total path power.
    pub power: f64,
}

/// Sounding outputs in one serializable bundle.
#[derive(Clone, Debug, Serialize)]
pub struct SoundingReport {
    pub pdp: Vec<PdpEntry>,
    pub dps: Vec<DpsEntry>,
    pub rms_delay_spread_s: f64,
    pub rms_doppler_spread_hz: f64,
    pub frame_count: usize,
}

/// Power delay profile: per delay `l/B`, the frame-averaged `Σ_k |ĝ_{l,k}|²`,
/// normalized to unit total.
pub fn pdp(acc: &SoundingAccumulator, grid: &PhysicalGrid) -> Result<Vec<PdpEntry>, Error> {
    let mut by_delay: BTreeMap<usize, f64> = BTreeMap::new();
    for ((l, _), track) in &acc.tracks {
        let mean_power: f64 =
            track.iter().map(|g| g.norm_sqr()).sum::<f64>() / acc.frame_count as f64;
        *by_delay.entry(*l).or_insert(0.0) += mean_power;
    }
    let total: f64 = by_delay.values().sum();
    if !(total > 0.0) {
        return Err(Error::domain(
            "no path energy was detected, the delay profile is undefined",
        ));
    }
    Ok(by_delay
        .into_iter()
        .map(|(l, p)| PdpEntry {
            delay_s: l as f64 * grid.delay_resolution(),
            power: p / total,
        })
        .collect())
}

/// Averaged modified periodogram with a periodic Hann window and 50% segment
/// overlap, normalized so the bins sum to the sequence's mean power. Bins are
/// in natural FFT order.
pub fn welch_psd(x: &[Complex64], segment: usize) -> Result<Vec<f64>, Error> {
    if segment < 2 {
        return Err(Error::domain(format!(
            "Welch segment length {segment} must be ≥ 2"
        )));
    }
    if x.len() < segment {
        return Err(Error::InsufficientData {
            what: "samples for one Welch segment",
            needed: segment,
            got: x.len(),
        });
    }
    let window: Vec<f64> = (0..segment)
        .map(|t| 0.5 * (1.0 - (TAU * t as f64 / segment as f64).cos()))
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let hop = (segment / 2).max(1);
    let mut acc = vec![0.0f64; segment];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + segment <= x.len() {
        for t in 0..segment {
            buf[t] = x[start + t] * window[t];
        }
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(buf.iter()) {
            *a += v.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * segment as f64 * window_energy);
    Ok(acc.into_iter().map(|a| a * scale).collect())
}

/// Doppler power spectrum: the per-cell Welch spectra of the slow-time gain
/// tracks, summed across cells (each carries its own power weight), on a
/// frequency axis spanning `±1/(2·frame_period)` in ascending order.
pub fn dps(acc: &SoundingAccumulator, grid: &PhysicalGrid) -> Result<Vec<DpsEntry>, Error> {
    const MIN_FRAMES: usize = 64;
    if acc.frame_count < MIN_FRAMES {
        return Err(Error::InsufficientData {
            what: "frames for a Doppler spectrum",
            needed: MIN_FRAMES,
            got: acc.frame_count,
        });
    }
    let segment = (acc.frame_count / 8).min(1024);
    let mut spectrum = vec![0.0f64; segment];
    for track in acc.tracks.values() {
        for (s, p) in spectrum.iter_mut().zip(welch_psd(track, segment)?) {
            *s += p;
        }
    }
    let fs = 1.0 / grid.frame_period;
    let half = segment / 2;
    let mut entries = Vec::with_capacity(segment);
    for signed in -(half as i64)..(segment - half) as i64 {
        let bin = signed.rem_euclid(segment as i64) as usize;
        entries.push(DpsEntry {
            doppler_hz: signed as f64 * fs / segment as f64,
            power: spectrum[bin],
        });
    }
    Ok(entries)
}

fn weighted_rms(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64, Error> {
    let mut total = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut seen = false;
    for (value, weight) in pairs {
        seen = true;
        total += weight;
        m1 += weight * value;
        m2 += weight * value * value;
    }
    if !seen {
        return Err(Error::domain("RMS spread of an empty profile is undefined"));
    }
    if !(total > 0.0) {
        return Err(Error::domain(
            "RMS spread over zero total power is undefined",
        ));
    }
    let mean = m1 / total;
    // Cancellation can push the variance a few ulps negative.
    Ok((m2 / total - mean * mean).max(0.0).sqrt())
}

/// `√(E[τ²] − E[τ]²)` of the power-weighted delay distribution, in seconds.
pub fn rms_delay_spread(pdp: &[PdpEntry]) -> Result<f64, Error> {
    weighted_rms(pdp.iter().map(|e| (e.delay_s, e.power)))
}

/// `√(E[ν²] − E[ν]²)` of the Doppler power distribution, in Hz.
pub fn rms_doppler_spread(dps: &[DpsEntry]) -> Result<f64, Error> {
    weighted_rms(dps.iter().map(|e| (e.doppler_hz, e.power)))
}
