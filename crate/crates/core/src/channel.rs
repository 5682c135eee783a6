//! Doubly-selective channel simulation.
//!
//! A channel realization is a sparse set of propagation paths, each with an
//! integer normalized delay `l` (samples), an integer normalized Doppler `k`
//! (bins), and a complex gain. Two application modes exist and are kept
//! provably equivalent by tests:
//!
//! * **waveform mode** ([`apply_waveform`]): linear convolution over the
//!   prefixed sample stream, the physical ground truth;
//! * **matrix mode** ([`time_channel_matrix`]): an `n×n` operator acting on
//!   the frame body alone, where the prefix has been folded into phase
//!   corrections on the wrapped taps.
//!
//! The Doppler phase reference is `t = 0` at the first post-prefix sample,
//! which keeps matrix mode free of any prefix-dependent data phase.
//!
//! Slow-time gain evolution follows the Jakes model (sum of equal-power
//! sinusoids over equally spaced arrival angles), and [`add_awgn`] supplies
//! measurement noise at a prescribed SNR.

use crate::error::Error;
use crate::linalg::CMat;
use crate::params::ChannelBounds;
use crate::transforms::{AfdmParams, DENSE_LIMIT};
use crate::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One propagation path: delay in samples, Doppler in bins, complex gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    pub l: usize,
    pub k: i64,
    pub gain: Complex64,
}

/// A drawn channel: path set plus the bounds it was drawn within.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    pub bounds: ChannelBounds,
    pub seed: u64,
}

impl ChannelRealization {
    /// Checks the structural invariants: at least one path, every path inside
    /// the bounds, and no two paths sharing a delay-Doppler cell.
    pub fn validate(&self) -> Result<(), Error> {
        if self.paths.is_empty() {
            return Err(Error::domain("channel must contain at least one path"));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.paths {
            if p.l > self.bounds.l_max || p.k.unsigned_abs() as usize > self.bounds.k_max {
                return Err(Error::domain(format!(
                    "path (l={}, k={}) outside bounds (l_max={}, k_max={})",
                    p.l, p.k, self.bounds.l_max, self.bounds.k_max
                )));
            }
            if !seen.insert((p.l, p.k)) {
                return Err(Error::domain(format!(
                    "duplicate path at cell (l={}, k={})",
                    p.l, p.k
                )));
            }
        }
        Ok(())
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.l).max().unwrap_or(0)
    }
}

/// Draws `p_count` paths on distinct delay-Doppler cells, uniformly without
/// replacement, with independent complex Gaussian gains whose variances are
/// `power_profile` (which must sum to one: unit-power channel).
pub fn sample_channel(
    p_count: usize,
    bounds: ChannelBounds,
    power_profile: &[f64],
    rng_seed: u64,
) -> Result<ChannelRealization, Error> {
    if p_count == 0 {
        return Err(Error::domain("path count must be ≥ 1"));
    }
    let cells = bounds.grid_cells();
    if p_count > cells {
        return Err(Error::domain(format!(
            "cannot place {p_count} distinct paths on a grid of {cells} cells \
             (l_max={}, k_max={})",
            bounds.l_max, bounds.k_max
        )));
    }
    if power_profile.len() != p_count {
        return Err(Error::Dimension {
            what: "power profile",
            expected: p_count,
            got: power_profile.len(),
        });
    }
    let sum: f64 = power_profile.iter().sum();
    if power_profile.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "power profile entries must be ≥ 0 and sum to 1 (got sum = {sum})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let width = 2 * bounds.k_max + 1;
    let picks = rand::seq::index::sample(&mut rng, cells, p_count);
    let normal = StandardNormal;
    let paths = picks
        .iter()
        .zip(power_profile.iter())
        .map(|(cell, &w)| {
            let l = cell / width;
            let k = (cell % width) as i64 - bounds.k_max as i64;
            let s = (w / 2.0).sqrt();
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            ChannelPath {
                l,
                k,
                gain: Complex64::new(s * re, s * im),
            }
        })
        .collect();
    let ch = ChannelRealization {
        paths,
        bounds,
        seed: rng_seed,
    };
    ch.validate()?;
    Ok(ch)
}

/// Phase factor tying a prefix sample to the body sample it mirrors:
/// sample `-q` equals sample `n - q` times `exp(j·2π·c1·(n² - 2nq))`.
pub(crate) fn wrap_phase(c1: f64, n: usize, q: usize) -> Complex64 {
    let arg = c1 * ((n * n) as f64 - 2.0 * (n * q) as f64);
    let phase = TAU * arg.fract();
    Complex64::new(phase.cos(), phase.sin())
}

/// Prepends the chirp-periodic prefix to a frame body, returning the
/// `n + l_cpp` sample stream a transmitter would emit.
pub fn chirp_periodic_prefix(body: &[Complex64], c1: f64, l_cpp: usize) -> Vec<Complex64> {
    let n = body.len();
    assert!(l_cpp < n, "prefix length {l_cpp} must be < frame size {n}");
    let mut stream = Vec::with_capacity(n + l_cpp);
    for q in (1..=l_cpp).rev() {
        stream.push(body[n - q] * wrap_phase(c1, n, q));
    }
    stream.extend_from_slice(body);
    stream
}

fn doppler_phase(k: i64, t: usize, n: usize) -> Complex64 {
    let r = (k * t as i64).rem_euclid(n as i64);
    let phase = TAU * r as f64 / n as f64;
    Complex64::new(phase.cos(), phase.sin())
}

/// Ground-truth channel action on a prefixed sample stream: for each path,
/// delay by `l`, rotate by the per-sample Doppler ramp, scale by the gain,
/// and sum. Returns the `n` post-prefix samples.
pub fn apply_waveform(
    stream: &[Complex64],
    ch: &ChannelRealization,
    p: &AfdmParams,
) -> Result<Vec<Complex64>, Error> {
    if stream.len() != p.n + p.l_cpp {
        return Err(Error::Dimension {
            what: "prefixed sample stream",
            expected: p.n + p.l_cpp,
            got: stream.len(),
        });
    }
    let deepest = ch.max_delay();
    if p.l_cpp < deepest {
        return Err(Error::PrefixTooShort {
            l_cpp: p.l_cpp,
            l_max: deepest,
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); p.n];
    for path in &ch.paths {
        for (t, y) in out.iter_mut().enumerate() {
            *y += path.gain * doppler_phase(path.k, t, p.n) * stream[t + p.l_cpp - path.l];
        }
    }
    Ok(out)
}

/// The `n×n` operator equivalent to [`apply_waveform`] on the frame body:
/// each path contributes `gain` on the cyclic diagonal at offset `-l`, with
/// the Doppler ramp down the rows and the chirp-periodic [`wrap_phase`] on
/// the `l` taps that reach back into the prefix.
pub fn time_channel_matrix(ch: &ChannelRealization, p: &AfdmParams) -> Result<CMat, Error> {
    ch.validate()?;
    p.validate()?;
    if p.n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            n: p.n,
            limit: DENSE_LIMIT,
        });
    }
    if p.l_cpp < ch.bounds.l_max {
        return Err(Error::PrefixTooShort {
            l_cpp: p.l_cpp,
            l_max: ch.bounds.l_max,
        });
    }
    let n = p.n;
    let mut h = CMat::zeros((n, n));
    for path in &ch.paths {
        for t in 0..n {
            let col = (t + n - path.l % n) % n;
            let mut v = path.gain * doppler_phase(path.k, t, n);
            if t < path.l {
                v *= wrap_phase(p.c1, n, path.l - t);
            }
            h[[t, col]] += v;
        }
    }
    Ok(h)
}

/// Number of sinusoids in the Jakes sum; equally spaced arrival angles keep
/// the autocorrelation close to the Bessel ideal at this count.
pub const JAKES_ANGLES: usize = 128;

/// One path's gain trajectory across frames.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GainProcess {
    /// Maximum Doppler in cycles per frame.
    pub f_d_norm: f64,
    /// Configured mean power of the sequence.
    pub power: f64,
    pub samples: Vec<Complex64>,
}

/// Jakes-spectrum gain sequence: a sum of [`JAKES_ANGLES`] unit sinusoids at
/// frequencies `f_d·cos(α_m)` over equally spaced angles (randomly rotated),
/// with independent uniform phases. Its autocorrelation at lag `τ`
/// approaches `power·J₀(2π·f_d·τ)`.
pub fn jakes_gains(
    f_d_norm: f64,
    n_frames: usize,
    power: f64,
    rng_seed: u64,
) -> Result<GainProcess, Error> {
    if !(f_d_norm > 0.0 && f_d_norm < 0.5) {
        return Err(Error::domain(format!(
            "normalized Doppler {f_d_norm} outside (0, 0.5)"
        )));
    }
    if n_frames == 0 {
        return Err(Error::domain("gain process needs at least one frame"));
    }
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::domain(format!("path power {power} must be ≥ 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let rotation: f64 = rng.gen::<f64>() * TAU;
    let m = JAKES_ANGLES;
    let mut state = Vec::with_capacity(m);
    let mut step = Vec::with_capacity(m);
    for i in 0..m {
        let alpha = TAU * (i as f64 + 0.5) / m as f64 + rotation;
        let psi: f64 = rng.gen::<f64>() * TAU;
        state.push(Complex64::from_polar(1.0, psi));
        step.push(Complex64::from_polar(1.0, TAU * f_d_norm * alpha.cos()));
    }
    let scale = (power / m as f64).sqrt();
    let mut samples = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let sum: Complex64 = state.iter().sum();
        samples.push(sum * scale);
        for (s, w) in state.iter_mut().zip(step.iter()) {
            *s *= *w;
        }
    }
    Ok(GainProcess {
        f_d_norm,
        power,
        samples,
    })
}

/// Noise variance at a given SNR: `signal_power / 10^(snr_db/10)`.
/// `snr_db = +∞` is the noiseless sentinel and maps to zero.
pub fn noise_variance(snr_db: f64, signal_power: f64) -> Result<f64, Error> {
    if !(signal_power > 0.0) || !signal_power.is_finite() {
        return Err(Error::domain(format!(
            "signal power {signal_power} must be positive and finite"
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::domain(format!("SNR {snr_db} dB is not meaningful")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(signal_power * 10f64.powf(-snr_db / 10.0))
}

/// Adds circularly-symmetric complex Gaussian noise of the given variance.
pub fn awgn_in_place<R: Rng>(x: &mut [Complex64], noise_var: f64, rng: &mut R) {
    if noise_var == 0.0 {
        return;
    }
    let s = (noise_var / 2.0).sqrt();
    let normal = StandardNormal;
    for v in x.iter_mut() {
        let re: f64 = normal.sample(rng);
        let im: f64 = normal.sample(rng);
        *v += Complex64::new(s * re, s * im);
    }
}

/// Seeded convenience wrapper around [`awgn_in_place`] at a prescribed SNR.
pub fn add_awgn(
    x: &[Complex64],
    snr_db: f64,
    signal_power: f64,
    rng_seed: u64,
) -> Result<Vec<Complex64>, Error> {
    let var = noise_variance(snr_db, signal_power)?;
    let mut out = x.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    awgn_in_place(&mut out, var, &mut rng);
    Ok(out)
}
