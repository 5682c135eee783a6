//! Transmit/receive chain: QPSK mapping, embedded-pilot frame assembly,
//! modulation with the chirp-periodic prefix, demodulation, LMMSE detection,
//! and BER/EVM metrics.
//!
//! A frame in the transform domain holds one real pilot impulse at
//! `pilot_index`, `q` zero guards on each side of it (cyclically), and
//! unit-power data symbols everywhere else. The pilot amplitude is
//! `10^((SNRp - SNRd)/20)`, so pilot and data experience their respective
//! SNRs through a common noise floor.

use crate::channel::chirp_periodic_prefix;
use crate::error::Error;
use crate::linalg::{adjoint, cholesky_in_place, cholesky_solve, matmul, CMat};
use crate::params::{self, ChannelBounds, WaveformKind};
use crate::transforms::{AfdmParams, DaftPlan};
use crate::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Pilot/guard/data partition of a frame in the transform domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub n: usize,
    pub pilot_index: usize,
    pub q: usize,
    /// Ascending indices outside the cyclic zone `[pilot - q, pilot + q]`.
    pub data_indices: Vec<usize>,
}

impl FrameLayout {
    pub fn new(n: usize, pilot_index: usize, q: usize) -> Result<Self, Error> {
        if pilot_index >= n {
            return Err(Error::domain(format!(
                "pilot index {pilot_index} outside frame of size {n}"
            )));
        }
        if 2 * q + 1 >= n {
            return Err(Error::domain(format!(
                "guard zone 2·{q}+1 leaves no data symbols in a frame of {n}"
            )));
        }
        let data_indices = (0..n)
            .filter(|&i| {
                let fwd = (i + n - pilot_index) % n;
                let bwd = (pilot_index + n - i) % n;
                fwd.min(bwd) > q
            })
            .collect();
        Ok(FrameLayout {
            n,
            pilot_index,
            q,
            data_indices,
        })
    }

    /// Sounding layout: every bin except the pilot is a guard, no data. The
    /// whole frame is then available to the estimator as noise reference
    /// outside the candidate bins.
    pub fn pilot_only(n: usize, pilot_index: usize) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::domain(format!("frame size {n} must be ≥ 2")));
        }
        if pilot_index >= n {
            return Err(Error::domain(format!(
                "pilot index {pilot_index} outside frame of size {n}"
            )));
        }
        Ok(FrameLayout {
            n,
            pilot_index,
            q: n / 2,
            data_indices: Vec::new(),
        })
    }

    pub fn data_count(&self) -> usize {
        self.data_indices.len()
    }

    pub fn bits_per_frame(&self) -> usize {
        2 * self.data_count()
    }
}

/// Designed parameter/layout pair for a waveform kind over given channel
/// bounds: canonical chirp rates, minimal (or overridden) prefix, guard count
/// from the design rule, pilot sitting at index `q`.
pub fn design_frame(
    n: usize,
    kind: WaveformKind,
    bounds: &ChannelBounds,
    cpp_override: Option<usize>,
) -> Result<(AfdmParams, FrameLayout), Error> {
    let (c1, c2) = params::waveform_rates(kind, bounds, n);
    let l_cpp = params::cpp_length(bounds.l_max, cpp_override)?;
    let p = AfdmParams::new(n, c1, c2, l_cpp)?;
    let q = params::guard_count(n, c1, bounds.l_max)?;
    let layout = FrameLayout::new(n, q, q)?;
    Ok((p, layout))
}

/// One assembled frame: transform-domain symbols and the bits they carry.
#[derive(Clone, Debug)]
pub struct Frame {
    pub daft_symbols: Vec<Complex64>,
    pub payload_bits: Vec<u8>,
}

/// Pilot amplitude realizing a pilot SNR of `snr_p_db` when data symbols are
/// unit power at `snr_d_db`: `10^((SNRp - SNRd)/20)`. Equal infinities (both
/// noiseless) pin the ratio at one, and `SNRp = -∞` gives an absent pilot
/// (amplitude zero); only a diverging amplitude is rejected.
pub fn pilot_amplitude(snr_p_db: f64, snr_d_db: f64) -> Result<f64, Error> {
    if snr_p_db.is_nan() || snr_d_db.is_nan() {
        return Err(Error::domain("SNR must not be NaN"));
    }
    let diff_db = if snr_p_db.is_infinite() && snr_d_db.is_infinite() {
        if snr_p_db == snr_d_db {
            0.0
        } else {
            snr_p_db
        }
    } else {
        snr_p_db - snr_d_db
    };
    let rho = 10f64.powf(diff_db / 20.0);
    if rho.is_finite() {
        Ok(rho)
    } else {
        Err(Error::domain(format!(
            "pilot amplitude diverges for SNRp = {snr_p_db} dB with SNRd = {snr_d_db} dB"
        )))
    }
}

/// Gray-mapped QPSK: bit pair `(b0, b1)` becomes
/// `((1 - 2·b0) + j·(1 - 2·b1))/√2`, so `00 → (1+j)/√2`.
pub fn map_qpsk(bits: &[u8]) -> Result<Vec<Complex64>, Error> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::domain(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::domain(format!("bit value {b} is not 0 or 1")));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            Complex64::new(
                SQRT_HALF * (1.0 - 2.0 * pair[0] as f64),
                SQRT_HALF * (1.0 - 2.0 * pair[1] as f64),
            )
        })
        .collect())
}

/// Nearest-quadrant QPSK demapping, the inverse of [`map_qpsk`] convention.
pub fn demap_qpsk(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(2 * symbols.len());
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

/// Uniform random payload bits.
pub fn random_bits<R: Rng>(count: usize, rng: &mut R) -> Vec<u8> {
    (0..count).map(|_| rng.gen::<bool>() as u8).collect()
}

/// Places QPSK-mapped `bits` on the data indices, the pilot impulse at its
/// index, and exact zeros in the guards.
pub fn build_frame(
    bits: &[u8],
    layout: &FrameLayout,
    pilot_amplitude: f64,
) -> Result<Frame, Error> {
    if bits.len() != layout.bits_per_frame() {
        return Err(Error::Dimension {
            what: "payload bits",
            expected: layout.bits_per_frame(),
            got: bits.len(),
        });
    }
    if !(pilot_amplitude >= 0.0) || !pilot_amplitude.is_finite() {
        return Err(Error::domain(format!(
            "pilot amplitude {pilot_amplitude} must be nonnegative and finite"
        )));
    }
    let data = map_qpsk(bits)?;
    let mut symbols = vec![Complex64::new(0.0, 0.0); layout.n];
    symbols[layout.pilot_index] = Complex64::new(pilot_amplitude, 0.0);
    for (&idx, &s) in layout.data_indices.iter().zip(data.iter()) {
        symbols[idx] = s;
    }
    Ok(Frame {
        daft_symbols: symbols,
        payload_bits: bits.to_vec(),
    })
}

/// Synthesis: inverse transform of the frame symbols with the chirp-periodic
/// prefix prepended. Returns `n + l_cpp` samples.
pub fn modulate(frame: &Frame, plan: &DaftPlan) -> Result<Vec<Complex64>, Error> {
    let body = plan.idaft(&frame.daft_symbols)?;
    Ok(chirp_periodic_prefix(
        &body,
        plan.params().c1,
        plan.params().l_cpp,
    ))
}

/// Analysis transform of the prefix-stripped received body.
pub fn demodulate(received: &[Complex64], plan: &DaftPlan) -> Result<Vec<Complex64>, Error> {
    plan.daft(received)
}

/// LMMSE output: estimated data symbols in `data_indices` order.
#[derive(Clone, Debug)]
pub struct Detection {
    pub symbols: Vec<Complex64>,
    /// Set when a singular zero-noise system needed a ridge fallback.
    pub regularized: bool,
}

/// Cyclic-diagonal sparsity pattern of an effective channel matrix, when the
/// matrix is (numerically) supported on few diagonals.
struct DiagRep {
    offsets: Vec<usize>,
    /// `diags[i][r] = H[r, (r - offsets[i]) mod n]`.
    diags: Vec<Vec<Complex64>>,
}

/// Energy fraction below which a diagonal (or the residual off all kept
/// diagonals) counts as numerically absent.
const DIAG_REL_TOL: f64 = 1e-24;

fn diagonal_rep(h: &CMat) -> Option<DiagRep> {
    let n = h.nrows();
    let mut energy = vec![0.0f64; n];
    let mut total = 0.0;
    for r in 0..n {
        for c in 0..n {
            let e = h[[r, c]].norm_sqr();
            energy[(r + n - c) % n] += e;
            total += e;
        }
    }
    if total == 0.0 {
        return Some(DiagRep {
            offsets: vec![],
            diags: vec![],
        });
    }
    let offsets: Vec<usize> = (0..n)
        .filter(|&o| energy[o] > total * DIAG_REL_TOL)
        .collect();
    let kept: f64 = offsets.iter().map(|&o| energy[o]).sum();
    if total - kept > total * DIAG_REL_TOL {
        return None;
    }
    // Past this width the dense path is cheaper.
    if offsets.len() * offsets.len() > n {
        return None;
    }
    let diags = offsets
        .iter()
        .map(|&o| (0..n).map(|r| h[[r, (r + n - o) % n]]).collect())
        .collect();
    Some(DiagRep { offsets, diags })
}

/// `H_d·H_d^H` where `H_d` keeps only the data columns, assembled from the
/// diagonal representation in `O(n·S² + z·S²)` instead of a dense product.
fn gram_from_diagonals(rep: &DiagRep, layout: &FrameLayout, n: usize) -> CMat {
    let mut g = CMat::zeros((n, n));
    for (i, &oi) in rep.offsets.iter().enumerate() {
        for (j, &oj) in rep.offsets.iter().enumerate() {
            let off = (oi + n - oj) % n;
            for r in 0..n {
                let c = (r + n - off) % n;
                g[[r, c]] += rep.diags[i][r] * rep.diags[j][c].conj();
            }
        }
    }
    // Remove pilot and guard columns: they are not part of H_d.
    let mut excluded: Vec<usize> = (0..n).collect();
    excluded.retain(|i| !layout.data_indices.contains(i));
    for &c in &excluded {
        let taps: Vec<(usize, Complex64)> = rep
            .offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let r = (c + o) % n;
                (r, rep.diags[i][r])
            })
            .collect();
        for &(r1, a) in &taps {
            for &(r2, b) in &taps {
                g[[r1, r2]] -= a * b.conj();
            }
        }
    }
    g
}

fn solve_hpd(
    g: &CMat,
    rhs: &[Complex64],
    allow_ridge: bool,
) -> Result<(Vec<Complex64>, bool), Error> {
    let mut l = g.clone();
    match cholesky_in_place(&mut l) {
        Ok(()) => Ok((cholesky_solve(&l, rhs), false)),
        Err(Error::Singular) if allow_ridge => {
            let mut l2 = g.clone();
            for i in 0..l2.nrows() {
                l2[[i, i]] += Complex64::new(1e-12, 0.0);
            }
            cholesky_in_place(&mut l2)?;
            Ok((cholesky_solve(&l2, rhs), true))
        }
        Err(e) => Err(e),
    }
}

/// LMMSE data detection on `y = H_eff·x + w` with the known pilot removed
/// first: `x̂ = H_d^H (H_d H_d^H + noise_var·I)^{-1} (y - pilot·h_pilot)`,
/// where `H_d` is `h_eff` restricted to the data columns.
///
/// When `h_eff` is supported on a few cyclic diagonals (every integer
/// delay-Doppler channel under the canonical rates), the Gram matrix is
/// assembled from those diagonals; otherwise a dense product is used. Both
/// routes compute the same operator.
pub fn lmmse_detect(
    y: &[Complex64],
    h_eff: &CMat,
    noise_var: f64,
    layout: &FrameLayout,
    pilot_value: Complex64,
) -> Result<Detection, Error> {
    lmmse_detect_impl(y, h_eff, noise_var, layout, pilot_value, false)
}

fn lmmse_detect_impl(
    y: &[Complex64],
    h_eff: &CMat,
    noise_var: f64,
    layout: &FrameLayout,
    pilot_value: Complex64,
    force_dense: bool,
) -> Result<Detection, Error> {
    let n = layout.n;
    if y.len() != n {
        return Err(Error::Dimension {
            what: "received frame",
            expected: n,
            got: y.len(),
        });
    }
    if h_eff.nrows() != n || h_eff.ncols() != n {
        return Err(Error::Dimension {
            what: "effective channel matrix",
            expected: n,
            got: h_eff.nrows(),
        });
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::domain(format!(
            "noise variance {noise_var} must be finite and ≥ 0"
        )));
    }

    let mut rhs: Vec<Complex64> = y.to_vec();
    for r in 0..n {
        rhs[r] -= pilot_value * h_eff[[r, layout.pilot_index]];
    }

    let rep = if force_dense {
        None
    } else {
        diagonal_rep(h_eff)
    };
    let mut g = match &rep {
        Some(rep) => gram_from_diagonals(rep, layout, n),
        None => {
            let d = layout.data_count();
            let mut hd = CMat::zeros((n, d));
            for (jj, &c) in layout.data_indices.iter().enumerate() {
                for r in 0..n {
                    hd[[r, jj]] = h_eff[[r, c]];
                }
            }
            matmul(&hd, &adjoint(&hd))
        }
    };
    for i in 0..n {
        g[[i, i]] += Complex64::new(noise_var, 0.0);
    }

    let (z, regularized) = solve_hpd(&g, &rhs, true)?;

    let symbols = match &rep {
        Some(rep) => layout
            .data_indices
            .iter()
            .map(|&c| {
                rep.offsets
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| {
                        let r = (c + o) % n;
                        rep.diags[i][r].conj() * z[r]
                    })
                    .sum()
            })
            .collect(),
        None => layout
            .data_indices
            .iter()
            .map(|&c| (0..n).map(|r| h_eff[[r, c]].conj() * z[r]).sum())
            .collect(),
    };
    Ok(Detection {
        symbols,
        regularized,
    })
}

/// Fraction of differing bits.
pub fn compute_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64, Error> {
    if tx_bits.is_empty() {
        return Err(Error::domain("BER of an empty bit stream is undefined"));
    }
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Dimension {
            what: "received bits",
            expected: tx_bits.len(),
            got: rx_bits.len(),
        });
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Error vector magnitude as a percentage: `100·√(Σ|rx - ref|² / Σ|ref|²)`.
pub fn compute_evm(reference: &[Complex64], received: &[Complex64]) -> Result<f64, Error> {
    if reference.is_empty() {
        return Err(Error::domain("EVM of an empty symbol stream is undefined"));
    }
    if reference.len() != received.len() {
        return Err(Error::Dimension {
            what: "received symbols",
            expected: reference.len(),
            got: received.len(),
        });
    }
    let ref_power: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if ref_power == 0.0 {
        return Err(Error::domain("EVM reference power is zero"));
    }
    let err_power: f64 = reference
        .iter()
        .zip(received.iter())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum();
    Ok(100.0 * (err_power / ref_power).sqrt())
}
