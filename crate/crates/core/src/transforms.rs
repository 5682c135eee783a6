//! Discrete affine Fourier transform (DAFT).
//!
//! The analysis (receive-side) transform is `A = Λ_c2 · F · Λ_c1` where
//! `Λ_c = diag(exp(j·2π·c·n²))` and `F` is the unitary DFT with entry
//! `(m, k) = exp(-j·2π·m·k/n)/√n`. Synthesis is the adjoint `A^H`, so the
//! subcarrier waveforms are linear chirps
//!
//! ```text
//! s[t] = (1/√n) · Σ_m x[m] · exp(-j·2π·(c1·t² + c2·m² + m·t/n))
//! ```
//!
//! `c1 = c2 = 0` collapses to plain OFDM, `c1 = c2 = 1/(2n)` to OCDM. The
//! chirp slope `2·c1` is what separates delay from Doppler in the transformed
//! channel: a delay of `l` samples displaces the response by `2·n·c1·l`
//! positions while a Doppler of `k` bins displaces it by `k`.
//!
//! Both a fast `O(n log n)` path (chirp multiply, FFT, chirp multiply) and a
//! dense matrix form are provided; the dense form is capped at
//! [`DENSE_LIMIT`] and exists for structural analysis and tests.

use crate::error::Error;
use crate::linalg::CMat;
use crate::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Largest size for which dense transform/channel matrices may be built.
pub const DENSE_LIMIT: usize = 4096;

/// DAFT parameter set: size, the two chirp rates, and the prefix length
/// carried along for framing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfdmParams {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    /// Chirp-periodic prefix length in samples, `< n`.
    pub l_cpp: usize,
}

impl AfdmParams {
    pub fn new(n: usize, c1: f64, c2: f64, l_cpp: usize) -> Result<Self, Error> {
        let p = AfdmParams { n, c1, c2, l_cpp };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n < 2 {
            return Err(Error::domain(format!("transform size n = {} < 2", self.n)));
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::domain("chirp rates must be finite"));
        }
        if self.l_cpp >= self.n {
            return Err(Error::domain(format!(
                "prefix length {} must be < n = {}",
                self.l_cpp, self.n
            )));
        }
        Ok(())
    }
}

/// Unit-modulus chirp sequence: entry `k` is `exp(j·2π·c·k²)`.
///
/// The quadratic phase is reduced modulo 1 before scaling by 2π, which keeps
/// the entries accurate for arguments far beyond the principal branch.
pub fn chirp_diag(c: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let k2 = (k * k) as f64;
            let phase = TAU * (c * k2).fract();
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Reusable transform plan: FFT twiddles plus the two chirp diagonals.
pub struct DaftPlan {
    params: AfdmParams,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    chirp1: Vec<Complex64>,
    chirp2: Vec<Complex64>,
    scale: f64,
}

impl DaftPlan {
    pub fn new(p: &AfdmParams) -> Result<Self, Error> {
        p.validate()?;
        let mut planner = FftPlanner::new();
        Ok(DaftPlan {
            params: *p,
            fwd: planner.plan_fft_forward(p.n),
            inv: planner.plan_fft_inverse(p.n),
            chirp1: chirp_diag(p.c1, p.n),
            chirp2: chirp_diag(p.c2, p.n),
            scale: 1.0 / (p.n as f64).sqrt(),
        })
    }

    pub fn params(&self) -> &AfdmParams {
        &self.params
    }

    fn check_len(&self, len: usize) -> Result<(), Error> {
        if len != self.params.n {
            return Err(Error::Dimension {
                what: "daft input",
                expected: self.params.n,
                got: len,
            });
        }
        Ok(())
    }

    /// Analysis transform `A·x`: chirp-1 multiply, unitary FFT, chirp-2 multiply.
    pub fn daft(&self, x: &[Complex64]) -> Result<Vec<Complex64>, Error> {
        self.check_len(x.len())?;
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(self.chirp1.iter())
            .map(|(v, c)| v * c)
            .collect();
        self.fwd.process(&mut buf);
        for (v, c) in buf.iter_mut().zip(self.chirp2.iter()) {
            *v = *v * self.scale * c;
        }
        Ok(buf)
    }

    /// Synthesis transform `A^H·x`.
    pub fn idaft(&self, x: &[Complex64]) -> Result<Vec<Complex64>, Error> {
        self.check_len(x.len())?;
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(self.chirp2.iter())
            .map(|(v, c)| v * c.conj())
            .collect();
        self.inv.process(&mut buf);
        for (v, c) in buf.iter_mut().zip(self.chirp1.iter()) {
            *v = *v * self.scale * c.conj();
        }
        Ok(buf)
    }
}

/// One-shot analysis transform. Hot loops should hold a [`DaftPlan`].
pub fn daft(x: &[Complex64], p: &AfdmParams) -> Result<Vec<Complex64>, Error> {
    DaftPlan::new(p)?.daft(x)
}

/// One-shot synthesis transform (adjoint of [`daft`]).
pub fn idaft(x: &[Complex64], p: &AfdmParams) -> Result<Vec<Complex64>, Error> {
    DaftPlan::new(p)?.idaft(x)
}

/// Dense analysis matrix, entry `(m, k) = exp(j2πc2m²)·exp(-j2πmk/n)/√n·exp(j2πc1k²)`.
///
/// Sizes above [`DENSE_LIMIT`] are refused; the fast path has no such cap.
pub fn daft_matrix(p: &AfdmParams) -> Result<CMat, Error> {
    p.validate()?;
    if p.n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            n: p.n,
            limit: DENSE_LIMIT,
        });
    }
    let n = p.n;
    let chirp1 = chirp_diag(p.c1, n);
    let chirp2 = chirp_diag(p.c2, n);
    let scale = 1.0 / (n as f64).sqrt();
    // DFT twiddles from the exact residue m·k mod n.
    let twiddle: Vec<Complex64> = (0..n)
        .map(|r| {
            let phase = -TAU * (r as f64) / (n as f64);
            Complex64::new(phase.cos(), phase.sin()) * scale
        })
        .collect();
    let mut a = CMat::zeros((n, n));
    for m in 0..n {
        for k in 0..n {
            a[[m, k]] = chirp2[m] * twiddle[(m * k) % n] * chirp1[k];
        }
    }
    Ok(a)
}
