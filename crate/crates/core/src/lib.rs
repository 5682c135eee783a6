//! Chirp-carrier multicarrier simulation with integrated channel sounding.
//!
//! The crate models an AFDM link (affine frequency division multiplexing):
//! data symbols live in the discrete affine Fourier domain, each subcarrier is
//! a linear chirp, and a doubly selective channel (delay plus Doppler) becomes
//! a sparse set of cyclic diagonals after demodulation. With the chirp rate
//! chosen against the channel's delay-Doppler extent, every propagation path
//! lands on its own diagonal, so a single embedded pilot reads the full
//! delay-Doppler profile off one frame while the remaining subcarriers carry
//! data. Plain OFDM and OCDM fall out as special cases of the chirp rates.
//!
//! Module map:
//!
//! * [`transforms`]: the forward/inverse discrete affine Fourier transform
//!   (DAFT), fast FFT-based path and dense matrix form.
//! * [`params`]: chirp-rate design rules, guard counts, the delay-Doppler to
//!   diagonal-shift maps, and the orthogonality condition.
//! * [`channel`]: integer-grid doubly selective channels, Jakes fading for
//!   slow-time evolution, AWGN.
//! * [`effective`]: the demodulated (DAFT-domain) channel matrix, single-path
//!   templates, diagonal support analysis.
//! * [`modem`]: QPSK frames with an embedded pilot, chirp-periodic prefix
//!   handling, LMMSE detection, BER/EVM metrics.
//! * [`estimator`]: threshold-based embedded-pilot path estimation and
//!   channel reconstruction.
//! * [`sounding`]: power delay profile, Doppler power spectrum, RMS spreads,
//!   and the physical unit grid.
//! * [`config`] / [`runner`]: experiment configuration, validation with
//!   machine-readable reason codes, and the BER sweep / sounding campaign
//!   drivers behind the `afdm` binary.

// Validators guard with `!(x > 0.0)` so NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod effective;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod modem;
pub mod params;
pub mod runner;
pub mod sounding;
pub mod transforms;

pub use error::Error;

/// Convenience alias used throughout: double-precision complex samples.
pub type Complex64 = num_complex::Complex<f64>;
