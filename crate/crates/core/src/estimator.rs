//! Threshold-based pilot-aided channel estimation in the transform domain,
//! effective-channel reconstruction from the estimated paths, and the NMSE
//! metric.
//!
//! A path at delay-Doppler cell `(l, k)` moves pilot energy to one known bin
//! per cell, so estimation reduces to reading the candidate bins: a bin whose
//! magnitude clears `threshold_mult · σ̂` declares its cell a path, and the
//! complex gain falls out of dividing by the pilot's template response. The
//! noise level σ̂ comes from the bins that are neither data carriers nor
//! candidates; on a pilot-only sounding frame that is the whole rest of the
//! frame, on a data-bearing frame only the guard bins around the pilot (which
//! also catch wrapped data images from shifted paths, so σ̂ is conservative
//! there).

use crate::channel::ChannelPath;
use crate::effective::{EffectiveChannel, TemplateBank};
use crate::error::Error;
use crate::linalg::CMat;
use crate::modem::FrameLayout;
use crate::params::ChannelBounds;
use crate::transforms::AfdmParams;
use crate::Complex64;
use serde::Serialize;

/// Magnitudes within this factor of the strongest candidate still count as
/// numerically zero when the frame carries no measurable noise.
const DUST_REL: f64 = 1e-9;

/// One detected path.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatedPath {
    pub l: usize,
    pub k: i64,
    pub gain: Complex64,
    /// `|y|` at the candidate bin that triggered the detection.
    pub peak_magnitude: f64,
    /// The candidate bin itself.
    pub index: usize,
}

/// Outcome of one estimation pass.
#[derive(Clone, Debug)]
pub struct EstimationReport {
    /// Detected paths in ascending `(l, k)` order.
    pub paths: Vec<EstimatedPath>,
    /// Grid the candidate cells were drawn from; downstream aggregation uses
    /// it to refuse mixing reports from different configurations.
    pub bounds: ChannelBounds,
    /// σ̂, root mean square of the noise-reference bins.
    pub noise_floor: f64,
    /// Detection threshold actually applied.
    pub threshold: f64,
    /// Set when σ̂ vanished while candidates held energy; the threshold is
    /// then a relative dust floor instead of a noise multiple.
    pub degenerate_noise: bool,
    /// Filled by the caller when the estimate is turned into a matrix.
    pub reconstructed: Option<EffectiveChannel>,
}

/// Scans the candidate bins of `y` (one per delay-Doppler cell in the bank)
/// and declares paths where the magnitude exceeds `threshold_mult · σ̂`.
///
/// `pilot_value` is the transmitted pilot symbol; gains are read as
/// `y[bin] / (pilot_value · pilot_entry)`. A zero pilot yields an empty
/// report, since no peak can be attributed to a path without pilot energy.
/// For waveform kinds whose shift map collides (plain OFDM and OCDM under
/// doubly dispersive bounds), every cell consistent with a hot bin is
/// reported; the ambiguity is inherent to those kinds.
pub fn estimate_paths(
    y: &[Complex64],
    layout: &FrameLayout,
    bank: &TemplateBank,
    threshold_mult: f64,
    pilot_value: Complex64,
) -> Result<EstimationReport, Error> {
    let n = bank.n;
    if y.len() != n {
        return Err(Error::Dimension {
            what: "demodulated frame",
            expected: n,
            got: y.len(),
        });
    }
    if layout.n != n || layout.pilot_index != bank.pilot_index {
        return Err(Error::domain(format!(
            "frame layout (n = {}, pilot {}) does not match the template bank (n = {}, pilot {})",
            layout.n, layout.pilot_index, n, bank.pilot_index
        )));
    }
    if !(threshold_mult > 0.0) || !threshold_mult.is_finite() {
        return Err(Error::domain(format!(
            "threshold multiplier {threshold_mult} must be positive and finite"
        )));
    }
    let mut is_candidate = vec![false; n];
    for t in bank.templates() {
        is_candidate[t.index] = true;
    }
    let mut is_data = vec![false; n];
    for &i in &layout.data_indices {
        is_data[i] = true;
    }
    let noise_bins: Vec<usize> = (0..n)
        .filter(|&i| !is_candidate[i] && !is_data[i])
        .collect();
    if noise_bins.is_empty() {
        return Err(Error::InsufficientData {
            what: "noise-reference bins outside data and candidates",
            needed: 1,
            got: 0,
        });
    }
    let noise_floor =
        (noise_bins.iter().map(|&i| y[i].norm_sqr()).sum::<f64>() / noise_bins.len() as f64).sqrt();

    let max_peak = bank
        .templates()
        .iter()
        .map(|t| y[t.index].norm())
        .fold(0.0f64, f64::max);
    let dust = DUST_REL * max_peak;
    let raw = threshold_mult * noise_floor;
    let (threshold, degenerate_noise) = if raw < dust {
        (dust, true)
    } else {
        (raw, false)
    };

    // Without a pilot there is nothing to attribute a peak to: every gain
    // readout divides by the pilot, so the report stays empty.
    let mut paths = Vec::new();
    if pilot_value.norm() > 0.0 {
        for t in bank.templates() {
            let peak = y[t.index].norm();
            if peak > threshold {
                paths.push(EstimatedPath {
                    l: t.l,
                    k: t.k,
                    gain: y[t.index] / (pilot_value * t.pilot_entry),
                    peak_magnitude: peak,
                    index: t.index,
                });
            }
        }
    }
    paths.sort_by_key(|p| (p.l, p.k));
    Ok(EstimationReport {
        paths,
        bounds: bank.bounds,
        noise_floor,
        threshold,
        degenerate_noise,
        reconstructed: None,
    })
}

/// Sums the unit-gain template of every estimated path, scaled by its gain.
/// Duplicate `(l, k)` entries accumulate, which matches how coinciding paths
/// superpose physically.
pub fn reconstruct_heff(
    paths: &[EstimatedPath],
    bank: &TemplateBank,
    p: &AfdmParams,
) -> Result<EffectiveChannel, Error> {
    if p.n != bank.n {
        return Err(Error::Dimension {
            what: "template bank frame size",
            expected: p.n,
            got: bank.n,
        });
    }
    let as_channel: Vec<ChannelPath> = paths
        .iter()
        .map(|e| ChannelPath {
            l: e.l,
            k: e.k,
            gain: e.gain,
        })
        .collect();
    let matrix = bank.assemble(&as_channel)?;
    Ok(EffectiveChannel {
        matrix,
        params: *p,
        bounds: bank.bounds,
    })
}

/// Normalized mean square error `‖estimate − reference‖_F² / ‖reference‖_F²`.
pub fn nmse(reference: &CMat, estimate: &CMat) -> Result<f64, Error> {
    if reference.dim() != estimate.dim() {
        return Err(Error::Dimension {
            what: "estimate matrix rows",
            expected: reference.nrows(),
            got: estimate.nrows(),
        });
    }
    let ref_energy: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if ref_energy == 0.0 {
        return Err(Error::domain("NMSE against a zero reference is undefined"));
    }
    let err_energy: f64 = reference
        .iter()
        .zip(estimate.iter())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum();
    Ok(err_energy / ref_energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        apply_waveform, awgn_in_place, sample_channel, time_channel_matrix, ChannelRealization,
    };
    use crate::effective::effective_channel;
    use crate::linalg::frobenius_diff;
    use crate::modem::{build_frame, demodulate, design_frame, modulate, random_bits};
    use crate::params::{ChannelBounds, WaveformKind};
    use crate::transforms::DaftPlan;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        p: AfdmParams,
        comm: FrameLayout,
        sounding: FrameLayout,
        plan: DaftPlan,
        bank: TemplateBank,
        bounds: ChannelBounds,
    }

    fn afdm_setup(n: usize, bounds: ChannelBounds) -> Setup {
        let (p, comm) = design_frame(n, WaveformKind::Afdm, &bounds, None).unwrap();
        let sounding = FrameLayout::pilot_only(n, comm.pilot_index).unwrap();
        let plan = DaftPlan::new(&p).unwrap();
        let bank = TemplateBank::new(&p, &bounds, comm.pilot_index, WaveformKind::Afdm).unwrap();
        Setup {
            p,
            comm,
            sounding,
            plan,
            bank,
            bounds,
        }
    }

    fn sound_once(
        s: &Setup,
        ch: &ChannelRealization,
        rho: f64,
        noise_var: f64,
        seed: u64,
    ) -> EstimationReport {
        let frame = build_frame(&[], &s.sounding, rho).unwrap();
        let tx = modulate(&frame, &s.plan).unwrap();
        let mut rx = apply_waveform(&tx, ch, &s.p).unwrap();
        if noise_var > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            awgn_in_place(&mut rx, noise_var, &mut rng);
        }
        let y = demodulate(&rx, &s.plan).unwrap();
        estimate_paths(&y, &s.sounding, &s.bank, 3.0, Complex64::new(rho, 0.0)).unwrap()
    }

    #[test]
    fn noiseless_single_path_is_recovered_exactly() {
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        let gain = Complex64::new(0.0, 0.7);
        let ch = ChannelRealization {
            paths: vec![ChannelPath { l: 1, k: 1, gain }],
            bounds: s.bounds,
            seed: 0,
        };
        let rep = sound_once(&s, &ch, 3.0, 0.0, 0);
        assert_eq!(rep.paths.len(), 1, "exactly one path expected");
        assert_eq!((rep.paths[0].l, rep.paths[0].k), (1, 1));
        assert!(
            (rep.paths[0].gain - gain).norm() < 1e-9,
            "gain error {:.2e}",
            (rep.paths[0].gain - gain).norm()
        );
        assert!(rep.degenerate_noise, "noiseless frame must be flagged");
        assert!(rep.threshold > rep.noise_floor);
    }

    #[test]
    fn noiseless_recovery_also_works_on_a_data_bearing_frame() {
        // Candidate bins stay free of data images by the guard design, so the
        // gains stay exact even though σ̂ then reads wrapped data energy.
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        let gain = Complex64::new(0.0, 0.7);
        let ch = ChannelRealization {
            paths: vec![ChannelPath { l: 1, k: 1, gain }],
            bounds: s.bounds,
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rho = 3.0;
        let frame = build_frame(
            &random_bits(s.comm.bits_per_frame(), &mut rng),
            &s.comm,
            rho,
        )
        .unwrap();
        let tx = modulate(&frame, &s.plan).unwrap();
        let y = demodulate(&apply_waveform(&tx, &ch, &s.p).unwrap(), &s.plan).unwrap();
        let rep = estimate_paths(&y, &s.comm, &s.bank, 3.0, Complex64::new(rho, 0.0)).unwrap();
        assert!(
            rep.noise_floor > 0.1,
            "guard bins must see the wrapped data images, got σ̂ = {}",
            rep.noise_floor
        );
        assert_eq!(rep.paths.len(), 1);
        assert_eq!((rep.paths[0].l, rep.paths[0].k), (1, 1));
        assert!((rep.paths[0].gain - gain).norm() < 1e-9);
    }

    #[test]
    fn every_grid_cell_is_recovered_from_its_own_sounding_frame() {
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        for l in 0..=2usize {
            for k in -1i64..=1 {
                let gain = Complex64::from_polar(0.55, 0.3 * (l as f64) - 0.9 * (k as f64));
                let ch = ChannelRealization {
                    paths: vec![ChannelPath { l, k, gain }],
                    bounds: s.bounds,
                    seed: 0,
                };
                let rep = sound_once(&s, &ch, 5.0, 0.0, 0);
                assert_eq!(rep.paths.len(), 1, "cell ({l},{k})");
                assert_eq!((rep.paths[0].l, rep.paths[0].k), (l, k));
                assert!(
                    (rep.paths[0].gain - gain).norm() < 1e-9,
                    "cell ({l},{k}) gain error {:.2e}",
                    (rep.paths[0].gain - gain).norm()
                );
            }
        }
    }

    #[test]
    fn multipath_channels_are_recovered_and_reconstructed() {
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        for seed in 0..20 {
            let ch = sample_channel(3, s.bounds, &[0.5, 0.3, 0.2], seed).unwrap();
            let rep = sound_once(&s, &ch, 4.0, 0.0, 0);
            assert_eq!(rep.paths.len(), 3, "seed {seed}: all three paths");
            let mut truth: Vec<(usize, i64, Complex64)> =
                ch.paths.iter().map(|p| (p.l, p.k, p.gain)).collect();
            truth.sort_by_key(|t| (t.0, t.1));
            for (est, (l, k, g)) in rep.paths.iter().zip(truth.iter()) {
                assert_eq!((est.l, est.k), (*l, *k), "seed {seed}");
                assert!((est.gain - g).norm() < 1e-9, "seed {seed}");
            }
            let rec = reconstruct_heff(&rep.paths, &s.bank, &s.p).unwrap();
            let truth_e =
                effective_channel(&time_channel_matrix(&ch, &s.p).unwrap(), &s.p, s.bounds)
                    .unwrap();
            assert!(
                frobenius_diff(&rec.matrix, &truth_e.matrix) < 1e-9,
                "seed {seed}: reconstruction must match the true effective channel"
            );
            assert!(nmse(&truth_e.matrix, &rec.matrix).unwrap() < 1e-18);
        }
    }

    #[test]
    fn detection_rate_improves_with_pilot_snr_and_is_high_at_35db() {
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        let noise_var = 1.0;
        let mut rates = Vec::new();
        for &snr_p in &[15.0f64, 25.0, 35.0] {
            let rho = 10f64.powf(snr_p / 20.0);
            let frames = 400;
            let mut hits = 0usize;
            let mut total = 0usize;
            for f in 0..frames {
                let ch = sample_channel(3, s.bounds, &[1.0 / 3.0; 3], 900 + f).unwrap();
                let rep = sound_once(&s, &ch, rho, noise_var, 5000 + f);
                for p in &ch.paths {
                    total += 1;
                    if rep.paths.iter().any(|e| e.l == p.l && e.k == p.k) {
                        hits += 1;
                    }
                }
                assert!(!rep.degenerate_noise, "noisy frames are not degenerate");
            }
            rates.push(hits as f64 / total as f64);
        }
        assert!(
            rates.windows(2).all(|w| w[0] <= w[1] + 1e-9),
            "detection must not degrade with pilot SNR: {rates:?}"
        );
        assert!(
            rates[2] > 0.97,
            "per-path detection at 35 dB should exceed 97%, got {}",
            rates[2]
        );
    }

    #[test]
    fn empty_channels_stay_empty_under_the_three_sigma_rule() {
        let s = afdm_setup(32, ChannelBounds::new(2, 1, 0));
        let frames = 1000;
        let mut false_alarms = 0usize;
        for f in 0..frames {
            // Zero channel: the received frame is pure noise.
            let mut y = vec![Complex64::new(0.0, 0.0); 32];
            let mut rng = ChaCha8Rng::seed_from_u64(40_000 + f);
            awgn_in_place(&mut y, 1.0, &mut rng);
            let rep =
                estimate_paths(&y, &s.sounding, &s.bank, 3.0, Complex64::new(56.2, 0.0)).unwrap();
            if !rep.paths.is_empty() {
                false_alarms += 1;
            }
        }
        let rate = false_alarms as f64 / frames as f64;
        assert!(rate < 0.02, "false-alarm frame rate {rate} out of control");
    }

    #[test]
    fn nmse_matches_hand_values() {
        let a = CMat::from_shape_fn((4, 4), |(r, c)| {
            Complex64::new((r + 1) as f64, c as f64 - 1.5)
        });
        assert_eq!(nmse(&a, &a).unwrap(), 0.0);
        let zero = CMat::zeros((4, 4));
        assert!((nmse(&a, &zero).unwrap() - 1.0).abs() < 1e-15);
        let scaled = a.mapv(|v| v * 1.1);
        assert!(
            (nmse(&a, &scaled).unwrap() - 0.01).abs() < 1e-12,
            "10% amplitude error is NMSE 0.01"
        );
        assert!(nmse(&zero, &a).is_err(), "zero reference");
        assert!(nmse(&a, &CMat::zeros((3, 3))).is_err(), "shape mismatch");
    }

    #[test]
    fn layouts_without_noise_bins_are_rejected() {
        // Plain OFDM has no guards (q = 0) and its only zone bin is the
        // pilot, which is itself a candidate.
        let bounds = ChannelBounds::new(1, 1, 0);
        let (p, layout) = design_frame(16, WaveformKind::Ofdm, &bounds, None).unwrap();
        let bank = TemplateBank::new(&p, &bounds, layout.pilot_index, WaveformKind::Ofdm).unwrap();
        let y = vec![Complex64::new(0.1, 0.0); 16];
        match estimate_paths(&y, &layout, &bank, 3.0, Complex64::new(1.0, 0.0)) {
            Err(Error::InsufficientData { .. }) => {}
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn argument_validation() {
        let s = afdm_setup(16, ChannelBounds::new(1, 1, 0));
        let y = vec![Complex64::new(0.0, 0.0); 15];
        assert!(matches!(
            estimate_paths(&y, &s.sounding, &s.bank, 3.0, Complex64::new(1.0, 0.0)),
            Err(Error::Dimension { .. })
        ));
        let y = vec![Complex64::new(0.0, 0.0); 16];
        assert!(
            estimate_paths(&y, &s.sounding, &s.bank, 0.0, Complex64::new(1.0, 0.0)).is_err(),
            "zero threshold multiplier"
        );
        let report =
            estimate_paths(&y, &s.sounding, &s.bank, 3.0, Complex64::new(0.0, 0.0)).unwrap();
        assert!(
            report.paths.is_empty(),
            "a zero pilot cannot attribute peaks to paths, got {}",
            report.paths.len()
        );
        let other_layout = FrameLayout::pilot_only(16, 0).unwrap();
        assert!(
            estimate_paths(&y, &other_layout, &s.bank, 3.0, Complex64::new(1.0, 0.0)).is_err(),
            "pilot index mismatch with the bank"
        );
    }
}
