//! Experiment drivers behind the CLI: Monte-Carlo BER sweeps, sounding
//! campaigns over slowly fading channels, frame design reports, and the
//! deterministic CSV/JSON writers for their outputs.
//!
//! Every random draw is seeded through [`derive_seed`], so a configuration
//! (seed included) pins the entire experiment bit for bit. Channel, noise,
//! payload bits, probe noise, and fading tracks each get their own stream;
//! redrawing one never shifts the others.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{
    apply_waveform, awgn_in_place, jakes_gains, noise_variance, sample_channel,
    time_channel_matrix, ChannelPath, ChannelRealization, GainProcess,
};
use crate::config::{CsiMode, ExperimentConfig};
use crate::effective::{effective_channel, TemplateBank};
use crate::error::Error;
use crate::estimator::{estimate_paths, EstimatedPath, EstimationReport};
use crate::linalg::CMat;
use crate::modem::{
    build_frame, demap_qpsk, demodulate, design_frame, lmmse_detect, modulate, pilot_amplitude,
    random_bits, FrameLayout,
};
use crate::params::{self, ChannelBounds, WaveformKind};
use crate::sounding::{
    accumulate, dps, pdp, rms_delay_spread, rms_doppler_spread, PhysicalGrid, SoundingAccumulator,
    SoundingReport,
};
use crate::transforms::DaftPlan;
use crate::Complex64;

/// Stream labels for [`derive_seed`], one per independent randomness source.
pub mod streams {
    /// Path geometry and gains of a frame's channel draw.
    pub const CHANNEL: u64 = 1;
    /// Receiver noise on the data frame.
    pub const NOISE: u64 = 2;
    /// Payload bits.
    pub const BITS: u64 = 3;
    /// Receiver noise on the pilot-only probe frame.
    pub const SOUND_NOISE: u64 = 4;
    /// Slow-time fading tracks.
    pub const JAKES: u64 = 5;
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Folds `(lane, point, frame, stream)` into the base seed with the
/// splitmix64 finalizer, so every coordinate change lands on an unrelated
/// generator seed.
pub fn derive_seed(base: u64, lane: u64, point: u64, frame: u64, stream: u64) -> u64 {
    let mut h = mix(base ^ 0x9e3779b97f4a7c15);
    for w in [lane, point, frame, stream] {
        h = mix(h ^ w.wrapping_add(0x9e3779b97f4a7c15));
    }
    h
}

/// Two-sided 95% Wilson score interval for a binomial proportion, clamped to
/// `[0, 1]`. `trials = 0` returns the vacuous `(0, 1)`.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959963984540054;
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One sweep point of one waveform.
#[derive(Clone, Debug, Serialize)]
pub struct BerRow {
    pub waveform: WaveformKind,
    pub snr_db: f64,
    pub ber: f64,
    /// 95% Wilson interval on the error rate.
    pub ci_low: f64,
    pub ci_high: f64,
    /// RMS error vector magnitude of the detected symbols, percent.
    pub evm_percent: f64,
    pub frames: usize,
    pub bits: usize,
    pub bit_errors: usize,
}

/// Runs the configured BER sweep: for each waveform and data SNR, Monte-Carlo
/// frames over independent channel draws until either `frames_per_point`
/// frames are spent or the Wilson half-width has shrunk below `ber / 5`
/// (checked only once `min_bits_per_point` bits are in).
///
/// Under perfect CSI the detector is handed the exact effective channel of
/// the frame's draw. Under estimated CSI (AFDM only) each frame is preceded
/// by a pilot-only probe over the same channel and noise level; paths are
/// detected on the probe, their gains refined with the data frame's own
/// embedded pilot, and the detector sees only the reconstructed channel.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRow>, Error> {
    cfg.validate()?;
    let kinds = cfg.kinds()?;
    let mut rows = Vec::new();

    for (wi, &kind) in kinds.iter().enumerate() {
        let (p, layout) = design_frame(cfg.n, kind, &cfg.bounds, cfg.cpp_override)?;
        let plan = DaftPlan::new(&p)?;
        let bank = TemplateBank::new(&p, &cfg.bounds, layout.pilot_index, kind)?;
        let probe_layout = FrameLayout::pilot_only(cfg.n, layout.pilot_index)?;
        let mut h_frame = CMat::zeros((cfg.n, cfg.n));

        for (si, &snr_d) in cfg.snr_d_list.iter().enumerate() {
            let noise_var = noise_variance(snr_d, 1.0)?;
            let rho = pilot_amplitude(cfg.snr_p, snr_d)?;
            let pilot_value = Complex64::new(rho, 0.0);

            let mut bit_errors = 0usize;
            let mut bits_total = 0usize;
            let mut evm_err = 0.0f64;
            let mut evm_ref = 0.0f64;
            let mut frames_used = 0usize;

            for f in 0..cfg.frames_per_point {
                let seed = |stream| derive_seed(cfg.seed, wi as u64, si as u64, f as u64, stream);
                let ch = sample_channel(
                    cfg.p_count,
                    cfg.bounds,
                    &cfg.power_profile,
                    seed(streams::CHANNEL),
                )?;

                let mut bits_rng = ChaCha8Rng::seed_from_u64(seed(streams::BITS));
                let bits = random_bits(layout.bits_per_frame(), &mut bits_rng);
                let frame = build_frame(&bits, &layout, rho)?;
                let tx = modulate(&frame, &plan)?;
                let mut rx = apply_waveform(&tx, &ch, &p)?;
                let mut noise_rng = ChaCha8Rng::seed_from_u64(seed(streams::NOISE));
                awgn_in_place(&mut rx, noise_var, &mut noise_rng);
                let y = demodulate(&rx, &plan)?;

                match cfg.csi_mode {
                    CsiMode::Perfect => bank.assemble_into(&ch.paths, &mut h_frame)?,
                    CsiMode::Estimated => {
                        let probe = build_frame(&[], &probe_layout, rho)?;
                        let ptx = modulate(&probe, &plan)?;
                        let mut prx = apply_waveform(&ptx, &ch, &p)?;
                        let mut probe_rng = ChaCha8Rng::seed_from_u64(seed(streams::SOUND_NOISE));
                        awgn_in_place(&mut prx, noise_var, &mut probe_rng);
                        let py = demodulate(&prx, &plan)?;
                        let report = estimate_paths(
                            &py,
                            &probe_layout,
                            &bank,
                            cfg.threshold_mult,
                            pilot_value,
                        )?;
                        // Each detected cell is read twice: off the probe
                        // and off the data frame's own embedded pilot. The
                        // candidate bins carry no data images (the guard
                        // zone is sized so data leakage cannot reach them),
                        // so averaging halves the gain-noise power handed to
                        // the detector.
                        let estimated: Vec<ChannelPath> = report
                            .paths
                            .iter()
                            .map(|e| {
                                let t = bank
                                    .get(e.l, e.k)
                                    .expect("detected cells come from the bank");
                                let data_read = y[t.index] / (pilot_value * t.pilot_entry);
                                ChannelPath {
                                    l: e.l,
                                    k: e.k,
                                    gain: 0.5 * (e.gain + data_read),
                                }
                            })
                            .collect();
                        bank.assemble_into(&estimated, &mut h_frame)?;
                    }
                }

                let det = lmmse_detect(&y, &h_frame, noise_var, &layout, pilot_value)?;
                let rx_bits = demap_qpsk(&det.symbols);
                bit_errors += bits
                    .iter()
                    .zip(&rx_bits)
                    .filter(|(want, got)| want != got)
                    .count();
                bits_total += bits.len();
                for (est, &di) in det.symbols.iter().zip(&layout.data_indices) {
                    let reference = frame.daft_symbols[di];
                    evm_err += (est - reference).norm_sqr();
                    evm_ref += reference.norm_sqr();
                }
                frames_used += 1;

                if bits_total >= cfg.min_bits_per_point && bit_errors > 0 {
                    let ber = bit_errors as f64 / bits_total as f64;
                    let (lo, hi) = wilson_interval(bit_errors, bits_total);
                    if (hi - lo) / 2.0 < ber / 5.0 {
                        break;
                    }
                }
            }

            let ber = if bits_total == 0 {
                0.0
            } else {
                bit_errors as f64 / bits_total as f64
            };
            let (ci_low, ci_high) = wilson_interval(bit_errors, bits_total);
            let evm_percent = if evm_ref > 0.0 {
                100.0 * (evm_err / evm_ref).sqrt()
            } else {
                0.0
            };
            rows.push(BerRow {
                waveform: kind,
                snr_db: snr_d,
                ber,
                ci_low,
                ci_high,
                evm_percent,
                frames: frames_used,
                bits: bits_total,
                bit_errors,
            });
        }
    }
    Ok(rows)
}

/// Output of a sounding campaign: the profiles recovered from the estimated
/// gain tracks next to the same pipeline run on the true fading tracks.
#[derive(Clone, Debug, Serialize)]
pub struct SoundingRun {
    pub n: usize,
    pub bounds: ChannelBounds,
    pub grid: PhysicalGrid,
    pub frame_count: usize,
    /// Frames whose probe produced at least one detected path.
    pub detected_frames: usize,
    /// Set when the estimated tracks carry no usable energy (for example an
    /// absent pilot), in which case `estimated` is `None`.
    pub insufficient_detections: bool,
    pub estimated: Option<SoundingReport>,
    pub ground_truth: SoundingReport,
}

fn report_from(acc: &SoundingAccumulator, grid: &PhysicalGrid) -> Result<SoundingReport, Error> {
    let pdp_v = pdp(acc, grid)?;
    let dps_v = dps(acc, grid)?;
    let rms_delay = rms_delay_spread(&pdp_v)?;
    let rms_doppler = rms_doppler_spread(&dps_v)?;
    Ok(SoundingReport {
        pdp: pdp_v,
        dps: dps_v,
        rms_delay_spread_s: rms_delay,
        rms_doppler_spread_hz: rms_doppler,
        frame_count: acc.frame_count,
    })
}

/// Runs a sounding campaign: one fixed path geometry, per-path Jakes fading
/// across `frames_per_point` frames, a pilot-only probe per frame, and the
/// delay/Doppler profiles accumulated from the per-frame estimates.
///
/// The data SNR (first entry of `snr_d_list`) sets the noise floor and, with
/// `snr_p`, the pilot amplitude. The ground-truth block feeds the true fading
/// tracks through the identical accumulation pipeline, so estimator error is
/// the only difference between the two reports.
pub fn run_sounding(cfg: &ExperimentConfig) -> Result<SoundingRun, Error> {
    cfg.validate()?;
    let kinds = cfg.kinds()?;
    if !kinds.contains(&WaveformKind::Afdm) {
        return Err(Error::config(
            "sounding-needs-afdm",
            "a sounding campaign reads the delay-Doppler grid off the guard zone, \
             which only afdm provides; add afdm to the waveform list",
        ));
    }
    if !(cfg.f_d_norm > 0.0 && cfg.f_d_norm < 0.5) {
        return Err(Error::config(
            "doppler-invalid",
            format!(
                "sounding needs a maximum Doppler in (0, 0.5) cycles per frame, got {}",
                cfg.f_d_norm
            ),
        ));
    }
    let frames = cfg.frames_per_point;
    if frames < 64 {
        return Err(Error::config(
            "frames-invalid",
            format!("a Doppler spectrum needs at least 64 frames, got {frames}"),
        ));
    }

    let kind = WaveformKind::Afdm;
    let (p, layout) = design_frame(cfg.n, kind, &cfg.bounds, cfg.cpp_override)?;
    let plan = DaftPlan::new(&p)?;
    let bank = TemplateBank::new(&p, &cfg.bounds, layout.pilot_index, kind)?;
    let probe_layout = FrameLayout::pilot_only(cfg.n, layout.pilot_index)?;
    let grid = PhysicalGrid::new(cfg.grid.bandwidth_hz, cfg.n, p.l_cpp)?;

    let snr_d = cfg.snr_d_list[0];
    let noise_var = noise_variance(snr_d, 1.0)?;
    let rho = pilot_amplitude(cfg.snr_p, snr_d)?;
    let pilot_value = Complex64::new(rho, 0.0);

    // One geometry for the whole campaign; only the gains evolve. The draw's
    // own gains are discarded in favor of the per-path fading tracks.
    let geometry = sample_channel(
        cfg.p_count,
        cfg.bounds,
        &cfg.power_profile,
        derive_seed(cfg.seed, 0, 0, 0, streams::CHANNEL),
    )?;
    let tracks: Vec<GainProcess> = (0..geometry.paths.len())
        .map(|i| {
            jakes_gains(
                cfg.f_d_norm,
                frames,
                cfg.power_profile[i],
                derive_seed(cfg.seed, i as u64, 0, 0, streams::JAKES),
            )
        })
        .collect::<Result<_, _>>()?;

    let probe = build_frame(&[], &probe_layout, rho)?;
    let probe_tx = modulate(&probe, &plan)?;

    let mut estimated_reports = Vec::with_capacity(frames);
    let mut truth_reports = Vec::with_capacity(frames);
    for f in 0..frames {
        let paths: Vec<ChannelPath> = geometry
            .paths
            .iter()
            .zip(&tracks)
            .map(|(cell, track)| ChannelPath {
                l: cell.l,
                k: cell.k,
                gain: track.samples[f],
            })
            .collect();
        truth_reports.push(EstimationReport {
            paths: paths
                .iter()
                .map(|cp| EstimatedPath {
                    l: cp.l,
                    k: cp.k,
                    gain: cp.gain,
                    peak_magnitude: cp.gain.norm(),
                    index: bank.get(cp.l, cp.k).map(|t| t.index).unwrap_or(0),
                })
                .collect(),
            bounds: cfg.bounds,
            noise_floor: 0.0,
            threshold: 0.0,
            degenerate_noise: false,
            reconstructed: None,
        });

        let ch = ChannelRealization {
            paths,
            bounds: cfg.bounds,
            seed: geometry.seed,
        };
        let mut prx = apply_waveform(&probe_tx, &ch, &p)?;
        let mut probe_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, 0, f as u64, streams::SOUND_NOISE));
        awgn_in_place(&mut prx, noise_var, &mut probe_rng);
        let py = demodulate(&prx, &plan)?;
        estimated_reports.push(estimate_paths(
            &py,
            &probe_layout,
            &bank,
            cfg.threshold_mult,
            pilot_value,
        )?);
    }

    let detected_frames = estimated_reports
        .iter()
        .filter(|r| !r.paths.is_empty())
        .count();
    let truth_acc = accumulate(&truth_reports)?;
    let ground_truth = report_from(&truth_acc, &grid)?;
    let estimated_acc = accumulate(&estimated_reports)?;
    let estimated = report_from(&estimated_acc, &grid).ok();
    let insufficient_detections = detected_frames == 0 || estimated.is_none();

    Ok(SoundingRun {
        n: cfg.n,
        bounds: cfg.bounds,
        grid,
        frame_count: frames,
        detected_frames,
        insufficient_detections,
        estimated,
        ground_truth,
    })
}

/// One delay-Doppler cell and the cyclic diagonal it lands on.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShiftEntry {
    pub l: usize,
    pub k: i64,
    pub shift: i64,
}

/// Frame design numbers for one waveform at a given size and channel bound.
#[derive(Clone, Debug, Serialize)]
pub struct WaveformDesign {
    pub waveform: WaveformKind,
    pub c1: f64,
    pub c2: f64,
    pub guard_q: usize,
    pub l_cpp: usize,
    pub pilot_index: usize,
    /// `n - 2q - 1`; negative when the guard zone swallows the frame.
    pub data_symbols: i64,
    /// Whether every channel cell maps to its own diagonal shift.
    pub separable: bool,
    /// Fraction of the frame spent on the pilot zone, `(2q + 1) / n`.
    pub guard_zone_fraction: f64,
    pub pilot_overhead_symbols: usize,
    pub shift_table: Vec<ShiftEntry>,
    pub distinct_shifts: usize,
}

/// Design report across the three waveform kinds, plus the guard area a
/// comparable two-dimensional embedded pilot would cost.
#[derive(Clone, Debug, Serialize)]
pub struct DesignReport {
    pub n: usize,
    pub bounds: ChannelBounds,
    pub otfs_pilot_area: usize,
    pub waveforms: Vec<WaveformDesign>,
}

/// Computes chirp rates, guard counts, overheads, and the full cell-to-shift
/// table for each waveform kind. Infeasible geometries are reported as-is
/// (negative `data_symbols`), not rejected.
pub fn run_design(
    n: usize,
    bounds: &ChannelBounds,
    cpp_override: Option<usize>,
) -> Result<DesignReport, Error> {
    if n < 2 {
        return Err(Error::config(
            "frame-size-invalid",
            format!("frame size {n} is too small to carry a pilot"),
        ));
    }
    let kw = bounds.guarded_doppler() as i64;
    let cells = bounds.grid_cells();
    let mut waveforms = Vec::new();
    for kind in [WaveformKind::Ofdm, WaveformKind::Ocdm, WaveformKind::Afdm] {
        let (c1, c2) = params::waveform_rates(kind, bounds, n);
        let q = params::guard_count(n, c1, bounds.l_max)?;
        let l_cpp = params::cpp_length(bounds.l_max, cpp_override)?;
        let mut shift_table = Vec::with_capacity(cells);
        for l in 0..=bounds.l_max {
            for k in -(bounds.k_max as i64)..=(bounds.k_max as i64) {
                shift_table.push(ShiftEntry {
                    l,
                    k,
                    shift: params::diag_shift(kind, l as i64, k, kw)?,
                });
            }
        }
        let distinct_shifts = shift_table
            .iter()
            .map(|e| e.shift)
            .collect::<BTreeSet<_>>()
            .len();
        let separable = distinct_shifts == cells
            && (kind != WaveformKind::Afdm || params::check_orthogonality(bounds, n));
        waveforms.push(WaveformDesign {
            waveform: kind,
            c1,
            c2,
            guard_q: q,
            l_cpp,
            pilot_index: q,
            data_symbols: n as i64 - 2 * q as i64 - 1,
            separable,
            guard_zone_fraction: (2 * q + 1) as f64 / n as f64,
            pilot_overhead_symbols: params::pilot_overhead(q),
            shift_table,
            distinct_shifts,
        });
    }
    Ok(DesignReport {
        n,
        bounds: *bounds,
        otfs_pilot_area: params::otfs_pilot_area(bounds),
        waveforms,
    })
}

/// One sparse entry of a demodulated-domain channel dump: `(row, col, |entry|)`.
pub type MagnitudeEntry = (usize, usize, f64);

/// Magnitudes of one drawn channel's demodulated-domain matrix, for CSV
/// dumps, keeping every entry above `1e-12` of the peak.
pub fn effective_channel_rows(
    cfg: &ExperimentConfig,
) -> Result<(WaveformKind, Vec<MagnitudeEntry>), Error> {
    cfg.validate()?;
    let kind = cfg.kinds()?[0];
    let (p, _) = design_frame(cfg.n, kind, &cfg.bounds, cfg.cpp_override)?;
    let ch = sample_channel(
        cfg.p_count,
        cfg.bounds,
        &cfg.power_profile,
        derive_seed(cfg.seed, 0, 0, 0, streams::CHANNEL),
    )?;
    let h = time_channel_matrix(&ch, &p)?;
    let eff = effective_channel(&h, &p, cfg.bounds)?;
    let peak = eff.matrix.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let floor = 1e-12 * peak;
    let mut rows = Vec::new();
    for r in 0..cfg.n {
        for c in 0..cfg.n {
            let mag = eff.matrix[[r, c]].norm();
            if mag > floor {
                rows.push((r, c, mag));
            }
        }
    }
    Ok((kind, rows))
}

/// `ber.csv` body. Floats print as Rust's shortest round-trip form, which is
/// deterministic across runs and platforms.
pub fn ber_csv(rows: &[BerRow]) -> String {
    let mut s =
        String::from("waveform,snr_db,ber,ci_low,ci_high,evm_percent,frames,bits,bit_errors\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.waveform,
            r.snr_db,
            r.ber,
            r.ci_low,
            r.ci_high,
            r.evm_percent,
            r.frames,
            r.bits,
            r.bit_errors
        ));
    }
    s
}

/// `pdp.csv` body: delay in seconds against normalized power.
pub fn pdp_csv(report: &SoundingReport) -> String {
    let mut s = String::from("delay_s,power\n");
    for e in &report.pdp {
        s.push_str(&format!("{},{}\n", e.delay_s, e.power));
    }
    s
}

/// `dps.csv` body: Doppler in Hz against normalized power, ascending.
pub fn dps_csv(report: &SoundingReport) -> String {
    let mut s = String::from("doppler_hz,power\n");
    for e in &report.dps {
        s.push_str(&format!("{},{}\n", e.doppler_hz, e.power));
    }
    s
}

/// `heff.csv` body for [`effective_channel_rows`].
pub fn heff_csv(rows: &[MagnitudeEntry]) -> String {
    let mut s = String::from("row,col,magnitude\n");
    for (r, c, mag) in rows {
        s.push_str(&format!("{r},{c},{mag}\n"));
    }
    s
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::config::RequestedWaveform;

    fn close(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol,
            "{what}: {a:.17e} vs {b:.17e} (tol {tol:.1e})"
        );
    }

    #[test]
    fn wilson_interval_matches_frozen_values() {
        let (lo, hi) = wilson_interval(5, 100);
        close(lo, 2.15436791543679590e-02, 1e-16, "wilson(5,100) low");
        close(hi, 1.11750469231919128e-01, 1e-15, "wilson(5,100) high");

        let (lo, hi) = wilson_interval(0, 200);
        assert!(
            (0.0..1e-17).contains(&lo),
            "wilson(0,200) low should vanish, got {lo:.3e}"
        );
        close(hi, 1.88453263772665747e-02, 1e-16, "wilson(0,200) high");

        let (lo, hi) = wilson_interval(123, 200_000);
        close(lo, 5.15518307080429193e-04, 1e-17, "wilson(123,2e5) low");
        close(hi, 7.33664993591996197e-04, 1e-17, "wilson(123,2e5) high");

        let (lo, hi) = wilson_interval(1, 3);
        close(lo, 6.14919447203962077e-02, 1e-15, "wilson(1,3) low");
        close(hi, 7.92340399197952183e-01, 1e-14, "wilson(1,3) high");

        assert_eq!(wilson_interval(0, 0), (0.0, 1.0), "no trials, no knowledge");
        let (lo, hi) = wilson_interval(7, 7);
        assert!(hi <= 1.0 && lo > 0.5, "all-errors interval hugs one");
    }

    #[test]
    fn derived_seeds_separate_every_coordinate() {
        let base = derive_seed(1, 2, 3, 4, 5);
        assert_eq!(base, derive_seed(1, 2, 3, 4, 5), "must be a pure function");
        for (changed, name) in [
            (derive_seed(9, 2, 3, 4, 5), "base"),
            (derive_seed(1, 9, 3, 4, 5), "lane"),
            (derive_seed(1, 2, 9, 4, 5), "point"),
            (derive_seed(1, 2, 3, 9, 5), "frame"),
            (derive_seed(1, 2, 3, 4, 9), "stream"),
        ] {
            assert_ne!(base, changed, "changing {name} must move the seed");
        }
    }

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_desk();
        cfg.n = 32;
        cfg.p_count = 2;
        cfg.power_profile = vec![0.6, 0.4];
        cfg.snr_d_list = vec![f64::INFINITY];
        cfg.snr_p = f64::INFINITY;
        cfg.frames_per_point = 5;
        cfg
    }

    #[test]
    fn noiseless_sweep_is_error_free_for_all_kinds() {
        let cfg = tiny_config();
        let rows = run_ber_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3, "one row per waveform per sweep point");
        for row in &rows {
            assert_eq!(
                row.bit_errors, 0,
                "{} must be exact without noise, got {} errors in {} bits",
                row.waveform, row.bit_errors, row.bits
            );
            assert_eq!(row.frames, 5, "no early stop without errors");
            assert!(
                row.evm_percent < 1e-6,
                "{} noiseless EVM {}% should be numerical dust",
                row.waveform,
                row.evm_percent
            );
        }
        let (afdm, ofdm) = (rows[2].bits, rows[0].bits);
        assert!(
            afdm < ofdm,
            "the guard zone must cost afdm payload: {afdm} vs {ofdm} bits"
        );
    }

    #[test]
    fn noiseless_estimated_csi_matches_perfect_csi() {
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Afdm];
        cfg.csi_mode = CsiMode::Estimated;
        let rows = run_ber_sweep(&cfg).unwrap();
        assert_eq!(rows[0].bit_errors, 0, "noiseless probes estimate exactly");
        assert!(rows[0].evm_percent < 1e-6, "evm {}%", rows[0].evm_percent);
    }

    #[test]
    fn sweeps_are_reproducible_bit_for_bit() {
        let mut cfg = tiny_config();
        cfg.snr_d_list = vec![10.0];
        cfg.snr_p = 35.0;
        let a = ber_csv(&run_ber_sweep(&cfg).unwrap());
        let b = ber_csv(&run_ber_sweep(&cfg).unwrap());
        assert_eq!(a, b, "same config, same bytes");
        cfg.seed += 1;
        let c = ber_csv(&run_ber_sweep(&cfg).unwrap());
        assert_ne!(a, c, "a different seed must change the draw");
    }

    #[test]
    fn design_report_covers_the_three_kinds() {
        let report = run_design(32, &ChannelBounds::new(2, 1, 0), None).unwrap();
        assert_eq!(report.otfs_pilot_area, 25, "(2·2+1)·(4·1+1)");
        let by_kind = |k: WaveformKind| {
            report
                .waveforms
                .iter()
                .find(|w| w.waveform == k)
                .expect("every kind present")
        };
        let afdm = by_kind(WaveformKind::Afdm);
        close(afdm.c1, 3.0 / 64.0, 1e-18, "canonical chirp rate");
        assert_eq!(afdm.guard_q, 8, "guard count at n=32, bounds (2,1)");
        assert_eq!(afdm.data_symbols, 15, "32 - 2·8 - 1");
        assert_eq!(afdm.pilot_overhead_symbols, 18);
        assert_eq!(afdm.distinct_shifts, 9, "every cell separable");
        assert!(afdm.separable);
        let ofdm = by_kind(WaveformKind::Ofdm);
        assert_eq!(ofdm.guard_q, 0, "no chirp, no spread guard");
        assert_eq!(
            ofdm.distinct_shifts, 3,
            "delay is invisible on the ofdm diagonal map"
        );
        assert!(!ofdm.separable);
        let ocdm = by_kind(WaveformKind::Ocdm);
        assert_eq!(ocdm.distinct_shifts, 5, "l+k folds nine cells onto five");
        assert!(!ocdm.separable);
        for w in &report.waveforms {
            assert_eq!(w.shift_table.len(), 9, "full table for {}", w.waveform);
        }
    }

    #[test]
    fn sounding_campaign_recovers_the_geometry() {
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Afdm];
        cfg.snr_d_list = vec![20.0];
        cfg.snr_p = 35.0;
        cfg.frames_per_point = 64;
        cfg.f_d_norm = 0.05;
        let run = run_sounding(&cfg).unwrap();
        assert_eq!(run.frame_count, 64);
        assert!(
            run.detected_frames >= 48,
            "a 35 dB pilot should detect most frames, got {}",
            run.detected_frames
        );
        assert!(!run.insufficient_detections);
        let est = run.estimated.as_ref().expect("estimated report");
        assert!(!est.pdp.is_empty());
        let truth_delays: Vec<f64> = run.ground_truth.pdp.iter().map(|e| e.delay_s).collect();
        for e in &est.pdp {
            assert!(
                truth_delays.contains(&e.delay_s),
                "estimated delay {} s not in the true geometry {truth_delays:?}",
                e.delay_s
            );
        }
    }

    #[test]
    fn absent_pilot_flags_insufficient_detections() {
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Afdm];
        cfg.snr_d_list = vec![20.0];
        cfg.snr_p = f64::NEG_INFINITY;
        cfg.frames_per_point = 64;
        let run = run_sounding(&cfg).unwrap();
        assert_eq!(run.detected_frames, 0, "nothing to detect without a pilot");
        assert!(run.insufficient_detections);
        assert!(run.estimated.is_none());
        assert!(
            !run.ground_truth.pdp.is_empty(),
            "ground truth does not depend on the pilot"
        );
    }

    #[test]
    fn sounding_rejects_bad_campaign_shapes() {
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Ofdm];
        assert_eq!(
            run_sounding(&cfg).unwrap_err().config_code(),
            Some("sounding-needs-afdm")
        );
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Afdm];
        cfg.frames_per_point = 63;
        assert_eq!(
            run_sounding(&cfg).unwrap_err().config_code(),
            Some("frames-invalid")
        );
        let mut cfg = tiny_config();
        cfg.waveforms = vec![RequestedWaveform::Afdm];
        cfg.frames_per_point = 64;
        cfg.f_d_norm = 0.5;
        assert_eq!(
            run_sounding(&cfg).unwrap_err().config_code(),
            Some("doppler-invalid")
        );
    }

    #[test]
    fn effective_channel_dump_is_sparse_and_bounded() {
        let cfg = tiny_config();
        let (kind, rows) = effective_channel_rows(&cfg).unwrap();
        assert_eq!(kind, WaveformKind::Ofdm, "first configured waveform");
        assert!(!rows.is_empty());
        assert!(
            rows.len() <= cfg.p_count * cfg.n,
            "at most one diagonal per path: {} entries",
            rows.len()
        );
        for &(r, c, mag) in &rows {
            assert!(r < cfg.n && c < cfg.n);
            assert!(mag > 0.0);
        }
        let csv = heff_csv(&rows);
        assert!(csv.starts_with("row,col,magnitude\n"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }
}
