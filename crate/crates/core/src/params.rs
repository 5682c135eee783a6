//! Parameter design rules for pilot-aided AFDM over doubly-selective channels.
//!
//! Everything here is a pure function of the channel bounds (`l_max`, `k_max`,
//! optional fractional-Doppler widening `xi`) and the frame size `n`:
//!
//! * the smallest chirp rate `c1` that separates every delay-Doppler cell,
//! * the second chirp rate `c2` (any fixed value well below `1/(2n²)` works;
//!   a deterministic choice keeps runs reproducible),
//! * the one-sided guard count `Q` around the pilot,
//! * the chirp-periodic prefix length,
//! * the orthogonality condition under which all of the above is valid,
//! * the per-waveform diagonal-shift map and its inverse.

use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Worst-case channel geometry the frame must be designed for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBounds {
    /// Maximum normalized delay in samples.
    pub l_max: usize,
    /// Maximum normalized Doppler magnitude in bins.
    pub k_max: usize,
    /// Extra guard bins per side for off-grid Doppler; 0 keeps the integer
    /// grid. Widens c1, Q, and the shift map but never the estimator's path
    /// grid.
    #[serde(default)]
    pub xi: usize,
}

impl ChannelBounds {
    pub fn new(l_max: usize, k_max: usize, xi: usize) -> Self {
        ChannelBounds { l_max, k_max, xi }
    }

    /// Doppler half-width the design guards against, `k_max + xi`.
    pub fn guarded_doppler(&self) -> usize {
        self.k_max + self.xi
    }

    /// Number of delay-Doppler cells a path can occupy.
    pub fn grid_cells(&self) -> usize {
        (self.l_max + 1) * (2 * self.k_max + 1)
    }
}

/// The three chirp-rate presets. OFDM and OCDM are the degenerate corners of
/// the AFDM family; AFDM gets its rates from the design rules below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Ofdm,
    Ocdm,
    Afdm,
}

impl std::fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WaveformKind::Ofdm => "ofdm",
            WaveformKind::Ocdm => "ocdm",
            WaveformKind::Afdm => "afdm",
        })
    }
}

/// Smallest c1 giving every (delay, Doppler) cell its own diagonal:
/// `(2(k_max + xi) + 1) / (2n)`. The library always uses this bound with
/// equality; larger values only waste guard symbols.
pub fn min_c1(b: &ChannelBounds, n: usize) -> f64 {
    (2 * b.guarded_doppler() + 1) as f64 / (2 * n) as f64
}

/// Deterministic second chirp rate `1/(2πn²)`, strictly below the `1/(2n²)`
/// ceiling that keeps the per-symbol phases from aliasing.
pub fn default_c2(n: usize) -> f64 {
    1.0 / (2.0 * std::f64::consts::PI * (n * n) as f64)
}

/// One-sided guard count: smallest integer `Q ≥ 2n·c1·(l_max+1) − 1`,
/// clamped at zero. With the canonical c1 this is
/// `(2(k_max+xi)+1)(l_max+1) − 1` exactly.
pub fn guard_count(n: usize, c1: f64, l_max: usize) -> Result<usize, Error> {
    if c1 < 0.0 || !c1.is_finite() {
        return Err(Error::domain(format!("c1 = {c1} must be finite and ≥ 0")));
    }
    let bound = 2.0 * n as f64 * c1 * (l_max + 1) as f64 - 1.0;
    // Absorb rounding noise when the bound is (mathematically) an integer.
    let q = (bound - 1e-9).ceil();
    if q <= 0.0 {
        Ok(0)
    } else {
        Ok(q as usize)
    }
}

/// True iff the frame is long enough for the shift map to be injective:
/// `2(k_max+xi)(l_max+1) + l_max ≤ n`.
pub fn check_orthogonality(b: &ChannelBounds, n: usize) -> bool {
    2 * b.guarded_doppler() * (b.l_max + 1) + b.l_max <= n
}

/// Signed diagonal displacement of a `(l, k)` path in the transform domain.
///
/// OFDM moves by the Doppler alone, OCDM by `l + k`, AFDM by
/// `l·(2·k_max + 1) + k`. `k_max` here is the Doppler half-width baked into
/// c1; designs widened for off-grid Doppler pass `k_max + xi`. A positive
/// value displaces the diagonal rightward (wrapping modulo n happens where
/// the effective matrix is assembled).
pub fn diag_shift(kind: WaveformKind, l: i64, k: i64, k_max: i64) -> Result<i64, Error> {
    if l < 0 {
        return Err(Error::domain(format!("path delay l = {l} must be ≥ 0")));
    }
    if k.abs() > k_max {
        return Err(Error::domain(format!(
            "|k| = {} exceeds k_max = {k_max}; the shift map is not injective out there",
            k.abs()
        )));
    }
    Ok(match kind {
        WaveformKind::Ofdm => k,
        WaveformKind::Ocdm => l + k,
        WaveformKind::Afdm => l * (2 * k_max + 1) + k,
    })
}

/// Invert the AFDM shift map: recover the unique `(l, k)` with
/// `d = l·(2K+1) + k`, `|k| ≤ K`, where `K = k_max + xi`.
///
/// Shifts outside `[−K, l_max·(2K+1) + K]`, or whose Doppler part exceeds
/// the physical `k_max` (possible only when `xi > 0`), name no valid path.
pub fn shift_to_delay_doppler(d: i64, b: &ChannelBounds) -> Result<(usize, i64), Error> {
    let kw = b.guarded_doppler() as i64;
    let m = 2 * kw + 1;
    let top = b.l_max as i64 * m + kw;
    if d < -kw || d > top {
        return Err(Error::NoPath { shift: d });
    }
    let l = (d + kw).div_euclid(m);
    let k = d - l * m;
    if k.abs() > b.k_max as i64 {
        return Err(Error::NoPath { shift: d });
    }
    Ok((l as usize, k))
}

/// Minimal chirp-periodic prefix covering the delay spread, with an optional
/// upward override. Overrides below `l_max` leave inter-frame interference
/// uncancelled and are rejected.
pub fn cpp_length(l_max: usize, override_len: Option<usize>) -> Result<usize, Error> {
    match override_len {
        None => Ok(l_max),
        Some(v) if v >= l_max => Ok(v),
        Some(v) => Err(Error::PrefixTooShort { l_cpp: v, l_max }),
    }
}

/// Transform-domain symbols consumed by one embedded pilot: the pilot itself,
/// Q guards each side, and one trailing guard, `2Q + 2` total.
pub fn pilot_overhead(q: usize) -> usize {
    2 * q + 2
}

/// Guard area of a comparable OTFS embedded pilot,
/// `(2·l_max + 1)·(4·k_max + 1)` delay-Doppler cells. Used only to compare
/// overheads; no OTFS modem exists here.
pub fn otfs_pilot_area(b: &ChannelBounds) -> usize {
    (2 * b.l_max + 1) * (4 * b.k_max + 1)
}

/// Chirp rates for a waveform kind: `(0, 0)` for OFDM, `(1/(2n), 1/(2n))`
/// for OCDM, and the canonical designed pair for AFDM.
pub fn waveform_rates(kind: WaveformKind, b: &ChannelBounds, n: usize) -> (f64, f64) {
    match kind {
        WaveformKind::Ofdm => (0.0, 0.0),
        WaveformKind::Ocdm => {
            let c = 1.0 / (2.0 * n as f64);
            (c, c)
        }
        WaveformKind::Afdm => (min_c1(b, n), default_c2(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_c1_evaluates_the_bound_with_equality() {
        assert_eq!(min_c1(&ChannelBounds::new(2, 1, 0), 32), 3.0 / 64.0);
        assert_eq!(min_c1(&ChannelBounds::new(0, 0, 0), 16), 1.0 / 32.0);
        assert_eq!(min_c1(&ChannelBounds::new(1, 1, 1), 1024), 5.0 / 2048.0);
    }

    #[test]
    fn default_c2_sits_below_the_aliasing_ceiling() {
        for n in [8usize, 32, 256, 1024] {
            let c2 = default_c2(n);
            let ceiling = 1.0 / (2.0 * (n * n) as f64);
            assert!(
                c2 > 0.0 && c2 < ceiling,
                "n={n}: c2 = {c2:.3e} not in (0, {ceiling:.3e})"
            );
        }
    }

    #[test]
    fn guard_count_matches_worked_examples() {
        assert_eq!(guard_count(32, 3.0 / 64.0, 2).unwrap(), 8);
        assert_eq!(guard_count(16, 3.0 / 32.0, 1).unwrap(), 5);
        assert_eq!(guard_count(64, 0.0, 0).unwrap(), 0);
        assert!(guard_count(16, -0.1, 1).is_err());
    }

    #[test]
    fn guard_count_closed_form_holds_across_the_bounds_grid() {
        // With canonical c1 the count must equal (2(k_max+xi)+1)(l_max+1) − 1
        // exactly, including at non-power-of-two n where c1 is not dyadic.
        for n in [48usize, 64] {
            for l_max in 0..=8 {
                for k_max in 0..=4 {
                    for xi in 0..=2 {
                        let b = ChannelBounds::new(l_max, k_max, xi);
                        let q = guard_count(n, min_c1(&b, n), l_max).unwrap();
                        let want = (2 * (k_max + xi) + 1) * (l_max + 1) - 1;
                        assert_eq!(q, want, "n={n} l_max={l_max} k_max={k_max} xi={xi}");
                    }
                }
            }
        }
    }

    #[test]
    fn orthogonality_condition_matches_worked_examples() {
        assert!(check_orthogonality(&ChannelBounds::new(1, 1, 0), 16));
        assert!(check_orthogonality(&ChannelBounds::new(2, 1, 0), 32));
        assert!(!check_orthogonality(&ChannelBounds::new(7, 3, 0), 16));
    }

    #[test]
    fn diag_shift_matches_per_waveform_formulas() {
        assert_eq!(diag_shift(WaveformKind::Afdm, 1, 1, 1).unwrap(), 4);
        assert_eq!(diag_shift(WaveformKind::Ofdm, 1, 1, 1).unwrap(), 1);
        assert_eq!(diag_shift(WaveformKind::Ocdm, 1, 1, 1).unwrap(), 2);
        for kind in [WaveformKind::Ofdm, WaveformKind::Ocdm, WaveformKind::Afdm] {
            assert_eq!(diag_shift(kind, 0, 0, 3).unwrap(), 0);
        }
        assert!(diag_shift(WaveformKind::Afdm, 1, 2, 1).is_err());
        assert!(diag_shift(WaveformKind::Afdm, -1, 0, 1).is_err());
    }

    #[test]
    fn shift_map_inverts_exactly() {
        let b = ChannelBounds::new(2, 1, 0);
        assert_eq!(shift_to_delay_doppler(4, &b).unwrap(), (1, 1));
        assert_eq!(shift_to_delay_doppler(0, &b).unwrap(), (0, 0));
        assert_eq!(shift_to_delay_doppler(-1, &b).unwrap(), (0, -1));
        assert!(matches!(
            shift_to_delay_doppler(-2, &b),
            Err(Error::NoPath { shift: -2 })
        ));
        assert!(shift_to_delay_doppler(8, &b).is_err(), "top of range is 7");
    }

    #[test]
    fn shift_map_round_trips_over_every_cell() {
        for (l_max, k_max, xi) in [(1usize, 1usize, 0usize), (2, 1, 0), (3, 2, 1), (8, 4, 2)] {
            let b = ChannelBounds::new(l_max, k_max, xi);
            let kw = b.guarded_doppler() as i64;
            for l in 0..=l_max as i64 {
                for k in -(k_max as i64)..=k_max as i64 {
                    let d = diag_shift(WaveformKind::Afdm, l, k, kw).unwrap();
                    let (l2, k2) = shift_to_delay_doppler(d, &b).unwrap();
                    assert_eq!((l2 as i64, k2), (l, k), "cell ({l},{k}) via shift {d}");
                }
            }
        }
    }

    #[test]
    fn afdm_shifts_are_distinct_where_ofdm_collides() {
        for (l_max, k_max) in [(1i64, 1i64), (2, 1)] {
            let mut afdm = std::collections::HashSet::new();
            let mut ofdm = std::collections::HashSet::new();
            let mut cells = 0usize;
            for l in 0..=l_max {
                for k in -k_max..=k_max {
                    afdm.insert(diag_shift(WaveformKind::Afdm, l, k, k_max).unwrap());
                    ofdm.insert(diag_shift(WaveformKind::Ofdm, l, k, k_max).unwrap());
                    cells += 1;
                }
            }
            assert_eq!(afdm.len(), cells, "AFDM map must be injective");
            assert!(
                ofdm.len() < cells,
                "OFDM map must collide once delays differ (got {} of {cells})",
                ofdm.len()
            );
        }
    }

    #[test]
    fn cpp_length_covers_delay_spread() {
        assert_eq!(cpp_length(2, None).unwrap(), 2);
        assert_eq!(cpp_length(0, None).unwrap(), 0);
        assert_eq!(cpp_length(1, Some(4)).unwrap(), 4);
        assert!(matches!(
            cpp_length(3, Some(1)),
            Err(Error::PrefixTooShort { l_cpp: 1, l_max: 3 })
        ));
    }

    #[test]
    fn pilot_overhead_beats_otfs_guard_area_for_the_reference_geometry() {
        // Reference scenario: n = 32, three paths, l_max = 2, k_max = 1.
        let b = ChannelBounds::new(2, 1, 0);
        let q = guard_count(32, min_c1(&b, 32), b.l_max).unwrap();
        assert_eq!(pilot_overhead(q), 18);
        assert_eq!(otfs_pilot_area(&b), 25);
        assert!(pilot_overhead(q) < otfs_pilot_area(&b));
    }

    #[test]
    fn waveform_rates_hit_the_known_corners() {
        let b = ChannelBounds::new(1, 1, 0);
        assert_eq!(waveform_rates(WaveformKind::Ofdm, &b, 16), (0.0, 0.0));
        let (c1, c2) = waveform_rates(WaveformKind::Ocdm, &b, 16);
        assert_eq!(c1, 1.0 / 32.0);
        assert_eq!(c2, 1.0 / 32.0);
        let (c1, c2) = waveform_rates(WaveformKind::Afdm, &b, 16);
        assert_eq!(c1, 3.0 / 32.0);
        assert!(c2 < 1.0 / 512.0);
    }
}
