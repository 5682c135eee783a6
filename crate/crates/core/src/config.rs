//! Experiment configuration: a single JSON document with machine-readable
//! rejection codes.
//!
//! SNR fields accept the strings `"inf"` and `"-inf"` alongside plain
//! numbers (JSON has no literal for infinities); serialization emits the same
//! strings back, so configurations round-trip losslessly.

use crate::error::Error;
use crate::modem::{design_frame, pilot_amplitude};
use crate::params::{check_orthogonality, ChannelBounds, WaveformKind};
use serde::{Deserialize, Serialize};

/// Waveforms a configuration may name. This is deliberately wider than
/// [`WaveformKind`]: a kind the simulator does not model still parses, so it
/// can be rejected with an explanation instead of a syntax error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestedWaveform {
    Ofdm,
    Ocdm,
    Afdm,
    Otfs,
}

impl RequestedWaveform {
    pub fn kind(self) -> Result<WaveformKind, Error> {
        match self {
            RequestedWaveform::Ofdm => Ok(WaveformKind::Ofdm),
            RequestedWaveform::Ocdm => Ok(WaveformKind::Ocdm),
            RequestedWaveform::Afdm => Ok(WaveformKind::Afdm),
            RequestedWaveform::Otfs => Err(Error::config(
                "waveform-unsupported",
                "otfs is not modeled by this simulator (its two-dimensional pilot frame is \
                 out of scope); supported waveforms are ofdm, ocdm, afdm",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    /// Detection sees the exact effective channel.
    Perfect,
    /// Detection sees the channel reconstructed from a pilot-only sounding
    /// frame over the same realization.
    Estimated,
}

/// Physical unit scaling; only the bandwidth is free, everything else follows
/// from the frame geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub bandwidth_hz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            bandwidth_hz: crate::sounding::DEFAULT_BANDWIDTH_HZ,
        }
    }
}

fn default_min_bits() -> usize {
    20_000
}

fn default_threshold_mult() -> f64 {
    3.0
}

fn default_f_d_norm() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub waveforms: Vec<RequestedWaveform>,
    pub n: usize,
    pub bounds: ChannelBounds,
    pub p_count: usize,
    /// Per-path mean power fractions; must sum to one.
    pub power_profile: Vec<f64>,
    #[serde(with = "snr_list")]
    pub snr_d_list: Vec<f64>,
    #[serde(with = "snr")]
    pub snr_p: f64,
    pub frames_per_point: usize,
    /// A sweep point may stop early only after collecting this many bits.
    #[serde(default = "default_min_bits")]
    pub min_bits_per_point: usize,
    /// Maximum Doppler of the slow-time gain processes, cycles per frame.
    #[serde(default = "default_f_d_norm")]
    pub f_d_norm: f64,
    pub seed: u64,
    pub csi_mode: CsiMode,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_threshold_mult")]
    pub threshold_mult: f64,
    /// Prefix length override; defaults to the minimal `l_max`.
    #[serde(default)]
    pub cpp_override: Option<usize>,
}

impl ExperimentConfig {
    /// Desk-scale doubly dispersive reference scenario: all three waveforms
    /// over a six-path full-grid channel.
    pub fn default_desk() -> Self {
        ExperimentConfig {
            waveforms: vec![
                RequestedWaveform::Ofdm,
                RequestedWaveform::Ocdm,
                RequestedWaveform::Afdm,
            ],
            n: 256,
            bounds: ChannelBounds::new(1, 1, 0),
            p_count: 6,
            power_profile: vec![1.0 / 6.0; 6],
            snr_d_list: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            snr_p: 35.0,
            frames_per_point: 2000,
            min_bits_per_point: default_min_bits(),
            f_d_norm: default_f_d_norm(),
            seed: 1,
            csi_mode: CsiMode::Perfect,
            grid: GridConfig::default(),
            threshold_mult: default_threshold_mult(),
            cpp_override: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::config("config-parse", format!("invalid config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self)
            .expect("config serialization cannot fail on plain data");
        text.push('\n');
        text
    }

    /// Resolved waveform kinds in configuration order. Unsupported kinds
    /// (otfs) surface here as config rejections.
    pub fn kinds(&self) -> Result<Vec<WaveformKind>, Error> {
        self.waveforms.iter().map(|w| w.kind()).collect()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.waveforms.is_empty() {
            return Err(Error::config(
                "waveforms-empty",
                "at least one waveform is required",
            ));
        }
        let kinds = self.kinds()?;
        if self.n < 2 {
            return Err(Error::config(
                "frame-size-invalid",
                format!("frame size {} is below the minimum of 2", self.n),
            ));
        }
        let cells = self.bounds.grid_cells();
        if self.p_count == 0 || self.p_count > cells {
            return Err(Error::config(
                "paths-infeasible",
                format!(
                    "{} paths cannot occupy the {} distinct delay-Doppler cells of bounds {:?}",
                    self.p_count, cells, self.bounds
                ),
            ));
        }
        if self.power_profile.len() != self.p_count {
            return Err(Error::config(
                "power-profile-length",
                format!(
                    "power profile has {} entries for {} paths",
                    self.power_profile.len(),
                    self.p_count
                ),
            ));
        }
        if self
            .power_profile
            .iter()
            .any(|w| !w.is_finite() || *w <= 0.0)
        {
            return Err(Error::config(
                "power-profile-invalid",
                "power profile entries must be finite and positive",
            ));
        }
        let total: f64 = self.power_profile.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::config(
                "power-profile-unnormalized",
                format!("power profile sums to {total}, expected 1"),
            ));
        }
        if self.snr_d_list.is_empty() {
            return Err(Error::config("snr-list-empty", "snr_d_list is empty"));
        }
        if self.snr_d_list.iter().any(|v| v.is_nan()) || self.snr_p.is_nan() {
            return Err(Error::config("snr-invalid", "SNR values must not be NaN"));
        }
        if self.snr_d_list.contains(&f64::NEG_INFINITY) {
            return Err(Error::config(
                "snr-invalid",
                "SNRd = -inf would mean infinite noise; use a finite value",
            ));
        }
        for &snr_d in &self.snr_d_list {
            if let Err(e) = pilot_amplitude(self.snr_p, snr_d) {
                return Err(Error::config(
                    "snr-pilot-incompatible",
                    format!("SNRp = {} dB with SNRd = {snr_d} dB: {e}", self.snr_p),
                ));
            }
        }
        if self.frames_per_point == 0 {
            return Err(Error::config(
                "frames-invalid",
                "frames_per_point must be ≥ 1",
            ));
        }
        if self.f_d_norm.is_nan() {
            return Err(Error::config("doppler-invalid", "f_d_norm must not be NaN"));
        }
        if !(self.threshold_mult > 0.0) || !self.threshold_mult.is_finite() {
            return Err(Error::config(
                "threshold-invalid",
                format!(
                    "threshold multiplier {} must be positive and finite",
                    self.threshold_mult
                ),
            ));
        }
        if !(self.grid.bandwidth_hz > 0.0) || !self.grid.bandwidth_hz.is_finite() {
            return Err(Error::config(
                "grid-invalid",
                format!(
                    "bandwidth {} Hz must be positive and finite",
                    self.grid.bandwidth_hz
                ),
            ));
        }
        for kind in &kinds {
            if *kind == WaveformKind::Afdm && !check_orthogonality(&self.bounds, self.n) {
                return Err(Error::config(
                    "orthogonality-violated",
                    format!(
                        "afdm cannot separate a (l_max = {}, k_max = {}, xi = {}) channel at \
                         N = {}: 2(k_max + xi)(l_max + 1) + l_max exceeds N",
                        self.bounds.l_max, self.bounds.k_max, self.bounds.xi, self.n
                    ),
                ));
            }
            design_frame(self.n, *kind, &self.bounds, self.cpp_override).map_err(|e| {
                Error::config(
                    "frame-design-infeasible",
                    format!("{kind} frame design failed: {e}"),
                )
            })?;
        }
        if self.csi_mode == CsiMode::Estimated && kinds.iter().any(|k| *k != WaveformKind::Afdm) {
            return Err(Error::config(
                "csi-estimated-unsupported",
                "estimated CSI needs the guard structure only afdm provides; \
                 run ofdm/ocdm sweeps under perfect CSI",
            ));
        }
        if self.csi_mode == CsiMode::Estimated && self.snr_p == f64::NEG_INFINITY {
            return Err(Error::config(
                "csi-estimated-unsupported",
                "estimated CSI needs a pilot; snr_p = -inf leaves nothing to estimate from",
            ));
        }
        Ok(())
    }
}

/// `f64` as JSON number, with `"inf"` / `"-inf"` strings for the sentinels.
mod snr {
    use serde::de::{self, Unexpected};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct SnrVisitor;

    impl de::Visitor<'_> for SnrVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number, \"inf\", or \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(E::invalid_value(Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(SnrVisitor)
    }
}

/// `Vec<f64>` elementwise under the [`snr`] encoding.
mod snr_list {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Item(#[serde(with = "super::snr")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&Item(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Item>::deserialize(d)?
            .into_iter()
            .map(|i| i.0)
            .collect())
    }
}
