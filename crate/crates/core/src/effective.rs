//! Equivalent channel in the transform domain.
//!
//! `H_eff = A·H·A^H` relates transmitted to received symbol vectors:
//! `y = H_eff·x + w`. Its value is structural: with the canonical chirp rate
//! and integer delay/Doppler, every path occupies exactly one cyclic diagonal
//! at the offset given by [`crate::params::diag_shift`], which is what makes
//! pilot-based path separation possible. This module builds `H_eff`, extracts
//! its diagonal support, and precomputes unit-gain per-path templates so hot
//! loops can assemble `H_eff = Σ gain_p · T_p` by linearity instead of
//! re-deriving it from a dense time-domain matrix each frame.

use crate::channel::{time_channel_matrix, ChannelPath, ChannelRealization};
use crate::error::Error;
use crate::linalg::CMat;
use crate::params::{diag_shift, ChannelBounds, WaveformKind};
use crate::transforms::{AfdmParams, DaftPlan, DENSE_LIMIT};
use crate::Complex64;
use std::collections::HashMap;

/// Transform-domain channel matrix together with the parameterization that
/// produced it.
#[derive(Clone, Debug)]
pub struct EffectiveChannel {
    pub matrix: CMat,
    pub params: AfdmParams,
    pub bounds: ChannelBounds,
}

impl EffectiveChannel {
    pub fn n(&self) -> usize {
        self.params.n
    }
}

/// Conjugates `A·H·A^H` out of a time-domain channel matrix using the fast
/// transform on columns and rows (`O(n² log n)`, no dense transform matrix).
pub fn effective_channel(
    h: &CMat,
    p: &AfdmParams,
    bounds: ChannelBounds,
) -> Result<EffectiveChannel, Error> {
    p.validate()?;
    let n = p.n;
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::Dimension {
            what: "time-domain channel matrix",
            expected: n,
            got: if h.nrows() != n { h.nrows() } else { h.ncols() },
        });
    }
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            n,
            limit: DENSE_LIMIT,
        });
    }
    let plan = DaftPlan::new(p)?;
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];

    // B = A·H, transforming one column at a time.
    let mut b = CMat::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            scratch[i] = h[[i, j]];
        }
        let y = plan.daft(&scratch)?;
        for i in 0..n {
            b[[i, j]] = y[i];
        }
    }
    // E = B·A^H, row i of E being conj(A·conj(row i of B)).
    let mut e = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            scratch[j] = b[[i, j]].conj();
        }
        let y = plan.daft(&scratch)?;
        for j in 0..n {
            e[[i, j]] = y[j].conj();
        }
    }
    Ok(EffectiveChannel {
        matrix: e,
        params: *p,
        bounds,
    })
}

/// Cyclic diagonal offsets carrying significant energy, as signed shifts in
/// `(-n/2, n/2]`, ascending. An entry at `(r, c)` sits on offset
/// `(r - c) mod n`; an offset is reported when its largest entry magnitude
/// exceeds `tol` times the largest magnitude in the whole matrix.
pub fn diagonal_support(e: &EffectiveChannel, tol: f64) -> Result<Vec<i64>, Error> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "support tolerance {tol} must be > 0"
        )));
    }
    let n = e.n();
    let mut peak = vec![0.0f64; n];
    let mut global: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let m = e.matrix[[r, c]].norm();
            let o = (r + n - c) % n;
            if m > peak[o] {
                peak[o] = m;
            }
            if m > global {
                global = m;
            }
        }
    }
    let half = n as i64 / 2;
    let mut out: Vec<i64> = (0..n)
        .filter(|&o| peak[o] > tol * global)
        .map(|o| {
            let o = o as i64;
            if o <= half {
                o
            } else {
                o - n as i64
            }
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn unit_path_effective(
    l: usize,
    k: i64,
    p: &AfdmParams,
    bounds: &ChannelBounds,
) -> Result<EffectiveChannel, Error> {
    if l > bounds.l_max || k.unsigned_abs() as usize > bounds.k_max {
        return Err(Error::domain(format!(
            "template cell (l={l}, k={k}) outside bounds (l_max={}, k_max={})",
            bounds.l_max, bounds.k_max
        )));
    }
    let ch = ChannelRealization {
        paths: vec![ChannelPath {
            l,
            k,
            gain: Complex64::new(1.0, 0.0),
        }],
        bounds: *bounds,
        seed: 0,
    };
    effective_channel(&time_channel_matrix(&ch, p)?, p, *bounds)
}

/// Pilot-column response of a unit-gain `(l, k)` path: the vector a pilot at
/// `pilot_index` excites when that single path is the whole channel.
pub fn single_path_template(
    l: usize,
    k: i64,
    p: &AfdmParams,
    bounds: &ChannelBounds,
    pilot_index: usize,
) -> Result<Vec<Complex64>, Error> {
    if pilot_index >= p.n {
        return Err(Error::domain(format!(
            "pilot index {pilot_index} outside frame of size {}",
            p.n
        )));
    }
    let e = unit_path_effective(l, k, p, bounds)?;
    Ok((0..p.n).map(|r| e.matrix[[r, pilot_index]]).collect())
}

/// Unit-gain effective matrix of one delay-Doppler cell, with its measured
/// pilot response peak.
pub struct PathTemplate {
    pub l: usize,
    pub k: i64,
    /// Signed diagonal offset predicted by the shift map for the bank's kind.
    pub shift: i64,
    /// Row of the pilot column's largest entry, `(pilot + shift) mod n` for
    /// canonical AFDM.
    pub index: usize,
    /// Value of that entry; the gain readout divisor.
    pub pilot_entry: Complex64,
    pub matrix: CMat,
}

/// Every unit-gain single-path effective matrix on the bounded delay-Doppler
/// grid, built once and reused across frames.
pub struct TemplateBank {
    pub n: usize,
    pub pilot_index: usize,
    pub bounds: ChannelBounds,
    pub kind: WaveformKind,
    templates: Vec<PathTemplate>,
    by_cell: HashMap<(usize, i64), usize>,
}

impl TemplateBank {
    pub fn new(
        p: &AfdmParams,
        bounds: &ChannelBounds,
        pilot_index: usize,
        kind: WaveformKind,
    ) -> Result<Self, Error> {
        if pilot_index >= p.n {
            return Err(Error::domain(format!(
                "pilot index {pilot_index} outside frame of size {}",
                p.n
            )));
        }
        let guarded = bounds.guarded_doppler() as i64;
        let mut templates = Vec::with_capacity(bounds.grid_cells());
        let mut by_cell = HashMap::new();
        for l in 0..=bounds.l_max {
            for k in -(bounds.k_max as i64)..=bounds.k_max as i64 {
                let e = unit_path_effective(l, k, p, bounds)?;
                let shift = diag_shift(kind, l as i64, k, guarded)?;
                let (index, pilot_entry) = (0..p.n)
                    .map(|r| (r, e.matrix[[r, pilot_index]]))
                    .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                    .expect("frame size is ≥ 2, the column cannot be empty");
                by_cell.insert((l, k), templates.len());
                templates.push(PathTemplate {
                    l,
                    k,
                    shift,
                    index,
                    pilot_entry,
                    matrix: e.matrix,
                });
            }
        }
        Ok(TemplateBank {
            n: p.n,
            pilot_index,
            bounds: *bounds,
            kind,
            templates,
            by_cell,
        })
    }

    pub fn get(&self, l: usize, k: i64) -> Option<&PathTemplate> {
        self.by_cell.get(&(l, k)).map(|&i| &self.templates[i])
    }

    pub fn templates(&self) -> &[PathTemplate] {
        &self.templates
    }

    /// `Σ gain_p · T_(l_p, k_p)` accumulated into `out` (overwritten).
    pub fn assemble_into(&self, paths: &[ChannelPath], out: &mut CMat) -> Result<(), Error> {
        if out.nrows() != self.n || out.ncols() != self.n {
            return Err(Error::Dimension {
                what: "assembled effective channel",
                expected: self.n,
                got: out.nrows(),
            });
        }
        out.fill(Complex64::new(0.0, 0.0));
        for path in paths {
            let t = self.get(path.l, path.k).ok_or_else(|| {
                Error::domain(format!(
                    "path cell (l={}, k={}) not covered by the template bank",
                    path.l, path.k
                ))
            })?;
            out.zip_mut_with(&t.matrix, |o, &m| *o += path.gain * m);
        }
        Ok(())
    }

    /// Allocating convenience form of [`TemplateBank::assemble_into`].
    pub fn assemble(&self, paths: &[ChannelPath]) -> Result<CMat, Error> {
        let mut out = CMat::zeros((self.n, self.n));
        self.assemble_into(paths, &mut out)?;
        Ok(out)
    }
}
