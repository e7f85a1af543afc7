//! Normalized cross-correlation from a coincidence histogram.

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::error::{ensure, Error, Result};

/// Classical upper bound on g²_si for thermal marginals (g_ss = g_ii = 2).
pub const THERMAL_CAUCHY_SCHWARZ_BOUND: f64 = 2.0;

/// Coincidence counts per delay bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    /// Bin width [s].
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Total integration time [s].
    pub integration_time: f64,
    /// Index of the zero-delay bin.
    pub center_bin: usize,
}

impl CoincidenceHistogram {
    pub fn validate(&self) -> Result<()> {
        ensure(self.bin_width > 0.0, || format!("bin width must be positive, got {}", self.bin_width))?;
        ensure(self.integration_time > 0.0, || {
            format!("integration time must be positive, got {}", self.integration_time)
        })?;
        ensure(self.center_bin < self.counts.len(), || {
            format!("center bin {} outside histogram of {} bins", self.center_bin, self.counts.len())
        })
    }

    /// Builds a histogram from `(delay_s, counts)` rows with uniform spacing;
    /// the zero-delay bin is the one closest to delay 0.
    pub fn from_delays(rows: &[(f64, u64)], integration_time: f64) -> Result<Self> {
        ensure(rows.len() >= 2, || "histogram needs at least two bins".to_string())?;
        let width = rows[1].0 - rows[0].0;
        ensure(width > 0.0, || "delays must increase".to_string())?;
        for (i, w) in rows.windows(2).enumerate() {
            let d = w[1].0 - w[0].0;
            ensure((d - width).abs() <= 1e-6 * width, || {
                format!("row {}: non-uniform bin spacing {d:e} (expected {width:e})", i + 2)
            })?;
        }
        let center_bin = rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.abs().total_cmp(&b.1 .0.abs()))
            .map(|(i, _)| i)
            .expect("non-empty");
        let h = CoincidenceHistogram {
            bin_width: width,
            counts: rows.iter().map(|r| r.1).collect(),
            integration_time,
            center_bin,
        };
        h.validate()?;
        Ok(h)
    }

    /// Index of the most populated bin.
    pub fn peak_bin(&self) -> usize {
        self.counts
            .iter()
            .enumerate()
            .max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Windows used by [`g2_normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Windows {
    /// Bins `center ± peak_half_width` form the peak window.
    pub peak_half_width: usize,
    /// Bins within `center ± exclusion_half_width` never count as background.
    pub exclusion_half_width: usize,
    /// Extra `(offset, half_width)` regions, in bins relative to the center,
    /// excluded from the background (e.g. electronic-reflection sidelobes).
    #[serde(default)]
    pub sidelobe_mask: Vec<(i64, usize)>,
}

impl Default for G2Windows {
    fn default() -> Self {
        G2Windows {
            peak_half_width: 0,
            exclusion_half_width: 10,
            sidelobe_mask: Vec::new(),
        }
    }
}

/// Peak g² with Poisson uncertainty, plus the estimated accidental level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    pub g2: Estimate,
    /// Mean background counts per bin.
    pub accidentals_per_bin: f64,
    pub background_bins: usize,
    pub peak_bins: usize,
}

/// `g² = (peak sum / peak bins) / (mean background per bin)`.
pub fn g2_normalize(hist: &CoincidenceHistogram, windows: &G2Windows) -> Result<G2Result> {
    hist.validate()?;
    let c = hist.center_bin as i64;
    let n = hist.counts.len() as i64;
    let excluded = |i: i64| {
        let d = i - c;
        d.unsigned_abs() as usize <= windows.exclusion_half_width
            || windows
                .sidelobe_mask
                .iter()
                .any(|&(off, hw)| (d - off).unsigned_abs() as usize <= hw)
    };
    let (mut bg_sum, mut bg_bins) = (0u64, 0usize);
    for i in 0..n {
        if !excluded(i) {
            bg_sum += hist.counts[i as usize];
            bg_bins += 1;
        }
    }
    let required = (10 * windows.exclusion_half_width).max(1);
    ensure(bg_bins >= required, || {
        format!("only {bg_bins} background bins outside the exclusion zone, need {required}")
    })?;
    ensure(bg_sum > 0, || "zero accidental level: cannot normalize".to_string())?;

    let hw = windows.peak_half_width as i64;
    let lo = (c - hw).max(0);
    let hi = (c + hw).min(n - 1);
    let peak_sum: u64 = hist.counts[lo as usize..=hi as usize].iter().sum();
    let peak_bins = (hi - lo + 1) as usize;

    let accidentals = bg_sum as f64 / bg_bins as f64;
    let g2 = (peak_sum as f64 / peak_bins as f64) / accidentals;
    // relative Poisson errors of the two sums add in quadrature
    let rel = if peak_sum > 0 {
        (1.0 / peak_sum as f64 + 1.0 / bg_sum as f64).sqrt()
    } else {
        (1.0 / bg_sum as f64).sqrt()
    };
    let sigma = if peak_sum > 0 { g2 * rel } else { rel / accidentals / peak_bins as f64 };
    Ok(G2Result {
        g2: Estimate::new(g2, sigma),
        accidentals_per_bin: accidentals,
        background_bins: bg_bins,
        peak_bins,
    })
}

/// `(g² − bound) / σ`
pub fn cauchy_schwarz_significance(g2_si: f64, sigma: f64, classical_bound: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok((g2_si - classical_bound) / sigma)
}
