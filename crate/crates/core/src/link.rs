//! Noise-spectral-density accounting and the fiber-link SNR model.
//!
//! Signal and converter noise both pass through the fiber, so they share the
//! transmittance `T(x) = exp(−α x)`; detector dark counts do not:
//!
//! ```text
//! SNR(x) = η_ext · R_src · T(x) / (N_C · T(x) + N_D)
//! ```
//!
//! Attenuation is stored as a positive dB/km figure.

use serde::{Deserialize, Serialize};

use crate::constants::db_per_km_to_neper;
use crate::error::{ensure, Error, Result};
use crate::numeric;

/// One labelled transmission factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub label: String,
    pub transmission: f64,
}

/// Ordered product of transmission factors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EfficiencyChain {
    stages: Vec<Stage>,
}

impl EfficiencyChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: impl Into<String>, transmission: f64) -> Result<Self> {
        self.push(label, transmission)?;
        Ok(self)
    }

    pub fn push(&mut self, label: impl Into<String>, transmission: f64) -> Result<()> {
        let label = label.into();
        ensure(transmission > 0.0 && transmission <= 1.0, || {
            format!("stage '{label}' transmission must lie in (0, 1], got {transmission}")
        })?;
        self.stages.push(Stage { label, transmission });
        Ok(())
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.stages {
            ensure(s.transmission > 0.0 && s.transmission <= 1.0, || {
                format!("stage '{}' transmission must lie in (0, 1], got {}", s.label, s.transmission)
            })?;
        }
        Ok(())
    }

    /// Product of all factors; 1 for an empty chain.
    pub fn product(&self) -> f64 {
        self.stages.iter().map(|s| s.transmission).product()
    }
}

/// Detected noise rate at a given pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeasurement {
    pub circulating_power: f64,
    /// Detected count rate [Hz].
    pub measured_rate: f64,
    /// Collection bandwidth [nm].
    pub bandwidth_nm: f64,
}

/// Generated (in-crystal) noise spectral density [Hz/nm]:
/// `N_meas / (δλ · η_col · η_det)`.
pub fn nsd_generated(meas: &NoiseMeasurement, eta_col: f64, eta_det: f64) -> Result<f64> {
    ensure(meas.measured_rate >= 0.0, || format!("measured rate must be non-negative, got {}", meas.measured_rate))?;
    ensure(meas.bandwidth_nm > 0.0, || format!("bandwidth must be positive, got {}", meas.bandwidth_nm))?;
    for (name, e) in [("eta_col", eta_col), ("eta_det", eta_det)] {
        ensure(e > 0.0 && e <= 1.0, || format!("{name} must lie in (0, 1], got {e}"))?;
    }
    Ok(meas.measured_rate / (meas.bandwidth_nm * eta_col * eta_det))
}

/// Straight line fitted by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_sigma: f64,
    pub intercept_sigma: f64,
}

/// OLS line through `(power, nsd)` points.
pub fn fit_noise_slope(points: &[(f64, f64)]) -> Result<LineFit> {
    ensure(points.len() >= 2, || format!("need at least 2 points, got {}", points.len()))?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    ensure(sxx > 0.0 && sxx.is_finite(), || "abscissae are all equal".to_string())?;
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_sigma, intercept_sigma) = if points.len() > 2 {
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let s2 = ssr / (n - 2.0);
        let sx2: f64 = points.iter().map(|p| p.0 * p.0).sum();
        ((s2 / sxx).sqrt(), (s2 * sx2 / (n * sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_sigma,
        intercept_sigma,
    })
}

/// Whether an NSD figure refers to generated (in-crystal) or detected
/// (after the collection chain) noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsdReference {
    Generated,
    External,
}

/// Converts between generated and external NSD with an explicit chain product.
pub fn convert_nsd(nsd: f64, from: NsdReference, to: NsdReference, chain_product: f64) -> Result<f64> {
    ensure(chain_product > 0.0 && chain_product <= 1.0, || {
        format!("chain product must lie in (0, 1], got {chain_product}")
    })?;
    Ok(match (from, to) {
        (NsdReference::Generated, NsdReference::External) => nsd * chain_product,
        (NsdReference::External, NsdReference::Generated) => nsd / chain_product,
        _ => nsd,
    })
}

/// Distance-independent parameters of a point-to-point link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Product of every efficiency that does not scale with distance.
    pub eta_ext: f64,
    /// Single-photon source rate [Hz].
    pub source_rate: f64,
    /// Converter noise rate reaching the detector at zero distance [Hz].
    pub converter_noise: f64,
    /// Detector dark-count rate [Hz].
    pub dark_rate: f64,
    /// Fiber loss [dB/km], positive.
    pub attenuation_db_per_km: f64,
    /// Narrowband filter FWHM [nm].
    pub filter_width_nm: f64,
    pub filter_transmission: f64,
    pub detection_efficiency: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        ensure(self.eta_ext > 0.0 && self.eta_ext <= 1.0, || format!("eta_ext must lie in (0, 1], got {}", self.eta_ext))?;
        for (name, v) in [
            ("source_rate", self.source_rate),
            ("converter_noise", self.converter_noise),
            ("dark_rate", self.dark_rate),
            ("filter_width_nm", self.filter_width_nm),
        ] {
            ensure(v.is_finite() && v >= 0.0, || format!("{name} must be non-negative, got {v}"))?;
        }
        ensure(self.attenuation_db_per_km > 0.0 && self.attenuation_db_per_km.is_finite(), || {
            format!("attenuation must be positive, got {}", self.attenuation_db_per_km)
        })?;
        for (name, v) in [
            ("filter_transmission", self.filter_transmission),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            ensure(v > 0.0 && v <= 1.0, || format!("{name} must lie in (0, 1], got {v}"))?;
        }
        Ok(())
    }

    /// Copy of the budget with a different converter noise rate.
    pub fn with_converter_noise(self, converter_noise: f64) -> Self {
        LinkBudget { converter_noise, ..self }
    }

    fn transmittance(&self, x_km: f64) -> f64 {
        (-db_per_km_to_neper(self.attenuation_db_per_km) * x_km).exp()
    }
}

/// Converter noise reaching the detector: external NSD × filter width ×
/// filter transmission × detection efficiency.
pub fn converter_noise_rate(nsd_ext: f64, budget: &LinkBudget) -> Result<f64> {
    ensure(nsd_ext >= 0.0, || format!("NSD must be non-negative, got {nsd_ext}"))?;
    Ok(nsd_ext * budget.filter_width_nm * budget.filter_transmission * budget.detection_efficiency)
}

/// SNR after `x_km` of fiber.
pub fn snr_at_distance(budget: &LinkBudget, x_km: f64) -> Result<f64> {
    ensure(x_km >= 0.0, || format!("distance must be non-negative, got {x_km}"))?;
    let t = budget.transmittance(x_km);
    let signal = budget.eta_ext * budget.source_rate * t;
    let noise = budget.converter_noise * t + budget.dark_rate;
    if noise == 0.0 {
        return Ok(if signal > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(signal / noise)
}

/// Closed-form distance at which the SNR falls to `threshold`, if positive.
pub fn distance_for_snr_closed_form(budget: &LinkBudget, threshold: f64) -> Option<f64> {
    let arg = (budget.eta_ext * budget.source_rate - threshold * budget.converter_noise) / (threshold * budget.dark_rate);
    let x = 10.0 / budget.attenuation_db_per_km * arg.log10();
    (x.is_finite() && x >= 0.0).then_some(x)
}

/// Distance where `SNR(x) = threshold`, by bisection to 1e-6 km.
pub fn distance_for_snr(budget: &LinkBudget, threshold: f64) -> Result<f64> {
    ensure(threshold > 0.0, || format!("threshold must be positive, got {threshold}"))?;
    let snr0 = snr_at_distance(budget, 0.0)?;
    ensure(snr0 >= threshold, || format!("threshold {threshold} not attainable: SNR(0) = {snr0}"))?;
    if snr0 == threshold {
        return Ok(0.0);
    }
    ensure(budget.dark_rate > 0.0, || {
        "SNR never decays without detector dark counts; no crossing distance".to_string()
    })?;
    let mut hi = 1.0;
    while snr_at_distance(budget, hi)? > threshold {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::numeric("distance_for_snr", "no crossing below 1e9 km"));
        }
    }
    numeric::bisect(|x| snr_at_distance(budget, x).unwrap_or(f64::NAN) - threshold, 0.0, hi, 1e-7)
}

/// SNR of several named budgets across a distance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrTable {
    pub names: Vec<String>,
    pub distances_km: Vec<f64>,
    /// `rows[i][j]`: SNR of budget `j` at distance `i`.
    pub rows: Vec<Vec<f64>>,
}

impl SnrTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Elementwise `SNR(num) / SNR(den)`.
    pub fn ratio(&self, num: &str, den: &str) -> Option<Vec<f64>> {
        let a = self.column(num)?;
        let b = self.column(den)?;
        Some(a.iter().zip(&b).map(|(x, y)| x / y).collect())
    }
}

pub fn snr_comparison_sweep(budgets: &[(String, LinkBudget)], x_grid_km: &[f64]) -> Result<SnrTable> {
    ensure(!x_grid_km.is_empty(), || "distance grid is empty".to_string())?;
    ensure(!budgets.is_empty(), || "no budgets given".to_string())?;
    let rows = x_grid_km
        .iter()
        .map(|&x| budgets.iter().map(|(_, b)| snr_at_distance(b, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(SnrTable {
        names: budgets.iter().map(|(n, _)| n.clone()).collect(),
        distances_km: x_grid_km.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noiseless() -> LinkBudget {
        LinkBudget {
            eta_ext: 0.15,
            source_rate: 24e3,
            converter_noise: 0.0,
            dark_rate: 1.0,
            attenuation_db_per_km: 0.17,
            filter_width_nm: 0.005,
            filter_transmission: 0.5,
            detection_efficiency: 0.9,
        }
    }

    fn reference_chain() -> EfficiencyChain {
        EfficiencyChain::new()
            .with("fiber coupling", 0.72)
            .unwrap()
            .with("optics", 0.99)
            .unwrap()
            .with("bandpass", 0.92)
            .unwrap()
            .with("grating", 0.70)
            .unwrap()
    }

    #[test]
    fn chain_products() {
        let c = reference_chain();
        assert!((c.product() - 0.459).abs() < 0.001);
        assert_eq!(EfficiencyChain::new().product(), 1.0);
        let halved = c.clone().with("extra", 0.5).unwrap();
        assert!((halved.product() - 0.5 * c.product()).abs() < 1e-15);
        assert!(EfficiencyChain::new().with("bad", 0.0).is_err());
        assert!(EfficiencyChain::new().with("bad", 1.1).is_err());
    }

    #[test]
    fn nsd_accounting() {
        let eta_col = reference_chain().product();
        let m = NoiseMeasurement {
            circulating_power: 74.5,
            measured_rate: 39.6e3,
            bandwidth_nm: 0.87,
        };
        let nsd = nsd_generated(&m, eta_col, 0.9).unwrap();
        assert!((nsd - 110e3).abs() < 1e3, "{nsd}");
        let half = nsd_generated(&m, eta_col / 2.0, 0.9).unwrap();
        assert!((half - 2.0 * nsd).abs() < 1e-9 * nsd);
        let zero = NoiseMeasurement { measured_rate: 0.0, ..m };
        assert_eq!(nsd_generated(&zero, eta_col, 0.9).unwrap(), 0.0);
        let bad = NoiseMeasurement { bandwidth_nm: 0.0, ..m };
        assert!(nsd_generated(&bad, eta_col, 0.9).is_err());
    }

    #[test]
    fn nsd_reference_conversion() {
        let ext = convert_nsd(110.0, NsdReference::Generated, NsdReference::External, 0.459).unwrap();
        assert!((ext - 50.49).abs() < 1e-9);
        let back = convert_nsd(ext, NsdReference::External, NsdReference::Generated, 0.459).unwrap();
        assert!((back - 110.0).abs() < 1e-12);
    }

    #[test]
    fn line_fits() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 8.0, 1480.0 * i as f64 * 8.0)).collect();
        let f = fit_noise_slope(&pts).unwrap();
        assert!((f.slope - 1480.0).abs() < 1e-9);
        assert!(f.intercept.abs() < 1e-7);
        let f = fit_noise_slope(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-15 && f.intercept.abs() < 1e-15);
        let f = fit_noise_slope(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(fit_noise_slope(&[(1.0, 0.0), (1.0, 2.0)]).is_err());
        assert!(fit_noise_slope(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn converter_noise_points() {
        let b = noiseless();
        let nc = converter_noise_rate(45e3, &b).unwrap();
        assert!((nc - 101.25).abs() < 1e-9);
        let ln = converter_noise_rate(5.0 * 45e3, &b).unwrap();
        assert!((ln - 506.25).abs() < 1e-9);
        assert_eq!(converter_noise_rate(0.0, &b).unwrap(), 0.0);
    }

    #[test]
    fn snr_points() {
        let b = noiseless();
        assert!((snr_at_distance(&b, 0.0).unwrap() - 3600.0).abs() < 1e-9);
        let k = b.with_converter_noise(101.0);
        assert!((snr_at_distance(&k, 0.0).unwrap() - 3600.0 / 102.0).abs() < 1e-9);
        assert!(snr_at_distance(&b, 5000.0).unwrap() < 1e-80);
        assert!(snr_at_distance(&b, -1.0).is_err());
    }

    #[test]
    fn snr_constant_without_dark_counts() {
        let b = LinkBudget {
            dark_rate: 0.0,
            ..noiseless().with_converter_noise(100.0)
        };
        let a = snr_at_distance(&b, 0.0).unwrap();
        let c = snr_at_distance(&b, 150.0).unwrap();
        assert!((a - c).abs() < 1e-9 * a);
        assert!(distance_for_snr(&b, 1.0).is_err());
    }

    #[test]
    fn crossing_distances() {
        let b = noiseless();
        let x = distance_for_snr(&b, 1.0).unwrap();
        let closed = 10.0 * 3600f64.log10() / 0.17;
        assert!((x - closed).abs() < 1e-6);
        assert!((x - 209.2).abs() < 0.1);
        assert_eq!(distance_for_snr(&b, 3600.0).unwrap(), 0.0);
        assert!(distance_for_snr(&b, 4000.0).is_err());

        let k = b.with_converter_noise(101.25);
        let x = distance_for_snr(&k, 1.0).unwrap();
        let closed = distance_for_snr_closed_form(&k, 1.0).unwrap();
        assert!((x - closed).abs() < 1e-6);
        assert!((x - 208.7).abs() < 0.3, "{x}");
    }

    #[test]
    fn sweep_shapes() {
        let b = noiseless();
        let budgets = vec![
            ("noiseless".to_string(), b),
            ("ppktp".to_string(), b.with_converter_noise(101.25)),
            ("ppln".to_string(), b.with_converter_noise(506.25)),
        ];
        let grid: Vec<f64> = (0..=200).map(f64::from).collect();
        let t = snr_comparison_sweep(&budgets, &grid).unwrap();
        assert_eq!(t.rows.len(), 201);
        let r = t.ratio("ppktp", "ppln").unwrap();
        assert!((r[0] - 4.96).abs() < 0.02, "{}", r[0]);
        assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r[200] < 1.2);
        let n = t.ratio("noiseless", "ppktp").unwrap();
        assert!(n[200] < n[0] && n[200] < 1.05);

        let single = snr_comparison_sweep(&budgets[..1], &[0.0]).unwrap();
        assert_eq!(single.rows[0][0], snr_at_distance(&b, 0.0).unwrap());

        let same = vec![("a".to_string(), b), ("b".to_string(), b)];
        let t = snr_comparison_sweep(&same, &grid).unwrap();
        assert!(t.ratio("a", "b").unwrap().iter().all(|&v| v == 1.0));
        assert!(snr_comparison_sweep(&same, &[]).is_err());
    }

    prop_compose! {
        fn budget()(eta in 0.01f64..1.0, src in 1e3f64..1e5, nc in 0.0f64..1e3, nd in 0.1f64..10.0, att in 0.1f64..0.5) -> LinkBudget {
            LinkBudget { eta_ext: eta, source_rate: src, converter_noise: nc, dark_rate: nd, attenuation_db_per_km: att, ..noiseless() }
        }
    }

    proptest! {
        #[test]
        fn snr_decreasing_with_dark_counts(b in budget(), x in 0.0f64..300.0, dx in 0.1f64..50.0) {
            prop_assert!(snr_at_distance(&b, x + dx).unwrap() < snr_at_distance(&b, x).unwrap());
        }

        #[test]
        fn noiseless_dominates(b in budget(), x in 0.0f64..300.0) {
            let ideal = b.with_converter_noise(0.0);
            prop_assert!(snr_at_distance(&ideal, x).unwrap() >= snr_at_distance(&b, x).unwrap());
        }

        #[test]
        fn distance_round_trip(b in budget(), x in 0.0f64..200.0) {
            let s = snr_at_distance(&b, x).unwrap();
            let back = distance_for_snr(&b, s).unwrap();
            prop_assert!((back - x).abs() < 1e-6, "{} vs {}", back, x);
        }

        #[test]
        fn nsd_homogeneity(n in 0.0f64..1e6, k in 0.1f64..10.0, bw in 0.1f64..2.0, col in 0.1f64..0.5, det in 0.1f64..0.5) {
            let m = NoiseMeasurement { circulating_power: 1.0, measured_rate: n, bandwidth_nm: bw };
            let base = nsd_generated(&m, col, det).unwrap();
            let scaled = nsd_generated(&NoiseMeasurement { measured_rate: k * n, ..m }, col, det).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + scaled));
            let wide = nsd_generated(&NoiseMeasurement { bandwidth_nm: k * bw, ..m }, col, det).unwrap();
            prop_assert!((wide * k - base).abs() <= 1e-9 * (1.0 + base));
            let c2 = nsd_generated(&m, col * 2.0, det).unwrap();
            prop_assert!((c2 * 2.0 - base).abs() <= 1e-9 * (1.0 + base));
            let d2 = nsd_generated(&m, col, det * 2.0).unwrap();
            prop_assert!((d2 * 2.0 - base).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
