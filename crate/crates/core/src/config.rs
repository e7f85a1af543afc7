//! Run configuration for the batch front end.
//!
//! A single JSON document. Keys carry their unit as a suffix; everything is SI
//! except wavelengths (`_nm`), distances (`_km`) and noise spectral densities
//! (`_khz_per_nm`). Unknown keys are rejected. Relative CSV paths resolve
//! against the directory of the config file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cavity::CavitySpec;
use crate::constants::{nm, pm_per_volt};
use crate::conversion::{complete_wavelength_triple, ConversionProcess, KnownPair};
use crate::link::{converter_noise_rate, EfficiencyChain, LinkBudget, NoiseMeasurement};
use crate::verification::franson::Port;
use crate::verification::g2::G2Windows;
use crate::verification::simulate::{FringeSource, Sampling};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "QFC_LINK_CONFIG";

/// Built-in configuration reproducing the reference device.
pub const REFERENCE_CONFIG: &str = include_str!("../configs/reference.json");

/// Largest number of points a grid may expand to.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Invalid or unreadable configuration / input data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted field path or `file:line` locator, when known.
    pub location: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            location: None,
            message: message.into(),
        }
    }

    pub fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            location: Some(location.into()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{loc}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

fn check(cond: bool, field: &str, msg: impl FnOnce() -> String) -> CResult<()> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::at(field, msg()))
    }
}

fn lift<T>(field: &str, r: crate::Result<T>) -> CResult<T> {
    r.map_err(|e| ConfigError::at(field, e.to_string()))
}

/// Inclusive arithmetic grid `start, start + step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self, field: &str) -> CResult<Vec<f64>> {
        check(self.start.is_finite() && self.stop.is_finite(), field, || "grid bounds must be finite".into())?;
        check(self.step > 0.0 && self.step.is_finite(), field, || format!("grid step must be positive, got {}", self.step))?;
        check(self.stop >= self.start, field, || format!("empty grid: stop {} < start {}", self.stop, self.start))?;
        // tolerate rounding in (stop − start)/step
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        check(n <= MAX_GRID_POINTS, field, || format!("grid has {n} points, limit is {MAX_GRID_POINTS}"))?;
        Ok((0..n).map(|i| self.start + self.step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub lambda_red_nm: f64,
    pub lambda_pump_nm: f64,
    /// Completed from energy conservation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_target_nm: Option<f64>,
    pub n_red: f64,
    pub n_pump: f64,
    pub n_target: f64,
    pub d_eff_pm_per_v: f64,
    pub crystal_length_m: f64,
    pub domain_length_m: f64,
    /// Focusing parameter; the optimum is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focusing_xi: Option<f64>,
    /// Acceptance bandwidth [Hz] converted to wavelength at the red and target lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_bandwidth_hz: Option<f64>,
}

impl ProcessConfig {
    pub fn to_process(&self) -> CResult<ConversionProcess> {
        let lambda_t = match self.lambda_target_nm {
            Some(t) => nm(t),
            None => lift(
                "process.lambda_target_nm",
                complete_wavelength_triple(nm(self.lambda_red_nm), nm(self.lambda_pump_nm), KnownPair::RedPump),
            )?,
        };
        let p = ConversionProcess {
            lambda_r: nm(self.lambda_red_nm),
            lambda_p: nm(self.lambda_pump_nm),
            lambda_t,
            n_r: self.n_red,
            n_p: self.n_pump,
            n_t: self.n_target,
            d_eff: pm_per_volt(self.d_eff_pm_per_v),
            crystal_length: self.crystal_length_m,
            domain_length: self.domain_length_m,
        };
        lift("process", p.validate())?;
        if let Some(xi) = self.focusing_xi {
            check(xi > 0.0 && xi.is_finite(), "process.focusing_xi", || format!("must be positive, got {xi}"))?;
        }
        if let Some(b) = self.acceptance_bandwidth_hz {
            check(b > 0.0 && b.is_finite(), "process.acceptance_bandwidth_hz", || format!("must be positive, got {b}"))?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub grid_w: Grid,
    /// Saturation power; overridden by a fit when `depletion_csv` is set,
    /// computed from `process` when both are absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_w: Option<f64>,
    /// Columns `circulating_power_w,efficiency[,uncertainty]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depletion_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub reflectivity_in: f64,
    pub reflectivity_out: f64,
    /// Extra round-trip loss; mutually exclusive with `measured_finesse`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_trip_loss: Option<f64>,
    /// Loss is inferred from this finesse when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_finesse: Option<f64>,
    pub geometric_length_m: f64,
    pub facet_curvature_radius_m: f64,
    pub index_at_pump: f64,
    pub lambda_pump_nm: f64,
    pub input_power_w: f64,
    pub mode_coupling: f64,
}

impl CavityConfig {
    /// Cavity with the given extra loss.
    pub fn spec_with_loss(&self, loss: f64) -> CResult<CavitySpec> {
        let s = CavitySpec {
            reflectivity_in: self.reflectivity_in,
            reflectivity_out: self.reflectivity_out,
            round_trip_extra_loss: loss,
            geometric_length: self.geometric_length_m,
            facet_curvature_radius: self.facet_curvature_radius_m,
            index_at_pump: self.index_at_pump,
        };
        lift("cavity", s.validate())?;
        Ok(s)
    }

    pub fn validate(&self) -> CResult<()> {
        check(
            !(self.round_trip_loss.is_some() && self.measured_finesse.is_some()),
            "cavity",
            || "give either round_trip_loss or measured_finesse, not both".into(),
        )?;
        if let Some(f) = self.measured_finesse {
            check(f > 0.0 && f.is_finite(), "cavity.measured_finesse", || format!("must be positive, got {f}"))?;
        }
        self.spec_with_loss(self.round_trip_loss.unwrap_or(0.0))?;
        check(self.lambda_pump_nm > 0.0, "cavity.lambda_pump_nm", || "must be positive".into())?;
        check(self.input_power_w >= 0.0 && self.input_power_w.is_finite(), "cavity.input_power_w", || {
            "must be non-negative".into()
        })?;
        check((0.0..=1.0).contains(&self.mode_coupling), "cavity.mode_coupling", || {
            format!("must lie in [0, 1], got {}", self.mode_coupling)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub circulating_power_w: f64,
    pub measured_rate_hz: f64,
    pub bandwidth_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Collection chain, in order.
    pub collection_chain: EfficiencyChain,
    pub detection_efficiency: f64,
    #[serde(default)]
    pub measurements: Vec<MeasurementConfig>,
    /// Internal conversion efficiency used for the external figure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_efficiency: Option<f64>,
}

impl NoiseConfig {
    pub fn validate(&self) -> CResult<()> {
        lift("noise.collection_chain", self.collection_chain.validate())?;
        check(
            self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0,
            "noise.detection_efficiency",
            || format!("must lie in (0, 1], got {}", self.detection_efficiency),
        )?;
        if let Some(e) = self.internal_efficiency {
            check((0.0..=1.0).contains(&e), "noise.internal_efficiency", || format!("must lie in [0, 1], got {e}"))?;
        }
        for (i, m) in self.measurements.iter().enumerate() {
            let field = format!("noise.measurements[{i}]");
            check(m.circulating_power_w >= 0.0 && m.circulating_power_w.is_finite(), &field, || {
                "circulating_power_w must be non-negative".into()
            })?;
            check(m.measured_rate_hz >= 0.0 && m.measured_rate_hz.is_finite(), &field, || {
                "measured_rate_hz must be non-negative".into()
            })?;
            check(m.bandwidth_nm > 0.0 && m.bandwidth_nm.is_finite(), &field, || "bandwidth_nm must be positive".into())?;
        }
        Ok(())
    }

    pub fn measurement(m: &MeasurementConfig) -> NoiseMeasurement {
        NoiseMeasurement {
            circulating_power: m.circulating_power_w,
            measured_rate: m.measured_rate_hz,
            bandwidth_nm: m.bandwidth_nm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub name: String,
    pub eta_ext: f64,
    pub source_rate_hz: f64,
    /// External converter NSD; 0 for a noiseless converter.
    pub nsd_external_khz_per_nm: f64,
    pub dark_rate_hz: f64,
    pub attenuation_db_per_km: f64,
    pub filter_width_nm: f64,
    pub filter_transmission: f64,
    pub detection_efficiency: f64,
}

impl BudgetConfig {
    pub fn to_budget(&self, field: &str) -> CResult<LinkBudget> {
        let b = LinkBudget {
            eta_ext: self.eta_ext,
            source_rate: self.source_rate_hz,
            converter_noise: 0.0,
            dark_rate: self.dark_rate_hz,
            attenuation_db_per_km: self.attenuation_db_per_km,
            filter_width_nm: self.filter_width_nm,
            filter_transmission: self.filter_transmission,
            detection_efficiency: self.detection_efficiency,
        };
        lift(field, b.validate())?;
        let noise = lift(field, converter_noise_rate(self.nsd_external_khz_per_nm * 1e3, &b))?;
        Ok(b.with_converter_noise(noise))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub grid_km: Grid,
    pub budgets: Vec<BudgetConfig>,
    /// `[numerator, denominator]` budget names for ratio columns.
    #[serde(default)]
    pub ratios: Vec<(String, String)>,
    /// SNR threshold for the crossing-distance report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_threshold: Option<f64>,
}

impl LinkConfig {
    pub fn budgets(&self) -> CResult<Vec<(String, LinkBudget)>> {
        check(!self.budgets.is_empty(), "link.budgets", || "need at least one budget".into())?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.budgets.len());
        for (i, b) in self.budgets.iter().enumerate() {
            let field = format!("link.budgets[{i}]");
            check(!b.name.is_empty() && !b.name.contains([',', '"', '\n', '\r']), &field, || {
                format!("budget name '{}' must be non-empty and CSV-safe", b.name)
            })?;
            check(seen.insert(b.name.clone()), &field, || format!("duplicate budget name '{}'", b.name))?;
            out.push((b.name.clone(), b.to_budget(&field)?));
        }
        for (i, (num, den)) in self.ratios.iter().enumerate() {
            for n in [num, den] {
                check(seen.contains(n), &format!("link.ratios[{i}]"), || format!("unknown budget '{n}'"))?;
            }
        }
        if let Some(t) = self.snr_threshold {
            check(t > 0.0 && t.is_finite(), "link.snr_threshold", || format!("must be positive, got {t}"))?;
        }
        Ok(out)
    }
}

fn default_trials() -> usize {
    10
}

fn default_table_range() -> (usize, usize) {
    (2, 12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellConfig {
    pub settings: usize,
    /// True fringe visibility used by the model and the simulator.
    pub visibility: f64,
    pub amplitude_hz: f64,
    #[serde(default)]
    pub accidental_rate_hz: f64,
    /// Per setting and per detector position.
    pub integration_time_s: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub sampling: Sampling,
    /// Columns `[trial,]a,b,expectation,sigma`; settings are 1-based.
    /// Model expectations at `visibility` are analysed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expectations_csv: Option<PathBuf>,
    /// Reported value `[S, σ]` whose significance over the local bound is quoted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_s: Option<(f64, f64)>,
    /// Inclusive `[min, max]` N range of the bounds table.
    #[serde(default = "default_table_range")]
    pub table_settings: (usize, usize),
}

impl BellConfig {
    pub fn source(&self) -> FringeSource {
        FringeSource {
            visibility: self.visibility,
            amplitude: self.amplitude_hz,
            accidental_rate: self.accidental_rate_hz,
        }
    }

    pub fn validate(&self) -> CResult<()> {
        check((2..=64).contains(&self.settings), "bell.settings", || format!("must lie in 2..=64, got {}", self.settings))?;
        lift("bell", self.source().validate())?;
        check(self.integration_time_s > 0.0 && self.integration_time_s.is_finite(), "bell.integration_time_s", || {
            "must be positive".into()
        })?;
        check((1..=10_000).contains(&self.trials), "bell.trials", || format!("must lie in 1..=10000, got {}", self.trials))?;
        let (lo, hi) = self.table_settings;
        check(lo >= 2 && lo <= hi && hi <= 64, "bell.table_settings", || format!("need 2 ≤ min ≤ max ≤ 64, got [{lo}, {hi}]"))?;
        if let Some((s, sigma)) = self.measured_s {
            check(s.is_finite() && sigma > 0.0, "bell.measured_s", || "need a finite S and positive σ".into())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticHistogramConfig {
    pub bins: usize,
    pub bin_width_s: f64,
    pub accidentals_per_bin: f64,
    /// Counts added to the center bin.
    pub peak_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Config {
    pub integration_time_s: f64,
    #[serde(default)]
    pub peak_half_width_bins: usize,
    #[serde(default = "default_exclusion")]
    pub exclusion_half_width_bins: usize,
    /// `(offset, half width)` pairs in bins.
    #[serde(default)]
    pub sidelobe_mask_bins: Vec<(i64, usize)>,
    /// Columns `delay_s,counts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_csv: Option<PathBuf>,
    /// Generated when no histogram file is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticHistogramConfig>,
    #[serde(default)]
    pub sampling: Sampling,
}

fn default_exclusion() -> usize {
    10
}

impl G2Config {
    pub fn windows(&self) -> G2Windows {
        G2Windows {
            peak_half_width: self.peak_half_width_bins,
            exclusion_half_width: self.exclusion_half_width_bins,
            sidelobe_mask: self.sidelobe_mask_bins.clone(),
        }
    }

    pub fn validate(&self) -> CResult<()> {
        check(self.integration_time_s > 0.0 && self.integration_time_s.is_finite(), "g2.integration_time_s", || {
            "must be positive".into()
        })?;
        check(self.histogram_csv.is_some() || self.synthetic.is_some(), "g2", || {
            "need histogram_csv or synthetic".into()
        })?;
        if let (None, Some(s)) = (&self.histogram_csv, &self.synthetic) {
            check(s.bins >= 3 && s.bins <= MAX_GRID_POINTS, "g2.synthetic.bins", || format!("must lie in 3..={MAX_GRID_POINTS}"))?;
            check(s.bin_width_s > 0.0, "g2.synthetic.bin_width_s", || "must be positive".into())?;
            check(s.accidentals_per_bin >= 0.0 && s.peak_excess >= 0.0, "g2.synthetic", || {
                "counts must be non-negative".into()
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortConfig {
    pub port: Port,
    /// Flat accidental coincidence rate subtracted for the corrected visibility.
    pub accidental_rate_hz: f64,
    /// True visibility for synthetic scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScanConfig {
    pub amplitude_hz: f64,
    pub phase_points: usize,
    pub integration_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FransonConfig {
    pub ports: Vec<PortConfig>,
    /// Columns `phase_rad,port,counts,time_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticScanConfig>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl FransonConfig {
    pub fn validate(&self) -> CResult<()> {
        check(!self.ports.is_empty(), "franson.ports", || "need at least one port".into())?;
        let mut seen = BTreeSet::new();
        for (i, p) in self.ports.iter().enumerate() {
            let field = format!("franson.ports[{i}]");
            check(seen.insert(p.port), &field, || format!("duplicate port {}", p.port))?;
            check(p.accidental_rate_hz >= 0.0 && p.accidental_rate_hz.is_finite(), &field, || {
                "accidental_rate_hz must be non-negative".into()
            })?;
            if let Some(v) = p.visibility {
                check((0.0..=1.0).contains(&v), &field, || format!("visibility must lie in [0, 1], got {v}"))?;
            }
        }
        check(self.scan_csv.is_some() || self.synthetic.is_some(), "franson", || {
            "need scan_csv or synthetic".into()
        })?;
        if let (None, Some(s)) = (&self.scan_csv, &self.synthetic) {
            check(s.amplitude_hz >= 0.0 && s.amplitude_hz.is_finite(), "franson.synthetic.amplitude_hz", || {
                "must be non-negative".into()
            })?;
            check(s.phase_points >= 3 && s.phase_points <= MAX_GRID_POINTS, "franson.synthetic.phase_points", || {
                "need at least 3 phases".into()
            })?;
            check(s.integration_time_s > 0.0, "franson.synthetic.integration_time_s", || "must be positive".into())?;
            for (i, p) in self.ports.iter().enumerate() {
                check(p.visibility.is_some(), &format!("franson.ports[{i}]"), || {
                    "synthetic scans need a visibility per port".into()
                })?;
            }
        }
        Ok(())
    }
}

/// Complete run configuration. Each command requires only its own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<G2Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub franson: Option<FransonConfig>,
}

/// A parsed config and the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    /// `None` for the built-in reference config.
    pub source: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Looks up a required section, reporting its name when missing.
    pub fn section<'a, T>(&'a self, value: &'a Option<T>, name: &str) -> CResult<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| ConfigError::at(name, "section is required by this command"))
    }
}

/// Parses a config document; errors carry line and column.
pub fn parse_config(text: &str, origin: &str) -> CResult<RunConfig> {
    serde_json::from_str(text).map_err(|e| {
        ConfigError::at(
            format!("{origin}:{}:{}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

/// Loads `explicit`, else the file named by [`CONFIG_ENV`], else the
/// built-in reference config.
pub fn load_config(explicit: Option<&Path>) -> CResult<LoadedConfig> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| ConfigError::at(p.display().to_string(), format!("cannot read config: {e}")))?;
            let config = parse_config(&text, &p.display().to_string())?;
            let base_dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok(LoadedConfig {
                config,
                base_dir,
                source: Some(p),
            })
        }
        None => Ok(LoadedConfig {
            config: parse_config(REFERENCE_CONFIG, "<reference>")?,
            base_dir: PathBuf::from("."),
            source: None,
        }),
    }
}
