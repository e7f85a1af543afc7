//! Batch front end: `qfc-link efficiency|cavity|link|bell|g2`.
//!
//! Each command validates its config sections and reads its inputs, computes
//! everything in memory, and only then writes the output bundle. Exit codes:
//! 0 success, 2 config/input error, 3 numerical or fit failure.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cavity::{cavity_figures, infer_round_trip_loss, CavityFigures};
use crate::config::{load_config, ConfigError, LoadedConfig, RunConfig, CONFIG_ENV};
use crate::constants::nm;
use crate::conversion::{
    bandwidth_wavelength_from_frequency, conversion_efficiency, fit_pmax, h_m, optimal_focusing, p_max,
    DepletionSample, PmaxFit,
};
use crate::link::{
    distance_for_snr, fit_noise_slope, nsd_generated, snr_at_distance, snr_comparison_sweep, LineFit,
};
use crate::report::{sha256_hex, timestamp_utc, to_json_bytes, Cell, CsvTable, Manifest, ReportBundle};
use crate::verification::bell::{chained_bounds, chained_s, optimal_schedule, BellSchedule, ChainedBounds};
use crate::verification::franson::{correct_visibility, fit_visibility, FransonScan, Port, ScanPoint};
use crate::verification::g2::{cauchy_schwarz_significance, g2_normalize, CoincidenceHistogram, THERMAL_CAUCHY_SCHWARZ_BOUND};
use crate::verification::simulate::{simulate_bell, simulate_histogram, simulate_scan, FringeSource};
use crate::verification::{combine_trials, Estimate};
use crate::Error;

pub const TOOL_NAME: &str = "qfc-link";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_OUT_DIR: &str = "qfc-link-out";

#[derive(Debug, Parser)]
#[command(name = "qfc-link", version, about = "Quantum frequency conversion link models and verification statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration [default: $QFC_LINK_CONFIG, else the built-in reference config]
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: config `output_dir`, else ./qfc-link-out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed, overriding the config
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Command mode (bell: analyze, simulate, table)
    #[arg(long, global = true, value_name = "M")]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Conversion-efficiency curve, saturation power and focusing diagnostics
    Efficiency,
    /// Pump-enhancement cavity figures
    Cavity,
    /// SNR-versus-distance sweep and noise accounting
    Link,
    /// Chained Bell inequality: bounds table, analysis or simulation
    Bell,
    /// g² cross-correlation and Franson visibilities
    G2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Efficiency => "efficiency",
            Command::Cavity => "cavity",
            Command::Link => "link",
            Command::Bell => "bell",
            Command::G2 => "g2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BellMode {
    Analyze,
    Simulate,
    Table,
}

/// Command failure, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A model rejected its inputs or a numerical routine failed.
    Model(Error),
    /// Data are structurally insufficient for the requested estimate.
    Incomplete(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Model(Error::Domain(_)) => 2,
            CliError::Model(_) | CliError::Incomplete(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Incomplete(m) => write!(f, "incomplete data: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(location: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::at(location, msg))
}

/// Everything needed to run one command.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub mode: Option<String>,
}

impl Invocation {
    /// Loads the config and applies command-line overrides.
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let mut loaded = load_config(cli.config.as_deref())?;
        if let Some(s) = cli.seed {
            loaded.config.seed = s;
        }
        Ok(Invocation {
            command: cli.command,
            seed: loaded.config.seed,
            loaded,
            mode: cli.mode.clone(),
        })
    }

    fn cfg(&self) -> &RunConfig {
        &self.loaded.config
    }

    /// SHA-256 of the effective config (seed override applied).
    pub fn config_hash(&self) -> String {
        sha256_hex(&to_json_bytes(self.cfg()).expect("config serializes"))
    }

    fn bell_mode(&self) -> CliResult<BellMode> {
        match &self.mode {
            None => Ok(BellMode::Table),
            Some(m) => BellMode::from_str(m, true)
                .map_err(|_| config_err("--mode", format!("unknown bell mode '{m}' (expected analyze, simulate or table)"))),
        }
    }
}

/// Runs a command and returns the bundle without writing anything.
pub fn execute(inv: &Invocation) -> CliResult<ReportBundle> {
    if inv.command != Command::Bell {
        if let Some(m) = &inv.mode {
            return Err(config_err("--mode", format!("'{}' takes no mode, got '{m}'", inv.command.name())));
        }
    }
    match inv.command {
        Command::Efficiency => cmd_efficiency(inv),
        Command::Cavity => cmd_cavity(inv),
        Command::Link => cmd_link(inv),
        Command::Bell => cmd_bell(inv, inv.bell_mode()?),
        Command::G2 => cmd_g2(inv),
    }
}

/// Runs a command and writes its bundle; returns the written paths.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let inv = Invocation::from_cli(cli)?;
    let out = match (&cli.out, &inv.cfg().output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => inv.loaded.resolve(o),
        (None, None) => PathBuf::from(DEFAULT_OUT_DIR),
    };
    let bundle = execute(&inv)?;
    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: VERSION.into(),
        command: inv.command.name().into(),
        mode: (inv.command == Command::Bell).then(|| format!("{:?}", inv.bell_mode().expect("checked")).to_lowercase()),
        seed: inv.seed,
        config_sha256: inv.config_hash(),
        config_source: inv
            .loaded
            .source
            .as_ref()
            .map_or_else(|| "<reference>".to_string(), |p| p.display().to_string()),
        created_utc: timestamp_utc(),
        files: vec![],
    };
    bundle.write(&out, manifest).map_err(CliError::Io)
}

/// Parses arguments, runs, reports to stdout/stderr; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{TOOL_NAME}: {e}");
            if let CliError::Config(_) = e {
                eprintln!("{TOOL_NAME}: config is read from --config, ${CONFIG_ENV}, or the built-in reference");
            }
            e.exit_code()
        }
    }
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let loc = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_err(&loc, format!("cannot open CSV: {e}")))?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: T = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            config_err(format!("{loc}:{line}"), e.to_string())
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(config_err(loc, "no data rows"));
    }
    Ok(rows)
}

fn require_finite(loc: &Path, line: usize, values: &[(&str, f64)]) -> CliResult<()> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(config_err(format!("{}:{line}", loc.display()), format!("{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- efficiency

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DepletionRow {
    circulating_power_w: f64,
    efficiency: f64,
    #[serde(default)]
    uncertainty: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Focusing {
    xi: f64,
    h_m: f64,
    optimal_xi: f64,
    optimal_h_m: f64,
    p_max_theory_w: f64,
}

#[derive(Debug, Serialize)]
struct Bandwidths {
    acceptance_hz: f64,
    red_nm: f64,
    target_nm: f64,
}

#[derive(Debug, Serialize)]
struct EfficiencyReport {
    p_max_w: f64,
    p_max_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<PmaxFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_target_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    focusing: Option<Focusing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidths: Option<Bandwidths>,
    grid_points: usize,
}

fn cmd_efficiency(inv: &Invocation) -> CliResult<ReportBundle> {
    let l = &inv.loaded;
    let eff = l.section(&inv.cfg().efficiency, "efficiency")?;
    let grid = eff.grid_w.points("efficiency.grid_w")?;
    if grid[0] < 0.0 {
        return Err(config_err("efficiency.grid_w", "pump powers must be non-negative"));
    }
    let process = inv.cfg().process.as_ref().map(|p| p.to_process().map(|q| (p, q))).transpose()?;
    if let Some(p) = eff.p_max_w {
        if !(p > 0.0 && p.is_finite()) {
            return Err(config_err("efficiency.p_max_w", format!("must be positive, got {p}")));
        }
    }
    if let Some(p) = eff.operating_power_w {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(config_err("efficiency.operating_power_w", format!("must be non-negative, got {p}")));
        }
    }
    let samples = match &eff.depletion_csv {
        Some(path) => {
            let path = l.resolve(path);
            let rows: Vec<DepletionRow> = read_csv(&path)?;
            let mut out = Vec::with_capacity(rows.len());
            for (i, r) in rows.into_iter().enumerate() {
                let s = DepletionSample::new(r.circulating_power_w, r.efficiency, r.uncertainty)
                    .ingest()
                    .map_err(|e| config_err(format!("{}:{}", path.display(), i + 2), e.to_string()))?;
                out.push(s);
            }
            Some(out)
        }
        None => None,
    };
    if samples.is_none() && eff.p_max_w.is_none() && process.is_none() {
        return Err(config_err("efficiency", "need p_max_w, depletion_csv, or a process section"));
    }

    let focusing = match &process {
        Some((pc, proc_)) => {
            let best = optimal_focusing(0.1, 20.0)?;
            let xi = pc.focusing_xi.unwrap_or(best.argmax);
            let h = h_m(xi)?;
            Some(Focusing {
                xi,
                h_m: h,
                optimal_xi: best.argmax,
                optimal_h_m: best.value,
                p_max_theory_w: p_max(proc_, h)?,
            })
        }
        None => None,
    };
    let bandwidths = match &process {
        Some((pc, proc_)) => match pc.acceptance_bandwidth_hz {
            Some(b) => Some(Bandwidths {
                acceptance_hz: b,
                red_nm: bandwidth_wavelength_from_frequency(b, proc_.lambda_r)? / nm(1.0),
                target_nm: bandwidth_wavelength_from_frequency(b, proc_.lambda_t)? / nm(1.0),
            }),
            None => None,
        },
        None => None,
    };
    let (pm, source, fit) = match (&samples, eff.p_max_w, &focusing) {
        (Some(s), _, _) => {
            let f = fit_pmax(s)?;
            (f.p_max, "fit", Some(f))
        }
        (None, Some(p), _) => (p, "config", None),
        (None, None, Some(f)) => (f.p_max_theory_w, "theory", None),
        (None, None, None) => unreachable!("checked above"),
    };

    let mut table = CsvTable::new(["pump_power_w", "efficiency"]);
    for &p in &grid {
        table.push(vec![p.into(), conversion_efficiency(p, pm)?.into()]);
    }
    let report = EfficiencyReport {
        p_max_w: pm,
        p_max_source: source,
        fit,
        operating_power_w: eff.operating_power_w,
        operating_efficiency: eff.operating_power_w.map(|p| conversion_efficiency(p, pm)).transpose()?,
        lambda_target_nm: process.as_ref().map(|(_, p)| p.lambda_t / nm(1.0)),
        focusing,
        bandwidths,
        grid_points: grid.len(),
    };
    let mut b = ReportBundle::new();
    b.add_csv("efficiency_curve.csv", &table);
    b.add_json("efficiency.json", &report).map_err(|e| CliError::Io(e.into()))?;
    Ok(b)
}

// -------------------------------------------------------------------- cavity

#[derive(Debug, Serialize)]
struct CavityReport {
    round_trip_loss: f64,
    loss_source: &'static str,
    lossless: CavityFigures,
    with_loss: CavityFigures,
    input_power_w: f64,
    mode_coupling: f64,
}

fn cmd_cavity(inv: &Invocation) -> CliResult<ReportBundle> {
    let c = inv.loaded.section(&inv.cfg().cavity, "cavity")?;
    c.validate()?;
    let (loss, source) = match (c.round_trip_loss, c.measured_finesse) {
        (Some(l), _) => (l, "config"),
        (None, Some(f)) => (infer_round_trip_loss(f, c.reflectivity_in, c.reflectivity_out)?, "measured_finesse"),
        (None, None) => (0.0, "none"),
    };
    let lambda = nm(c.lambda_pump_nm);
    let lossless = cavity_figures(&c.spec_with_loss(0.0)?, lambda, c.input_power_w, c.mode_coupling)?;
    let with_loss = cavity_figures(&c.spec_with_loss(loss)?, lambda, c.input_power_w, c.mode_coupling)?;
    let mut b = ReportBundle::new();
    b.add_json(
        "cavity.json",
        &CavityReport {
            round_trip_loss: loss,
            loss_source: source,
            lossless,
            with_loss,
            input_power_w: c.input_power_w,
            mode_coupling: c.mode_coupling,
        },
    )
    .map_err(|e| CliError::Io(e.into()))?;
    Ok(b)
}

// ---------------------------------------------------------------------- link

#[derive(Debug, Serialize)]
struct BudgetSummary {
    name: String,
    converter_noise_hz: f64,
    snr_at_grid_start: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_at_threshold_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold_note: Option<String>,
}

#[derive(Debug, Serialize)]
struct NoiseRow {
    circulating_power_w: f64,
    nsd_generated_hz_per_nm: f64,
}

#[derive(Debug, Serialize)]
struct NoiseReport {
    collection_efficiency: f64,
    detection_efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    external_efficiency: Option<f64>,
    points: Vec<NoiseRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_fit_hz_per_nm_per_w: Option<LineFit>,
}

#[derive(Debug, Serialize)]
struct LinkReport {
    budgets: Vec<BudgetSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_threshold: Option<f64>,
    rows: usize,
}

fn cmd_link(inv: &Invocation) -> CliResult<ReportBundle> {
    let lc = inv.loaded.section(&inv.cfg().link, "link")?;
    let budgets = lc.budgets()?;
    let grid = lc.grid_km.points("link.grid_km")?;
    if grid[0] < 0.0 {
        return Err(config_err("link.grid_km", "distances must be non-negative"));
    }
    if let Some(n) = &inv.cfg().noise {
        n.validate()?;
    }

    let table = snr_comparison_sweep(&budgets, &grid)?;
    let mut header = vec!["distance_km".to_string()];
    header.extend(table.names.iter().map(|n| format!("snr_{n}")));
    header.extend(lc.ratios.iter().map(|(a, b)| format!("ratio_{a}_over_{b}")));
    let ratios: Vec<Vec<f64>> = lc
        .ratios
        .iter()
        .map(|(a, b)| table.ratio(a, b).expect("names validated"))
        .collect();
    let mut csv = CsvTable::new(header);
    for (i, &x) in table.distances_km.iter().enumerate() {
        let mut row: Vec<Cell> = vec![x.into()];
        row.extend(table.rows[i].iter().map(|&v| Cell::from(v)));
        row.extend(ratios.iter().map(|r| Cell::from(r[i])));
        csv.push(row);
    }

    let mut summaries = Vec::with_capacity(budgets.len());
    for (name, b) in &budgets {
        let (d, note) = match lc.snr_threshold {
            Some(t) => match distance_for_snr(b, t) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            },
            None => (None, None),
        };
        summaries.push(BudgetSummary {
            name: name.clone(),
            converter_noise_hz: b.converter_noise,
            snr_at_grid_start: snr_at_distance(b, grid[0])?,
            distance_at_threshold_km: d,
            threshold_note: note,
        });
    }

    let mut bundle = ReportBundle::new();
    bundle.add_csv("snr_sweep.csv", &csv);
    bundle
        .add_json(
            "link.json",
            &LinkReport {
                budgets: summaries,
                snr_threshold: lc.snr_threshold,
                rows: grid.len(),
            },
        )
        .map_err(|e| CliError::Io(e.into()))?;

    if let Some(n) = &inv.cfg().noise {
        let eta_col = n.collection_chain.product();
        let mut points = Vec::with_capacity(n.measurements.len());
        for m in &n.measurements {
            let meas = crate::config::NoiseConfig::measurement(m);
            points.push(NoiseRow {
                circulating_power_w: m.circulating_power_w,
                nsd_generated_hz_per_nm: nsd_generated(&meas, eta_col, n.detection_efficiency)?,
            });
        }
        let slope = if points.len() >= 2 {
            let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.circulating_power_w, p.nsd_generated_hz_per_nm)).collect();
            Some(fit_noise_slope(&xy)?)
        } else {
            None
        };
        bundle
            .add_json(
                "noise.json",
                &NoiseReport {
                    collection_efficiency: eta_col,
                    detection_efficiency: n.detection_efficiency,
                    external_efficiency: n.internal_efficiency.map(|e| e * eta_col),
                    points,
                    slope_fit_hz_per_nm_per_w: slope,
                },
            )
            .map_err(|e| CliError::Io(e.into()))?;
    }
    Ok(bundle)
}

// ---------------------------------------------------------------------- bell

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpectationRow {
    #[serde(default)]
    trial: u64,
    a: usize,
    b: usize,
    expectation: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct TrialS {
    trial: u64,
    s: Estimate,
}

#[derive(Debug, Serialize)]
struct BellAnalysis {
    settings: usize,
    source: &'static str,
    s: Estimate,
    trials: Vec<TrialS>,
    bounds: ChainedBounds,
    violates_local_bound: bool,
    /// `(S − S_LHV)/σ`; absent for exact expectations.
    #[serde(skip_serializing_if = "Option::is_none")]
    significance_over_local_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_significance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BellSimulation {
    settings: usize,
    visibility: f64,
    amplitude_hz: f64,
    accidental_rate_hz: f64,
    integration_time_s: f64,
    seed: u64,
    s: Estimate,
    expected_s: f64,
    /// `(S − V·S_QM)/σ`
    deviation_sigmas: f64,
    trials: Vec<TrialS>,
    bounds: ChainedBounds,
    significance_over_local_bound: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn cmd_bell(inv: &Invocation, mode: BellMode) -> CliResult<ReportBundle> {
    let bc = inv.loaded.section(&inv.cfg().bell, "bell")?;
    bc.validate()?;
    let mut bundle = ReportBundle::new();
    let io = |e: serde_json::Error| CliError::Io(e.into());
    match mode {
        BellMode::Table => {
            let (lo, hi) = bc.table_settings;
            let mut t = CsvTable::new(["settings", "s_lhv", "s_qm", "v_crit"]);
            let mut rows = Vec::new();
            for n in lo..=hi {
                let c = chained_bounds(n)?;
                t.push(vec![n.into(), c.s_lhv.into(), c.s_qm.into(), c.v_crit.into()]);
                rows.push(c);
            }
            bundle.add_csv("bell_bounds.csv", &t);
            bundle.add_json("bell_bounds.json", &rows).map_err(io)?;
        }
        BellMode::Analyze => {
            let n = bc.settings;
            let (source, schedules) = match &bc.expectations_csv {
                Some(p) => {
                    let path = inv.loaded.resolve(p);
                    let rows: Vec<ExpectationRow> = read_csv(&path)?;
                    let mut by_trial: BTreeMap<u64, BellSchedule> = BTreeMap::new();
                    for (i, r) in rows.iter().enumerate() {
                        require_finite(&path, i + 2, &[("expectation", r.expectation), ("sigma", r.sigma)])?;
                        if r.expectation.abs() > 1.0 || r.sigma < 0.0 {
                            return Err(config_err(
                                format!("{}:{}", path.display(), i + 2),
                                "expectation must lie in [-1, 1] and sigma be non-negative",
                            ));
                        }
                        let sched = match by_trial.entry(r.trial) {
                            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                            std::collections::btree_map::Entry::Vacant(e) => e.insert(BellSchedule::unphased(n)?),
                        };
                        sched
                            .set_pair(r.a, r.b, Estimate::new(r.expectation, r.sigma))
                            .map_err(|e| config_err(format!("{}:{}", path.display(), i + 2), e.to_string()))?;
                    }
                    ("csv", by_trial.into_iter().collect::<Vec<_>>())
                }
                None => {
                    log::warn!("no expectations_csv; analysing model expectations at V = {}", bc.visibility);
                    ("model", vec![(0, optimal_schedule(n)?.with_model_expectations(bc.visibility))])
                }
            };
            let mut trials = Vec::with_capacity(schedules.len());
            for (trial, s) in &schedules {
                if !s.is_complete() {
                    let missing: Vec<String> = s
                        .terms()
                        .iter()
                        .zip(s.expectations())
                        .filter(|(_, e)| e.is_none())
                        .map(|(t, _)| format!("({}, {})", t.a, t.b))
                        .collect();
                    return Err(CliError::Incomplete(format!("trial {trial} lacks terms {}", missing.join(", "))));
                }
                trials.push(TrialS {
                    trial: *trial,
                    s: chained_s(s)?,
                });
            }
            let est: Vec<Estimate> = trials.iter().map(|t| t.s).collect();
            let s = combine_trials(&est).expect("non-empty");
            let bounds = chained_bounds(n)?;
            let reference = bc.measured_s.map(|(v, sg)| Estimate::new(v, sg));
            let report = BellAnalysis {
                settings: n,
                source,
                s,
                trials,
                violates_local_bound: s.estimate > bounds.s_lhv,
                significance_over_local_bound: (s.sigma > 0.0).then(|| s.significance_over(bounds.s_lhv)),
                reference_significance: reference.map(|r| r.significance_over(bounds.s_lhv)),
                reference,
                bounds,
            };
            bundle.add_json("bell_analysis.json", &report).map_err(io)?;
        }
        BellMode::Simulate => {
            let n = bc.settings;
            let sched = optimal_schedule(n)?;
            let run = simulate_bell(&bc.source(), &sched, bc.integration_time_s, bc.trials, inv.seed, bc.sampling)?;
            let bounds = chained_bounds(n)?;
            let expected = bc.source().effective_visibility() * bounds.s_qm;
            let mut t = CsvTable::new([
                "trial", "term", "a", "b", "sign", "phase_sum_rad", "counts", "counts_shifted", "expectation", "sigma",
            ]);
            for tr in &run.trials {
                for (i, term) in tr.schedule.terms().iter().enumerate() {
                    let e = tr.schedule.expectations()[i].expect("simulated terms are complete");
                    t.push(vec![
                        (tr.trial as i64).into(),
                        i.into(),
                        term.a.into(),
                        term.b.into(),
                        i64::from(term.sign).into(),
                        tr.schedule.relative_angle(i).into(),
                        tr.counts[i].0.into(),
                        tr.counts[i].1.into(),
                        e.estimate.into(),
                        e.sigma.into(),
                    ]);
                }
            }
            let report = BellSimulation {
                settings: n,
                visibility: bc.visibility,
                amplitude_hz: bc.amplitude_hz,
                accidental_rate_hz: bc.accidental_rate_hz,
                integration_time_s: bc.integration_time_s,
                seed: inv.seed,
                s: run.s,
                expected_s: expected,
                deviation_sigmas: if run.s.sigma > 0.0 { (run.s.estimate - expected) / run.s.sigma } else { 0.0 },
                trials: run.trials.iter().map(|t| TrialS { trial: t.trial, s: t.s }).collect(),
                significance_over_local_bound: finite(run.s.significance_over(bounds.s_lhv)).unwrap_or(0.0),
                bounds,
            };
            bundle.add_csv("bell_trials.csv", &t);
            bundle.add_json("bell_simulation.json", &report).map_err(io)?;
        }
    }
    Ok(bundle)
}

// ------------------------------------------------------------------------ g2

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramRow {
    delay_s: f64,
    counts: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanRow {
    phase_rad: f64,
    port: String,
    counts: f64,
    time_s: f64,
}

#[derive(Debug, Serialize)]
struct G2Report {
    source: &'static str,
    g2: Estimate,
    accidentals_per_bin: f64,
    background_bins: usize,
    peak_bins: usize,
    classical_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cauchy_schwarz_sigmas: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PortReport {
    port: Port,
    raw_visibility: Estimate,
    corrected_visibility: Estimate,
    accidental_rate_hz: f64,
    mean_rate_hz: Estimate,
    phase_offset_rad: Estimate,
    chi_square: f64,
    points: usize,
}

#[derive(Debug, Serialize)]
struct FransonReport {
    source: &'static str,
    ports: Vec<PortReport>,
}

#[derive(Debug, Serialize)]
struct CorrelationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    g2: Option<G2Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    franson: Option<FransonReport>,
}

fn histogram_table(h: &CoincidenceHistogram) -> CsvTable {
    let mut t = CsvTable::new(["delay_s", "counts"]);
    for (i, &c) in h.counts.iter().enumerate() {
        let d = (i as f64 - h.center_bin as f64) * h.bin_width;
        t.push(vec![d.into(), (c as i64).into()]);
    }
    t
}

fn scan_table(s: &FransonScan) -> CsvTable {
    let mut t = CsvTable::new(["phase_rad", "port", "counts", "time_s"]);
    for p in &s.points {
        t.push(vec![p.phase.into(), p.port.as_str().into(), p.counts.into(), p.time.into()]);
    }
    t
}

fn cmd_g2(inv: &Invocation) -> CliResult<ReportBundle> {
    let cfg = inv.cfg();
    if cfg.g2.is_none() && cfg.franson.is_none() {
        return Err(config_err("g2", "need a g2 and/or franson section"));
    }
    // validate and load every input before computing anything
    let hist = match &cfg.g2 {
        Some(g) => {
            g.validate()?;
            Some(match &g.histogram_csv {
                Some(p) => {
                    let path = inv.loaded.resolve(p);
                    let rows: Vec<HistogramRow> = read_csv(&path)?;
                    for (i, r) in rows.iter().enumerate() {
                        require_finite(&path, i + 2, &[("delay_s", r.delay_s)])?;
                    }
                    let rows: Vec<(f64, u64)> = rows.iter().map(|r| (r.delay_s, r.counts)).collect();
                    let h = CoincidenceHistogram::from_delays(&rows, g.integration_time_s)
                        .map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
                    ("csv", h)
                }
                None => {
                    let s = g.synthetic.as_ref().expect("validated");
                    let h = simulate_histogram(
                        s.bins,
                        s.bin_width_s,
                        s.accidentals_per_bin,
                        s.peak_excess,
                        g.integration_time_s,
                        inv.seed,
                        g.sampling,
                    )?;
                    ("synthetic", h)
                }
            })
        }
        None => None,
    };
    let scan = match &cfg.franson {
        Some(f) => {
            f.validate()?;
            Some(match &f.scan_csv {
                Some(p) => {
                    let path = inv.loaded.resolve(p);
                    let rows: Vec<ScanRow> = read_csv(&path)?;
                    let mut points = Vec::with_capacity(rows.len());
                    for (i, r) in rows.iter().enumerate() {
                        let loc = format!("{}:{}", path.display(), i + 2);
                        require_finite(&path, i + 2, &[("phase_rad", r.phase_rad), ("counts", r.counts), ("time_s", r.time_s)])?;
                        let port: Port = r.port.parse().map_err(|e: Error| config_err(&loc, e.to_string()))?;
                        if r.counts < 0.0 || r.time_s <= 0.0 {
                            return Err(config_err(loc, "counts must be non-negative and time_s positive"));
                        }
                        points.push(ScanPoint {
                            phase: r.phase_rad,
                            port,
                            counts: r.counts,
                            time: r.time_s,
                        });
                    }
                    ("csv", FransonScan { points })
                }
                None => {
                    let s = f.synthetic.as_ref().expect("validated");
                    let phases: Vec<f64> = (0..s.phase_points)
                        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / s.phase_points as f64)
                        .collect();
                    let mut points = Vec::new();
                    for (k, pc) in f.ports.iter().enumerate() {
                        let src = FringeSource {
                            visibility: pc.visibility.expect("validated"),
                            amplitude: s.amplitude_hz,
                            accidental_rate: pc.accidental_rate_hz,
                        };
                        // one stream per configured port
                        let part = simulate_scan(&src, &phases, &[pc.port], s.integration_time_s, inv.seed, k as u64, f.sampling)?;
                        points.extend(part.points);
                    }
                    ("synthetic", FransonScan { points })
                }
            })
        }
        None => None,
    };

    let mut bundle = ReportBundle::new();
    let g2 = match (&cfg.g2, &hist) {
        (Some(g), Some((source, h))) => {
            let r = g2_normalize(h, &g.windows())?;
            if *source == "synthetic" {
                bundle.add_csv("g2_histogram.csv", &histogram_table(h));
            }
            Some(G2Report {
                source,
                g2: r.g2,
                accidentals_per_bin: r.accidentals_per_bin,
                background_bins: r.background_bins,
                peak_bins: r.peak_bins,
                classical_bound: THERMAL_CAUCHY_SCHWARZ_BOUND,
                cauchy_schwarz_sigmas: cauchy_schwarz_significance(r.g2.estimate, r.g2.sigma, THERMAL_CAUCHY_SCHWARZ_BOUND).ok(),
            })
        }
        _ => None,
    };
    let franson = match (&cfg.franson, &scan) {
        (Some(f), Some((source, s))) => {
            let mut ports = Vec::with_capacity(f.ports.len());
            let mut t = CsvTable::new([
                "port", "raw_visibility", "raw_sigma", "corrected_visibility", "corrected_sigma", "mean_rate_hz", "accidental_rate_hz",
            ]);
            for pc in &f.ports {
                let fit = fit_visibility(s, pc.port)?;
                let m = fit.mean_rate.estimate;
                let corr = correct_visibility(fit.visibility.estimate, m, pc.accidental_rate_hz)?;
                let scale = m / (m - pc.accidental_rate_hz);
                let corrected = Estimate::new(corr, fit.visibility.sigma * scale);
                t.push(vec![
                    pc.port.as_str().into(),
                    fit.visibility.estimate.into(),
                    fit.visibility.sigma.into(),
                    corrected.estimate.into(),
                    corrected.sigma.into(),
                    m.into(),
                    pc.accidental_rate_hz.into(),
                ]);
                ports.push(PortReport {
                    port: pc.port,
                    raw_visibility: fit.visibility,
                    corrected_visibility: corrected,
                    accidental_rate_hz: pc.accidental_rate_hz,
                    mean_rate_hz: fit.mean_rate,
                    phase_offset_rad: fit.phase_offset,
                    chi_square: fit.chi_square,
                    points: fit.points,
                });
            }
            bundle.add_csv("franson_fits.csv", &t);
            if *source == "synthetic" {
                bundle.add_csv("franson_scan.csv", &scan_table(s));
            }
            Some(FransonReport { source, ports })
        }
        _ => None,
    };
    bundle
        .add_json("g2.json", &CorrelationReport { g2, franson })
        .map_err(|e| CliError::Io(e.into()))?;
    Ok(bundle)
}
