//! Poissonian coincidence-count simulator.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the run seed and `set_stream(trial_index)`, so trials are
//! independent of evaluation order and reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::bell::{chained_s, model_term_rates, two_detector_completion, bell_expectation, BellSchedule};
use super::franson::{franson_model, FransonScan, Port, ScanPoint};
use super::g2::CoincidenceHistogram;
use super::{combine_trials, Estimate};
use crate::error::{ensure, Error, Result};

/// Whether counts are drawn or set to their expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Poisson,
    /// Infinite-statistics limit: counts equal their mean.
    Expected,
}

/// Fringe source: coincidence amplitude, true visibility and flat accidentals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSource {
    pub visibility: f64,
    /// Peak-to-zero coincidence amplitude `A` of the fringe [Hz].
    pub amplitude: f64,
    pub accidental_rate: f64,
}

impl FringeSource {
    pub fn validate(&self) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.visibility), || {
            format!("visibility must lie in [0, 1], got {}", self.visibility)
        })?;
        ensure(self.amplitude >= 0.0 && self.accidental_rate >= 0.0, || {
            "amplitude and accidental rate must be non-negative".to_string()
        })
    }

    /// Visibility of the recorded fringe including the accidental pedestal.
    pub fn effective_visibility(&self) -> f64 {
        let mean = 0.5 * self.amplitude;
        self.visibility * mean / (mean + self.accidental_rate)
    }
}

/// ChaCha8 stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn draw<R: Rng + ?Sized>(mean: f64, sampling: Sampling, rng: &mut R) -> Result<f64> {
    ensure(mean >= 0.0 && mean.is_finite(), || format!("invalid Poisson mean {mean}"))?;
    match sampling {
        Sampling::Expected => Ok(mean),
        Sampling::Poisson if mean == 0.0 => Ok(0.0),
        Sampling::Poisson => {
            let p = Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?;
            Ok(p.sample(rng))
        }
    }
}

/// One simulated chained-inequality trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellTrial {
    pub trial: u64,
    /// Raw `(R++(θ), R++(θ+π))` counts per term, canonical term order.
    pub counts: Vec<(f64, f64)>,
    pub schedule: BellSchedule,
    pub s: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellRun {
    pub trials: Vec<BellTrial>,
    /// Trial average; standard error from the spread when ≥ 3 trials.
    pub s: Estimate,
}

/// Simulates `trials` repetitions of a chained test under the two-detector
/// protocol: each term is recorded at its setting and at the setting
/// shifted by π, each for `integration_time` seconds.
pub fn simulate_bell(
    source: &FringeSource,
    schedule: &BellSchedule,
    integration_time: f64,
    trials: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<BellRun> {
    source.validate()?;
    ensure(integration_time > 0.0, || format!("integration time must be positive, got {integration_time}"))?;
    ensure(trials >= 1, || "need at least one trial".to_string())?;
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials as u64 {
        let mut rng = trial_rng(seed, trial);
        let mut sched = schedule.clone();
        let mut counts = Vec::with_capacity(sched.terms().len());
        for i in 0..sched.terms().len() {
            let (r, r_pi) = model_term_rates(sched.relative_angle(i), source.amplitude, source.visibility, source.accidental_rate);
            let n = draw(r * integration_time, sampling, &mut rng)?;
            let n_pi = draw(r_pi * integration_time, sampling, &mut rng)?;
            counts.push((n, n_pi));
            let rates = two_detector_completion(
                Estimate::poisson_rate(n, integration_time),
                Estimate::poisson_rate(n_pi, integration_time),
            )?;
            sched.set_term(i, bell_expectation(&rates)?)?;
        }
        let s = chained_s(&sched)?;
        out.push(BellTrial {
            trial,
            counts,
            schedule: sched,
            s,
        });
    }
    let per_trial: Vec<Estimate> = out.iter().map(|t| t.s).collect();
    let s = combine_trials(&per_trial).expect("at least one trial");
    Ok(BellRun { trials: out, s })
}

/// Simulates a Franson phase scan on the given ports. Mixed-sign ports
/// fringe in antiphase with same-sign ports.
pub fn simulate_scan(
    source: &FringeSource,
    phases: &[f64],
    ports: &[Port],
    integration_time: f64,
    seed: u64,
    trial: u64,
    sampling: Sampling,
) -> Result<FransonScan> {
    source.validate()?;
    ensure(integration_time > 0.0, || format!("integration time must be positive, got {integration_time}"))?;
    let mut rng = trial_rng(seed, trial);
    let mut points = Vec::with_capacity(phases.len() * ports.len());
    for &phase in phases {
        for &port in ports {
            let shift = if port.fringe_sign() > 0.0 { 0.0 } else { std::f64::consts::PI };
            let rate = franson_model(phase + shift, source.amplitude, source.visibility, 0.0) + source.accidental_rate;
            points.push(ScanPoint {
                phase,
                port,
                counts: draw(rate * integration_time, sampling, &mut rng)?,
                time: integration_time,
            });
        }
    }
    Ok(FransonScan { points })
}

/// Flat accidental histogram with an extra coincidence peak in the centre bin.
pub fn simulate_histogram(
    bins: usize,
    bin_width: f64,
    accidentals_per_bin: f64,
    peak_excess: f64,
    integration_time: f64,
    seed: u64,
    sampling: Sampling,
) -> Result<CoincidenceHistogram> {
    ensure(bins >= 3, || format!("need at least 3 bins, got {bins}"))?;
    let mut rng = trial_rng(seed, 0);
    let center = bins / 2;
    let counts = (0..bins)
        .map(|i| {
            let mean = accidentals_per_bin + if i == center { peak_excess } else { 0.0 };
            draw(mean, sampling, &mut rng).map(|c| c.round() as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let h = CoincidenceHistogram {
        bin_width,
        counts,
        integration_time,
        center_bin: center,
    };
    h.validate()?;
    Ok(h)
}

/// What [`simulate_counts`] generates data for.
#[derive(Debug, Clone)]
pub enum SimulationTarget<'a> {
    Schedule(&'a BellSchedule),
    Scan { phases: &'a [f64], ports: &'a [Port] },
}

#[derive(Debug, Clone)]
pub enum SyntheticData {
    Bell(BellRun),
    Scans(Vec<FransonScan>),
}

/// Front end over [`simulate_bell`] and [`simulate_scan`].
pub fn simulate_counts(
    source: &FringeSource,
    target: SimulationTarget<'_>,
    integration_time: f64,
    trials: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<SyntheticData> {
    match target {
        SimulationTarget::Schedule(s) => simulate_bell(source, s, integration_time, trials, seed, sampling).map(SyntheticData::Bell),
        SimulationTarget::Scan { phases, ports } => {
            ensure(trials >= 1, || "need at least one trial".to_string())?;
            (0..trials as u64)
                .map(|t| simulate_scan(source, phases, ports, integration_time, seed, t, sampling))
                .collect::<Result<Vec<_>>>()
                .map(SyntheticData::Scans)
        }
    }
}
