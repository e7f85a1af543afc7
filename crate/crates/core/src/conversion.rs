//! Three-wave-mixing conversion efficiency: the sin² law, the saturation
//! power `P_max`, the Boyd–Kleinman focusing factor, the quasi-phase-matching
//! response and the depletion fit.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, SPEED_OF_LIGHT};
use crate::error::{ensure, Error, Result};
use crate::numeric::{self, Maximum};

/// Relative tolerance on `1/λr = 1/λp + 1/λt` for a process to be accepted.
pub const ENERGY_CONSERVATION_RTOL: f64 = 1e-4;

/// Absolute tolerance used for the Boyd–Kleinman quadrature.
pub const BK_QUAD_TOL: f64 = 1e-9;

/// σ-tolerance of the h_m maximization.
pub const BK_SIGMA_TOL: f64 = 1e-6;

/// Parameters of a difference/sum-frequency conversion process. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionProcess {
    /// Input ("red") vacuum wavelength.
    pub lambda_r: f64,
    /// Pump vacuum wavelength.
    pub lambda_p: f64,
    /// Target (telecom) vacuum wavelength.
    pub lambda_t: f64,
    pub n_r: f64,
    pub n_p: f64,
    pub n_t: f64,
    /// Effective nonlinear coefficient [m/V].
    pub d_eff: f64,
    pub crystal_length: f64,
    /// Length of one poled domain; the poling period is twice this.
    pub domain_length: f64,
}

impl ConversionProcess {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda_r", self.lambda_r),
            ("lambda_p", self.lambda_p),
            ("lambda_t", self.lambda_t),
            ("n_r", self.n_r),
            ("n_p", self.n_p),
            ("n_t", self.n_t),
            ("d_eff", self.d_eff),
            ("crystal_length", self.crystal_length),
            ("domain_length", self.domain_length),
        ];
        for (name, v) in fields {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))?;
        }
        let mismatch = energy_mismatch(self.lambda_r, self.lambda_p, self.lambda_t);
        ensure(mismatch <= ENERGY_CONSERVATION_RTOL, || {
            format!("energy conservation violated: relative mismatch {mismatch:e}")
        })
    }

    pub fn poling_period(&self) -> f64 {
        2.0 * self.domain_length
    }
}

/// `|1/λr − 1/λp − 1/λt| / (1/λr)`
pub fn energy_mismatch(lambda_r: f64, lambda_p: f64, lambda_t: f64) -> f64 {
    let inv_r = 1.0 / lambda_r;
    ((inv_r - 1.0 / lambda_p - 1.0 / lambda_t) / inv_r).abs()
}

/// Which two wavelengths of the triple are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownPair {
    RedPump,
    RedTarget,
    PumpTarget,
}

/// Returns the missing wavelength of the triple from energy conservation.
pub fn complete_wavelength_triple(lambda_a: f64, lambda_b: f64, known: KnownPair) -> Result<f64> {
    ensure(
        lambda_a.is_finite() && lambda_b.is_finite() && lambda_a > 0.0 && lambda_b > 0.0,
        || format!("wavelengths must be positive, got {lambda_a}, {lambda_b}"),
    )?;
    let inv = match known {
        // a = red, b = pump -> target
        KnownPair::RedPump => 1.0 / lambda_a - 1.0 / lambda_b,
        // a = red, b = target -> pump
        KnownPair::RedTarget => 1.0 / lambda_a - 1.0 / lambda_b,
        // a = pump, b = target -> red
        KnownPair::PumpTarget => 1.0 / lambda_a + 1.0 / lambda_b,
    };
    ensure(inv > 0.0, || {
        format!("no physical solution: red wavelength {lambda_a} must be shorter than {lambda_b}")
    })?;
    Ok(1.0 / inv)
}

/// Complex `e^{iστ}/(1+iτ)` split into real and imaginary parts.
fn bk_kernel(sigma: f64, tau: f64) -> (f64, f64) {
    let (s, c) = (sigma * tau).sin_cos();
    let denom = 1.0 + tau * tau;
    // (c + i s)(1 - i τ) / (1 + τ²)
    ((c + s * tau) / denom, (s - c * tau) / denom)
}

/// Boyd–Kleinman factor `h(σ, ξ) = |∫_{−ξ}^{ξ} e^{iστ}/(1+iτ) dτ|² / (4ξ)` for
/// matched confocal parameters, no walk-off and no absorption.
pub fn bk_integrand_factor(sigma: f64, xi: f64) -> Result<f64> {
    ensure(xi.is_finite() && xi > 0.0, || format!("xi must be positive, got {xi}"))?;
    ensure(sigma.is_finite(), || format!("sigma must be finite, got {sigma}"))?;
    let re = numeric::integrate(|t| bk_kernel(sigma, t).0, -xi, xi, BK_QUAD_TOL)?;
    let im = numeric::integrate(|t| bk_kernel(sigma, t).1, -xi, xi, BK_QUAD_TOL)?;
    Ok((re.value * re.value + im.value * im.value) / (4.0 * xi))
}

/// Optimal phase-mismatch σ and the corresponding factor for focusing `xi`.
pub fn h_m_with_sigma(xi: f64) -> Result<Maximum> {
    ensure(xi.is_finite() && xi > 0.0, || format!("xi must be positive, got {xi}"))?;
    let (mut lo, mut hi) = (0.0_f64, 6.0_f64);
    for _ in 0..8 {
        let m = numeric::scan_then_golden_max(|s| bk_integrand_factor(s, xi), lo, hi, 61, BK_SIGMA_TOL)?;
        // optimum pinned against the upper edge: widen and retry
        if hi - m.argmax > 2.0 * BK_SIGMA_TOL {
            return Ok(m);
        }
        lo = hi / 2.0;
        hi *= 2.0;
    }
    Err(Error::numeric("h_m", format!("optimum σ not bracketed below {hi} for ξ = {xi}")))
}

/// Boyd–Kleinman reduction factor `h_m(ξ) = max_σ h(σ, ξ)`.
pub fn h_m(xi: f64) -> Result<f64> {
    h_m_with_sigma(xi).map(|m| m.value)
}

/// Searches `ξ ∈ [lo, hi]` for the focusing that maximizes `h_m`.
pub fn optimal_focusing(lo: f64, hi: f64) -> Result<Maximum> {
    numeric::golden_max(h_m, lo, hi, 1e-5)
}

/// Saturation pump power of the sin² law:
/// `P_max = c ε0 n_t n_r λ_t λ_r λ_p / (128 d_eff² L h)`.
pub fn p_max(process: &ConversionProcess, h: f64) -> Result<f64> {
    process.validate()?;
    ensure(h.is_finite() && h > 0.0, || format!("focusing factor must be positive, got {h}"))?;
    let p = process;
    Ok(SPEED_OF_LIGHT * EPSILON_0 * p.n_t * p.n_r * p.lambda_t * p.lambda_r * p.lambda_p
        / (128.0 * p.d_eff * p.d_eff * p.crystal_length * h))
}

/// `η = sin²((π/2)·√(P/P_max))`
pub fn conversion_efficiency(p_pump: f64, p_max: f64) -> Result<f64> {
    ensure(p_pump >= 0.0, || format!("pump power must be non-negative, got {p_pump}"))?;
    ensure(p_max > 0.0, || format!("P_max must be positive, got {p_max}"))?;
    Ok((FRAC_PI_2 * (p_pump / p_max).sqrt()).sin().powi(2))
}

/// Pump power reaching efficiency `eta` on the first lobe of the sin² law.
pub fn pump_for_target_efficiency(eta: f64, p_max: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&eta), || format!("efficiency must lie in [0, 1], got {eta}"))?;
    ensure(p_max > 0.0, || format!("P_max must be positive, got {p_max}"))?;
    let x = eta.sqrt().asin() / FRAC_PI_2;
    Ok(p_max * x * x)
}

/// `sinc²(Δk·L/2)`
pub fn phase_matching_response(delta_k: f64, length: f64) -> Result<f64> {
    ensure(length > 0.0, || format!("length must be positive, got {length}"))?;
    let x = 0.5 * delta_k * length;
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok((x.sin() / x).powi(2))
}

/// Positive `x` with `sinc²(x) = 1/2`, found by bisection.
pub fn sinc2_half_max_argument() -> f64 {
    numeric::bisect(|x| (x.sin() / x).powi(2) - 0.5, 0.5, 3.0, 1e-14)
        .expect("sinc² crosses 1/2 on [0.5, 3]")
}

/// Converts a frequency bandwidth to a wavelength bandwidth, `Δλ = λ²Δν/c`.
pub fn bandwidth_wavelength_from_frequency(delta_nu: f64, lambda: f64) -> Result<f64> {
    ensure(delta_nu >= 0.0 && lambda > 0.0, || {
        format!("bandwidth and wavelength must be non-negative/positive, got {delta_nu}, {lambda}")
    })?;
    Ok(lambda * lambda * delta_nu / SPEED_OF_LIGHT)
}

/// One internal-efficiency point of a depletion measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepletionSample {
    pub circulating_power: f64,
    pub efficiency: f64,
    /// One-sigma uncertainty of `efficiency`, if known.
    pub uncertainty: Option<f64>,
}

impl DepletionSample {
    pub fn new(circulating_power: f64, efficiency: f64, uncertainty: Option<f64>) -> Self {
        DepletionSample {
            circulating_power,
            efficiency,
            uncertainty,
        }
    }

    /// Validates the sample, clamping an efficiency that overshoots `[0, 1]`
    /// by no more than its uncertainty.
    pub fn ingest(self) -> Result<Self> {
        let Self {
            circulating_power: p,
            efficiency: e,
            uncertainty: u,
        } = self;
        ensure(p.is_finite() && p >= 0.0, || format!("circulating power must be non-negative, got {p}"))?;
        if let Some(u) = u {
            ensure(u.is_finite() && u > 0.0, || format!("uncertainty must be positive, got {u}"))?;
        }
        ensure(e.is_finite(), || format!("efficiency must be finite, got {e}"))?;
        if (0.0..=1.0).contains(&e) {
            return Ok(self);
        }
        let excess = if e < 0.0 { -e } else { e - 1.0 };
        match u {
            Some(u) if excess <= u => {
                log::warn!("efficiency {e} at {p} W outside [0, 1] within its uncertainty {u}; clamped");
                Ok(Self {
                    efficiency: e.clamp(0.0, 1.0),
                    ..self
                })
            }
            _ => Err(Error::domain(format!("efficiency {e} at {p} W outside [0, 1]"))),
        }
    }
}

/// Result of fitting `P_max` to depletion data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmaxFit {
    pub p_max: f64,
    pub uncertainty: f64,
    /// Weighted residual norm `sqrt(Σ w r²)`.
    pub residual_norm: f64,
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 200;
const FIT_STEP_RTOL: f64 = 1e-10;

/// Weighted least-squares fit of the one-parameter sin² law by damped
/// Gauss–Newton with an analytic derivative.
pub fn fit_pmax(samples: &[DepletionSample]) -> Result<PmaxFit> {
    let samples = samples
        .iter()
        .map(|s| s.ingest())
        .collect::<Result<Vec<_>>>()?;
    ensure(samples.len() >= 3, || format!("need at least 3 samples, got {}", samples.len()))?;
    let p_lo = samples.iter().map(|s| s.circulating_power).fold(f64::INFINITY, f64::min);
    let p_hi = samples.iter().map(|s| s.circulating_power).fold(0.0, f64::max);
    ensure(p_hi > p_lo, || "all samples share the same pump power".to_string())?;
    ensure(p_hi > 0.0, || "all pump powers are zero".to_string())?;

    let weighted = samples.iter().any(|s| s.uncertainty.is_some());
    let weight = |s: &DepletionSample| s.uncertainty.map_or(1.0, |u| 1.0 / (u * u));
    let cost = |pm: f64| -> f64 {
        samples
            .iter()
            .map(|s| {
                let r = s.efficiency - (FRAC_PI_2 * (s.circulating_power / pm).sqrt()).sin().powi(2);
                weight(s) * r * r
            })
            .sum()
    };

    // Start from the best point of a log-spaced scan so the iteration lands
    // on the first lobe of the sin² law.
    let (scan_lo, scan_hi) = (p_hi / 20.0, p_hi * 1000.0);
    let mut pm = scan_lo;
    let mut best = f64::INFINITY;
    for i in 0..=400 {
        let cand = scan_lo * (scan_hi / scan_lo).powf(i as f64 / 400.0);
        let c = cost(cand);
        if c < best {
            best = c;
            pm = cand;
        }
    }

    let mut lambda = 1e-3;
    let mut current = best;
    for iter in 1..=FIT_MAX_ITER {
        let (mut jtj, mut jtr) = (0.0, 0.0);
        for s in &samples {
            let u = FRAC_PI_2 * (s.circulating_power / pm).sqrt();
            let r = s.efficiency - u.sin().powi(2);
            // dη/dP_max = −sin(2u)·u / (2 P_max)
            let j = -(2.0 * u).sin() * u / (2.0 * pm);
            let w = weight(s);
            jtj += w * j * j;
            jtr += w * j * r;
        }
        if jtj == 0.0 {
            return Err(Error::Fit {
                iterations: iter,
                last_estimate: pm,
            });
        }
        let mut accepted = None;
        for _ in 0..60 {
            let step = jtr / (jtj * (1.0 + lambda));
            let cand = pm + step;
            if cand > 0.0 {
                let c = cost(cand);
                if c <= current {
                    accepted = Some((cand, c, step));
                    break;
                }
            }
            lambda *= 10.0;
        }
        match accepted {
            Some((cand, c, step)) => {
                pm = cand;
                current = c;
                lambda = (lambda / 10.0).max(1e-12);
                if step.abs() <= FIT_STEP_RTOL * pm {
                    return Ok(finish_pmax_fit(&samples, pm, current, weighted, iter));
                }
            }
            // no downhill step at any damping: we sit at the minimum
            None => return Ok(finish_pmax_fit(&samples, pm, current, weighted, iter)),
        }
    }
    Err(Error::Fit {
        iterations: FIT_MAX_ITER,
        last_estimate: pm,
    })
}

fn finish_pmax_fit(samples: &[DepletionSample], pm: f64, cost: f64, weighted: bool, iterations: usize) -> PmaxFit {
    let mut jtj = 0.0;
    for s in samples {
        let u = FRAC_PI_2 * (s.circulating_power / pm).sqrt();
        let j = -(2.0 * u).sin() * u / (2.0 * pm);
        let w = s.uncertainty.map_or(1.0, |u| 1.0 / (u * u));
        jtj += w * j * j;
    }
    let mut variance = 1.0 / jtj;
    if !weighted {
        // unit weights: scale by the reduced chi-square
        variance *= cost / (samples.len() as f64 - 1.0);
    }
    PmaxFit {
        p_max: pm,
        uncertainty: variance.sqrt(),
        residual_norm: cost.sqrt(),
        iterations,
    }
}

/// Draws depletion samples from the sin² law with additive Gaussian noise of
/// standard deviation `noise_sd` on the efficiency. Zero noise gives the
/// forward model exactly.
pub fn simulate_depletion<R: Rng + ?Sized>(
    p_max: f64,
    powers: &[f64],
    noise_sd: f64,
    rng: &mut R,
) -> Result<Vec<DepletionSample>> {
    ensure(noise_sd >= 0.0, || format!("noise must be non-negative, got {noise_sd}"))?;
    let normal = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::domain(e.to_string()))?;
    powers
        .iter()
        .map(|&p| {
            let eta = conversion_efficiency(p, p_max)?;
            let noisy = if noise_sd > 0.0 { eta + normal.sample(rng) } else { eta };
            Ok(DepletionSample::new(p, noisy, (noise_sd > 0.0).then_some(noise_sd)))
        })
        .collect()
}

/// First-lobe efficiency curve sampled at `powers`.
pub fn efficiency_curve(powers: &[f64], p_max: f64) -> Result<Vec<(f64, f64)>> {
    powers
        .iter()
        .map(|&p| conversion_efficiency(p, p_max).map(|e| (p, e)))
        .collect()
}
