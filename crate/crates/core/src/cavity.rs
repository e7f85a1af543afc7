//! Monolithic pump-enhancement cavity: finesse, power enhancement,
//! circulating power and the fundamental Gaussian mode.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numeric;

/// Geometry and coatings of a symmetric monolithic cavity at the pump wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    pub reflectivity_in: f64,
    pub reflectivity_out: f64,
    /// Fractional power loss per round trip, excluding facet transmission.
    pub round_trip_extra_loss: f64,
    pub geometric_length: f64,
    /// Radius of curvature of both (convex) end facets.
    pub facet_curvature_radius: f64,
    pub index_at_pump: f64,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("reflectivity_in", self.reflectivity_in), ("reflectivity_out", self.reflectivity_out)] {
            ensure(r > 0.0 && r < 1.0, || format!("{name} must lie in (0, 1), got {r}"))?;
        }
        let l = self.round_trip_extra_loss;
        ensure((0.0..1.0).contains(&l), || format!("round_trip_extra_loss must lie in [0, 1), got {l}"))?;
        for (name, v) in [
            ("geometric_length", self.geometric_length),
            ("facet_curvature_radius", self.facet_curvature_radius),
            ("index_at_pump", self.index_at_pump),
        ] {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))?;
        }
        Ok(())
    }

    /// Round-trip power survival `ρ = √(R_in R_out)·(1 − loss)`.
    pub fn round_trip_survival(&self) -> f64 {
        survival(self.reflectivity_in, self.reflectivity_out, self.round_trip_extra_loss)
    }
}

fn survival(r_in: f64, r_out: f64, loss: f64) -> f64 {
    (r_in * r_out).sqrt() * (1.0 - loss)
}

fn finesse_from_survival(rho: f64) -> Result<f64> {
    ensure(rho > 0.0 && rho < 1.0, || format!("round-trip survival must lie in (0, 1), got {rho}"))?;
    Ok(PI * rho.sqrt() / (1.0 - rho))
}

/// Finesse (FSR over FWHM of the Airy resonance), `F = π√ρ/(1 − ρ)`.
pub fn finesse(spec: &CavitySpec) -> Result<f64> {
    finesse_from_survival(spec.round_trip_survival())
}

/// Extra round-trip loss that reproduces a measured finesse, by bisection on ρ.
pub fn infer_round_trip_loss(measured_finesse: f64, r_in: f64, r_out: f64) -> Result<f64> {
    ensure(r_in > 0.0 && r_in < 1.0 && r_out > 0.0 && r_out < 1.0, || {
        format!("reflectivities must lie in (0, 1), got {r_in}, {r_out}")
    })?;
    let rho_max = survival(r_in, r_out, 0.0);
    let lossless = finesse_from_survival(rho_max)?;
    ensure(measured_finesse > 0.0, || format!("finesse must be positive, got {measured_finesse}"))?;
    ensure(measured_finesse <= lossless * (1.0 + 1e-12), || {
        format!("finesse {measured_finesse} exceeds the lossless bound {lossless} for these reflectivities")
    })?;
    if measured_finesse >= lossless {
        return Ok(0.0);
    }
    let rho = numeric::bisect(
        |rho| PI * rho.sqrt() / (1.0 - rho) - measured_finesse,
        f64::MIN_POSITIVE,
        rho_max,
        1e-15,
    )?;
    Ok((1.0 - rho / rho_max).max(0.0))
}

/// Resonant power enhancement `E = T_in / (1 − ρ)²` for a perfectly mode-matched input.
pub fn enhancement(spec: &CavitySpec) -> Result<f64> {
    let rho = spec.round_trip_survival();
    ensure(rho > 0.0 && rho < 1.0, || format!("round-trip survival must lie in (0, 1), got {rho}"))?;
    Ok((1.0 - spec.reflectivity_in) / (1.0 - rho).powi(2))
}

/// `p_in × mode_coupling × enhancement`
pub fn circulating_power(p_in: f64, mode_coupling: f64, enhancement: f64) -> Result<f64> {
    ensure(p_in >= 0.0, || format!("input power must be non-negative, got {p_in}"))?;
    ensure((0.0..=1.0).contains(&mode_coupling), || {
        format!("mode coupling must lie in [0, 1], got {mode_coupling}")
    })?;
    ensure(enhancement >= 0.0, || format!("enhancement must be non-negative, got {enhancement}"))?;
    Ok(p_in * mode_coupling * enhancement)
}

/// Fundamental mode of the symmetric cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMode {
    pub rayleigh_range: f64,
    /// `ξ = L / (2 z_R)`.
    pub focusing_parameter: f64,
    /// Waist radius inside the crystal, `w0 = √(λ z_R / (π n))`.
    pub waist_radius: f64,
}

/// Matches the Gaussian wavefront curvature to the facets at `z = ±L/2`:
/// `z_R = (L/2)·√(2R/L − 1)`.
pub fn resonator_mode(spec: &CavitySpec, lambda_pump: f64) -> Result<ResonatorMode> {
    spec.validate()?;
    ensure(lambda_pump > 0.0, || format!("pump wavelength must be positive, got {lambda_pump}"))?;
    let l = spec.geometric_length;
    let r = spec.facet_curvature_radius;
    ensure(2.0 * r - l > 0.0, || {
        format!("unstable resonator: need 2R > L, got R = {r}, L = {l}")
    })?;
    let z_r = 0.5 * l * (2.0 * r / l - 1.0).sqrt();
    Ok(ResonatorMode {
        rayleigh_range: z_r,
        focusing_parameter: l / (2.0 * z_r),
        waist_radius: (lambda_pump * z_r / (PI * spec.index_at_pump)).sqrt(),
    })
}

/// Summary figures of a cavity driven with `p_in` at the given coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFigures {
    pub finesse: f64,
    pub enhancement: f64,
    pub circulating_power: f64,
    pub mode_rayleigh_range: f64,
    pub focusing_parameter: f64,
}

pub fn cavity_figures(spec: &CavitySpec, lambda_pump: f64, p_in: f64, mode_coupling: f64) -> Result<CavityFigures> {
    let mode = resonator_mode(spec, lambda_pump)?;
    let e = enhancement(spec)?;
    Ok(CavityFigures {
        finesse: finesse(spec)?,
        enhancement: e,
        circulating_power: circulating_power(p_in, mode_coupling, e)?,
        mode_rayleigh_range: mode.rayleigh_range,
        focusing_parameter: mode.focusing_parameter,
    })
}
