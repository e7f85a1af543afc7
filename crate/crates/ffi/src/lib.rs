//! C ABI over the qfc-link models.
//!
//! Every fallible function returns a [`QfcStatus`] and writes results through
//! out-pointers; on failure the out-pointers are left untouched and
//! [`qfc_last_error_message`] describes the error. Link budgets and Bell
//! schedules are opaque handles released with their `_free` function.
//! Panics never cross the boundary.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access implied by their
//! type for the duration of the call; nulls are rejected with
//! `QFC_STATUS_NULL_POINTER`. Handles must come from the matching `_new` or
//! constructor function and must not be used after `_free`. Array arguments
//! must point to at least the stated number of elements.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qfc_link::cavity::{cavity_figures, infer_round_trip_loss, CavitySpec};
use qfc_link::conversion::{
    bandwidth_wavelength_from_frequency, bk_integrand_factor, conversion_efficiency, h_m, optimal_focusing, p_max,
    ConversionProcess,
};
use qfc_link::link::{distance_for_snr, snr_at_distance, LinkBudget};
use qfc_link::verification::bell::{chained_bounds, chained_s, optimal_schedule, BellSchedule};
use qfc_link::verification::g2::{cauchy_schwarz_significance, g2_normalize, CoincidenceHistogram, G2Windows};
use qfc_link::verification::Estimate;
use qfc_link::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QfcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An input violated a precondition.
    Domain = 2,
    /// A numerical routine failed to converge.
    Numeric = 3,
    /// A least-squares fit failed.
    Fit = 4,
    /// A Bell schedule is missing expectations.
    Incomplete = 5,
    /// Internal error; the library state is unchanged.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> QfcStatus {
    match e {
        Error::Domain(_) => QfcStatus::Domain,
        Error::Numeric { .. } => QfcStatus::Numeric,
        Error::Fit { .. } => QfcStatus::Fit,
    }
}

enum Failure {
    Null(&'static str),
    Model(Error),
    Incomplete(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

/// Runs `f`, records any error and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QfcStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            QfcStatus::NullPointer
        }
        Ok(Err(Failure::Model(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Incomplete(m))) => {
            set_error(m);
            QfcStatus::Incomplete
        }
        Err(_) => {
            set_error("internal panic");
            QfcStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees a non-null pointer is valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn inp<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees a non-null pointer is valid for reads.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

/// Message describing the last failure on this thread; empty after success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qfc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qfc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- conversion

/// Three-wave-mixing process; wavelengths and lengths in metres, `d_eff` in m/V.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QfcProcess {
    pub lambda_red: f64,
    pub lambda_pump: f64,
    pub lambda_target: f64,
    pub n_red: f64,
    pub n_pump: f64,
    pub n_target: f64,
    pub d_eff: f64,
    pub crystal_length: f64,
    pub domain_length: f64,
}

/// `sin²(π/2 · √(P/P_max))`
#[no_mangle]
pub unsafe extern "C" fn qfc_conversion_efficiency(p_pump: f64, p_max: f64, eta: *mut f64) -> QfcStatus {
    guard(|| {
        let eta = out(eta, "eta")?;
        *eta = conversion_efficiency(p_pump, p_max)?;
        Ok(())
    })
}

/// Boyd–Kleinman factor `h(σ, ξ)`.
#[no_mangle]
pub unsafe extern "C" fn qfc_bk_factor(sigma: f64, xi: f64, h: *mut f64) -> QfcStatus {
    guard(|| {
        let h = out(h, "h")?;
        *h = bk_integrand_factor(sigma, xi)?;
        Ok(())
    })
}

/// `h_m(ξ)`, maximized over the phase mismatch.
#[no_mangle]
pub unsafe extern "C" fn qfc_h_m(xi: f64, h: *mut f64) -> QfcStatus {
    guard(|| {
        let h = out(h, "h")?;
        *h = h_m(xi)?;
        Ok(())
    })
}

/// Focusing parameter maximizing `h_m` on `[lo, hi]`.
#[no_mangle]
pub unsafe extern "C" fn qfc_optimal_focusing(lo: f64, hi: f64, xi: *mut f64, h: *mut f64) -> QfcStatus {
    guard(|| {
        let (xi, h) = (out(xi, "xi")?, out(h, "h")?);
        let m = optimal_focusing(lo, hi)?;
        *xi = m.argmax;
        *h = m.value;
        Ok(())
    })
}

/// Saturation pump power [W] for a process and focusing factor.
#[no_mangle]
pub unsafe extern "C" fn qfc_p_max(process: *const QfcProcess, h: f64, p: *mut f64) -> QfcStatus {
    guard(|| {
        let q = inp(process, "process")?;
        let p = out(p, "p")?;
        let proc_ = ConversionProcess {
            lambda_r: q.lambda_red,
            lambda_p: q.lambda_pump,
            lambda_t: q.lambda_target,
            n_r: q.n_red,
            n_p: q.n_pump,
            n_t: q.n_target,
            d_eff: q.d_eff,
            crystal_length: q.crystal_length,
            domain_length: q.domain_length,
        };
        *p = p_max(&proc_, h)?;
        Ok(())
    })
}

/// Wavelength width [m] of a frequency width `delta_nu` [Hz] at `lambda` [m].
#[no_mangle]
pub unsafe extern "C" fn qfc_bandwidth_wavelength(delta_nu: f64, lambda: f64, width: *mut f64) -> QfcStatus {
    guard(|| {
        let w = out(width, "width")?;
        *w = bandwidth_wavelength_from_frequency(delta_nu, lambda)?;
        Ok(())
    })
}

// -------------------------------------------------------------------- cavity

/// Monolithic cavity; lengths in metres.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QfcCavity {
    pub reflectivity_in: f64,
    pub reflectivity_out: f64,
    pub round_trip_extra_loss: f64,
    pub geometric_length: f64,
    pub facet_curvature_radius: f64,
    pub index_at_pump: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QfcCavityFigures {
    pub finesse: f64,
    pub enhancement: f64,
    pub circulating_power: f64,
    pub mode_rayleigh_range: f64,
    pub focusing_parameter: f64,
}

#[no_mangle]
pub unsafe extern "C" fn qfc_cavity_figures(
    cavity: *const QfcCavity,
    lambda_pump: f64,
    p_in: f64,
    mode_coupling: f64,
    figures: *mut QfcCavityFigures,
) -> QfcStatus {
    guard(|| {
        let c = inp(cavity, "cavity")?;
        let f = out(figures, "figures")?;
        let spec = CavitySpec {
            reflectivity_in: c.reflectivity_in,
            reflectivity_out: c.reflectivity_out,
            round_trip_extra_loss: c.round_trip_extra_loss,
            geometric_length: c.geometric_length,
            facet_curvature_radius: c.facet_curvature_radius,
            index_at_pump: c.index_at_pump,
        };
        let r = cavity_figures(&spec, lambda_pump, p_in, mode_coupling)?;
        *f = QfcCavityFigures {
            finesse: r.finesse,
            enhancement: r.enhancement,
            circulating_power: r.circulating_power,
            mode_rayleigh_range: r.mode_rayleigh_range,
            focusing_parameter: r.focusing_parameter,
        };
        Ok(())
    })
}

/// Extra round-trip loss reproducing a measured finesse.
#[no_mangle]
pub unsafe extern "C" fn qfc_infer_round_trip_loss(finesse: f64, r_in: f64, r_out: f64, loss: *mut f64) -> QfcStatus {
    guard(|| {
        let l = out(loss, "loss")?;
        *l = infer_round_trip_loss(finesse, r_in, r_out)?;
        Ok(())
    })
}

// ---------------------------------------------------------------------- link

/// Distance-independent link parameters (see the Rust `LinkBudget`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QfcLinkParams {
    pub eta_ext: f64,
    pub source_rate_hz: f64,
    pub converter_noise_hz: f64,
    pub dark_rate_hz: f64,
    pub attenuation_db_per_km: f64,
    pub filter_width_nm: f64,
    pub filter_transmission: f64,
    pub detection_efficiency: f64,
}

/// Opaque validated link budget.
pub struct QfcLinkBudget(LinkBudget);

#[no_mangle]
pub unsafe extern "C" fn qfc_link_budget_new(params: *const QfcLinkParams, handle: *mut *mut QfcLinkBudget) -> QfcStatus {
    guard(|| {
        let p = inp(params, "params")?;
        let h = out(handle, "handle")?;
        let b = LinkBudget {
            eta_ext: p.eta_ext,
            source_rate: p.source_rate_hz,
            converter_noise: p.converter_noise_hz,
            dark_rate: p.dark_rate_hz,
            attenuation_db_per_km: p.attenuation_db_per_km,
            filter_width_nm: p.filter_width_nm,
            filter_transmission: p.filter_transmission,
            detection_efficiency: p.detection_efficiency,
        };
        b.validate()?;
        *h = Box::into_raw(Box::new(QfcLinkBudget(b)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qfc_link_budget_snr(handle: *const QfcLinkBudget, x_km: f64, snr: *mut f64) -> QfcStatus {
    guard(|| {
        let b = inp(handle, "handle")?;
        let s = out(snr, "snr")?;
        *s = snr_at_distance(&b.0, x_km)?;
        Ok(())
    })
}

/// Fiber length [km] at which the SNR falls to `threshold`.
#[no_mangle]
pub unsafe extern "C" fn qfc_link_budget_distance(handle: *const QfcLinkBudget, threshold: f64, x_km: *mut f64) -> QfcStatus {
    guard(|| {
        let b = inp(handle, "handle")?;
        let x = out(x_km, "x_km")?;
        *x = distance_for_snr(&b.0, threshold)?;
        Ok(())
    })
}

/// Releases a budget; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qfc_link_budget_free(handle: *mut QfcLinkBudget) {
    if !handle.is_null() {
        // SAFETY: non-null handles come from qfc_link_budget_new and are freed once.
        drop(unsafe { Box::from_raw(handle) });
    }
}

// -------------------------------------------------------------- verification

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QfcChainedBounds {
    pub s_lhv: f64,
    pub s_qm: f64,
    pub v_crit: f64,
}

#[no_mangle]
pub unsafe extern "C" fn qfc_chained_bounds(n: usize, bounds: *mut QfcChainedBounds) -> QfcStatus {
    guard(|| {
        let o = out(bounds, "bounds")?;
        let b = chained_bounds(n)?;
        *o = QfcChainedBounds {
            s_lhv: b.s_lhv,
            s_qm: b.s_qm,
            v_crit: b.v_crit,
        };
        Ok(())
    })
}

/// Opaque chained-inequality schedule with per-term expectations.
pub struct QfcBellSchedule(BellSchedule);

fn new_schedule(s: BellSchedule, handle: *mut *mut QfcBellSchedule) -> Result<(), Failure> {
    let h = out(handle, "handle")?;
    *h = Box::into_raw(Box::new(QfcBellSchedule(s)));
    Ok(())
}

/// Schedule with the optimal phase settings for `n` settings and no expectations.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_optimal(n: usize, handle: *mut *mut QfcBellSchedule) -> QfcStatus {
    guard(|| new_schedule(optimal_schedule(n)?, handle))
}

/// Schedule for externally measured expectations.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_unphased(n: usize, handle: *mut *mut QfcBellSchedule) -> QfcStatus {
    guard(|| new_schedule(BellSchedule::unphased(n)?, handle))
}

/// Number of terms (2N).
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_term_count(handle: *const QfcBellSchedule) -> usize {
    // SAFETY: caller passes a live handle or null.
    unsafe { handle.as_ref() }.map_or(0, |s| s.0.terms().len())
}

/// Sets correlator `(a, b)`; settings are 1-based.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_set_pair(
    handle: *mut QfcBellSchedule,
    a: usize,
    b: usize,
    expectation: f64,
    sigma: f64,
) -> QfcStatus {
    guard(|| {
        let s = out(handle, "handle")?;
        s.0.set_pair(a, b, Estimate::new(expectation, sigma))?;
        Ok(())
    })
}

/// Fills every term with the noise-free fringe expectation at `visibility`.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_fill_model(handle: *mut QfcBellSchedule, visibility: f64) -> QfcStatus {
    guard(|| {
        let s = out(handle, "handle")?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::Domain(format!("visibility must lie in [0, 1], got {visibility}")).into());
        }
        s.0 = s.0.clone().with_model_expectations(visibility);
        Ok(())
    })
}

/// Chained sum `S` and its uncertainty; `Incomplete` if any term is unset.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_chained_s(handle: *const QfcBellSchedule, s: *mut f64, sigma: *mut f64) -> QfcStatus {
    guard(|| {
        let h = inp(handle, "handle")?;
        let (s, sigma) = (out(s, "s")?, out(sigma, "sigma")?);
        if !h.0.is_complete() {
            let missing = h.0.expectations().iter().filter(|e| e.is_none()).count();
            return Err(Failure::Incomplete(format!("{missing} of {} terms unset", h.0.terms().len())));
        }
        let r = chained_s(&h.0)?;
        *s = r.estimate;
        *sigma = r.sigma;
        Ok(())
    })
}

/// Releases a schedule; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qfc_bell_schedule_free(handle: *mut QfcBellSchedule) {
    if !handle.is_null() {
        // SAFETY: non-null handles come from a qfc_bell_schedule_* constructor and are freed once.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Normalized g² of a coincidence histogram and its Cauchy–Schwarz
/// significance over the thermal bound 2.
#[no_mangle]
pub unsafe extern "C" fn qfc_g2_normalize(
    counts: *const u64,
    len: usize,
    center_bin: usize,
    bin_width: f64,
    integration_time: f64,
    peak_half_width: usize,
    exclusion_half_width: usize,
    g2: *mut f64,
    sigma: *mut f64,
    significance: *mut f64,
) -> QfcStatus {
    guard(|| {
        if counts.is_null() {
            return Err(Failure::Null("counts"));
        }
        let (g2, sigma, significance) = (out(g2, "g2")?, out(sigma, "sigma")?, out(significance, "significance")?);
        // SAFETY: caller guarantees `counts` points to `len` readable values.
        let data = unsafe { std::slice::from_raw_parts(counts, len) }.to_vec();
        let hist = CoincidenceHistogram {
            bin_width,
            counts: data,
            integration_time,
            center_bin,
        };
        let windows = G2Windows {
            peak_half_width,
            exclusion_half_width,
            sidelobe_mask: Vec::new(),
        };
        let r = g2_normalize(&hist, &windows)?;
        let z = cauchy_schwarz_significance(r.g2.estimate, r.g2.sigma, 2.0)?;
        *g2 = r.g2.estimate;
        *sigma = r.g2.sigma;
        *significance = z;
        Ok(())
    })
}
