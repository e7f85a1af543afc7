//! Chained CHSH inequalities for Franson-type (phase-sum) correlations.
//!
//! The 2N-term chained expression is
//!
//! ```text
//! S = E(A_N,B_N) + Σ_{k=2..N} [E(A_k,B_{k−1}) + E(A_{k−1},B_k)] − E(A_1,B_1)
//! ```
//!
//! with local bound `2N − 1` and quantum value `2N·cos(π/2N)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::franson::franson_model;
use super::Estimate;
use crate::error::{ensure, Error, Result};

/// Coincidence rates of the four output-port pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortRates {
    pub pp: Estimate,
    pub pm: Estimate,
    pub mp: Estimate,
    pub mm: Estimate,
    /// Set when `mm`/`mp` are copies of `pp`/`pm` (two-detector completion);
    /// the copies are then not treated as independent in error propagation.
    #[serde(default)]
    pub mirrored: bool,
}

impl PortRates {
    pub fn new(pp: Estimate, pm: Estimate, mp: Estimate, mm: Estimate) -> Self {
        PortRates { pp, pm, mp, mm, mirrored: false }
    }

    /// Rates from raw counts over a common integration time.
    pub fn from_counts(pp: f64, pm: f64, mp: f64, mm: f64, time: f64) -> Self {
        let r = |n| Estimate::poisson_rate(n, time);
        PortRates::new(r(pp), r(pm), r(mp), r(mm))
    }

    pub fn scaled(&self, k: f64) -> Self {
        let s = |e: Estimate| Estimate::new(e.estimate * k, e.sigma * k);
        PortRates {
            pp: s(self.pp),
            pm: s(self.pm),
            mp: s(self.mp),
            mm: s(self.mm),
            mirrored: self.mirrored,
        }
    }
}

/// `E = (R++ − R+− − R−+ + R−−) / (R++ + R+− + R−+ + R−−)` with first-order
/// error propagation.
pub fn bell_expectation(rates: &PortRates) -> Result<Estimate> {
    let all = [rates.pp, rates.pm, rates.mp, rates.mm];
    ensure(all.iter().all(|r| r.estimate >= 0.0), || "port rates must be non-negative".to_string())?;
    if rates.mirrored {
        return mirrored_expectation(rates.pp, rates.pm);
    }
    let total: f64 = all.iter().map(|r| r.estimate).sum();
    ensure(total > 0.0, || "all port rates are zero".to_string())?;
    let e = (rates.pp.estimate - rates.pm.estimate - rates.mp.estimate + rates.mm.estimate) / total;
    let same = (1.0 - e) / total;
    let diff = -(1.0 + e) / total;
    let var = same.powi(2) * (rates.pp.sigma.powi(2) + rates.mm.sigma.powi(2))
        + diff.powi(2) * (rates.pm.sigma.powi(2) + rates.mp.sigma.powi(2));
    Ok(Estimate::new(e, var.sqrt()))
}

fn mirrored_expectation(same: Estimate, opposite: Estimate) -> Result<Estimate> {
    let total = same.estimate + opposite.estimate;
    ensure(total > 0.0, || "all port rates are zero".to_string())?;
    let e = (same.estimate - opposite.estimate) / total;
    let d_same = 2.0 * opposite.estimate / (total * total);
    let d_opp = -2.0 * same.estimate / (total * total);
    let var = (d_same * same.sigma).powi(2) + (d_opp * opposite.sigma).powi(2);
    Ok(Estimate::new(e, var.sqrt()))
}

/// Completes four port rates from one detector pair measured at a phase
/// setting and at the setting shifted by π: `R−− = R++`, `R−+ = R+− = R++(π)`.
pub fn two_detector_completion(r_pp: Estimate, r_pp_pi: Estimate) -> Result<PortRates> {
    ensure(r_pp.estimate >= 0.0 && r_pp_pi.estimate >= 0.0, || "rates must be non-negative".to_string())?;
    Ok(PortRates {
        pp: r_pp,
        pm: r_pp_pi,
        mp: r_pp_pi,
        mm: r_pp,
        mirrored: true,
    })
}

/// Local, quantum and critical-visibility figures of the N-setting inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainedBounds {
    pub n: usize,
    pub s_lhv: f64,
    pub s_qm: f64,
    /// `S_LHV / S_QM`; above 1 the inequality cannot be violated.
    pub v_crit: f64,
}

pub fn chained_bounds(n: usize) -> Result<ChainedBounds> {
    ensure(n >= 2, || format!("need at least 2 settings, got {n}"))?;
    let s_lhv = (2 * n - 1) as f64;
    let s_qm = 2.0 * n as f64 * (PI / (2.0 * n as f64)).cos();
    Ok(ChainedBounds {
        n,
        s_lhv,
        s_qm,
        v_crit: s_lhv / s_qm,
    })
}

/// One correlator of the chained expression; indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellTerm {
    pub a: usize,
    pub b: usize,
    pub sign: i8,
}

/// The 2N terms in canonical order: `(N,N)`, then `(k,k−1), (k−1,k)` for
/// `k = 2..N`, then `−(1,1)`.
pub fn chained_terms(n: usize) -> Vec<BellTerm> {
    let mut terms = Vec::with_capacity(2 * n);
    terms.push(BellTerm { a: n, b: n, sign: 1 });
    for k in 2..=n {
        terms.push(BellTerm { a: k, b: k - 1, sign: 1 });
        terms.push(BellTerm { a: k - 1, b: k, sign: 1 });
    }
    terms.push(BellTerm { a: 1, b: 1, sign: -1 });
    terms
}

/// Phase settings and per-term expectation values for one chained test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellSchedule {
    n: usize,
    /// `a_1..a_N` [rad].
    a_phases: Vec<f64>,
    /// `b_1..b_N` [rad].
    b_phases: Vec<f64>,
    terms: Vec<BellTerm>,
    expectations: Vec<Option<Estimate>>,
}

impl BellSchedule {
    /// Schedule with the given phase settings and no expectations yet.
    pub fn new(a_phases: Vec<f64>, b_phases: Vec<f64>) -> Result<Self> {
        let n = a_phases.len();
        ensure(n >= 2, || format!("need at least 2 settings, got {n}"))?;
        ensure(b_phases.len() == n, || format!("{n} A settings but {} B settings", b_phases.len()))?;
        let terms = chained_terms(n);
        Ok(BellSchedule {
            n,
            a_phases,
            b_phases,
            expectations: vec![None; terms.len()],
            terms,
        })
    }

    /// Schedule without phase information, for externally measured expectations.
    pub fn unphased(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[BellTerm] {
        &self.terms
    }

    pub fn a_phases(&self) -> &[f64] {
        &self.a_phases
    }

    pub fn b_phases(&self) -> &[f64] {
        &self.b_phases
    }

    pub fn expectations(&self) -> &[Option<Estimate>] {
        &self.expectations
    }

    /// Summed phase `a + b` seen by term `i`.
    pub fn relative_angle(&self, i: usize) -> f64 {
        let t = self.terms[i];
        self.a_phases[t.a - 1] + self.b_phases[t.b - 1]
    }

    pub fn set_term(&mut self, i: usize, value: Estimate) -> Result<()> {
        ensure(i < self.terms.len(), || format!("term index {i} out of range 0..{}", self.terms.len()))?;
        self.expectations[i] = Some(value);
        Ok(())
    }

    /// Sets the expectation of correlator `(a, b)` (1-based).
    pub fn set_pair(&mut self, a: usize, b: usize, value: Estimate) -> Result<()> {
        let i = self
            .terms
            .iter()
            .position(|t| t.a == a && t.b == b)
            .ok_or_else(|| Error::domain(format!("({a}, {b}) is not a term of the N = {} inequality", self.n)))?;
        self.expectations[i] = Some(value);
        Ok(())
    }

    /// Fills every term with the noise-free fringe expectation `V·cos(a + b)`.
    pub fn with_model_expectations(mut self, visibility: f64) -> Self {
        for i in 0..self.terms.len() {
            let e = visibility * self.relative_angle(i).cos();
            self.expectations[i] = Some(Estimate::exact(e));
        }
        self
    }

    pub fn is_complete(&self) -> bool {
        self.expectations.iter().all(Option::is_some)
    }
}

/// Settings that make every positive term see `|a + b| = π/2N` and the
/// subtracted term `(2N−1)·π/2N`, with `a_1 = 0`.
///
/// The positive correlators link the settings into a single path
/// `A_1, B_2, A_3, …, B_1`; walking it in steps of π/2N and negating the
/// position for A settings gives the required phase sums.
pub fn optimal_schedule(n: usize) -> Result<BellSchedule> {
    ensure(n >= 2, || format!("need at least 2 settings, got {n}"))?;
    let delta = PI / (2 * n) as f64;
    // node: (is_a, index)
    let mut path: Vec<(bool, usize)> = Vec::with_capacity(2 * n);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for k in 1..=n {
        // A1, B2, A3, ...   and   B1, A2, B3, ...
        first.push((k % 2 == 1, k));
        second.push((k % 2 == 0, k));
    }
    path.extend(first);
    path.extend(second.into_iter().rev());

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (step, &(is_a, k)) in path.iter().enumerate() {
        let pos = step as f64 * delta;
        if is_a {
            a[k - 1] = -pos;
        } else {
            b[k - 1] = pos;
        }
    }
    BellSchedule::new(a, b)
}

/// Signed sum of the 2N expectations with quadrature-summed uncertainty.
pub fn chained_s(schedule: &BellSchedule) -> Result<Estimate> {
    let mut s = 0.0;
    let mut var = 0.0;
    for (t, e) in schedule.terms.iter().zip(&schedule.expectations) {
        let e = e.ok_or_else(|| {
            Error::domain(format!("missing expectation for term ({}, {}) of the N = {} inequality", t.a, t.b, schedule.n))
        })?;
        s += f64::from(t.sign) * e.estimate;
        var += e.sigma * e.sigma;
    }
    Ok(Estimate::new(s, var.sqrt()))
}

/// Expected two-detector rates of one term from the fringe model plus a flat
/// accidental rate: returns `(R++(θ), R++(θ+π))`.
pub fn model_term_rates(theta: f64, amplitude: f64, visibility: f64, accidental_rate: f64) -> (f64, f64) {
    (
        franson_model(theta, amplitude, visibility, 0.0) + accidental_rate,
        franson_model(theta + PI, amplitude, visibility, 0.0) + accidental_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_bounds() {
        let rows = [
            (2, 3.0, 2.828, None),
            (3, 5.0, 5.196, Some(0.9623)),
            (4, 7.0, 7.391, Some(0.9471)),
            (5, 9.0, 9.511, Some(0.9463)),
            (6, 11.0, 11.59, Some(0.9490)),
        ];
        for (n, lhv, qm, vc) in rows {
            let b = chained_bounds(n).unwrap();
            assert_eq!(b.s_lhv, lhv);
            let digits = if qm > 10.0 { 0.005 } else { 0.0005 };
            assert!((b.s_qm - qm).abs() < digits, "N={n}: {}", b.s_qm);
            match vc {
                Some(v) => assert!((b.v_crit - v).abs() < 5e-5, "N={n}: {}", b.v_crit),
                None => assert!(b.v_crit > 1.0),
            }
        }
        assert!(chained_bounds(1).is_err());
    }

    #[test]
    fn schedule_angles() {
        for n in 2..=12 {
            let s = optimal_schedule(n).unwrap();
            let delta = PI / (2 * n) as f64;
            assert_eq!(s.a_phases()[0], 0.0);
            for (i, t) in s.terms().iter().enumerate() {
                let th = s.relative_angle(i);
                if t.sign > 0 {
                    assert!((th.abs() - delta).abs() < 1e-12, "N={n} term {i}: {th}");
                } else {
                    assert!((th - (2 * n - 1) as f64 * delta).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ideal_schedule_reaches_quantum_value() {
        for n in 2..=12 {
            let s = chained_s(&optimal_schedule(n).unwrap().with_model_expectations(1.0)).unwrap();
            let qm = chained_bounds(n).unwrap().s_qm;
            assert!((s.estimate - qm).abs() < 1e-12, "N={n}");
        }
        let s5 = chained_s(&optimal_schedule(5).unwrap().with_model_expectations(1.0)).unwrap();
        assert!((s5.estimate - 9.511).abs() < 5e-4);
        let s2 = chained_s(&optimal_schedule(2).unwrap().with_model_expectations(1.0)).unwrap();
        assert!((s2.estimate - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let s0 = chained_s(&optimal_schedule(7).unwrap().with_model_expectations(0.0)).unwrap();
        assert_eq!(s0.estimate, 0.0);
    }

    #[test]
    fn measured_values() {
        let s = chained_s(&optimal_schedule(5).unwrap().with_model_expectations(0.976)).unwrap();
        assert!((s.estimate - 9.283).abs() < 1e-3, "{}", s.estimate);
        assert!(((9.282f64 - 9.0) / 0.017 - 16.59).abs() < 0.01);
        let s3 = chained_s(&optimal_schedule(3).unwrap().with_model_expectations(0.9)).unwrap();
        assert!((s3.estimate - 4.677).abs() < 5e-4);
        assert!(s3.estimate < 5.0);
    }

    #[test]
    fn incomplete_schedule_rejected() {
        let mut s = optimal_schedule(3).unwrap();
        assert!(chained_s(&s).is_err());
        for i in 0..5 {
            s.set_term(i, Estimate::new(0.9, 0.01)).unwrap();
        }
        assert!(!s.is_complete());
        assert!(matches!(chained_s(&s), Err(Error::Domain(_))));
        s.set_pair(1, 1, Estimate::new(-0.9, 0.01)).unwrap();
        let r = chained_s(&s).unwrap();
        assert!((r.estimate - 5.4).abs() < 1e-12);
        assert!((r.sigma - 0.01 * 6f64.sqrt()).abs() < 1e-12);
        assert!(s.set_pair(1, 3, Estimate::exact(0.0)).is_err());
    }

    #[test]
    fn expectation_estimator() {
        let p = PortRates::from_counts(100.0, 0.0, 0.0, 100.0, 1.0);
        assert_eq!(bell_expectation(&p).unwrap().estimate, 1.0);
        let p = PortRates::from_counts(50.0, 50.0, 50.0, 50.0, 1.0);
        assert_eq!(bell_expectation(&p).unwrap().estimate, 0.0);
        let z = PortRates::from_counts(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(bell_expectation(&z).is_err());
    }

    #[test]
    fn four_port_model_gives_v_cos_theta() {
        let (v, th, amp) = (0.976, PI / 10.0, 200.0);
        let same = franson_model(th, amp, v, 0.0);
        let opp = franson_model(th + PI, amp, v, 0.0);
        let p = PortRates::new(Estimate::exact(same), Estimate::exact(opp), Estimate::exact(opp), Estimate::exact(same));
        let e = bell_expectation(&p).unwrap().estimate;
        assert!((e - v * th.cos()).abs() < 1e-12);
        assert!((e - 0.928).abs() < 5e-4);

        let two = two_detector_completion(Estimate::exact(same), Estimate::exact(opp)).unwrap();
        assert!((bell_expectation(&two).unwrap().estimate - e).abs() < 1e-12);
    }

    #[test]
    fn two_detector_cases() {
        let p = two_detector_completion(Estimate::exact(100.0), Estimate::exact(0.0)).unwrap();
        assert_eq!((p.pp.estimate, p.pm.estimate, p.mp.estimate, p.mm.estimate), (100.0, 0.0, 0.0, 100.0));
        assert_eq!(bell_expectation(&p).unwrap().estimate, 1.0);
        let p = two_detector_completion(Estimate::exact(7.0), Estimate::exact(7.0)).unwrap();
        assert_eq!(bell_expectation(&p).unwrap().estimate, 0.0);
    }

    #[test]
    fn mirrored_errors_not_double_counted() {
        let r = Estimate::poisson_rate(900.0, 1.0);
        let rpi = Estimate::poisson_rate(100.0, 1.0);
        let mirrored = bell_expectation(&two_detector_completion(r, rpi).unwrap()).unwrap();
        // E = (r - rπ)/(r + rπ): var = (2 rπ/T²)² r + (2 r/T²)² rπ
        let t: f64 = 1000.0;
        let expect = ((2.0 * 100.0 / (t * t)).powi(2) * 900.0 + (2.0 * 900.0 / (t * t)).powi(2) * 100.0).sqrt();
        assert!((mirrored.sigma - expect).abs() < 1e-15);
        let naive = bell_expectation(&PortRates::new(r, rpi, rpi, r)).unwrap();
        assert!(naive.sigma < mirrored.sigma);
    }

    fn best_deterministic(n: usize) -> f64 {
        let terms = chained_terms(n);
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << (2 * n)) {
            let out = |bit: usize| if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
            let s: f64 = terms
                .iter()
                .map(|t| f64::from(t.sign) * out(t.a - 1) * out(n + t.b - 1))
                .sum();
            best = best.max(s);
        }
        best
    }

    #[test]
    fn deterministic_strategies_respect_local_bound() {
        // Without postselection the sign pattern forces one term to −1, so
        // plain ±1 strategies top out at 2N − 2, below the postselected 2N − 1.
        for n in 2..=5 {
            let b = chained_bounds(n).unwrap();
            let best = best_deterministic(n);
            assert!(best <= b.s_lhv);
            assert_eq!(best, (2 * n - 2) as f64);
        }
    }

    #[test]
    fn violation_iff_above_critical_visibility() {
        for n in 3..=6 {
            let b = chained_bounds(n).unwrap();
            for v in [b.v_crit - 1e-3, b.v_crit + 1e-3] {
                let s = chained_s(&optimal_schedule(n).unwrap().with_model_expectations(v)).unwrap();
                assert_eq!(s.estimate > b.s_lhv, v > b.v_crit, "N={n}, V={v}");
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_by_term_count(n in 2usize..8, seed in proptest::collection::vec(-1.0f64..=1.0, 16)) {
            let mut s = BellSchedule::unphased(n).unwrap();
            for (i, &v) in seed.iter().enumerate().take(2 * n) {
                s.set_term(i, Estimate::exact(v)).unwrap();
            }
            prop_assert!(chained_s(&s).unwrap().estimate.abs() <= 2.0 * n as f64);
        }

        #[test]
        fn expectation_scale_invariant(pp in 0.0f64..1e4, pm in 0.0f64..1e4, mp in 0.0f64..1e4, mm in 1.0f64..1e4, k in 0.01f64..100.0) {
            let r = PortRates::from_counts(pp, pm, mp, mm, 1.0);
            let a = bell_expectation(&r).unwrap();
            let b = bell_expectation(&r.scaled(k)).unwrap();
            prop_assert!((a.estimate - b.estimate).abs() < 1e-12);
            prop_assert!((a.sigma - b.sigma).abs() < 1e-9 * (1.0 + a.sigma));
        }
    }
}
