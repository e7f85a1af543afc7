//! Franson fringe model, visibility fitting and accidental correction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::error::{ensure, Error, Result};

/// Output-port pair of the two unbalanced interferometers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    #[serde(rename = "++")]
    PlusPlus,
    #[serde(rename = "+-")]
    PlusMinus,
    #[serde(rename = "-+")]
    MinusPlus,
    #[serde(rename = "--")]
    MinusMinus,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::PlusPlus, Port::PlusMinus, Port::MinusPlus, Port::MinusMinus];

    /// Same-sign ports fringe in phase, mixed-sign ports are shifted by π.
    pub fn fringe_sign(self) -> f64 {
        match self {
            Port::PlusPlus | Port::MinusMinus => 1.0,
            Port::PlusMinus | Port::MinusPlus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Port::PlusPlus => "++",
            Port::PlusMinus => "+-",
            Port::MinusPlus => "-+",
            Port::MinusMinus => "--",
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Port {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "++" | "pp" => Ok(Port::PlusPlus),
            "+-" | "pm" => Ok(Port::PlusMinus),
            "-+" | "mp" => Ok(Port::MinusPlus),
            "--" | "mm" => Ok(Port::MinusMinus),
            other => Err(Error::domain(format!("unknown port '{other}'"))),
        }
    }
}

/// `(A/2)·(1 + V·cos(φ + φ0))`
pub fn franson_model(phase_sum: f64, amplitude: f64, visibility: f64, phase_offset: f64) -> f64 {
    0.5 * amplitude * (1.0 + visibility * (phase_sum + phase_offset).cos())
}

/// Checked variant of [`franson_model`].
pub fn franson_rate(phase_sum: f64, amplitude: f64, visibility: f64, phase_offset: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&visibility), || format!("visibility must lie in [0, 1], got {visibility}"))?;
    ensure(amplitude >= 0.0, || format!("amplitude must be non-negative, got {amplitude}"))?;
    Ok(franson_model(phase_sum, amplitude, visibility, phase_offset))
}

/// One coincidence measurement at a phase setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Summed interferometer phase ψ + φ [rad].
    pub phase: f64,
    pub port: Port,
    /// Recorded coincidences. Non-integer values are accepted for expected
    /// (noise-free) counts.
    pub counts: f64,
    /// Integration time [s].
    pub time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FransonScan {
    pub points: Vec<ScanPoint>,
}

impl FransonScan {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            ensure(p.time > 0.0 && p.time.is_finite(), || {
                format!("point {i}: integration time must be positive, got {}", p.time)
            })?;
            ensure(p.counts >= 0.0 && p.counts.is_finite(), || {
                format!("point {i}: counts must be non-negative, got {}", p.counts)
            })?;
            ensure(p.phase.is_finite(), || format!("point {i}: phase must be finite"))?;
        }
        Ok(())
    }

    pub fn ports(&self) -> Vec<Port> {
        let mut ports: Vec<Port> = self.points.iter().map(|p| p.port).collect();
        ports.sort();
        ports.dedup();
        ports
    }

    pub fn port_points(&self, port: Port) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(move |p| p.port == port)
    }
}

/// Fitted fringe of one port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: Estimate,
    pub phase_offset: Estimate,
    pub amplitude: Estimate,
    /// Phase-averaged rate of the fitted curve, `A/2`.
    pub mean_rate: Estimate,
    pub chi_square: f64,
    pub points: usize,
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let c = [
        [cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
        [-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
        [cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * c[0][0] + m[0][1] * c[0][1] + m[0][2] * c[0][2];
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if det.is_nan() || det.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    // inverse = adjugate / det, adjugate = cofactor transposed
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c[j][i] / det;
        }
    }
    Some(inv)
}

/// Weighted least-squares fit of [`franson_model`] to one port's rates.
///
/// The model is linear in `(c0, c1, c2)` with `R = c0 + c1 cos φ + c2 sin φ`,
/// `c0 = A/2`, `c1 = c0 V cos φ0`, `c2 = −c0 V sin φ0`; the fit is solved in
/// that basis and mapped back. Weights are Poisson, `t² / max(n, 1)`.
pub fn fit_visibility(scan: &FransonScan, port: Port) -> Result<VisibilityFit> {
    scan.validate()?;
    let pts: Vec<&ScanPoint> = scan.port_points(port).collect();
    let mut phases: Vec<f64> = pts.iter().map(|p| p.phase).collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup();
    ensure(phases.len() >= 4, || format!("port {port}: need at least 4 distinct phases, got {}", phases.len()))?;
    let span = phases[phases.len() - 1] - phases[0];
    ensure(span > std::f64::consts::PI, || format!("port {port}: phase span {span:.3} rad does not exceed π"))?;

    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for p in &pts {
        let x = [1.0, p.phase.cos(), p.phase.sin()];
        let y = p.counts / p.time;
        let w = p.time * p.time / p.counts.max(1.0);
        for i in 0..3 {
            atb[i] += w * x[i] * y;
            for j in 0..3 {
                ata[i][j] += w * x[i] * x[j];
            }
        }
    }
    let cov = invert3(ata).ok_or_else(|| Error::numeric("fit_visibility", format!("singular normal matrix for port {port}")))?;
    let mut c = [0.0; 3];
    for i in 0..3 {
        c[i] = (0..3).map(|j| cov[i][j] * atb[j]).sum();
    }
    let chi_square = pts
        .iter()
        .map(|p| {
            let model = c[0] + c[1] * p.phase.cos() + c[2] * p.phase.sin();
            let w = p.time * p.time / p.counts.max(1.0);
            w * (p.counts / p.time - model).powi(2)
        })
        .sum();

    let (c0, c1, c2) = (c[0], c[1], c[2]);
    ensure(c0 > 0.0, || format!("port {port}: fitted mean rate is not positive"))?;
    let r = c1.hypot(c2);
    let propagate = |g: [f64; 3]| -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += g[i] * cov[i][j] * g[j];
            }
        }
        v.max(0.0).sqrt()
    };
    let visibility = r / c0;
    let v_sigma = if r > 0.0 {
        propagate([-r / (c0 * c0), c1 / (r * c0), c2 / (r * c0)])
    } else {
        // at zero contrast the magnitude is not differentiable; use the radial spread
        propagate([0.0, 1.0 / c0, 0.0]).max(propagate([0.0, 0.0, 1.0 / c0]))
    };
    let (phase_offset, phase_sigma) = if r > 0.0 {
        ((-c2).atan2(c1), propagate([0.0, c2 / (r * r), -c1 / (r * r)]))
    } else {
        (0.0, f64::INFINITY)
    };
    Ok(VisibilityFit {
        visibility: Estimate::new(visibility, v_sigma),
        phase_offset: Estimate::new(phase_offset, phase_sigma),
        amplitude: Estimate::new(2.0 * c0, 2.0 * cov[0][0].sqrt()),
        mean_rate: Estimate::new(c0, cov[0][0].sqrt()),
        chi_square,
        points: pts.len(),
    })
}

/// Visibility after subtracting a flat accidental rate `a` from a fringe of
/// mean rate `m`: `V·m / (m − a)`.
pub fn correct_visibility(raw_visibility: f64, mean_rate: f64, accidental_rate: f64) -> Result<f64> {
    ensure(accidental_rate >= 0.0, || format!("accidental rate must be non-negative, got {accidental_rate}"))?;
    ensure(accidental_rate < mean_rate, || {
        format!("accidental rate {accidental_rate} must be below the mean rate {mean_rate}")
    })?;
    Ok(raw_visibility * mean_rate / (mean_rate - accidental_rate))
}

/// Accidental fraction `a/m` that turns `raw` into `corrected`.
pub fn accidental_fraction_for(raw: f64, corrected: f64) -> f64 {
    1.0 - raw / corrected
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn synthetic(v: f64, amp: f64, offset: f64, port: Port, n: usize) -> FransonScan {
        let time = 10.0;
        FransonScan {
            points: (0..n)
                .map(|i| {
                    let phase = 2.0 * PI * i as f64 / n as f64;
                    ScanPoint {
                        phase,
                        port,
                        counts: franson_model(phase, amp, v, offset) * time,
                        time,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn model_extremes() {
        assert_eq!(franson_model(0.0, 80.0, 1.0, 0.0), 80.0);
        assert!(franson_model(PI, 80.0, 1.0, 0.0).abs() < 1e-12);
        let v = 0.982;
        let ratio = franson_model(0.0, 1.0, v, 0.0) / franson_model(PI, 1.0, v, 0.0);
        assert!((ratio - (1.0 + v) / (1.0 - v)).abs() < 1e-9);
        assert!((ratio - 110.1).abs() < 0.1);
        assert!(franson_rate(0.0, 1.0, 1.1, 0.0).is_err());
    }

    #[test]
    fn noise_free_recovery() {
        let fit = fit_visibility(&synthetic(0.982, 500.0, 0.3, Port::PlusPlus, 24), Port::PlusPlus).unwrap();
        assert!((fit.visibility.estimate - 0.982).abs() < 1e-6);
        assert!((fit.phase_offset.estimate - 0.3).abs() < 1e-6);
        assert!((fit.amplitude.estimate - 500.0).abs() < 1e-6);
        assert!(fit.chi_square < 1e-12);
    }

    #[test]
    fn flat_scan_zero_visibility() {
        let fit = fit_visibility(&synthetic(0.0, 300.0, 0.0, Port::MinusMinus, 16), Port::MinusMinus).unwrap();
        assert!(fit.visibility.estimate < 1e-12);
        assert!((fit.mean_rate.estimate - 150.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_narrow_or_sparse_scans() {
        let mut s = synthetic(0.9, 100.0, 0.0, Port::PlusPlus, 16);
        s.points.retain(|p| p.phase < 3.0);
        assert!(fit_visibility(&s, Port::PlusPlus).is_err());
        let s = synthetic(0.9, 100.0, 0.0, Port::PlusPlus, 3);
        assert!(fit_visibility(&s, Port::PlusPlus).is_err());
        let s = synthetic(0.9, 100.0, 0.0, Port::PlusPlus, 16);
        assert!(fit_visibility(&s, Port::MinusPlus).is_err());
    }

    #[test]
    fn correction_matches_table_rows() {
        // the four rows' raw -> corrected shifts imply sub-percent accidental fractions
        for (raw, corr) in [(0.979, 0.985), (0.981, 0.987), (0.971, 0.977), (0.982, 0.988)] {
            let f = accidental_fraction_for(raw, corr);
            assert!(f > 0.004 && f < 0.008, "{f}");
            let back = correct_visibility(raw, 1.0, f).unwrap();
            assert!((back - corr).abs() < 1e-12);
        }
        assert!((accidental_fraction_for(0.979, 0.985) - 0.0061).abs() < 1e-4);
        assert_eq!(correct_visibility(0.95, 10.0, 0.0).unwrap(), 0.95);
        assert_eq!(correct_visibility(0.0, 10.0, 1.0).unwrap(), 0.0);
        assert!(correct_visibility(0.9, 10.0, 10.0).is_err());
    }

    #[test]
    fn port_parsing() {
        for p in Port::ALL {
            assert_eq!(p.as_str().parse::<Port>().unwrap(), p);
        }
        assert!("+x".parse::<Port>().is_err());
    }

    proptest! {
        #[test]
        fn fit_inverts_model(v in 0.05f64..1.0, amp in 1.0f64..1e4, offset in -3.0f64..3.0) {
            let fit = fit_visibility(&synthetic(v, amp, offset, Port::PlusMinus, 20), Port::PlusMinus).unwrap();
            prop_assert!((fit.visibility.estimate - v).abs() < 1e-6 * v.max(1.0));
            prop_assert!((fit.amplitude.estimate - amp).abs() < 1e-6 * amp);
            let d = (fit.phase_offset.estimate - offset + PI).rem_euclid(2.0 * PI) - PI;
            prop_assert!(d.abs() < 1e-6);
        }

        #[test]
        fn correction_monotone(v in 0.5f64..1.0, m in 10.0f64..1000.0, a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(correct_visibility(v, m, lo * m).unwrap() <= correct_visibility(v, m, hi * m).unwrap());
        }
    }
}
