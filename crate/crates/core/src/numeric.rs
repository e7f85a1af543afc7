//! Small numerical kernels shared by the models: adaptive Gauss–Kronrod
//! quadrature, golden-section maximization and bisection.

use crate::error::{Error, Result};

/// Hard cap on the number of panels the adaptive integrator may create.
pub const MAX_PANELS: usize = 4096;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

// 15-point Kronrod nodes (non-negative half) with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        // odd Kronrod indices coincide with the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` by repeatedly bisecting the panel with the
/// largest error estimate until the summed estimate is below `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::numeric("integrate", "non-finite interval"));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }
    // (a, b, value, error)
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        let total: f64 = panels.iter().map(|p| p.2).sum();
        if !total.is_finite() {
            return Err(Error::numeric("integrate", "integrand produced a non-finite value"));
        }
        if total_err <= abs_tol {
            return Ok(Quadrature {
                value: total,
                error_estimate: total_err,
                panels: panels.len(),
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::numeric(
                "integrate",
                format!(
                    "panel cap {MAX_PANELS} reached on [{a}, {b}]: estimate {total}, error {total_err:e} > {abs_tol:e}"
                ),
            ));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            return Err(Error::numeric(
                "integrate",
                format!("panel [{pa}, {pb}] cannot be subdivided further"),
            ));
        }
        let (lv, le) = gk15(&f, pa, mid);
        let (rv, re) = gk15(&f, mid, pb);
        panels.push((pa, mid, lv, le));
        panels.push((mid, pb, rv, re));
    }
}

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `x_tol`.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if lo.is_nan() || hi.is_nan() || lo >= hi || x_tol.is_nan() || x_tol <= 0.0 {
        return Err(Error::numeric("golden_max", format!("bad bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while (b - a) > x_tol {
        iterations += 1;
        if iterations > 500 {
            return Err(Error::numeric(
                "golden_max",
                format!("no convergence, bracket [{a}, {b}]"),
            ));
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    let best = [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty");
    Ok(Maximum {
        argmax: best.0,
        value: best.1,
    })
}

/// Coarse grid scan over `[lo, hi]` followed by golden-section refinement
/// in the cell pair around the best grid point. Handles functions with
/// several local maxima as long as the grid resolves the global one.
pub fn scan_then_golden_max<F>(mut f: F, lo: f64, hi: f64, grid: usize, x_tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let grid = grid.max(3);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..grid {
        let v = f(lo + step * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let left = lo + step * best.0.saturating_sub(1) as f64;
    let right = (lo + step * (best.0 + 1) as f64).min(hi);
    let refined = golden_max(&mut f, left, right, x_tol)?;
    if refined.value >= best.1 {
        Ok(refined)
    } else {
        Ok(Maximum {
            argmax: lo + step * best.0 as f64,
            value: best.1,
        })
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`, to absolute tolerance `x_tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numeric(
            "bisect",
            format!("no sign change on [{lo}, {hi}]: f = {fa:e}, {fb:e}"),
        ));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= x_tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((q.value - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_oscillatory() {
        let q = integrate(|x| (20.0 * x).cos(), 0.0, std::f64::consts::PI, 1e-11).unwrap();
        assert!(q.value.abs() < 1e-10, "{q:?}");
        let q = integrate(|x| (5.0 * x).sin(), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - (1.0 - 5f64.cos()) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn panel_cap_reports_diagnostics() {
        let err = integrate(|x| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 1e-300).unwrap_err();
        match err {
            Error::Numeric { routine, message } => {
                assert_eq!(routine, "integrate");
                assert!(message.contains("panel") || message.contains("subdivided"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let m = golden_max(|x| Ok(-(x - 1.3) * (x - 1.3) + 2.0), 0.0, 6.0, 1e-9).unwrap();
        // the peak is flat to rounding within ~sqrt(eps) of the argmax
        assert!((m.argmax - 1.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn scan_escapes_local_maximum() {
        // local max near 0.5, global near 4
        let f = |x: f64| Ok((-(x - 0.5).powi(2) * 20.0).exp() + 2.0 * (-(x - 4.0).powi(2) * 5.0).exp());
        let m = scan_then_golden_max(f, 0.0, 6.0, 61, 1e-9).unwrap();
        assert!((m.argmax - 4.0).abs() < 1e-6);
    }

    #[test]
    fn bisect_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9).is_err());
    }
}
