//! Statistics for verifying non-classical correlations after conversion:
//! coincidence-histogram g², Franson fringe visibility, and chained CHSH
//! Bell inequalities, plus a Poissonian count simulator.

pub mod bell;
pub mod franson;
pub mod g2;
pub mod simulate;

use serde::{Deserialize, Serialize};

/// An estimate with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(estimate: f64, sigma: f64) -> Self {
        Estimate { estimate, sigma }
    }

    pub fn exact(estimate: f64) -> Self {
        Estimate { estimate, sigma: 0.0 }
    }

    /// Poisson rate from `counts` recorded over `time` seconds.
    pub fn poisson_rate(counts: f64, time: f64) -> Self {
        Estimate {
            estimate: counts / time,
            sigma: counts.max(0.0).sqrt() / time,
        }
    }

    /// Number of sigmas by which the estimate exceeds `bound`.
    pub fn significance_over(&self, bound: f64) -> f64 {
        (self.estimate - bound) / self.sigma
    }
}

/// Mean of repeated estimates. With three or more trials the uncertainty is the
/// standard error of the trial spread, otherwise propagated from the
/// individual sigmas.
pub fn combine_trials(trials: &[Estimate]) -> Option<Estimate> {
    if trials.is_empty() {
        return None;
    }
    let n = trials.len() as f64;
    let mean = trials.iter().map(|t| t.estimate).sum::<f64>() / n;
    let sigma = if trials.len() >= 3 {
        let var = trials.iter().map(|t| (t.estimate - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        trials.iter().map(|t| t.sigma * t.sigma).sum::<f64>().sqrt() / n
    };
    Some(Estimate::new(mean, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_use_spread_from_three() {
        let two = [Estimate::new(1.0, 0.2), Estimate::new(3.0, 0.2)];
        let c = combine_trials(&two).unwrap();
        assert_eq!(c.estimate, 2.0);
        assert!((c.sigma - 0.2 / 2f64.sqrt()).abs() < 1e-15);

        let three = [Estimate::new(1.0, 0.0), Estimate::new(2.0, 0.0), Estimate::new(3.0, 0.0)];
        let c = combine_trials(&three).unwrap();
        assert!((c.sigma - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(combine_trials(&[]).is_none());
    }

    #[test]
    fn significance() {
        assert!((Estimate::new(310.45, 0.25).significance_over(2.0) - 1233.8).abs() < 1e-9);
    }
}
