//! Study metrics: gap to the exhaustive optimum and t-based intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Slack for outputs that equal the optimum up to rounding.
const ORACLE_SLACK: f64 = 1e-12;

/// `(global_opt - best_found) * 100` on normalized outputs.
pub fn percent_diff(best_found: f64, global_opt: f64) -> Result<f64> {
    if !best_found.is_finite() || !global_opt.is_finite() {
        return Err(Error::InvalidConfig("non-finite value in percent_diff".into()));
    }
    if best_found > global_opt + ORACLE_SLACK {
        return Err(Error::OracleViolation(format!(
            "best found {best_found} exceeds the optimum {global_opt}"
        )));
    }
    Ok(((global_opt - best_found) * 100.0).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Summary {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Intervals share at least one point.
    pub fn overlaps(&self, other: &Summary) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Mean and two-sided `level` interval `mean ± t(1 - α/2, n - 1) · sd / √n`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<Summary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} outside (0, 1)")));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    let half = t * sd / nf.sqrt();
    Ok(Summary {
        n,
        mean,
        sd,
        lo: mean - half,
        hi: mean + half,
    })
}

pub fn ci95(samples: &[f64]) -> Result<Summary> {
    confidence_interval(samples, 0.95)
}
