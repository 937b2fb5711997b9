use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided_p;
use crate::error::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub dof: usize,
    pub p_two_sided: f64,
    pub n_pairs: usize,
    /// Mean of `x - y`.
    pub mean_difference: f64,
}

/// Paired Student's t-test on `x - y`.
///
/// Identical differences with zero mean give `t = 0, p = 1`; identical
/// non-zero differences give an infinite `t` and `p = 0`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTestResult, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let dof = n - 1;

    let t_stat = if var == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean)
        }
    } else {
        mean / (var / nf).sqrt()
    };
    Ok(TTestResult {
        t_stat,
        dof,
        p_two_sided: student_t_two_sided_p(t_stat, dof as f64),
        n_pairs: n,
        mean_difference: mean,
    })
}
