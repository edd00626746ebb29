//! Constant-false-alarm-rate stopping rule.

use crate::error::{Error, Result};

/// Iteration stops once some LPU's residual peak `max |F_τᴴ y_k|²` falls to
/// `ς` or below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub false_alarm_rate: f64,
    pub noise_variance: f64,
    pub threshold: f64,
}

/// `ς = σ² ln M - σ² ln(ln(1 / (1 - P_fa)))`.
pub fn stopping_threshold(
    noise_variance: f64,
    num_subcarriers: usize,
    false_alarm_rate: f64,
) -> Result<f64> {
    if !(false_alarm_rate > 0.0 && false_alarm_rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "false-alarm rate {false_alarm_rate} outside (0, 1)"
        )));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance {noise_variance} must be non-negative"
        )));
    }
    if num_subcarriers < 2 {
        return Err(Error::InvalidArgument(
            "stopping rule needs at least two subcarriers".into(),
        ));
    }
    let m = num_subcarriers as f64;
    // ln(1/(1-p)) = -ln_1p(-p), accurate for tiny p.
    Ok(noise_variance * m.ln() - noise_variance * (-(-false_alarm_rate).ln_1p()).ln())
}

impl StoppingRule {
    pub fn new(noise_variance: f64, num_subcarriers: usize, false_alarm_rate: f64) -> Result<Self> {
        Ok(Self {
            false_alarm_rate,
            noise_variance,
            threshold: stopping_threshold(noise_variance, num_subcarriers, false_alarm_rate)?,
        })
    }

    pub fn is_exhausted(&self, peak_score: f64) -> bool {
        peak_score <= self.threshold
    }
}
