//! Forecast scoring: normalized error curves, valid prediction time and
//! difference fields.

use serde::{Deserialize, Serialize};

use crate::dynsys::LyapunovEstimate;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Default error threshold for the valid-time rule.
pub const DEFAULT_THETA: f64 = 0.3;
/// Thresholds reported alongside the default.
pub const THETA_SWEEP: [f64; 3] = [0.2, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidTimeReport {
    pub threshold: f64,
    pub valid_steps: usize,
    pub valid_seconds: f64,
    pub valid_lyapunov_times: Option<f64>,
    pub error_curve: Vec<f64>,
}

fn check_pair(truth: &TimeSeries, pred: &TimeSeries) -> Result<()> {
    if truth.dim() != pred.dim() {
        return Err(Error::mismatch(format!(
            "truth has dimension {}, prediction {}",
            truth.dim(),
            pred.dim()
        )));
    }
    if truth.dt() != pred.dt() {
        return Err(Error::mismatch(format!(
            "truth step {} differs from prediction step {}",
            truth.dt(),
            pred.dt()
        )));
    }
    if pred.len() > truth.len() {
        return Err(Error::mismatch(format!(
            "prediction has {} steps, truth only {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// `e(t) = ||pred(t) - truth(t)|| / sqrt(mean ||truth||^2)`, the mean taken
/// over the first `pred.len()` truth states.
pub fn normalized_error(truth: &TimeSeries, pred: &TimeSeries) -> Result<Vec<f64>> {
    check_pair(truth, pred)?;
    let n = pred.len();
    let scale = (truth.columns().take(n).map(sq_norm).sum::<f64>() / n as f64).sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    Ok(truth
        .columns()
        .zip(pred.columns())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt() / scale)
        .collect())
}

/// Error curve over the whole truth span for a forecast that may have
/// stopped early: the scale uses all of `truth` and missing steps count as
/// infinite error.
pub fn normalized_error_padded(truth: &TimeSeries, pred: &TimeSeries) -> Result<Vec<f64>> {
    check_pair(truth, pred)?;
    let n = truth.len();
    let scale = (truth.columns().map(sq_norm).sum::<f64>() / n as f64).sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut curve: Vec<f64> = truth
        .columns()
        .zip(pred.columns())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt() / scale)
        .collect();
    curve.resize(n, f64::INFINITY);
    Ok(curve)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Steps before the curve first reaches `theta`; the full length if it never does.
pub fn first_crossing(curve: &[f64], theta: f64) -> usize {
    curve.iter().position(|e| !(*e < theta)).unwrap_or(curve.len())
}

/// Valid time by the first-crossing rule on an existing error curve.
pub fn valid_time_from_curve(
    curve: Vec<f64>,
    dt: f64,
    theta: f64,
    lyap: Option<&LyapunovEstimate>,
) -> Result<ValidTimeReport> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::config(format!("threshold must be positive, got {theta}")));
    }
    let valid_steps = first_crossing(&curve, theta);
    let valid_seconds = valid_steps as f64 * dt;
    Ok(ValidTimeReport {
        threshold: theta,
        valid_steps,
        valid_seconds,
        valid_lyapunov_times: lyap.map(|l| valid_seconds * l.lambda_max),
        error_curve: curve,
    })
}

pub fn valid_time(
    truth: &TimeSeries,
    pred: &TimeSeries,
    theta: f64,
    lyap: Option<&LyapunovEstimate>,
) -> Result<ValidTimeReport> {
    valid_time_from_curve(normalized_error(truth, pred)?, pred.dt(), theta, lyap)
}

/// `truth - pred`, elementwise, over the prediction span.
pub fn difference_field(truth: &TimeSeries, pred: &TimeSeries) -> Result<TimeSeries> {
    check_pair(truth, pred)?;
    if truth.len() != pred.len() {
        return Err(Error::mismatch(format!(
            "truth has {} steps, prediction {}",
            truth.len(),
            pred.len()
        )));
    }
    let data = truth.as_slice().iter().zip(pred.as_slice()).map(|(a, b)| a - b).collect();
    TimeSeries::new(truth.dim(), truth.dt(), pred.origin_time(), data)
}
