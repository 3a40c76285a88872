use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlation-length estimate used to pick a QUNN block length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub estimate: usize,
    /// First lag with autocorrelation below `1/e`.
    pub decorrelation_lag: usize,
    /// Lag of the first strong return (a local maximum at least `1 − 1/e`)
    /// after decorrelation, if any.
    pub period: Option<usize>,
    /// Set when the series has no variance; the estimate is then 1.
    pub constant_series: bool,
    pub autocorrelation: Vec<f64>,
}

/// Biased normalized autocorrelation `r(k)` of a vector series for
/// `k = 0..=max_lag`, centered per component and summed over components.
pub fn autocorrelation(series: &[Vec<f64>], max_lag: usize) -> Option<Vec<f64>> {
    let n = series.len();
    let dim = series.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..dim).map(|c| series.iter().map(|x| x[c]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = series.iter().map(|x| x.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let lagged = |k: usize| -> f64 {
        (0..n - k)
            .map(|t| centered[t].iter().zip(&centered[t + k]).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let r0 = lagged(0);
    let scale = series.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if r0 <= (1e-24 * scale * scale) * (n * dim.max(1)) as f64 {
        return None;
    }
    Some((0..=max_lag.min(n - 1)).map(|k| lagged(k) / r0).collect())
}

/// Estimated temporal correlation length of `series`, clamped to `[1, len/2]`.
///
/// The estimate is the recurrence period when the autocorrelation returns
/// close to 1 after first decaying below `1/e`, and the decorrelation lag
/// otherwise.
pub fn estimate_correlation_length(series: &[Vec<f64>]) -> Result<CorrelationEstimate> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "correlation length needs at least 4 samples, got {n}"
        )));
    }
    let dim = series[0].len();
    if let Some(bad) = series.iter().find(|x| x.len() != dim) {
        return Err(Error::dims("series element", dim, bad.len()));
    }
    let cap = n / 2;
    let Some(r) = autocorrelation(series, cap + 1) else {
        return Ok(CorrelationEstimate {
            estimate: 1,
            decorrelation_lag: 1,
            period: None,
            constant_series: true,
            autocorrelation: Vec::new(),
        });
    };
    let threshold = (-1.0f64).exp();
    let decorrelation_lag = (1..r.len()).find(|&k| r[k] < threshold).unwrap_or(cap);
    let period = (decorrelation_lag + 1..r.len() - 1).find(|&k| r[k] >= 1.0 - threshold && r[k] >= r[k - 1] && r[k] >= r[k + 1]);
    Ok(CorrelationEstimate {
        estimate: period.unwrap_or(decorrelation_lag).clamp(1, cap.max(1)),
        decorrelation_lag,
        period,
        constant_series: false,
        autocorrelation: r,
    })
}
