//! First-order detrended fluctuation analysis.
//!
//! The series is integrated into a profile, the profile is cut into
//! nonoverlapping bins of size `n`, a least-squares line is removed from each
//! bin and `f(n)` is the RMS of the pooled residuals. The Hurst exponent is
//! the log-log slope of `f(n)` against `n`.

use crate::error::{Error, Result};
use crate::regression::LineFit;

pub const MIN_SCALE: usize = 4;

/// Log-spaced bin sizes between `min_scale` and `max_scale` (default `N/4`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    pub min_scale: usize,
    pub max_scale: Option<usize>,
    /// Target number of scales before rounding duplicates away.
    pub count: usize,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        Self {
            min_scale: MIN_SCALE,
            max_scale: None,
            count: 15,
        }
    }
}

impl ScaleSpec {
    /// Distinct integer scales for a series of `len` samples, increasing.
    pub fn scales(&self, len: usize) -> Vec<usize> {
        let lo = self.min_scale.max(MIN_SCALE);
        let hi = self.max_scale.unwrap_or(len / 4).min(len / 4);
        if hi < lo {
            return Vec::new();
        }
        if hi == lo || self.count < 2 {
            return vec![lo];
        }
        let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
        let step = (b - a) / (self.count - 1) as f64;
        let mut out: Vec<usize> = (0..self.count)
            .map(|i| ((a + step * i as f64).exp().round() as usize).clamp(lo, hi))
            .collect();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfaOptions {
    pub scales: ScaleSpec,
    /// Also bin the profile from its end, pooling both passes.
    pub reverse_pass: bool,
    /// Fits with r² below this are returned with `low_fit` set.
    pub min_r2: f64,
}

impl Default for DfaOptions {
    fn default() -> Self {
        Self {
            scales: ScaleSpec::default(),
            reverse_pass: false,
            min_r2: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfaResult {
    pub hurst: f64,
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub fit_r2: f64,
    pub low_fit: bool,
}

/// Cumulative sum of deviations from the grand mean.
pub fn integrate_profile(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::invalid("profile needs at least two samples"));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(series
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x - mean;
            Some(*acc)
        })
        .collect())
}

/// Residual sum of squares of the least-squares line through `bin` against
/// `0..len`.
fn detrended_ss(bin: &[f64]) -> f64 {
    let n = bin.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = bin.iter().sum::<f64>() / n;
    let sxx = n * (n * n - 1.0) / 12.0;
    let sxy: f64 = bin
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 - xm) * (y - ym))
        .sum();
    let slope = sxy / sxx;
    bin.iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - ym - slope * (i as f64 - xm);
            r * r
        })
        .sum()
}

fn fluctuation_with(profile: &[f64], n: usize, reverse_pass: bool) -> Result<f64> {
    let len = profile.len();
    if n < MIN_SCALE || n > len / 4 {
        return Err(Error::invalid(format!(
            "scale {n} outside [{MIN_SCALE}, {}] for a profile of {len}",
            len / 4
        )));
    }
    let bins = len / n;
    let mut ss: f64 = profile.chunks_exact(n).map(detrended_ss).sum();
    let mut covered = bins * n;
    if reverse_pass {
        ss += profile[len - bins * n..]
            .chunks_exact(n)
            .map(detrended_ss)
            .sum::<f64>();
        covered *= 2;
    }
    Ok((ss / covered as f64).sqrt())
}

/// RMS of linearly detrended residuals over nonoverlapping `n`-sample bins
/// taken from the start of the profile.
pub fn fluctuation(profile: &[f64], n: usize) -> Result<f64> {
    fluctuation_with(profile, n, false)
}

/// Hurst exponent `H_fGn` of `series`.
pub fn hurst(series: &[f64], options: &DfaOptions) -> Result<DfaResult> {
    if series.len() < 16 {
        return Err(Error::invalid(format!(
            "DFA needs at least 16 samples, got {}",
            series.len()
        )));
    }
    let profile = integrate_profile(series)?;
    let scales = options.scales.scales(series.len());
    if scales.len() < 3 {
        return Err(Error::InsufficientScales {
            found: scales.len(),
            required: 3,
        });
    }
    let fluctuations = scales
        .iter()
        .map(|&n| fluctuation_with(&profile, n, options.reverse_pass))
        .collect::<Result<Vec<_>>>()?;
    if fluctuations.iter().all(|&f| f == 0.0) {
        return Err(Error::undefined(
            "constant series has zero fluctuation at every scale",
        ));
    }
    let (log_n, log_f): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(&fluctuations)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&n, &f)| ((n as f64).ln(), f.ln()))
        .unzip();
    if log_n.len() < 3 {
        return Err(Error::InsufficientScales {
            found: log_n.len(),
            required: 3,
        });
    }
    let fit = LineFit::new(&log_n, &log_f).ok_or(Error::InsufficientScales {
        found: log_n.len(),
        required: 3,
    })?;
    let fit_r2 = fit.r2();
    Ok(DfaResult {
        hurst: fit.slope,
        scales,
        fluctuations,
        fit_r2,
        low_fit: fit_r2 < options.min_r2,
    })
}
