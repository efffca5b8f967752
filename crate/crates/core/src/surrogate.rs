//! IAAFT surrogates and the surrogate t statistic for spectrum width.
//!
//! A surrogate keeps the original's values exactly and its amplitude
//! spectrum approximately; alternating between imposing the spectrum and
//! restoring the value distribution removes any structure beyond the linear
//! correlations.

use std::sync::Arc;

use rand::seq::SliceRandom;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multifractal::{self, MfParams};
use crate::seed::{derive_seed, rng_from_seed};
use crate::series::TimeSeries;

pub const MIN_IAAFT_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaaftParams {
    pub max_iter: usize,
    /// Stop once the relative change of the spectral error drops below this.
    pub tol: f64,
}

impl Default for IaaftParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IaaftOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Relative RMS mismatch between the surrogate's and the original's
    /// amplitude spectra.
    pub spectral_error: f64,
    pub converged: bool,
}

/// Unsigned key that sorts like `f64::total_cmp`.
fn total_order_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

/// Reusable buffers and plans for repeated surrogates of one series.
///
/// Works on the `n/2 + 1` bins of the real-input transform; the mirrored
/// bins carry no extra information.
pub struct IaaftEngine {
    sorted: Vec<f64>,
    target: Vec<f64>,
    /// Multiplicity of each half-spectrum bin in the full spectrum.
    weight: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    real_buf: Vec<f64>,
    scratch: Vec<Complex64>,
    constant: bool,
}

impl IaaftEngine {
    pub fn new(original: &[f64]) -> Result<Self> {
        let n = original.len();
        if n < MIN_IAAFT_LEN {
            return Err(Error::invalid(format!(
                "IAAFT needs at least {MIN_IAAFT_LEN} samples, got {n}"
            )));
        }
        if original.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("IAAFT input holds non-finite values"));
        }
        let mut sorted = original.to_vec();
        sorted.sort_by(f64::total_cmp);
        let constant = sorted.first() == sorted.last();
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_scratch_len().max(inverse.get_scratch_len());
        let half = n / 2 + 1;
        let weight = (0..half)
            .map(|k| if k == 0 || 2 * k == n { 1.0 } else { 2.0 })
            .collect();
        let mut engine = Self {
            sorted,
            target: Vec::new(),
            weight,
            forward,
            inverse,
            real_buf: vec![0.0; n],
            scratch: vec![Complex64::default(); scratch_len],
            constant,
        };
        let mut spectrum = Vec::new();
        engine.transform(original, &mut spectrum);
        engine.target = spectrum.iter().map(|c| c.norm_sqr().sqrt()).collect();
        Ok(engine)
    }

    fn transform(&mut self, values: &[f64], out: &mut Vec<Complex64>) {
        self.real_buf.copy_from_slice(values);
        out.resize(self.weight.len(), Complex64::default());
        self.forward
            .process_with_scratch(&mut self.real_buf, out, &mut self.scratch)
            .expect("buffer lengths match the plan");
    }

    /// Transform `values` into `buf` and return the relative RMS mismatch of
    /// its amplitudes against the target, over the full spectrum.
    fn spectral_error(&mut self, values: &[f64], buf: &mut Vec<Complex64>) -> f64 {
        self.transform(values, buf);
        let (mut num, mut den) = (0.0, 0.0);
        for ((c, &t), &w) in buf.iter().zip(&self.target).zip(&self.weight) {
            let d = c.norm_sqr().sqrt() - t;
            num += w * d * d;
            den += w * t * t;
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    }

    /// One surrogate from the random permutation drawn with `seed`.
    pub fn surrogate(&mut self, original: &[f64], seed: u64, params: &IaaftParams) -> IaaftOutcome {
        debug_assert_eq!(original.len(), self.sorted.len());
        if self.constant {
            return IaaftOutcome {
                values: original.to_vec(),
                iterations: 0,
                spectral_error: 0.0,
                converged: true,
            };
        }
        let n = original.len();
        let mut current = original.to_vec();
        current.shuffle(&mut rng_from_seed(seed));

        let mut spectrum = Vec::with_capacity(n / 2 + 1);
        let mut shaped = vec![0.0; n];
        let mut keyed: Vec<(u64, usize)> = Vec::with_capacity(n);
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut prev_order: Vec<usize> = Vec::new();
        let mut error = self.spectral_error(&current, &mut spectrum);
        let mut iterations = 0;
        let mut converged = false;

        while iterations < params.max_iter {
            iterations += 1;
            // Impose the target amplitudes on the current phases; `spectrum`
            // already holds the transform of `current`.
            for (c, &t) in spectrum.iter_mut().zip(&self.target) {
                let norm = c.norm_sqr().sqrt();
                *c = if norm > 0.0 {
                    *c * (t / norm)
                } else {
                    Complex64::new(t, 0.0)
                };
            }
            // DC and Nyquist bins of a real signal are real.
            spectrum[0].im = 0.0;
            if n.is_multiple_of(2) {
                spectrum[n / 2].im = 0.0;
            }
            self.inverse
                .process_with_scratch(&mut spectrum, &mut shaped, &mut self.scratch)
                .expect("buffer lengths match the plan");

            // Restore the value distribution by rank. The order moves little
            // between iterations; refilling the keys in the previous order
            // lets the adaptive sort run near linear. Scaling of the inverse
            // transform does not affect ranks.
            if keyed.is_empty() {
                keyed.extend(shaped.iter().enumerate().map(|(i, &v)| (total_order_key(v), i)));
            } else {
                keyed.iter_mut().for_each(|k| k.0 = total_order_key(shaped[k.1]));
            }
            keyed.sort();
            order.clear();
            order.extend(keyed.iter().map(|&(_, i)| i));
            for (rank, &i) in order.iter().enumerate() {
                current[i] = self.sorted[rank];
            }

            let prev_error = std::mem::replace(&mut error, self.spectral_error(&current, &mut spectrum));
            if order == prev_order || (prev_error - error).abs() <= params.tol * prev_error {
                converged = true;
                break;
            }
            prev_order.clone_from(&order);
        }
        if !converged {
            log::debug!(
                "IAAFT hit {} iterations, spectral error {error:.3e}",
                params.max_iter
            );
        }
        IaaftOutcome {
            values: current,
            iterations,
            spectral_error: error,
            converged,
        }
    }
}

/// One IAAFT surrogate of `series`.
pub fn iaaft(series: &TimeSeries, seed: u64, params: &IaaftParams) -> Result<(TimeSeries, IaaftOutcome)> {
    let mut engine = IaaftEngine::new(series.values())?;
    let outcome = engine.surrogate(series.values(), seed, params);
    let surrogate = series.derived(outcome.values.clone(), "iaaft");
    Ok((surrogate, outcome))
}

#[derive(Debug, Clone)]
pub struct SurrogateEnsemble {
    pub surrogates: Vec<TimeSeries>,
    pub spectral_errors: Vec<f64>,
    pub iterations_used: Vec<usize>,
    pub converged: Vec<bool>,
}

/// `count` surrogates; surrogate `k` uses seed `derive_seed(seed, [k])`.
pub fn surrogate_ensemble(
    series: &TimeSeries,
    count: usize,
    seed: u64,
    params: &IaaftParams,
) -> Result<SurrogateEnsemble> {
    let mut engine = IaaftEngine::new(series.values())?;
    let mut out = SurrogateEnsemble {
        surrogates: Vec::with_capacity(count),
        spectral_errors: Vec::with_capacity(count),
        iterations_used: Vec::with_capacity(count),
        converged: Vec::with_capacity(count),
    };
    for k in 0..count {
        let o = engine.surrogate(series.values(), derive_seed(seed, &[k as u64]), params);
        out.surrogates.push(series.derived(o.values, "iaaft"));
        out.spectral_errors.push(o.spectral_error);
        out.iterations_used.push(o.iterations);
        out.converged.push(o.converged);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmfParams {
    pub n_surrogates: usize,
    pub iaaft: IaaftParams,
    pub mf: MfParams,
}

impl Default for TmfParams {
    fn default() -> Self {
        Self {
            n_surrogates: 32,
            iaaft: IaaftParams::default(),
            mf: MfParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmfResult {
    pub t: f64,
    pub original_delta_alpha: f64,
    pub surrogate_mean: f64,
    pub surrogate_sd: f64,
    /// Surrogates with a defined spectrum width.
    pub used: usize,
    /// Surrogates that hit the iteration cap.
    pub unconverged: usize,
    /// The surrogate widths had zero spread.
    pub infinite: bool,
}

/// One-sample t of the original width against the surrogate widths, given
/// the original width.
pub fn t_mf_with_original(
    epoch: &[f64],
    original_delta_alpha: f64,
    params: &TmfParams,
    seed: u64,
) -> Result<TmfResult> {
    if !original_delta_alpha.is_finite() {
        return Err(Error::undefined("original spectrum width undefined"));
    }
    let mut engine = IaaftEngine::new(epoch)?;
    let mut widths = Vec::with_capacity(params.n_surrogates);
    let mut unconverged = 0;
    for k in 0..params.n_surrogates {
        let o = engine.surrogate(epoch, derive_seed(seed, &[k as u64]), &params.iaaft);
        unconverged += usize::from(!o.converged);
        if let Ok(w) = multifractal::delta_alpha(&o.values, &params.mf) {
            widths.push(w);
        }
    }
    let m = widths.len();
    if m < 2 {
        return Err(Error::undefined(format!(
            "{m} of {} surrogate widths defined",
            params.n_surrogates
        )));
    }
    let mean = widths.iter().sum::<f64>() / m as f64;
    let var = widths.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sd = var.sqrt();
    let diff = original_delta_alpha - mean;
    let (t, infinite) = if sd > 0.0 {
        (diff / (sd / (m as f64).sqrt()), false)
    } else if diff == 0.0 {
        (0.0, false)
    } else {
        (diff.signum() * f64::INFINITY, true)
    };
    Ok(TmfResult {
        t,
        original_delta_alpha,
        surrogate_mean: mean,
        surrogate_sd: sd,
        used: m,
        unconverged,
        infinite,
    })
}

/// `t_MF` of one epoch.
pub fn t_mf(epoch: &[f64], params: &TmfParams, seed: u64) -> Result<TmfResult> {
    let original = multifractal::delta_alpha(epoch, &params.mf)?;
    t_mf_with_original(epoch, original, params, seed)
}
