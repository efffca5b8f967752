//! Direct (Chhabra-Jensen) estimation of the singularity spectrum.
//!
//! For each scale `L` the series is cut into bins holding proportions `P_i(L)`
//! of the total. A moment order `q` turns them into masses
//! `mu_i = P_i^q / sum_j P_j^q`; `alpha(q)` and `f(q)` are the slopes of
//! `sum mu_i ln P_i` and `sum mu_i ln mu_i` against `ln L`. A `q` joins the
//! spectrum only when both regressions are nearly perfect lines.

use crate::error::{Error, Result};
use crate::regression::LineFit;

/// Slack allowed when checking that `alpha(q)` does not increase with `q`.
const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub q_grid: Vec<f64>,
    /// Both Pearson correlations must exceed this for a `q` to be accepted.
    pub r_threshold: f64,
    /// Bin sizes; `None` means [`dyadic_scales`] of each epoch.
    pub scales: Option<Vec<usize>>,
}

impl Default for MfParams {
    fn default() -> Self {
        Self {
            q_grid: q_range(-5.0, 5.0, 0.25),
            r_threshold: 0.995,
            scales: None,
        }
    }
}

impl MfParams {
    pub fn scales_for(&self, len: usize) -> Vec<usize> {
        self.scales.clone().unwrap_or_else(|| dyadic_scales(len))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_threshold > 0.0 && self.r_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "correlation threshold {} outside (0, 1)",
                self.r_threshold
            )));
        }
        if self.q_grid.is_empty() || self.q_grid.iter().any(|q| !q.is_finite()) {
            return Err(Error::invalid("q grid must be non-empty and finite"));
        }
        Ok(())
    }
}

/// `min, min + step, ..., max` with the endpoint included.
pub fn q_range(min: f64, max: f64, step: f64) -> Vec<f64> {
    let count = ((max - min) / step).round() as usize;
    (0..=count).map(|i| min + step * i as f64).collect()
}

/// Powers of two from 4 up to `len / 8`.
pub fn dyadic_scales(len: usize) -> Vec<usize> {
    std::iter::successors(Some(4usize), |s| s.checked_mul(2))
        .take_while(|&s| s <= len / 8)
        .collect()
}

fn check_unsigned(series: &[f64]) -> Result<f64> {
    if let Some(v) = series.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!(
            "multifractal input must be finite and nonnegative, found {v}"
        )));
    }
    let total: f64 = series.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput("series sums to zero".into()));
    }
    Ok(total)
}

/// Share of the total falling in each of the `len / L` nonoverlapping bins.
pub fn bin_proportions(series: &[f64], bin_len: usize) -> Result<Vec<f64>> {
    let total = check_unsigned(series)?;
    if bin_len == 0 || bin_len > series.len() {
        return Err(Error::invalid(format!(
            "bin length {bin_len} outside [1, {}]",
            series.len()
        )));
    }
    Ok(series
        .chunks_exact(bin_len)
        .map(|bin| bin.iter().sum::<f64>() / total)
        .collect())
}

/// `ln mu_i` for the given log-proportions, computed stably in the log domain.
fn log_masses(ln_p: &[f64], q: f64, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    out.extend(ln_p.iter().map(|lp| q * lp));
    if out.iter().any(|w| !w.is_finite()) {
        return Err(Error::ExtremeQ { q });
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = out.iter().map(|w| (w - max).exp()).sum::<f64>().ln() + max;
    if !norm.is_finite() {
        return Err(Error::ExtremeQ { q });
    }
    out.iter_mut().for_each(|w| *w -= norm);
    Ok(())
}

/// Mass distribution `P_i^q / sum_j P_j^q`. Every proportion must be positive.
pub fn masses(proportions: &[f64], q: f64) -> Result<Vec<f64>> {
    if proportions.is_empty() || proportions.iter().any(|p| p.is_nan() || *p <= 0.0) {
        return Err(Error::invalid(
            "masses need positive proportions (drop empty bins first)",
        ));
    }
    let ln_p: Vec<f64> = proportions.iter().map(|p| p.ln()).collect();
    let mut ln_mu = Vec::with_capacity(ln_p.len());
    log_masses(&ln_p, q, &mut ln_mu)?;
    Ok(ln_mu.into_iter().map(f64::exp).collect())
}

/// Log-proportions of the nonempty bins at one scale.
struct ScaleBins {
    ln_scale: f64,
    ln_p: Vec<f64>,
}

/// Each scale is normalized over the bins it covers, so a truncated tail
/// does not leak into the slopes and `mu(q = 1)` is exactly `P`.
fn scale_bins(series: &[f64], scales: &[usize]) -> Result<Vec<ScaleBins>> {
    check_unsigned(series)?;
    let mut out = Vec::with_capacity(scales.len());
    for &l in scales {
        if l == 0 || series.len() / l < 2 {
            log::debug!("scale {l} dropped: fewer than two bins in {}", series.len());
            continue;
        }
        let covered = &series[..series.len() / l * l];
        let total: f64 = covered.iter().sum();
        if total <= 0.0 {
            log::debug!("scale {l} dropped: covered part sums to zero");
            continue;
        }
        let ln_p: Vec<f64> = covered
            .chunks_exact(l)
            .map(|bin| bin.iter().sum::<f64>() / total)
            .filter(|&p| p > 0.0)
            .map(f64::ln)
            .collect();
        let empty = series.len() / l - ln_p.len();
        if empty > 0 {
            log::debug!("scale {l}: {empty} empty bins dropped");
        }
        if ln_p.is_empty() {
            continue;
        }
        out.push(ScaleBins {
            ln_scale: (l as f64).ln(),
            ln_p,
        });
    }
    Ok(out)
}

/// One `q` of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub q: f64,
    pub alpha: f64,
    pub f: f64,
    pub r_alpha: f64,
    pub r_f: f64,
}

fn point_for_q(bins: &[ScaleBins], q: f64, buf: &mut Vec<f64>) -> Result<SpectrumPoint> {
    if bins.len() < 3 {
        return Err(Error::InsufficientScales {
            found: bins.len(),
            required: 3,
        });
    }
    let mut ln_l = Vec::with_capacity(bins.len());
    let mut a_sums = Vec::with_capacity(bins.len());
    let mut f_sums = Vec::with_capacity(bins.len());
    for scale in bins {
        log_masses(&scale.ln_p, q, buf)?;
        let (mut a, mut f) = (0.0, 0.0);
        for (&lp, &lm) in scale.ln_p.iter().zip(buf.iter()) {
            let mu = lm.exp();
            a += mu * lp;
            f += mu * lm;
        }
        ln_l.push(scale.ln_scale);
        a_sums.push(a);
        f_sums.push(f);
    }
    let too_few = || Error::InsufficientScales {
        found: bins.len(),
        required: 3,
    };
    let fa = LineFit::new(&ln_l, &a_sums).ok_or_else(too_few)?;
    let ff = LineFit::new(&ln_l, &f_sums).ok_or_else(too_few)?;
    Ok(SpectrumPoint {
        q,
        alpha: fa.slope,
        f: ff.slope,
        r_alpha: fa.r,
        r_f: ff.r,
    })
}

/// `alpha(q)`, `f(q)` and their regression correlations.
pub fn alpha_f_for_q(series: &[f64], q: f64, scales: &[usize]) -> Result<SpectrumPoint> {
    let bins = scale_bins(series, scales)?;
    point_for_q(&bins, q, &mut Vec::new())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultifractalSpectrum {
    pub points: Vec<SpectrumPoint>,
    pub accepted: Vec<bool>,
    /// Width of `alpha` over accepted `q`; NaN when fewer than two are accepted.
    pub delta_alpha: f64,
    /// `alpha` increases with `q` somewhere in the accepted range.
    pub nonmonotone: bool,
}

impl MultifractalSpectrum {
    pub fn accepted_points(&self) -> impl Iterator<Item = &SpectrumPoint> {
        self.points
            .iter()
            .zip(&self.accepted)
            .filter_map(|(p, &ok)| ok.then_some(p))
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }
}

/// Evaluate the whole `q` grid. Never fails on the acceptance count; see
/// [`spectrum`] for the strict version.
pub fn compute_spectrum(series: &[f64], params: &MfParams) -> Result<MultifractalSpectrum> {
    params.validate()?;
    let bins = scale_bins(series, &params.scales_for(series.len()))?;
    if bins.len() < 3 {
        return Err(Error::InsufficientScales {
            found: bins.len(),
            required: 3,
        });
    }
    let mut buf = Vec::new();
    let mut points = Vec::with_capacity(params.q_grid.len());
    for &q in &params.q_grid {
        match point_for_q(&bins, q, &mut buf) {
            Ok(p) => points.push(p),
            Err(Error::ExtremeQ { q }) => log::info!("q = {q} dropped: masses overflow"),
            Err(e) => return Err(e),
        }
    }
    let accepted: Vec<bool> = points
        .iter()
        .map(|p| p.r_alpha > params.r_threshold && p.r_f > params.r_threshold)
        .collect();

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut count = 0;
    let mut nonmonotone = false;
    let mut prev: Option<&SpectrumPoint> = None;
    for (p, _) in points.iter().zip(&accepted).filter(|(_, &a)| a) {
        lo = lo.min(p.alpha);
        hi = hi.max(p.alpha);
        count += 1;
        if let Some(prev) = prev {
            if p.q > prev.q && p.alpha > prev.alpha + MONOTONE_SLACK {
                nonmonotone = true;
            }
        }
        prev = Some(p);
    }
    if nonmonotone {
        log::debug!("alpha(q) increases with q somewhere in the accepted range");
    }
    Ok(MultifractalSpectrum {
        points,
        accepted,
        delta_alpha: if count >= 2 { hi - lo } else { f64::NAN },
        nonmonotone,
    })
}

/// Spectrum with a defined width: at least two accepted `q`.
pub fn spectrum(series: &[f64], params: &MfParams) -> Result<MultifractalSpectrum> {
    let s = compute_spectrum(series, params)?;
    if s.accepted_count() < 2 {
        return Err(Error::undefined(format!(
            "only {} q values pass the correlation gate",
            s.accepted_count()
        )));
    }
    Ok(s)
}

/// Spectrum width `alpha_max - alpha_min` over accepted `q`.
pub fn delta_alpha(series: &[f64], params: &MfParams) -> Result<f64> {
    spectrum(series, params).map(|s| s.delta_alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{gen_pink, gen_white, unsign};
    use proptest::prelude::*;

    /// Deterministic binomial cascade: sample `i` carries
    /// `p^(zeros of i) * (1-p)^(ones of i)` over `depth` bits.
    pub(crate) fn binomial_cascade(p: f64, depth: u32) -> Vec<f64> {
        (0..1usize << depth)
            .map(|i| {
                let ones = i.count_ones() as i32;
                p.powi(depth as i32 - ones) * (1.0 - p).powi(ones)
            })
            .collect()
    }

    /// Exact `alpha(q)` of the binomial cascade measured on dyadic bins.
    fn cascade_alpha(p: f64, q: f64) -> f64 {
        let (a, b) = (p.powf(q), (1.0 - p).powf(q));
        -(a * p.ln() + b * (1.0 - p).ln()) / ((a + b) * std::f64::consts::LN_2)
    }

    #[test]
    fn proportions_examples() {
        assert_eq!(bin_proportions(&[1.0, 0.0, 0.0, 1.0], 2).unwrap(), vec![0.5, 0.5]);
        let uniform = vec![2.0; 1000];
        let p = bin_proportions(&uniform, 250).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let x = unsign(&gen_white(1024, 1).unwrap());
        let p = bin_proportions(x.values(), 16).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = bin_proportions(x.values(), 100).unwrap();
        assert!(p.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn proportions_errors() {
        assert!(matches!(
            bin_proportions(&[0.0; 8], 2),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            bin_proportions(&[1.0, -1.0, 2.0], 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(bin_proportions(&[1.0; 4], 5).is_err());
    }

    #[test]
    fn mass_identities() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let m0 = masses(&p, 0.0).unwrap();
        assert!(m0.iter().all(|m| (m - 0.25).abs() < 1e-15));
        let m1 = masses(&p, 1.0).unwrap();
        for (a, b) in m1.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        for q in [-50.0, -5.0, 0.5, 3.0, 40.0] {
            assert!((masses(&p, q).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(masses(&[0.5, 0.0, 0.5], 2.0).is_err());
    }

    #[test]
    fn extreme_q_is_reported() {
        let mut buf = Vec::new();
        assert!(matches!(
            log_masses(&[-1.0, -2.0], f64::MAX, &mut buf),
            Err(Error::ExtremeQ { .. })
        ));
    }

    #[test]
    fn uniform_measure_is_monofractal() {
        let x = vec![1.0; 1024];
        for q in [-5.0, -1.0, 0.0, 1.0, 2.5, 5.0] {
            let p = alpha_f_for_q(&x, q, &dyadic_scales(1024)).unwrap();
            assert!((p.alpha - 1.0).abs() < 1e-6, "alpha({q}) = {}", p.alpha);
            assert!((p.f - 1.0).abs() < 1e-6, "f({q}) = {}", p.f);
        }
        let s = spectrum(&x, &MfParams::default()).unwrap();
        assert!(s.delta_alpha < 1e-9);
    }

    #[test]
    fn tangency_at_q_one() {
        for seed in 0..5 {
            let x = unsign(&gen_pink(1000, seed).unwrap());
            let p = alpha_f_for_q(x.values(), 1.0, &dyadic_scales(1000)).unwrap();
            assert!(p.f <= p.alpha + 1e-6);
        }
        // Entropy slope oracle with the tail excluded at each scale.
        let x = unsign(&gen_pink(1000, 9).unwrap());
        let scales = dyadic_scales(1000);
        let (mut ll, mut h) = (Vec::new(), Vec::new());
        for &l in &scales {
            let bins: Vec<f64> = x.values()[..1000 / l * l]
                .chunks(l)
                .map(|b| b.iter().sum())
                .collect();
            let t: f64 = bins.iter().sum();
            ll.push((l as f64).ln());
            h.push(
                bins.iter()
                    .map(|b| b / t)
                    .filter(|p| *p > 0.0)
                    .map(|p| p * p.ln())
                    .sum::<f64>(),
            );
        }
        let slope = LineFit::new(&ll, &h).unwrap().slope;
        let p = alpha_f_for_q(x.values(), 1.0, &scales).unwrap();
        assert!((p.f - slope).abs() < 1e-9 && (p.alpha - slope).abs() < 1e-9);
    }

    #[test]
    fn cascade_matches_analytic_alpha() {
        let x = binomial_cascade(0.6, 12);
        let scales = dyadic_scales(x.len());
        assert_eq!(scales, vec![4, 8, 16, 32, 64, 128, 256, 512]);
        for q in [-5.0, -2.0, 0.0, 1.0, 3.0, 5.0] {
            let p = alpha_f_for_q(&x, q, &scales).unwrap();
            assert!((p.alpha - cascade_alpha(0.6, q)).abs() < 1e-9, "q = {q}");
        }
        let limit_pos = -(0.6f64).log2();
        let limit_neg = -(0.4f64).log2();
        assert!((limit_pos - 0.737).abs() < 1e-3 && (limit_neg - 1.322).abs() < 1e-3);
        let a5 = alpha_f_for_q(&x, 5.0, &scales).unwrap().alpha;
        let am5 = alpha_f_for_q(&x, -5.0, &scales).unwrap().alpha;
        assert!((a5 / limit_pos - 1.0).abs() < 0.1);
        assert!((am5 / limit_neg - 1.0).abs() < 0.1);
    }

    #[test]
    fn cascade_spectrum_width() {
        let x = binomial_cascade(0.6, 12);
        // Over q in [-5, 5] the width is alpha(-5) - alpha(5), not the full
        // limit width.
        let s = spectrum(&x, &MfParams::default()).unwrap();
        let finite = cascade_alpha(0.6, -5.0) - cascade_alpha(0.6, 5.0);
        assert!((s.delta_alpha - finite).abs() < 1e-9);
        assert!(!s.nonmonotone);
        let wide = MfParams {
            q_grid: q_range(-30.0, 30.0, 0.5),
            ..MfParams::default()
        };
        let s = spectrum(&x, &wide).unwrap();
        let full = (0.6f64 / 0.4).log2();
        assert!(
            (s.delta_alpha / full - 1.0).abs() < 0.01,
            "width {}",
            s.delta_alpha
        );
    }

    #[test]
    fn pink_epochs_are_wider_than_white() {
        let params = MfParams::default();
        let mean_width = |pink: bool| {
            let widths: Vec<f64> = (0..20)
                .filter_map(|seed| {
                    let x = if pink {
                        gen_pink(1000, seed)
                    } else {
                        gen_white(1000, seed)
                    };
                    delta_alpha(unsign(&x.unwrap()).values(), &params).ok()
                })
                .collect();
            widths.iter().sum::<f64>() / widths.len() as f64
        };
        assert!(mean_width(true) > mean_width(false));
    }

    #[test]
    fn too_few_scales() {
        let x = vec![1.0; 40];
        assert!(matches!(
            compute_spectrum(&x, &MfParams::default()),
            Err(Error::InsufficientScales { .. })
        ));
    }

    #[test]
    fn width_needs_two_accepted_q() {
        let params = MfParams {
            q_grid: vec![2.0],
            ..MfParams::default()
        };
        let x = vec![1.0; 256];
        assert!(matches!(
            spectrum(&x, &params),
            Err(Error::UndefinedDescriptor(_))
        ));
        assert!(compute_spectrum(&x, &params).unwrap().delta_alpha.is_nan());
    }

    #[test]
    fn default_q_grid() {
        let q = MfParams::default().q_grid;
        assert_eq!(q.len(), 41);
        assert_eq!((q[0], q[20], q[40]), (-5.0, 0.0, 5.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn spectrum_is_scale_invariant(seed in 0u64..500, a in 0.01f64..100.0) {
            let x = unsign(&gen_pink(512, seed).unwrap());
            let y: Vec<f64> = x.values().iter().map(|v| a * v).collect();
            let (s1, s2) = (compute_spectrum(x.values(), &MfParams::default()).unwrap(), compute_spectrum(&y, &MfParams::default()).unwrap());
            prop_assert_eq!(&s1.accepted, &s2.accepted);
            for (p, r) in s1.points.iter().zip(&s2.points) {
                prop_assert!((p.alpha - r.alpha).abs() < 1e-8);
                prop_assert!((p.f - r.f).abs() < 1e-8);
                prop_assert!((p.r_alpha - r.r_alpha).abs() < 1e-8);
                prop_assert!((p.r_f - r.r_f).abs() < 1e-8);
            }
            prop_assert!(s1.delta_alpha.is_nan() && s2.delta_alpha.is_nan() || (s1.delta_alpha - s2.delta_alpha).abs() < 1e-8);
        }

        #[test]
        fn masses_sum_to_one(seed in 0u64..500, q in -10f64..10.0, l in 1usize..64) {
            let x = unsign(&gen_white(1024, seed).unwrap());
            let p: Vec<f64> = bin_proportions(x.values(), l).unwrap().into_iter().filter(|p| *p > 0.0).collect();
            prop_assert!((masses(&p, q).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn width_nonnegative_and_gate_respected(seed in 0u64..500) {
            let x = unsign(&gen_white(1000, seed).unwrap());
            let params = MfParams::default();
            let s = compute_spectrum(x.values(), &params).unwrap();
            prop_assert!(s.delta_alpha.is_nan() || s.delta_alpha >= 0.0);
            for p in s.accepted_points() {
                prop_assert!(p.r_alpha > 0.995 && p.r_f > 0.995);
            }
        }
    }
}
