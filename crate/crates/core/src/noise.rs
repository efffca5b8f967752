//! Seeded generators: white and 1/f noise, shuffled controls, the unsigned
//! transform and the multiplicative coin-toss gamble.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::series::{Provenance, TimeSeries, TAG_NORMALIZED, TAG_SHUFFLED, TAG_UNSIGNED};
use crate::spectral::{folded_index, SpectralEngine};

fn require_len(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("series length must be at least 1"))
    } else {
        Ok(())
    }
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n` independent standard normal draws.
pub fn gen_white(n: usize, seed: u64) -> Result<TimeSeries> {
    require_len(n)?;
    TimeSeries::new(gaussian(n, seed), Provenance::new("white", Some(seed)))
}

/// 1/f noise by spectral shaping of Gaussian white noise.
///
/// Bin `k` of the white spectrum is scaled by `1/sqrt(f_k)` (DC zeroed), the
/// result is transformed back and normalized to zero mean and unit population
/// variance. A single sample has no variance to normalize and comes out as `0`.
pub fn gen_pink(n: usize, seed: u64) -> Result<TimeSeries> {
    require_len(n)?;
    let white = gaussian(n, seed);
    let mut engine = SpectralEngine::new(n);
    let mut spectrum: Vec<Complex64> = Vec::with_capacity(n);
    engine.forward(&white, &mut spectrum);
    for (k, bin) in spectrum.iter_mut().enumerate() {
        let m = folded_index(k, n);
        *bin = if m == 0 {
            Complex64::default()
        } else {
            *bin / (m as f64).sqrt()
        };
    }
    let mut values = Vec::with_capacity(n);
    engine.inverse_real(&mut spectrum, &mut values);
    normalize(&mut values);
    TimeSeries::new(
        values,
        Provenance::new("pink", Some(seed)).with_tag(TAG_NORMALIZED),
    )
}

/// Shift to zero mean and scale to unit population variance (if nonzero).
fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter_mut().for_each(|v| *v -= mean);
    let sd = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        values.iter_mut().for_each(|v| *v /= sd);
    }
}

/// Uniformly random permutation (Fisher-Yates) of the values.
pub fn shuffle(series: &TimeSeries, seed: u64) -> TimeSeries {
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng_from_seed(seed));
    series.derived(values, TAG_SHUFFLED)
}

/// Element-wise absolute value.
pub fn unsign(series: &TimeSeries) -> TimeSeries {
    series.derived(series.values().iter().map(|v| v.abs()).collect(), TAG_UNSIGNED)
}

/// Multiplicative coin-toss gamble: heads multiplies wealth by
/// `1 + win_fraction`, tails by `1 - loss_fraction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GambleParams {
    pub win_fraction: f64,
    pub loss_fraction: f64,
    pub initial_wealth: f64,
    pub rounds: usize,
}

impl Default for GambleParams {
    fn default() -> Self {
        Self {
            win_fraction: 0.5,
            loss_fraction: 0.4,
            initial_wealth: 1.0,
            rounds: 50,
        }
    }
}

impl GambleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_fraction > 0.0 && self.loss_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "loss fraction {} outside (0, 1)",
                self.loss_fraction
            )));
        }
        if !(self.win_fraction > 0.0 && self.win_fraction.is_finite()) {
            return Err(Error::invalid(format!(
                "win fraction {} must be positive",
                self.win_fraction
            )));
        }
        if !(self.initial_wealth > 0.0 && self.initial_wealth.is_finite()) {
            return Err(Error::invalid("initial wealth must be positive"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("a gamble needs at least one round"));
        }
        Ok(())
    }

    pub fn up_factor(&self) -> f64 {
        1.0 + self.win_fraction
    }

    pub fn down_factor(&self) -> f64 {
        1.0 - self.loss_fraction
    }
}

/// Outcome of round `round` for the player whose stream is `seed`.
///
/// Counter-based, so a player's tosses can be replayed in any order without
/// carrying generator state.
pub fn coin_is_heads(seed: u64, round: usize) -> bool {
    derive_seed(seed, &[round as u64]) >> 63 == 1
}

/// Wealth after each round, starting with the initial wealth (`rounds + 1` values).
pub fn gamble_trajectory(params: &GambleParams, seed: u64) -> Result<TimeSeries> {
    params.validate()?;
    let (up, down) = (params.up_factor(), params.down_factor());
    let mut wealth = params.initial_wealth;
    let mut values = Vec::with_capacity(params.rounds + 1);
    values.push(wealth);
    for round in 0..params.rounds {
        wealth *= if coin_is_heads(seed, round) { up } else { down };
        values.push(wealth);
    }
    TimeSeries::new(values, Provenance::new("gamble", Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_sd(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        (m, v.sqrt())
    }

    fn lag1_autocorrelation(x: &[f64]) -> f64 {
        let (m, sd) = mean_sd(x);
        let n = x.len() as f64;
        x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n * sd * sd)
    }

    #[test]
    fn white_moments_within_standard_error_bound() {
        let n = 50_000;
        let x = gen_white(n, 11).unwrap();
        let (m, sd) = mean_sd(x.values());
        // 3/sqrt(n) ~ 0.0134; the stated tolerance is 0.02
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
        let r1 = lag1_autocorrelation(x.values());
        assert!(r1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 {r1}");
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_white(1000, 5).unwrap(), gen_white(1000, 5).unwrap());
        assert_eq!(gen_pink(1000, 5).unwrap(), gen_pink(1000, 5).unwrap());
        assert_ne!(gen_white(1000, 5).unwrap(), gen_white(1000, 6).unwrap());
    }

    #[test]
    fn zero_length_is_rejected() {
        assert!(matches!(gen_white(0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(gen_pink(0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_sample_generators() {
        assert!(gen_white(1, 3).unwrap().values()[0].is_finite());
        assert_eq!(gen_pink(1, 3).unwrap().values(), &[0.0]);
    }

    #[test]
    fn pink_is_normalized_and_tagged() {
        let x = gen_pink(50_000, 2).unwrap();
        let (m, sd) = mean_sd(x.values());
        assert!(m.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 0.01);
        assert!(x.meta().has_tag(TAG_NORMALIZED));
    }

    #[test]
    fn pink_periodogram_slope_is_minus_one() {
        // Periodogram regression over the middle decades.
        let n = 50_000;
        let x = gen_pink(n, 9).unwrap();
        let mut engine = SpectralEngine::new(n);
        let mut buf = Vec::new();
        let amp = engine.amplitudes(x.values(), &mut buf);
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for (k, a) in amp.iter().enumerate().take(n / 2).skip(1) {
            let f = k as f64 / n as f64;
            if (1e-3..1e-1).contains(&f) {
                lx.push(f.ln());
                ly.push((a * a).ln());
            }
        }
        let fit = crate::regression::LineFit::new(&lx, &ly).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let x = gen_pink(5000, 1).unwrap();
        let s = shuffle(&x, 77);
        let mut a = x.values().to_vec();
        let mut b = s.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert!(s.meta().has_tag(TAG_SHUFFLED));
        assert_ne!(s.values(), x.values());
    }

    #[test]
    fn shuffle_destroys_autocorrelation() {
        let n = 50_000;
        let x = unsign(&gen_pink(n, 4).unwrap());
        assert!(lag1_autocorrelation(x.values()) > 0.3);
        let s = shuffle(&x, 4);
        let r1 = lag1_autocorrelation(s.values());
        assert!(r1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 {r1}");
    }

    #[test]
    fn shuffle_single_value() {
        let x = TimeSeries::from_values(vec![3.5]).unwrap();
        assert_eq!(shuffle(&x, 1).values(), &[3.5]);
    }

    #[test]
    fn unsign_examples() {
        let x = TimeSeries::from_values(vec![-1.0, 2.0, -3.0]).unwrap();
        let u = unsign(&x);
        assert_eq!(u.values(), &[1.0, 2.0, 3.0]);
        assert!(u.meta().has_tag(TAG_UNSIGNED));
        assert_eq!(unsign(&u).values(), u.values());
    }

    #[test]
    fn unsign_commutes_with_shuffle() {
        let x = gen_white(1000, 8).unwrap();
        assert_eq!(unsign(&shuffle(&x, 3)).values(), shuffle(&unsign(&x), 3).values());
    }

    #[test]
    fn gamble_wealth_follows_the_coin() {
        let params = GambleParams {
            rounds: 200,
            ..GambleParams::default()
        };
        let w = gamble_trajectory(&params, 12).unwrap();
        assert_eq!(w.len(), 201);
        assert_eq!(w.values()[0], 1.0);
        for (k, pair) in w.values().windows(2).enumerate() {
            let expected = if coin_is_heads(12, k) { 1.5 } else { 0.6 };
            assert!((pair[1] / pair[0] - expected).abs() < 1e-12);
            assert!(pair[1] > 0.0);
        }
    }

    #[test]
    fn gamble_ensemble_mean_and_median_growth() {
        // Oracle: E[w_k] = 1.05^k by linearity; the typical (median) log-wealth
        // grows at ln(1.5 * 0.6) / 2 per round.
        let params = GambleParams {
            rounds: 10,
            ..GambleParams::default()
        };
        let players = 100_000;
        let mut finals: Vec<f64> = (0..players)
            .map(|p| {
                *gamble_trajectory(&params, derive_seed(99, &[p]))
                    .unwrap()
                    .values()
                    .last()
                    .unwrap()
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / players as f64;
        let expected = 1.05f64.powi(10);
        assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean}");

        let params = GambleParams {
            rounds: 1000,
            ..GambleParams::default()
        };
        finals = (0..2001)
            .map(|p| {
                gamble_trajectory(&params, derive_seed(7, &[p]))
                    .unwrap()
                    .values()
                    .last()
                    .unwrap()
                    .ln()
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        let slope = finals[1000] / 1000.0;
        let analytic = (1.5f64 * 0.6).ln() / 2.0;
        assert!((analytic + 0.0527).abs() < 1e-4);
        assert!((slope - analytic).abs() < 0.005, "median slope {slope}");
    }

    #[test]
    fn gamble_params_are_validated() {
        let bad = GambleParams {
            loss_fraction: 1.0,
            ..GambleParams::default()
        };
        assert!(gamble_trajectory(&bad, 1).is_err());
        let bad = GambleParams {
            rounds: 0,
            ..GambleParams::default()
        };
        assert!(gamble_trajectory(&bad, 1).is_err());
    }
}
