//! Ensemble statistics of the multiplicative coin-toss gamble.

use crate::error::{Error, Result};
use crate::noise::{coin_is_heads, GambleParams};
use crate::numeric::exact_sum;
use crate::seed::derive_seed;

/// Per-round summary across players; index 0 is the initial wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct GambleStats {
    pub n_players: usize,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    /// Smallest wealth held by any player.
    pub min: Vec<f64>,
}

impl GambleStats {
    pub fn rounds(&self) -> usize {
        self.mean.len() - 1
    }
}

/// Seed of player `p` in an ensemble drawn from `seed`.
pub fn player_seed(seed: u64, player: usize) -> u64 {
    derive_seed(seed, &[player as u64])
}

/// Linear-interpolation quantile (the common "type 7" definition). Reorders
/// `v` in place.
pub fn quantile(v: &mut [f64], p: f64) -> f64 {
    assert!(!v.is_empty() && (0.0..=1.0).contains(&p));
    let n = v.len();
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let (_, &mut a, rest) = v.select_nth_unstable_by(lo, f64::total_cmp);
    if lo + 1 >= n || h == lo as f64 {
        return a;
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    a + (h - lo as f64) * (b - a)
}

/// Mean, median, 10% and 90% quantiles of wealth after every round.
/// Player `p` tosses with `player_seed(seed, p)`, so each player's path
/// equals `gamble_trajectory(params, player_seed(seed, p))`.
pub fn gamble_ensemble_stats(params: &GambleParams, n_players: usize, seed: u64) -> Result<GambleStats> {
    params.validate()?;
    if n_players == 0 {
        return Err(Error::invalid("need at least one player"));
    }
    let seeds: Vec<u64> = (0..n_players).map(|p| player_seed(seed, p)).collect();
    let mut wealth = vec![params.initial_wealth; n_players];
    let mut scratch = wealth.clone();
    let mut stats = GambleStats {
        n_players,
        mean: Vec::with_capacity(params.rounds + 1),
        median: Vec::with_capacity(params.rounds + 1),
        q10: Vec::with_capacity(params.rounds + 1),
        q90: Vec::with_capacity(params.rounds + 1),
        min: Vec::with_capacity(params.rounds + 1),
    };
    let (up, down) = (params.up_factor(), params.down_factor());
    for round in 0..=params.rounds {
        if round > 0 {
            for (w, &s) in wealth.iter_mut().zip(&seeds) {
                *w *= if coin_is_heads(s, round - 1) { up } else { down };
            }
        }
        stats
            .mean
            .push(exact_sum(wealth.iter().copied()) / n_players as f64);
        scratch.copy_from_slice(&wealth);
        stats.median.push(quantile(&mut scratch, 0.5));
        stats.q10.push(quantile(&mut scratch, 0.1));
        stats.q90.push(quantile(&mut scratch, 0.9));
        stats
            .min
            .push(wealth.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::gamble_trajectory;

    #[test]
    fn quantile_matches_interpolation() {
        let mut v = vec![5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(quantile(&mut v, 0.5), 3.0);
        assert_eq!(quantile(&mut v, 0.0), 1.0);
        assert_eq!(quantile(&mut v, 1.0), 5.0);
        assert!((quantile(&mut v, 0.1) - 1.4).abs() < 1e-12);
        let mut w = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&mut w, 0.5), 2.5);
    }

    #[test]
    fn single_player_is_the_trajectory() {
        let p = GambleParams::default();
        let s = gamble_ensemble_stats(&p, 1, 9).unwrap();
        let t = gamble_trajectory(&p, player_seed(9, 0)).unwrap();
        assert_eq!(s.mean, t.values());
        assert_eq!(s.median, t.values());
        assert_eq!(s.rounds(), 50);
    }

    #[test]
    fn stats_match_explicit_trajectories() {
        let p = GambleParams {
            rounds: 30,
            ..GambleParams::default()
        };
        let s = gamble_ensemble_stats(&p, 101, 3).unwrap();
        let paths: Vec<Vec<f64>> = (0..101)
            .map(|i| gamble_trajectory(&p, player_seed(3, i)).unwrap().into_values())
            .collect();
        for r in [0, 1, 17, 30] {
            let mut col: Vec<f64> = paths.iter().map(|x| x[r]).collect();
            let mean = col.iter().sum::<f64>() / 101.0;
            assert!((s.mean[r] - mean).abs() <= 1e-12 * mean);
            col.sort_by(f64::total_cmp);
            assert_eq!(s.median[r], col[50]);
            assert_eq!(s.q10[r], col[10]);
            assert_eq!(s.q90[r], col[90]);
            assert_eq!(s.min[r], col[0]);
        }
    }

    #[test]
    fn mean_grows_while_median_decays() {
        let p = GambleParams {
            rounds: 200,
            ..GambleParams::default()
        };
        let s = gamble_ensemble_stats(&p, 20_000, 1).unwrap();
        // E[wealth_k] = 1.05^k; at 20 rounds the estimator is still tight.
        assert!((s.mean[20] / 1.05f64.powi(20) - 1.0).abs() < 0.1);
        assert!(s.median[200] < 1e-3);
        assert!(s.min.iter().all(|&m| m > 0.0));
        assert!(gamble_ensemble_stats(&p, 0, 1).is_err());
    }
}
