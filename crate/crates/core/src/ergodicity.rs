//! Time-averaged MSD, the ergodicity breaking parameter `E_B(t)` and
//! multiple-trajectory-ensemble averages.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linstats::DescriptorSeries;
use crate::numeric::exact_sum;

pub const DEFAULT_LAG: usize = 2;
pub const DEFAULT_GRID_POINTS: usize = 50;
/// A point is unreliable once fewer than this share of the ensemble is usable.
pub const MIN_USABLE_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Samples,
    Epochs,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Samples => "samples",
            Unit::Epochs => "epochs",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "samples" => Ok(Unit::Samples),
            "epochs" => Ok(Unit::Epochs),
            other => Err(Error::invalid(format!("unknown unit {other:?}"))),
        }
    }
}

fn check_lag(lag: usize, t: usize, len: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::invalid("lag must be positive"));
    }
    if t <= lag || t > len {
        return Err(Error::invalid(format!(
            "measurement length {t} outside ({lag}, {len}]"
        )));
    }
    Ok(())
}

/// TAMSD at each length in `lengths` (increasing), from one running sum of
/// squared increments. A NaN anywhere in the prefix makes that length NaN.
pub fn tamsd_curve(series: &[f64], lag: usize, lengths: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(lengths.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut k = 0;
    let mut prev_t = 0;
    for &t in lengths {
        check_lag(lag, t, series.len())?;
        if t < prev_t {
            return Err(Error::invalid("lengths must be increasing"));
        }
        prev_t = t;
        while k < t - lag {
            let d = series[k + lag] - series[k];
            let v = d * d;
            // Neumaier compensation
            let s = sum + v;
            comp += if sum.abs() >= v.abs() {
                (sum - s) + v
            } else {
                (v - s) + sum
            };
            sum = s;
            k += 1;
        }
        out.push((sum + comp) / (t - lag) as f64);
    }
    Ok(out)
}

/// `(1/(t-lag)) * sum_k (x[k+lag] - x[k])^2` over the first `t` samples.
pub fn tamsd(series: &[f64], lag: usize, t: usize) -> Result<f64> {
    Ok(tamsd_curve(series, lag, &[t])?[0])
}

/// Up to `points` log-spaced lengths from `lag + 2` to `len`, rounded and
/// deduplicated.
pub fn t_grid(lag: usize, len: usize, points: usize) -> Result<Vec<usize>> {
    if lag == 0 || len <= lag {
        return Err(Error::invalid(format!(
            "series of length {len} too short for lag {lag}"
        )));
    }
    if points == 0 {
        return Err(Error::invalid("grid needs at least one point"));
    }
    let lo = (lag + 2).min(len);
    if points == 1 || lo == len {
        return Ok(vec![len]);
    }
    let (a, b) = ((lo as f64).ln(), (len as f64).ln());
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let t = (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize;
            t.clamp(lo, len)
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbOptions {
    pub lag: usize,
    pub unit: Unit,
    pub grid_points: usize,
    /// Take the running sum of each trajectory before the TAMSD.
    pub integrate_first: bool,
}

impl Default for EbOptions {
    fn default() -> Self {
        Self {
            lag: DEFAULT_LAG,
            unit: Unit::Samples,
            grid_points: DEFAULT_GRID_POINTS,
            integrate_first: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EBCurve {
    pub lag: usize,
    pub unit: Unit,
    pub ensemble_size: usize,
    pub lengths: Vec<usize>,
    pub eb: Vec<f64>,
    /// Trajectories with a finite TAMSD at each length.
    pub n_used: Vec<usize>,
    pub unreliable: Vec<bool>,
}

impl EBCurve {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// `(t, E_B)` pairs with a finite value.
    pub fn finite_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.lengths
            .iter()
            .zip(&self.eb)
            .filter(|(_, e)| e.is_finite())
            .map(|(&t, &e)| (t, e))
    }

    /// Value at length `t`, if on the grid.
    pub fn at(&self, t: usize) -> Option<f64> {
        self.lengths.iter().position(|&l| l == t).map(|i| self.eb[i])
    }
}

fn running_sum(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// `E_B(t) = <d^2> / <d>^2 - 1` over the ensemble, `d` the TAMSD of each
/// trajectory at length `t`.
pub fn eb_curve_with<S: AsRef<[f64]> + Sync>(ensemble: &[S], opts: &EbOptions) -> Result<EBCurve> {
    if ensemble.len() < 2 {
        return Err(Error::invalid(format!(
            "E_B needs at least 2 trajectories, got {}",
            ensemble.len()
        )));
    }
    let len = ensemble[0].as_ref().len();
    if let Some(bad) = ensemble.iter().position(|s| s.as_ref().len() != len) {
        return Err(Error::invalid(format!(
            "trajectory {bad} has length {} instead of {len}",
            ensemble[bad].as_ref().len()
        )));
    }
    let lengths = t_grid(opts.lag, len, opts.grid_points)?;
    let per_traj: Vec<Vec<f64>> = ensemble
        .par_iter()
        .map(|s| {
            if opts.integrate_first {
                tamsd_curve(&running_sum(s.as_ref()), opts.lag, &lengths)
            } else {
                tamsd_curve(s.as_ref(), opts.lag, &lengths)
            }
        })
        .collect::<Result<_>>()?;

    let n = ensemble.len();
    let mut eb = Vec::with_capacity(lengths.len());
    let mut n_used = Vec::with_capacity(lengths.len());
    let mut unreliable = Vec::with_capacity(lengths.len());
    let mut excluded_total = 0;
    for j in 0..lengths.len() {
        let d: Vec<f64> = per_traj.iter().map(|c| c[j]).filter(|v| v.is_finite()).collect();
        let m = d.len();
        excluded_total += n - m;
        n_used.push(m);
        unreliable.push((m as f64) < MIN_USABLE_SHARE * n as f64 || m < 2);
        if m < 2 {
            eb.push(f64::NAN);
            continue;
        }
        let m1 = exact_sum(d.iter().copied()) / m as f64;
        let m2 = exact_sum(d.iter().map(|v| v * v)) / m as f64;
        // Every TAMSD is nonnegative, so a zero mean means no spread at all.
        eb.push(if m1 == 0.0 { 0.0 } else { m2 / (m1 * m1) - 1.0 });
    }
    if excluded_total > 0 {
        log::info!("E_B: {excluded_total} non-finite trajectory points excluded");
    }
    if n_used.iter().all(|&m| m < 2) {
        return Err(Error::invalid("fewer than 2 usable trajectories at every length"));
    }
    Ok(EBCurve {
        lag: opts.lag,
        unit: opts.unit,
        ensemble_size: n,
        lengths,
        eb,
        n_used,
        unreliable,
    })
}

pub fn eb_curve<S: AsRef<[f64]> + Sync>(ensemble: &[S], lag: usize) -> Result<EBCurve> {
    eb_curve_with(
        ensemble,
        &EbOptions {
            lag,
            ..EbOptions::default()
        },
    )
}

/// E_B over descriptor series, with the lag in epochs.
pub fn eb_descriptor(series: &[DescriptorSeries], lag: usize) -> Result<EBCurve> {
    eb_descriptor_with(
        series,
        &EbOptions {
            lag,
            ..EbOptions::default()
        },
    )
}

/// As [`eb_descriptor`], with the grid and integration options of `opts`;
/// the unit is always epochs.
pub fn eb_descriptor_with(series: &[DescriptorSeries], opts: &EbOptions) -> Result<EBCurve> {
    let first = series
        .first()
        .ok_or_else(|| Error::invalid("empty descriptor ensemble"))?;
    for s in series {
        if s.descriptor != first.descriptor {
            return Err(Error::invalid(format!(
                "mixed descriptors {} and {}",
                first.descriptor, s.descriptor
            )));
        }
        if s.grid != first.grid {
            return Err(Error::invalid("descriptor series on different epoch grids"));
        }
    }
    let values: Vec<&[f64]> = series.iter().map(|s| s.values.as_slice()).collect();
    eb_curve_with(
        &values,
        &EbOptions {
            unit: Unit::Epochs,
            ..*opts
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MteAverage {
    pub ensemble_sizes: Vec<usize>,
    pub averaged: Vec<Vec<f64>>,
}

/// Pointwise mean over the first `m` trajectories for each `m` in `sizes`.
pub fn mte_average<S: AsRef<[f64]>>(ensemble: &[S], sizes: &[usize]) -> Result<MteAverage> {
    let len = ensemble.first().map_or(0, |s| s.as_ref().len());
    if ensemble.iter().any(|s| s.as_ref().len() != len) {
        return Err(Error::invalid("trajectories differ in length"));
    }
    let mut averaged = Vec::with_capacity(sizes.len());
    for &m in sizes {
        if m == 0 || m > ensemble.len() {
            return Err(Error::invalid(format!(
                "ensemble size {m} outside [1, {}]",
                ensemble.len()
            )));
        }
        let mut acc = vec![0.0; len];
        for s in &ensemble[..m] {
            acc.iter_mut().zip(s.as_ref()).for_each(|(a, v)| *a += v);
        }
        acc.iter_mut().for_each(|a| *a /= m as f64);
        averaged.push(acc);
    }
    Ok(MteAverage {
        ensemble_sizes: sizes.to_vec(),
        averaged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linstats::{descriptor_series, Descriptor};
    use crate::noise::{gen_pink, gen_white, unsign};
    use crate::series::TimeSeries;
    use proptest::prelude::*;

    fn naive_tamsd(x: &[f64], lag: usize, t: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..t - lag {
            s += (x[k + lag] - x[k]).powi(2);
        }
        s / (t - lag) as f64
    }

    fn white(count: u64, n: usize, offset: u64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|s| gen_white(n, s + offset).unwrap().into_values())
            .collect()
    }

    #[test]
    fn tamsd_examples() {
        assert_eq!(tamsd(&[3.0; 10], 2, 10).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        for lag in [1, 2, 7] {
            assert_eq!(tamsd(&ramp, lag, 100).unwrap(), (lag * lag) as f64);
        }
        let alt: Vec<f64> = (0..20).map(|i| f64::from(i % 2)).collect();
        assert_eq!(tamsd(&alt, 2, 20).unwrap(), 0.0);
        assert_eq!(tamsd(&alt, 1, 20).unwrap(), 1.0);
    }

    #[test]
    fn tamsd_errors() {
        let x = [1.0; 10];
        assert!(tamsd(&x, 2, 2).is_err());
        assert!(tamsd(&x, 2, 11).is_err());
        assert!(tamsd(&x, 0, 5).is_err());
        assert!(tamsd_curve(&x, 1, &[5, 3]).is_err());
    }

    #[test]
    fn curve_matches_direct_sums() {
        let x = gen_pink(5000, 1).unwrap().into_values();
        let grid = t_grid(2, 5000, 50).unwrap();
        let c = tamsd_curve(&x, 2, &grid).unwrap();
        for (&t, v) in grid.iter().zip(c) {
            let r = naive_tamsd(&x, 2, t);
            assert!((v - r).abs() <= 1e-12 * r, "t = {t}");
        }
    }

    #[test]
    fn grid_shape() {
        let g = t_grid(2, 50_000, 50).unwrap();
        assert_eq!(g[0], 4);
        assert_eq!(*g.last().unwrap(), 50_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() <= 50 && g.len() > 40);
        // Short series collapse duplicates.
        let g = t_grid(2, 25, 50).unwrap();
        assert_eq!(g, (4..=25).collect::<Vec<_>>());
        assert_eq!(t_grid(2, 3, 50).unwrap(), vec![3]);
        assert!(t_grid(2, 2, 50).is_err());
    }

    #[test]
    fn identical_trajectories_give_zero() {
        let x = gen_white(1000, 3).unwrap().into_values();
        let c = eb_curve(&[x.clone(), x.clone(), x], 2).unwrap();
        assert!(c.eb.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn two_member_closed_form() {
        let x = gen_white(2000, 8).unwrap().into_values();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let c = eb_curve(&[y, x], 2).unwrap();
        for e in &c.eb {
            assert!((e - 0.36).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn constant_ensemble_is_all_zero() {
        let c = eb_curve(&[vec![1.0; 40], vec![5.0; 40]], 2).unwrap();
        assert!(c.eb.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn non_finite_points_are_excluded() {
        let mut ens = white(10, 200, 0);
        ens[3][50] = f64::NAN;
        let c = eb_curve(&ens, 2).unwrap();
        for (j, &t) in c.lengths.iter().enumerate() {
            assert_eq!(c.n_used[j], if t > 50 { 9 } else { 10 }, "t = {t}");
            assert!(c.eb[j].is_finite());
            assert!(!c.unreliable[j]);
        }
        // Dropping the NaN trajectory reproduces the later points exactly.
        let kept: Vec<Vec<f64>> = ens
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 3)
            .map(|(_, v)| v.clone())
            .collect();
        let d = eb_curve(&kept, 2).unwrap();
        let last = c.len() - 1;
        assert_eq!(c.eb[last], d.eb[last]);
    }

    #[test]
    fn unreliable_when_few_survive() {
        let mut ens = white(30, 100, 0);
        for traj in ens.iter_mut().skip(2) {
            traj[20] = f64::NAN;
        }
        let c = eb_curve(&ens, 2).unwrap();
        let j = c.lengths.iter().position(|&t| t > 20).unwrap();
        assert_eq!(c.n_used[j], 2);
        assert!(c.unreliable[j]);
        assert!(!c.unreliable[0]);
    }

    #[test]
    fn ensemble_errors() {
        assert!(eb_curve(&[vec![1.0; 10]], 2).is_err());
        assert!(eb_curve(&[vec![1.0; 10], vec![1.0; 11]], 2).is_err());
        let all_nan = vec![vec![f64::NAN; 10]; 3];
        assert!(eb_curve(&all_nan, 2).is_err());
    }

    #[test]
    fn integrate_first_uses_running_sum() {
        let ens = white(5, 300, 0);
        let summed: Vec<Vec<f64>> = ens.iter().map(|v| running_sum(v)).collect();
        let opts = EbOptions {
            integrate_first: true,
            ..EbOptions::default()
        };
        assert_eq!(
            eb_curve_with(&ens, &opts).unwrap().eb,
            eb_curve(&summed, 2).unwrap().eb
        );
    }

    #[test]
    fn white_noise_converges() {
        let ens = white(100, 50_000, 1000);
        let c = eb_curve(&ens, 2).unwrap();
        assert!(c.at(50_000).unwrap() < 0.02);
        // decays toward zero
        assert!(c.eb[0] > 10.0 * c.eb[c.len() - 1]);
    }

    #[test]
    fn pink_sits_above_white_at_large_t() {
        let w: Vec<Vec<f64>> = (0..30)
            .map(|s| unsign(&gen_white(10_000, s).unwrap()).into_values())
            .collect();
        let p: Vec<Vec<f64>> = (0..30)
            .map(|s| unsign(&gen_pink(10_000, s).unwrap()).into_values())
            .collect();
        let (cw, cp) = (eb_curve(&w, 2).unwrap(), eb_curve(&p, 2).unwrap());
        let last = cw.len() - 1;
        assert!(cp.eb[last] > 3.0 * cw.eb[last]);
    }

    #[test]
    fn descriptor_ensemble() {
        let sd: Vec<DescriptorSeries> = (0..6)
            .map(|s| descriptor_series(&gen_white(5000, s).unwrap(), 100, Descriptor::Sd).unwrap())
            .collect();
        let c = eb_descriptor(&sd, 2).unwrap();
        assert_eq!(c.unit, Unit::Epochs);
        assert_eq!(*c.lengths.last().unwrap(), 50);
        let direct: Vec<&[f64]> = sd.iter().map(|s| s.values.as_slice()).collect();
        assert_eq!(c.eb, eb_curve(&direct, 2).unwrap().eb);

        let rms = descriptor_series(&gen_white(5000, 9).unwrap(), 100, Descriptor::Rms).unwrap();
        assert!(eb_descriptor(&[sd[0].clone(), rms], 2).is_err());
        let other = descriptor_series(&gen_white(5000, 9).unwrap(), 250, Descriptor::Sd).unwrap();
        assert!(eb_descriptor(&[sd[0].clone(), other], 2).is_err());

        let flat = TimeSeries::from_values(vec![2.0; 1000]).unwrap();
        let consts: Vec<DescriptorSeries> = (0..3)
            .map(|_| descriptor_series(&flat, 10, Descriptor::Rms).unwrap())
            .collect();
        assert!(eb_descriptor(&consts, 2).unwrap().eb.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn mte_examples() {
        let ens = white(100, 2000, 0);
        let a = mte_average(&ens, &[1]).unwrap();
        assert_eq!(a.averaged[0], ens[0]);
        let c = mte_average(&[vec![1.5; 7], vec![1.5; 7]], &[1, 2]).unwrap();
        assert!(c.averaged.iter().all(|v| v == &vec![1.5; 7]));
        assert!(mte_average(&ens, &[101]).is_err());
        assert!(mte_average(&ens, &[0]).is_err());

        let u: Vec<Vec<f64>> = (0..100)
            .map(|s| unsign(&gen_white(2000, s).unwrap()).into_values())
            .collect();
        let m = mte_average(&u, &[10, 50, 100]).unwrap();
        let half_normal = (2.0 / std::f64::consts::PI).sqrt();
        // Each point is a mean of 100 half-normals, sd = sqrt((1 - 2/pi)/100),
        // so about 59% of points land within 0.05 of the half-normal mean.
        let within = m.averaged[2]
            .iter()
            .filter(|v| (*v - half_normal).abs() < 0.05)
            .count() as f64
            / 2000.0;
        assert!((within - 0.593).abs() < 0.045, "{within}");
        let grand = m.averaged[2].iter().sum::<f64>() / 2000.0;
        assert!((grand - half_normal).abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eb_scale_invariant(seed in 0u64..10_000, a in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let ens = white(4, 300, seed);
            let scaled: Vec<Vec<f64>> = ens.iter().map(|v| v.iter().map(|x| a * x).collect()).collect();
            let (c, d) = (eb_curve(&ens, 2).unwrap(), eb_curve(&scaled, 2).unwrap());
            for (x, y) in c.eb.iter().zip(&d.eb) {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300) + 1e-15);
            }
        }

        #[test]
        fn tamsd_shift_invariant(v in prop::collection::vec(-1000i32..1000, 5..200), c in -1000i32..1000) {
            let x: Vec<f64> = v.iter().map(|&i| f64::from(i) / 1024.0).collect();
            let y: Vec<f64> = x.iter().map(|&i| i + f64::from(c)).collect();
            let t = x.len();
            prop_assert_eq!(tamsd(&x, 2, t).unwrap(), tamsd(&y, 2, t).unwrap());
        }

        #[test]
        fn eb_nonnegative(seed in 0u64..10_000) {
            let c = eb_curve(&white(5, 200, seed), 2).unwrap();
            prop_assert!(c.eb.iter().all(|&e| e >= -1e-12));
        }
    }
}
