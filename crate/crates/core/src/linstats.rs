//! Nonoverlapping epochs and the linear descriptors SD, CV and RMS.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::exact_sum;
use crate::series::{Provenance, TimeSeries};

/// How a series of `source_len` samples splits into full epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochGrid {
    pub epoch_length: usize,
    pub epoch_count: usize,
    pub discarded_tail: usize,
}

impl EpochGrid {
    pub fn new(source_len: usize, epoch_length: usize) -> Result<Self> {
        if epoch_length == 0 {
            return Err(Error::invalid("epoch length must be positive"));
        }
        if epoch_length > source_len {
            return Err(Error::invalid(format!(
                "epoch length {epoch_length} exceeds series length {source_len}"
            )));
        }
        Ok(Self {
            epoch_length,
            epoch_count: source_len / epoch_length,
            discarded_tail: source_len % epoch_length,
        })
    }

    pub fn source_len(&self) -> usize {
        self.epoch_length * self.epoch_count + self.discarded_tail
    }
}

/// Epoch views over a borrowed series.
#[derive(Debug, Clone, Copy)]
pub struct Epochs<'a> {
    pub grid: EpochGrid,
    values: &'a [f64],
}

impl<'a> Epochs<'a> {
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &'a [f64]> + 'a {
        self.values
            .chunks_exact(self.grid.epoch_length)
            .take(self.grid.epoch_count)
    }

    pub fn get(&self, index: usize) -> Option<&'a [f64]> {
        (index < self.grid.epoch_count).then(|| {
            let start = index * self.grid.epoch_length;
            &self.values[start..start + self.grid.epoch_length]
        })
    }
}

/// Consecutive windows `[0, L), [L, 2L), ...`; the remainder is dropped.
pub fn segment_epochs(values: &[f64], epoch_length: usize) -> Result<Epochs<'_>> {
    let grid = EpochGrid::new(values.len(), epoch_length)?;
    if grid.discarded_tail > 0 {
        log::debug!(
            "epoch length {epoch_length}: discarding {} trailing samples",
            grid.discarded_tail
        );
    }
    Ok(Epochs { grid, values })
}

fn require_nonempty(epoch: &[f64]) -> Result<()> {
    if epoch.is_empty() {
        Err(Error::invalid("empty epoch"))
    } else {
        Ok(())
    }
}

pub fn mean(epoch: &[f64]) -> Result<f64> {
    require_nonempty(epoch)?;
    Ok(exact_sum(epoch.iter().copied()) / epoch.len() as f64)
}

// Sums below are correctly rounded so every descriptor is invariant under
// permutation of the epoch, bit for bit.

/// Population standard deviation (divisor `N`), two-pass.
pub fn sd(epoch: &[f64]) -> Result<f64> {
    let mu = mean(epoch)?;
    let ss = exact_sum(epoch.iter().map(|x| (x - mu) * (x - mu)));
    Ok((ss / epoch.len() as f64).sqrt())
}

/// `sd / mean`. Undefined when the mean vanishes to within rounding of the sum.
pub fn cv(epoch: &[f64]) -> Result<f64> {
    require_nonempty(epoch)?;
    let sum = exact_sum(epoch.iter().copied());
    let abs_sum = exact_sum(epoch.iter().map(|x| x.abs()));
    if sum.abs() <= f64::EPSILON * abs_sum || abs_sum == 0.0 {
        return Err(Error::undefined("coefficient of variation of a zero-mean epoch"));
    }
    Ok(sd(epoch)? / (sum / epoch.len() as f64))
}

/// Root mean square, no mean removal.
pub fn rms(epoch: &[f64]) -> Result<f64> {
    require_nonempty(epoch)?;
    Ok((exact_sum(epoch.iter().map(|x| x * x)) / epoch.len() as f64).sqrt())
}

/// Per-epoch descriptor kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Descriptor {
    Sd,
    Cv,
    Rms,
    Hfgn,
    DeltaAlpha,
    Tmf,
}

impl Descriptor {
    pub const ALL: [Descriptor; 6] = [
        Descriptor::Sd,
        Descriptor::Cv,
        Descriptor::Rms,
        Descriptor::Hfgn,
        Descriptor::DeltaAlpha,
        Descriptor::Tmf,
    ];

    /// Command-line and file name of the descriptor.
    pub fn name(self) -> &'static str {
        match self {
            Descriptor::Sd => "sd",
            Descriptor::Cv => "cv",
            Descriptor::Rms => "rms",
            Descriptor::Hfgn => "hfgn",
            Descriptor::DeltaAlpha => "dalpha",
            Descriptor::Tmf => "tmf",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Descriptor::Sd | Descriptor::Cv | Descriptor::Rms)
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Descriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Descriptor::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown descriptor `{s}`")))
    }
}

/// Quality annotation attached to one epoch value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpochFlag {
    #[default]
    Ok,
    /// The value is a NaN sentinel: the descriptor is undefined for this epoch.
    Undefined,
    /// DFA log-log fit below the r² gate.
    LowFit,
    /// Surrogate spread vanished; the t statistic is infinite.
    InfiniteT,
    /// Some IAAFT surrogate hit the iteration cap.
    Unconverged,
}

impl EpochFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochFlag::Ok => "",
            EpochFlag::Undefined => "undefined",
            EpochFlag::LowFit => "low_fit",
            EpochFlag::InfiniteT => "infinite_t",
            EpochFlag::Unconverged => "unconverged",
        }
    }
}

impl FromStr for EpochFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "" => EpochFlag::Ok,
            "undefined" => EpochFlag::Undefined,
            "low_fit" => EpochFlag::LowFit,
            "infinite_t" => EpochFlag::InfiniteT,
            "unconverged" => EpochFlag::Unconverged,
            other => return Err(Error::invalid(format!("unknown epoch flag `{other}`"))),
        })
    }
}

/// One descriptor value per epoch of a series.
#[derive(Debug, Clone)]
pub struct DescriptorSeries {
    pub descriptor: Descriptor,
    pub values: Vec<f64>,
    pub flags: Vec<EpochFlag>,
    pub grid: EpochGrid,
    pub source_meta: Provenance,
}

/// NaN sentinels compare equal to each other.
impl PartialEq for DescriptorSeries {
    fn eq(&self, other: &Self) -> bool {
        self.descriptor == other.descriptor
            && self.grid == other.grid
            && self.flags == other.flags
            && self.source_meta == other.source_meta
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl DescriptorSeries {
    /// Apply `per_epoch` to every epoch in order; errors become NaN sentinels.
    pub fn from_epochs<F>(
        series: &TimeSeries,
        epoch_length: usize,
        descriptor: Descriptor,
        mut per_epoch: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, &[f64]) -> Result<(f64, EpochFlag)>,
    {
        let epochs = segment_epochs(series.values(), epoch_length)?;
        let mut values = Vec::with_capacity(epochs.grid.epoch_count);
        let mut flags = Vec::with_capacity(epochs.grid.epoch_count);
        for (i, epoch) in epochs.iter().enumerate() {
            match per_epoch(i, epoch) {
                Ok((v, flag)) => {
                    values.push(v);
                    flags.push(flag);
                }
                Err(err) => {
                    log::debug!("{descriptor} epoch {i}: {err}");
                    values.push(f64::NAN);
                    flags.push(EpochFlag::Undefined);
                }
            }
        }
        let undefined = flags.iter().filter(|f| **f == EpochFlag::Undefined).count();
        if undefined > 0 {
            log::info!(
                "{descriptor}: {undefined}/{} epochs undefined ({})",
                values.len(),
                series.meta()
            );
        }
        Ok(Self {
            descriptor,
            values,
            flags,
            grid: epochs.grid,
            source_meta: series.meta().clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of epochs carrying a NaN sentinel.
    pub fn undefined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

/// SD, CV or RMS for every epoch of `series`.
pub fn descriptor_series(
    series: &TimeSeries,
    epoch_length: usize,
    descriptor: Descriptor,
) -> Result<DescriptorSeries> {
    let op: fn(&[f64]) -> Result<f64> = match descriptor {
        Descriptor::Sd => sd,
        Descriptor::Cv => cv,
        Descriptor::Rms => rms,
        other => return Err(Error::invalid(format!("{other} is not a linear descriptor"))),
    };
    DescriptorSeries::from_epochs(series, epoch_length, descriptor, |_, e| {
        op(e).map(|v| (v, EpochFlag::Ok))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{gen_white, unsign};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn segmentation_examples() {
        let g = EpochGrid::new(50_000, 500).unwrap();
        assert_eq!((g.epoch_count, g.discarded_tail), (100, 0));
        let g = EpochGrid::new(1005, 250).unwrap();
        assert_eq!((g.epoch_count, g.discarded_tail), (4, 5));
        let g = EpochGrid::new(250, 250).unwrap();
        assert_eq!((g.epoch_count, g.discarded_tail), (1, 0));
        for (n, l, count) in [(50_000, 250, 200), (50_000, 1000, 50), (50_000, 2000, 25)] {
            assert_eq!(EpochGrid::new(n, l).unwrap().epoch_count, count);
        }
    }

    #[test]
    fn segmentation_errors() {
        assert!(matches!(EpochGrid::new(10, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(EpochGrid::new(10, 11), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn epoch_views_are_consecutive() {
        let v: Vec<f64> = (0..11).map(f64::from).collect();
        let epochs = segment_epochs(&v, 3).unwrap();
        let got: Vec<&[f64]> = epochs.iter().collect();
        assert_eq!(got, vec![&v[0..3], &v[3..6], &v[6..9]]);
        assert_eq!(epochs.get(2), Some(&v[6..9]));
        assert_eq!(epochs.get(3), None);
    }

    #[test]
    fn sd_examples() {
        assert_eq!(sd(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(sd(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(sd(&[]).is_err());
    }

    #[test]
    fn cv_examples() {
        assert_eq!(cv(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cv(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(cv(&[-1.0, 1.0]), Err(Error::UndefinedDescriptor(_))));
        assert!(matches!(cv(&[0.0, 0.0]), Err(Error::UndefinedDescriptor(_))));
    }

    #[test]
    fn rms_examples() {
        assert!((rms(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rms(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(rms(&[]).is_err());
    }

    #[test]
    fn half_normal_moments() {
        // |Z| has mean sqrt(2/pi), SD sqrt(1 - 2/pi), CV sqrt(pi/2 - 1), E|Z|^2 = 1.
        let pi = std::f64::consts::PI;
        let x = unsign(&gen_white(1000, 21).unwrap());
        let e = x.values();
        assert!((sd(e).unwrap() - (1.0 - 2.0 / pi).sqrt()).abs() < 0.05);
        assert!((cv(e).unwrap() - (pi / 2.0 - 1.0).sqrt()).abs() < 0.05);
        assert!((rms(e).unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn descriptor_series_lengths_and_sentinels() {
        let constant = TimeSeries::from_values(vec![4.0; 1000]).unwrap();
        let s = descriptor_series(&constant, 100, Descriptor::Sd).unwrap();
        assert_eq!(s.values, vec![0.0; 10]);

        let x = unsign(&gen_white(50_000, 3).unwrap());
        let s = descriptor_series(&x, 2000, Descriptor::Sd).unwrap();
        assert_eq!(s.len(), 25);

        let zero_mean = TimeSeries::from_values(vec![1.0, -1.0, 2.0, 2.0]).unwrap();
        let s = descriptor_series(&zero_mean, 2, Descriptor::Cv).unwrap();
        assert!(s.values[0].is_nan());
        assert_eq!(s.flags, vec![EpochFlag::Undefined, EpochFlag::Ok]);
        assert_eq!(s.undefined_count(), 1);

        assert!(descriptor_series(&x, 100, Descriptor::Hfgn).is_err());
    }

    #[test]
    fn rms_equals_sd_for_zero_mean_epochs() {
        let e = [1.0, -2.0, 3.0, -2.0];
        assert!((rms(&e).unwrap() - sd(&e).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn descriptor_names_round_trip() {
        for d in Descriptor::ALL {
            assert_eq!(d.name().parse::<Descriptor>().unwrap(), d);
        }
        assert!("variance".parse::<Descriptor>().is_err());
    }

    proptest! {
        #[test]
        fn parallel_axis_identity(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let (r, s, m) = (rms(&v).unwrap(), sd(&v).unwrap(), mean(&v).unwrap());
            let lhs = r * r;
            let rhs = s * s + m * m;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
        }

        #[test]
        fn sd_translation_invariant(v in prop::collection::vec(-10f64..10.0, 2..200), c in -100f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let (a, b) = (sd(&v).unwrap(), sd(&shifted).unwrap());
            // Absolute slack covers epochs whose spread is tiny next to the shift.
            prop_assert!(close(a, b, 1e-10) || (a - b).abs() < 1e-10 * c.abs().max(1.0));
        }

        #[test]
        fn cv_scale_invariant(v in prop::collection::vec(0.01f64..10.0, 1..200), a in 0.001f64..1000.0) {
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            prop_assert!(close(cv(&v).unwrap(), cv(&scaled).unwrap(), 1e-10) || sd(&v).unwrap() < 1e-12);
        }

        #[test]
        fn permutation_leaves_descriptors_unchanged(v in prop::collection::vec(0.0f64..10.0, 1..100)) {
            let mut rev = v.clone();
            rev.reverse();
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            for p in [&rev, &sorted] {
                prop_assert_eq!(sd(&v).unwrap().to_bits(), sd(p).unwrap().to_bits());
                prop_assert_eq!(rms(&v).unwrap().to_bits(), rms(p).unwrap().to_bits());
                let (a, b) = (cv(&v), cv(p));
                prop_assert_eq!(a.ok().map(f64::to_bits), b.ok().map(f64::to_bits));
            }
        }
    }
}
