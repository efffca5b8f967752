//! Per-epoch dispatch over all six descriptors.

use crate::dfa::{self, DfaOptions};
use crate::error::Result;
use crate::linstats::{self, Descriptor, DescriptorSeries, EpochFlag};
use crate::multifractal::{self, MfParams};
use crate::seed::derive_seed;
use crate::series::TimeSeries;
use crate::surrogate::{self, TmfParams};

/// Parameters of the nonlinear descriptors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisParams {
    pub dfa: DfaOptions,
    /// Spectrum, IAAFT and surrogate-count settings; `tmf.mf` also drives
    /// the plain spectrum width.
    pub tmf: TmfParams,
}

impl AnalysisParams {
    pub fn mf(&self) -> &MfParams {
        &self.tmf.mf
    }
}

/// Value and flag of one descriptor on one epoch. Only `t_MF` uses `seed`.
pub fn epoch_value(
    descriptor: Descriptor,
    epoch: &[f64],
    params: &AnalysisParams,
    seed: u64,
) -> Result<(f64, EpochFlag)> {
    let plain = |v: f64| (v, EpochFlag::Ok);
    match descriptor {
        Descriptor::Sd => linstats::sd(epoch).map(plain),
        Descriptor::Cv => linstats::cv(epoch).map(plain),
        Descriptor::Rms => linstats::rms(epoch).map(plain),
        Descriptor::Hfgn => {
            let r = dfa::hurst(epoch, &params.dfa)?;
            let flag = if r.low_fit {
                EpochFlag::LowFit
            } else {
                EpochFlag::Ok
            };
            Ok((r.hurst, flag))
        }
        Descriptor::DeltaAlpha => multifractal::delta_alpha(epoch, params.mf()).map(plain),
        Descriptor::Tmf => {
            let r = surrogate::t_mf(epoch, &params.tmf, seed)?;
            let flag = if r.infinite {
                EpochFlag::InfiniteT
            } else if r.unconverged > 0 {
                EpochFlag::Unconverged
            } else {
                EpochFlag::Ok
            };
            Ok((r.t, flag))
        }
    }
}

/// Descriptor series of `series`; epoch `i` of a `t_MF` series draws its
/// surrogates from `derive_seed(seed, [i])`.
pub fn compute_descriptor(
    series: &TimeSeries,
    epoch_length: usize,
    descriptor: Descriptor,
    params: &AnalysisParams,
    seed: u64,
) -> Result<DescriptorSeries> {
    DescriptorSeries::from_epochs(series, epoch_length, descriptor, |i, epoch| {
        epoch_value(descriptor, epoch, params, derive_seed(seed, &[i as u64]))
    })
}
