//! The full experiment: four conditions, every epoch length and descriptor,
//! E_B of raw and descriptor series, figures and a manifest.
//!
//! Output layout under the run directory:
//!
//! ```text
//! <condition>/raw_eb.csv
//! <condition>/raw_mte.csv
//! <condition>/<epoch_len>/<descriptor>.csv      (all realizations)
//! <condition>/<epoch_len>/<descriptor>_eb.csv
//! figures/figN.svg, figures/figN.csv
//! manifest.json                                 (written last)
//! ```
//!
//! Every byte depends only on the configuration, never on the worker count.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::descriptors::compute_descriptor;
use crate::ergodicity::{eb_curve_with, eb_descriptor_with, mte_average, EBCurve, EbOptions, Unit};
use crate::error::{Error, Result};
use crate::figures;
use crate::io;
use crate::linstats::{Descriptor, DescriptorSeries};
use crate::noise::{gen_pink, gen_white, shuffle, unsign};
use crate::seed::derive_seed;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    WhiteOrig,
    WhiteShuf,
    PinkOrig,
    PinkShuf,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::WhiteOrig,
        Condition::WhiteShuf,
        Condition::PinkOrig,
        Condition::PinkShuf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::WhiteOrig => "white_orig",
            Condition::WhiteShuf => "white_shuf",
            Condition::PinkOrig => "pink_orig",
            Condition::PinkShuf => "pink_shuf",
        }
    }

    pub fn is_pink(self) -> bool {
        matches!(self, Condition::PinkOrig | Condition::PinkShuf)
    }

    pub fn is_shuffled(self) -> bool {
        matches!(self, Condition::WhiteShuf | Condition::PinkShuf)
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown condition `{s}`")))
    }
}

// Top-level seed streams.
const STREAM_WHITE: u64 = 1;
const STREAM_PINK: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_TMF: u64 = 4;
pub(crate) const STREAM_GAMBLE: u64 = 5;

/// Unsigned (and for shuffled conditions, shuffled) realization `r`. Both
/// shuffled conditions permute the same source realization as their
/// original counterpart.
pub fn condition_series(config: &ExperimentConfig, cond: Condition, r: usize) -> Result<TimeSeries> {
    let (n, seed) = (config.series_length, config.master_seed);
    let base = if cond.is_pink() {
        gen_pink(n, derive_seed(seed, &[STREAM_PINK, r as u64]))?
    } else {
        gen_white(n, derive_seed(seed, &[STREAM_WHITE, r as u64]))?
    };
    let u = unsign(&base);
    Ok(if cond.is_shuffled() {
        shuffle(&u, derive_seed(seed, &[STREAM_SHUFFLE, cond.index(), r as u64]))
    } else {
        u
    })
}

/// Seed from which the `t_MF` surrogates of one descriptor series derive.
pub fn tmf_seed(config: &ExperimentConfig, cond: Condition, r: usize, epoch_length: usize) -> u64 {
    derive_seed(
        config.master_seed,
        &[STREAM_TMF, cond.index(), r as u64, epoch_length as u64],
    )
}

pub fn descriptor_path(cond: Condition, epoch_length: usize, d: Descriptor) -> String {
    format!("{cond}/{epoch_length}/{}.csv", d.name())
}

pub fn descriptor_eb_path(cond: Condition, epoch_length: usize, d: Descriptor) -> String {
    format!("{cond}/{epoch_length}/{}_eb.csv", d.name())
}

pub fn raw_eb_path(cond: Condition) -> String {
    format!("{cond}/raw_eb.csv")
}

pub fn raw_mte_path(cond: Condition) -> String {
    format!("{cond}/raw_mte.csv")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
    pub figures: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<String>,
    pub rows: usize,
    /// NaN sentinels (descriptor tables) or unreliable points (E_B curves).
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedCell {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestFile>,
    pub failed: Vec<FailedCell>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; not serialized.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn is_success(&self) -> bool {
        self.failed.is_empty()
    }
}

struct Recorder {
    out: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    fn write(&mut self, rel: &str, bytes: &[u8], mut entry: ManifestFile) -> Result<()> {
        io::write_atomic(&self.out.join(rel), bytes)?;
        entry.path = rel.to_owned();
        self.manifest.files.push(entry);
        Ok(())
    }

    fn fail(&mut self, cell: String, err: &Error) {
        log::error!("{cell}: {err}");
        self.manifest.failed.push(FailedCell {
            cell,
            error: err.to_string(),
        });
    }

    fn time(&mut self, stage: &str, start: Instant) {
        let secs = start.elapsed().as_secs_f64();
        log::info!("stage {stage}: {secs:.2}s");
        self.manifest.timings.push((stage.to_owned(), secs));
    }
}

fn entry(kind: &str) -> ManifestFile {
    ManifestFile {
        path: String::new(),
        kind: kind.to_owned(),
        condition: None,
        epoch_length: None,
        descriptor: None,
        rows: 0,
        flagged: 0,
    }
}

/// Run on a dedicated pool of `jobs` workers (0 = pool default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    config.validate()?;
    with_pool(opts.jobs, || run_in_pool(config, opts))?
}

fn run_in_pool(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let mut rec = Recorder {
        out: opts.out.clone(),
        manifest: RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config: config.clone(),
            files: Vec::new(),
            failed: Vec::new(),
            warnings: Vec::new(),
            timings: Vec::new(),
        },
    };
    let n = config.n_realizations;
    let params = config.analysis();

    let start = Instant::now();
    let cells: Vec<(Condition, usize)> = Condition::ALL
        .iter()
        .flat_map(|&c| (0..n).map(move |r| (c, r)))
        .collect();
    let series: Vec<TimeSeries> = cells
        .par_iter()
        .map(|&(c, r)| condition_series(config, c, r))
        .collect::<Result<_>>()?;
    let series_of = |c: Condition| &series[c as usize * n..(c as usize + 1) * n];
    rec.time("generate", start);

    // Raw-series E_B and MTE averages.
    let start = Instant::now();
    let raw_opts = EbOptions {
        lag: config.lag_samples,
        unit: Unit::Samples,
        grid_points: config.eb_grid_points,
        integrate_first: false,
    };
    let mut mte_sizes: Vec<usize> = config.mte_sizes.iter().copied().filter(|&m| m <= n).collect();
    if mte_sizes.len() < config.mte_sizes.len() {
        rec.manifest
            .warnings
            .push(format!("MTE sizes above {n} realizations skipped"));
        if mte_sizes.is_empty() {
            mte_sizes.push(n);
        }
    }
    for cond in Condition::ALL {
        let values: Vec<&[f64]> = series_of(cond).iter().map(TimeSeries::values).collect();
        match eb_curve_with(&values, &raw_opts) {
            Ok(curve) => record_eb(
                &mut rec,
                &raw_eb_path(cond),
                &curve,
                "raw_eb",
                Some(cond),
                None,
                None,
            )?,
            Err(e) => rec.fail(raw_eb_path(cond), &e),
        }
        {
            let mte = mte_average(&values, &mte_sizes)?;
            let header: Vec<String> = std::iter::once("sample".to_owned())
                .chain(mte_sizes.iter().map(|m| format!("mean_{m}")))
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = (0..config.series_length)
                .map(|i| {
                    std::iter::once(i.to_string())
                        .chain(mte.averaged.iter().map(|a| io::fmt_f64(a[i])))
                        .collect()
                })
                .collect();
            let mut e = entry("raw_mte");
            e.condition = Some(cond.to_string());
            e.rows = rows.len();
            rec.write(&raw_mte_path(cond), &io::table_csv(&[], &header, &rows), e)?;
        }
    }
    rec.time("raw_eb", start);

    // Descriptor series: one task per realization of every table.
    let start = Instant::now();
    let mut tasks = Vec::new();
    for cond in Condition::ALL {
        for &l in &config.epoch_lengths {
            for d in Descriptor::ALL {
                for r in 0..n {
                    tasks.push((cond, l, d, r));
                }
            }
        }
    }
    let results: Vec<Result<DescriptorSeries>> = tasks
        .par_iter()
        .map(|&(cond, l, d, r)| {
            compute_descriptor(&series_of(cond)[r], l, d, &params, tmf_seed(config, cond, r, l))
        })
        .collect();
    rec.time("descriptors", start);

    let start = Instant::now();
    let desc_opts = EbOptions {
        lag: config.lag_epochs,
        unit: Unit::Epochs,
        grid_points: config.eb_grid_points,
        integrate_first: false,
    };
    let mut results = results.into_iter();
    for cond in Condition::ALL {
        for &l in &config.epoch_lengths {
            for d in Descriptor::ALL {
                let rel = descriptor_path(cond, l, d);
                let table: Result<Vec<DescriptorSeries>> = results.by_ref().take(n).collect();
                let table = match table {
                    Ok(t) => t,
                    Err(e) => {
                        rec.fail(rel, &e);
                        continue;
                    }
                };
                let mut e = entry("descriptor");
                e.condition = Some(cond.to_string());
                e.epoch_length = Some(l);
                e.descriptor = Some(d.name().to_owned());
                e.rows = table.iter().map(DescriptorSeries::len).sum();
                e.flagged = table.iter().map(DescriptorSeries::undefined_count).sum();
                rec.write(&rel, &io::descriptor_ensemble_csv(&table)?, e)?;
                match eb_descriptor_with(&table, &desc_opts) {
                    Ok(curve) => record_eb(
                        &mut rec,
                        &descriptor_eb_path(cond, l, d),
                        &curve,
                        "descriptor_eb",
                        Some(cond),
                        Some(l),
                        Some(d),
                    )?,
                    Err(err) => rec.fail(descriptor_eb_path(cond, l, d), &err),
                }
            }
        }
    }
    rec.time("descriptor_eb", start);

    if opts.figures {
        let start = Instant::now();
        for id in figures::FigureId::ALL {
            match figures::render(id, config, &opts.out) {
                Ok(files) => {
                    for (rel, bytes, rows) in files {
                        let mut e = entry("figure");
                        e.rows = rows;
                        rec.write(&rel, &bytes, e)?;
                    }
                }
                Err(err) => rec.fail(format!("figures/{id}"), &err),
            }
        }
        rec.time("figures", start);
    }

    let mut json = serde_json::to_string_pretty(&rec.manifest)?;
    json.push('\n');
    io::write_atomic(&opts.out.join("manifest.json"), json.as_bytes())?;
    Ok(rec.manifest)
}

fn record_eb(
    rec: &mut Recorder,
    rel: &str,
    curve: &EBCurve,
    kind: &str,
    cond: Option<Condition>,
    l: Option<usize>,
    d: Option<Descriptor>,
) -> Result<()> {
    let mut e = entry(kind);
    e.condition = cond.map(|c| c.to_string());
    e.epoch_length = l;
    e.descriptor = d.map(|d| d.name().to_owned());
    e.rows = curve.len();
    e.flagged = curve.unreliable.iter().filter(|u| **u).count();
    rec.write(rel, &io::eb_csv(curve), e)
}

/// The configuration recorded by a finished run.
pub fn read_manifest_config(out: &Path) -> Result<ExperimentConfig> {
    #[derive(serde::Deserialize)]
    struct Partial {
        config: ExperimentConfig,
    }
    let p: Partial = serde_json::from_str(&io::read_text(&out.join("manifest.json"))?)?;
    Ok(p.config)
}

/// Load the descriptor E_B curve of one cell of a finished run.
pub fn load_descriptor_eb(out: &Path, cond: Condition, l: usize, d: Descriptor) -> Result<EBCurve> {
    io::read_eb(&out.join(descriptor_eb_path(cond, l, d)))
}

pub fn load_raw_eb(out: &Path, cond: Condition) -> Result<EBCurve> {
    io::read_eb(&out.join(raw_eb_path(cond)))
}

pub fn load_descriptor_table(
    out: &Path,
    cond: Condition,
    l: usize,
    d: Descriptor,
) -> Result<Vec<DescriptorSeries>> {
    io::parse_descriptor_ensemble_csv(&io::read_text(&out.join(descriptor_path(cond, l, d)))?)
}
