use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ergodesc::config::{parse_config, preset_of, ExperimentConfig, Preset};
use ergodesc::descriptors::compute_descriptor;
use ergodesc::dfa::hurst;
use ergodesc::ergodicity::{eb_curve_with, EbOptions, Unit};
use ergodesc::figures::{self, FigureId};
use ergodesc::gamble::gamble_ensemble_stats;
use ergodesc::io;
use ergodesc::multifractal::compute_spectrum;
use ergodesc::noise::{gamble_trajectory, gen_pink, gen_white, shuffle, unsign, GambleParams};
use ergodesc::pipeline::{self, RunOptions};
use ergodesc::seed::derive_seed;
use ergodesc::surrogate::iaaft;
use ergodesc::{Descriptor, Error};

#[derive(Parser, Debug)]
#[command(
    name = "ergodesc",
    version,
    about = "Noise descriptors and ergodicity breaking"
)]
struct Cli {
    /// Master seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output file, or output directory for `run`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Flat key=value file; flags win over its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    keys: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

/// One flag per config-file key.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    #[arg(long, global = true)]
    n_realizations: Option<usize>,
    #[arg(long, global = true)]
    series_length: Option<usize>,
    /// Comma-separated, e.g. 250,500,1000,2000.
    #[arg(long, global = true)]
    epoch_lengths: Option<String>,
    #[arg(long, global = true)]
    lag_samples: Option<usize>,
    #[arg(long, global = true)]
    lag_epochs: Option<usize>,
    #[arg(long, global = true)]
    eb_grid_points: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    q_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    q_max: Option<f64>,
    #[arg(long, global = true)]
    q_step: Option<f64>,
    #[arg(long, global = true)]
    r_threshold: Option<f64>,
    #[arg(long, global = true)]
    surrogates: Option<usize>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    dfa_min_scale: Option<usize>,
    #[arg(long, global = true)]
    dfa_scale_count: Option<usize>,
    #[arg(long, global = true)]
    dfa_reverse_pass: Option<bool>,
    #[arg(long, global = true)]
    mte_sizes: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        macro_rules! push {
            ($($f:ident),*) => {$(
                if let Some(x) = &self.$f {
                    v.push((stringify!($f), x.to_string()));
                }
            )*};
        }
        push!(
            n_realizations,
            series_length,
            epoch_lengths,
            lag_samples,
            lag_epochs,
            eb_grid_points,
            q_min,
            q_max,
            q_step,
            r_threshold,
            surrogates,
            max_iter,
            tol,
            dfa_min_scale,
            dfa_scale_count,
            dfa_reverse_pass,
            mte_sizes
        );
        v
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    White,
    Pink,
    Gamble,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UnitArg {
    Samples,
    Epochs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DescriptorArg {
    Sd,
    Cv,
    Rms,
    Hfgn,
    Dalpha,
    Tmf,
}

impl From<DescriptorArg> for Descriptor {
    fn from(d: DescriptorArg) -> Self {
        match d {
            DescriptorArg::Sd => Descriptor::Sd,
            DescriptorArg::Cv => Descriptor::Cv,
            DescriptorArg::Rms => Descriptor::Rms,
            DescriptorArg::Hfgn => Descriptor::Hfgn,
            DescriptorArg::Dalpha => Descriptor::DeltaAlpha,
            DescriptorArg::Tmf => Descriptor::Tmf,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one white, pink or gamble series.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Samples, or rounds for the gamble.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        unsigned: bool,
        #[arg(long)]
        shuffled: bool,
    },
    /// Descriptor series of one input series.
    Descriptors {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        epoch_len: usize,
        #[arg(long, value_enum)]
        descriptor: DescriptorArg,
    },
    /// DFA fluctuation function of one series.
    DfaCurve {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Singularity spectrum of one nonnegative series.
    MfSpectrum {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// One IAAFT surrogate.
    Iaaft {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// E_B curve over every CSV in a directory.
    Eb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        lag: usize,
        #[arg(long, value_enum, default_value = "samples")]
        unit: UnitArg,
        #[arg(long)]
        integrate_first: bool,
    },
    /// The full experiment.
    Run {
        /// Skip the figures.
        #[arg(long)]
        no_figures: bool,
    },
    /// Re-render one figure from a run directory (running it if needed).
    Figure {
        /// fig1 .. fig10
        id: String,
    },
    /// Per-round ensemble statistics of the coin-toss gamble.
    Gamble {
        #[arg(long, default_value_t = 10_000)]
        players: usize,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
    },
}

/// A failure that is the caller's fault (exit 2) or ours (exit 1).
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn experiment_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let file_pairs = match &cli.config {
        Some(p) => parse_config(&io::read_text(p)?)?,
        None => Vec::new(),
    };
    let preset = match cli.preset {
        Some(PresetArg::Paper) => Preset::Paper,
        Some(PresetArg::Desk) => Preset::Desk,
        None => preset_of(&file_pairs)?.unwrap_or(Preset::Desk),
    };
    let mut c = ExperimentConfig::from_pairs(preset, &file_pairs)?;
    if let Some(seed) = cli.seed {
        c.master_seed = seed;
    }
    for (k, v) in cli.keys.pairs() {
        c.set(k, &v)?;
    }
    Ok(c)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => Ok(io::write_atomic(p, bytes)?),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Runtime(format!("stdout: {e}"))),
    }
}

fn csv_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn run(cli: &Cli) -> CliResult<ExitCode> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Generate {
            kind,
            n,
            unsigned,
            shuffled,
        } => {
            let mut s = match kind {
                Kind::White => gen_white(*n, seed)?,
                Kind::Pink => gen_pink(*n, seed)?,
                Kind::Gamble => gamble_trajectory(
                    &GambleParams {
                        rounds: *n,
                        ..GambleParams::default()
                    },
                    seed,
                )?,
            };
            if *unsigned {
                s = unsign(&s);
            }
            if *shuffled {
                s = shuffle(&s, derive_seed(seed, &[1]));
            }
            emit(out, &io::series_csv(&s))?;
        }
        Command::Descriptors {
            input,
            epoch_len,
            descriptor,
        } => {
            let c = experiment_config(cli)?;
            let x = io::read_series(input)?;
            let d = compute_descriptor(&x, *epoch_len, (*descriptor).into(), &c.analysis(), seed)?;
            emit(out, &io::descriptor_csv(&d))?;
        }
        Command::DfaCurve { input } => {
            let c = experiment_config(cli)?;
            let x = io::read_series(input)?;
            emit(out, &io::dfa_csv(&hurst(x.values(), &c.analysis().dfa)?))?;
        }
        Command::MfSpectrum { input } => {
            let c = experiment_config(cli)?;
            let x = io::read_series(input)?;
            emit(
                out,
                &io::spectrum_csv(&compute_spectrum(x.values(), c.analysis().mf())?),
            )?;
        }
        Command::Iaaft { input } => {
            let c = experiment_config(cli)?;
            let x = io::read_series(input)?;
            let (s, o) = iaaft(&x, seed, &c.analysis().tmf.iaaft)?;
            log::info!(
                "iterations {} spectral error {:.3e} converged {}",
                o.iterations,
                o.spectral_error,
                o.converged
            );
            emit(out, &io::series_csv(&s))?;
        }
        Command::Eb {
            input,
            lag,
            unit,
            integrate_first,
        } => {
            let mut trajectories = Vec::new();
            for f in csv_files(input)? {
                let text = io::read_text(&f)?;
                let table = io::Table::parse(&text)?;
                if table.header.first().is_some_and(|h| h == "realization") {
                    for s in io::parse_descriptor_ensemble_csv(&text)? {
                        trajectories.push(s.values);
                    }
                } else {
                    trajectories.push(io::parse_value_column(&text)?);
                }
            }
            let opts = EbOptions {
                lag: *lag,
                unit: match unit {
                    UnitArg::Samples => Unit::Samples,
                    UnitArg::Epochs => Unit::Epochs,
                },
                integrate_first: *integrate_first,
                ..EbOptions::default()
            };
            emit(out, &io::eb_csv(&eb_curve_with(&trajectories, &opts)?))?;
        }
        Command::Run { no_figures } => {
            let c = experiment_config(cli)?;
            let dir = out.ok_or_else(|| Failure::Usage("run needs --out <dir>".into()))?;
            let m = pipeline::run_experiment(
                &c,
                &RunOptions {
                    out: dir.to_path_buf(),
                    jobs: cli.jobs,
                    figures: !no_figures,
                },
            )?;
            for (stage, secs) in &m.timings {
                eprintln!("{stage:>14}: {secs:8.2}s");
            }
            if !m.is_success() {
                eprintln!(
                    "{} cells failed; see {}",
                    m.failed.len(),
                    dir.join("manifest.json").display()
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::Figure { id } => {
            let id: FigureId = id.parse()?;
            let dir = out.ok_or_else(|| Failure::Usage("figure needs --out <run dir>".into()))?;
            let c = if dir.join("manifest.json").exists() {
                pipeline::read_manifest_config(dir)?
            } else {
                let c = experiment_config(cli)?;
                log::warn!("no run in {}; running the experiment first", dir.display());
                let opts = RunOptions {
                    out: dir.to_path_buf(),
                    jobs: cli.jobs,
                    figures: false,
                };
                pipeline::run_experiment(&c, &opts)?;
                c
            };
            for (rel, bytes, _) in figures::render(id, &c, dir)? {
                io::write_atomic(&dir.join(rel), &bytes)?;
            }
        }
        Command::Gamble { players, rounds } => {
            let params = GambleParams {
                rounds: *rounds,
                ..GambleParams::default()
            };
            let s = gamble_ensemble_stats(&params, *players, seed)?;
            let rows: Vec<Vec<String>> = (0..=*rounds)
                .map(|k| {
                    [s.mean[k], s.median[k], s.q10[k], s.q90[k], s.min[k]]
                        .into_iter()
                        .map(io::fmt_f64)
                        .fold(vec![k.to_string()], |mut r, v| {
                            r.push(v);
                            r
                        })
                })
                .collect();
            let header = ["round", "mean", "median", "q10", "q90", "min"];
            emit(
                out,
                &io::table_csv(&[("players", players.to_string())], &header, &rows),
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
