//! Experiment configuration: scale presets, a flat `key=value` file format
//! and the overrides applied on top of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descriptors::AnalysisParams;
use crate::error::{Error, Result};
use crate::multifractal::q_range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 100 realizations of 50,000 samples.
    Paper,
    /// 20 realizations of 10,000 samples.
    Desk,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::invalid(format!("unknown preset `{other}`"))),
        }
    }
}

pub const DESK_MAX_REALIZATIONS: usize = 20;
pub const DESK_MAX_LENGTH: usize = 10_000;

/// Everything that determines the output bytes of a run. Worker count and
/// output location are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub master_seed: u64,
    pub n_realizations: usize,
    pub series_length: usize,
    pub epoch_lengths: Vec<usize>,
    pub lag_samples: usize,
    pub lag_epochs: usize,
    pub eb_grid_points: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub r_threshold: f64,
    pub surrogates: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub dfa_min_scale: usize,
    pub dfa_scale_count: usize,
    pub dfa_reverse_pass: bool,
    pub mte_sizes: Vec<usize>,
}

/// Keys accepted in config files, in the order they are written out.
pub const KEYS: &[&str] = &[
    "preset",
    "seed",
    "n_realizations",
    "series_length",
    "epoch_lengths",
    "lag_samples",
    "lag_epochs",
    "eb_grid_points",
    "q_min",
    "q_max",
    "q_step",
    "r_threshold",
    "surrogates",
    "max_iter",
    "tol",
    "dfa_min_scale",
    "dfa_scale_count",
    "dfa_reverse_pass",
    "mte_sizes",
];

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (n, len) = match preset {
            Preset::Paper => (100, 50_000),
            Preset::Desk => (DESK_MAX_REALIZATIONS, DESK_MAX_LENGTH),
        };
        Self {
            preset,
            master_seed: 0,
            n_realizations: n,
            series_length: len,
            epoch_lengths: vec![250, 500, 1000, 2000],
            lag_samples: 2,
            lag_epochs: 2,
            eb_grid_points: 50,
            q_min: -5.0,
            q_max: 5.0,
            q_step: 0.25,
            r_threshold: 0.995,
            surrogates: 32,
            max_iter: 100,
            tol: 1e-8,
            dfa_min_scale: 4,
            dfa_scale_count: 15,
            dfa_reverse_pass: false,
            mte_sizes: vec![10, 50, 100],
        }
    }

    /// Set one field from its config-file spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("`{key}`: cannot parse `{v}`")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<usize>> {
            v.split(',').map(|p| num(key, p)).collect()
        }
        match key {
            "preset" => self.preset = value.parse()?,
            "seed" => self.master_seed = num(key, value)?,
            "n_realizations" => self.n_realizations = num(key, value)?,
            "series_length" => self.series_length = num(key, value)?,
            "epoch_lengths" => self.epoch_lengths = list(key, value)?,
            "lag_samples" => self.lag_samples = num(key, value)?,
            "lag_epochs" => self.lag_epochs = num(key, value)?,
            "eb_grid_points" => self.eb_grid_points = num(key, value)?,
            "q_min" => self.q_min = num(key, value)?,
            "q_max" => self.q_max = num(key, value)?,
            "q_step" => self.q_step = num(key, value)?,
            "r_threshold" => self.r_threshold = num(key, value)?,
            "surrogates" => self.surrogates = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "dfa_min_scale" => self.dfa_min_scale = num(key, value)?,
            "dfa_scale_count" => self.dfa_scale_count = num(key, value)?,
            "dfa_reverse_pass" => self.dfa_reverse_pass = num(key, value)?,
            "mte_sizes" => self.mte_sizes = list(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Preset defaults, then `pairs` in order.
    pub fn from_pairs(preset: Preset, pairs: &[(String, String)]) -> Result<Self> {
        let mut c = Self::preset(preset);
        for (k, v) in pairs {
            if k != "preset" {
                c.set(k, v)?;
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations < 2 {
            return Err(Error::invalid("E_B needs at least 2 realizations"));
        }
        if self.preset == Preset::Desk
            && (self.n_realizations > DESK_MAX_REALIZATIONS || self.series_length > DESK_MAX_LENGTH)
        {
            return Err(Error::invalid(format!(
                "desk preset is capped at {DESK_MAX_REALIZATIONS} x {DESK_MAX_LENGTH}; use --preset paper"
            )));
        }
        if self.epoch_lengths.is_empty() {
            return Err(Error::invalid("no epoch lengths"));
        }
        if let Some(&l) = self
            .epoch_lengths
            .iter()
            .find(|&&l| l == 0 || l > self.series_length / 4)
        {
            return Err(Error::invalid(format!(
                "epoch length {l} outside [1, {}]",
                self.series_length / 4
            )));
        }
        let mut sorted = self.epoch_lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.epoch_lengths.len() {
            return Err(Error::invalid("repeated epoch length"));
        }
        if self.lag_samples == 0 || self.lag_epochs == 0 {
            return Err(Error::invalid("lags must be positive"));
        }
        if self.surrogates < 2 {
            return Err(Error::invalid("t_MF needs at least 2 surrogates"));
        }
        if self.tol.is_nan() || self.tol < 0.0 || self.max_iter == 0 {
            return Err(Error::invalid("IAAFT needs max_iter > 0 and tol >= 0"));
        }
        if self.mte_sizes.contains(&0) {
            return Err(Error::invalid("MTE sizes must be positive"));
        }
        self.analysis().mf().validate()
    }

    pub fn q_grid(&self) -> Vec<f64> {
        q_range(self.q_min, self.q_max, self.q_step)
    }

    pub fn analysis(&self) -> AnalysisParams {
        let mut p = AnalysisParams::default();
        p.dfa.scales.min_scale = self.dfa_min_scale;
        p.dfa.scales.count = self.dfa_scale_count;
        p.dfa.reverse_pass = self.dfa_reverse_pass;
        p.tmf.mf.q_grid = self.q_grid();
        p.tmf.mf.r_threshold = self.r_threshold;
        p.tmf.n_surrogates = self.surrogates;
        p.tmf.iaaft.max_iter = self.max_iter;
        p.tmf.iaaft.tol = self.tol;
        p
    }

    /// The config as a file that `parse_config` reads back to `self`.
    pub fn to_kv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let values = [
            self.preset.to_string(),
            self.master_seed.to_string(),
            self.n_realizations.to_string(),
            self.series_length.to_string(),
            join(&self.epoch_lengths),
            self.lag_samples.to_string(),
            self.lag_epochs.to_string(),
            self.eb_grid_points.to_string(),
            self.q_min.to_string(),
            self.q_max.to_string(),
            self.q_step.to_string(),
            self.r_threshold.to_string(),
            self.surrogates.to_string(),
            self.max_iter.to_string(),
            self.tol.to_string(),
            self.dfa_min_scale.to_string(),
            self.dfa_scale_count.to_string(),
            self.dfa_reverse_pass.to_string(),
            join(&self.mte_sizes),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unknown key `{k}`"),
            });
        }
        if v.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("`{k}` has no value"),
            });
        }
        out.push((k.to_owned(), v.to_owned()));
    }
    Ok(out)
}

/// Preset named in `pairs`, last one winning.
pub fn preset_of(pairs: &[(String, String)]) -> Result<Option<Preset>> {
    pairs
        .iter()
        .rev()
        .find(|(k, _)| k == "preset")
        .map(|(_, v)| v.parse())
        .transpose()
}
