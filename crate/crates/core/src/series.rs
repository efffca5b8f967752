use std::fmt;

use crate::error::{Error, Result};

pub const TAG_UNSIGNED: &str = "unsigned";
pub const TAG_SHUFFLED: &str = "shuffled";
pub const TAG_NORMALIZED: &str = "normalized";

/// Where a series came from: generator, seed and the transforms applied since.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    pub tags: Vec<String>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            generator: generator.into(),
            seed,
            tags: Vec::new(),
        }
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tags.push(tag.to_owned());
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

/// Renders as `generator=pink seed=7 tags=normalized,unsigned`.
impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "generator={}", self.generator)?;
        if let Some(seed) = self.seed {
            write!(f, " seed={seed}")?;
        }
        if !self.tags.is_empty() {
            write!(f, " tags={}", self.tags.join(","))?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut meta = Provenance::default();
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed provenance field `{field}`")))?;
            match key {
                "generator" => meta.generator = value.to_owned(),
                "seed" => {
                    meta.seed = Some(value.parse().map_err(|_| {
                        Error::invalid(format!("provenance seed `{value}` is not an integer"))
                    })?)
                }
                "tags" => {
                    meta.tags = value
                        .split(',')
                        .filter(|t| !t.is_empty())
                        .map(str::to_owned)
                        .collect()
                }
                // Unknown keys are informational.
                _ => {}
            }
        }
        Ok(meta)
    }
}

/// A finite, non-empty real-valued sequence with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    meta: Provenance,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, meta: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("a time series needs at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("value {i} is not finite ({})", values[i])));
        }
        if meta.has_tag(TAG_UNSIGNED) && values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("series tagged unsigned holds negative values"));
        }
        Ok(Self { values, meta })
    }

    /// Series without a known generator.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Provenance::new("external", None))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same provenance with `tag` appended, new values. Skips validation; callers
    /// keep the invariants.
    pub(crate) fn derived(&self, values: Vec<f64>, tag: &str) -> Self {
        Self {
            values,
            meta: self.meta.clone().with_tag(tag),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(TimeSeries::from_values(vec![]).is_err());
        assert!(TimeSeries::from_values(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::from_values(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn unsigned_tag_requires_nonnegative_values() {
        let meta = Provenance::new("test", None).with_tag(TAG_UNSIGNED);
        assert!(TimeSeries::new(vec![1.0, -0.5], meta.clone()).is_err());
        assert!(TimeSeries::new(vec![1.0, 0.0], meta).is_ok());
    }

    #[test]
    fn provenance_text_round_trips() {
        let meta = Provenance::new("pink", Some(7))
            .with_tag(TAG_NORMALIZED)
            .with_tag(TAG_UNSIGNED);
        let text = meta.to_string();
        assert_eq!(text, "generator=pink seed=7 tags=normalized,unsigned");
        assert_eq!(text.parse::<Provenance>().unwrap(), meta);
    }
}
