//! CSV tables for series, descriptor series, E_B curves, DFA curves and
//! spectra. Every table has a header row; metadata rides in `# key: ...`
//! comment lines above it. Files are written atomically.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::dfa::DfaResult;
use crate::ergodicity::{EBCurve, Unit, MIN_USABLE_SHARE};
use crate::error::{Error, Result};
use crate::linstats::{Descriptor, DescriptorSeries, EpochFlag, EpochGrid};
use crate::multifractal::{MultifractalSpectrum, SpectrumPoint};
use crate::series::{Provenance, TimeSeries};

pub const SERIES_HEADER: &[&str] = &["value"];
pub const DESCRIPTOR_HEADER: &[&str] = &["epoch_index", "value", "flag"];
pub const EB_HEADER: &[&str] = &["t", "eb", "n_used"];
pub const DFA_HEADER: &[&str] = &["scale", "fluctuation"];
pub const SPECTRUM_HEADER: &[&str] = &["q", "alpha", "f", "r_alpha", "r_f", "accepted"];

/// Shortest round-tripping decimal, switching to exponent form for very
/// large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A header-checked table with its comment metadata.
#[derive(Debug, Clone, Default)]
pub struct Table {
    /// `# key: rest` comment lines, by key.
    pub meta: HashMap<String, String>,
    pub header: Vec<String>,
    /// Data rows with their 1-based line numbers.
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = HashMap::new();
        for line in text.lines() {
            if let Some(rest) = line.trim_start().strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.insert(k.trim().to_owned(), v.trim().to_owned());
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_owned).collect()));
        }
        Ok(Self { meta, header, rows })
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self
            .header
            .iter()
            .map(String::as_str)
            .ne(expected.iter().copied())
        {
            return Err(Error::Parse {
                line: 1,
                message: format!("header {:?}, expected {:?}", self.header, expected),
            });
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("no `{name}` column in {:?}", self.header),
            })
    }

    /// `key=value` fields of the comment tagged `key`.
    pub fn meta_fields(&self, key: &str) -> Result<HashMap<&str, &str>> {
        let line = self.meta.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing `# {key}:` comment"),
        })?;
        Ok(line
            .split_whitespace()
            .filter_map(|f| f.split_once('='))
            .collect())
    }
}

fn field<T: FromStr>(line: usize, raw: &str, what: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} `{raw}` does not parse"),
    })
}

fn meta_field<T: FromStr>(fields: &HashMap<&str, &str>, key: &str) -> Result<T> {
    let raw = fields.get(key).ok_or_else(|| Error::Parse {
        line: 0,
        message: format!("missing metadata field `{key}`"),
    })?;
    field(0, raw, key)
}

/// A plain numeric table: header plus rows of already formatted cells.
pub fn table_csv(comments: &[(&str, String)], header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut buf = Vec::new();
    for (k, v) in comments {
        buf.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf);
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn series_csv(series: &TimeSeries) -> Vec<u8> {
    let rows: Vec<Vec<String>> = series.values().iter().map(|v| vec![fmt_f64(*v)]).collect();
    table_csv(&[("meta", series.meta().to_string())], SERIES_HEADER, &rows)
}

/// The `value` column of any of our tables, as a raw sequence (NaN allowed).
pub fn parse_value_column(text: &str) -> Result<Vec<f64>> {
    let t = Table::parse(text)?;
    let col = t.column("value")?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let raw = r.get(col).ok_or_else(|| Error::Parse {
                line: *line,
                message: "short row".into(),
            })?;
            field(*line, raw, "value")
        })
        .collect()
}

pub fn parse_series_csv(text: &str) -> Result<TimeSeries> {
    let t = Table::parse(text)?;
    t.expect_header(SERIES_HEADER)?;
    let values = t
        .rows
        .iter()
        .map(|(line, r)| field(*line, &r[0], "value"))
        .collect::<Result<Vec<f64>>>()?;
    let meta = match t.meta.get("meta") {
        Some(m) => m.parse()?,
        None => Provenance::new("external", None),
    };
    TimeSeries::new(values, meta)
}

pub fn descriptor_csv(series: &DescriptorSeries) -> Vec<u8> {
    let rows: Vec<Vec<String>> = series
        .values
        .iter()
        .zip(&series.flags)
        .enumerate()
        .map(|(i, (v, f))| vec![i.to_string(), fmt_f64(*v), f.as_str().to_owned()])
        .collect();
    let grid = format!(
        "descriptor={} epoch_length={} source_len={}",
        series.descriptor,
        series.grid.epoch_length,
        series.grid.source_len()
    );
    table_csv(
        &[("meta", series.source_meta.to_string()), ("grid", grid)],
        DESCRIPTOR_HEADER,
        &rows,
    )
}

pub fn parse_descriptor_csv(text: &str) -> Result<DescriptorSeries> {
    let t = Table::parse(text)?;
    t.expect_header(DESCRIPTOR_HEADER)?;
    let g = t.meta_fields("grid")?;
    let descriptor: Descriptor = meta_field(&g, "descriptor")?;
    let grid = EpochGrid::new(meta_field(&g, "source_len")?, meta_field(&g, "epoch_length")?)?;
    let source_meta = match t.meta.get("meta") {
        Some(m) => m.parse()?,
        None => Provenance::default(),
    };
    if t.rows.len() != grid.epoch_count {
        return Err(Error::Parse {
            line: 0,
            message: format!("{} rows for {} epochs", t.rows.len(), grid.epoch_count),
        });
    }
    let mut values = Vec::with_capacity(t.rows.len());
    let mut flags = Vec::with_capacity(t.rows.len());
    for (i, (line, r)) in t.rows.iter().enumerate() {
        let idx: usize = field(*line, &r[0], "epoch_index")?;
        if idx != i {
            return Err(Error::Parse {
                line: *line,
                message: format!("epoch index {idx}, expected {i}"),
            });
        }
        values.push(field(*line, &r[1], "value")?);
        flags.push(field::<EpochFlag>(*line, &r[2], "flag")?);
    }
    Ok(DescriptorSeries {
        descriptor,
        values,
        flags,
        grid,
        source_meta,
    })
}

pub const ENSEMBLE_HEADER: &[&str] = &["realization", "epoch_index", "value", "flag"];

/// One descriptor over a whole ensemble, realization-major. All members
/// must share descriptor and grid.
pub fn descriptor_ensemble_csv(ensemble: &[DescriptorSeries]) -> Result<Vec<u8>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::invalid("empty descriptor ensemble"))?;
    if ensemble
        .iter()
        .any(|s| s.descriptor != first.descriptor || s.grid != first.grid)
    {
        return Err(Error::invalid("ensemble mixes descriptors or grids"));
    }
    let mut comments = vec![(
        "grid".to_owned(),
        format!(
            "descriptor={} epoch_length={} source_len={} realizations={}",
            first.descriptor,
            first.grid.epoch_length,
            first.grid.source_len(),
            ensemble.len()
        ),
    )];
    for (r, s) in ensemble.iter().enumerate() {
        comments.push((format!("meta.{r}"), s.source_meta.to_string()));
    }
    let comments: Vec<(&str, String)> = comments.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let mut rows = Vec::with_capacity(ensemble.len() * first.len());
    for (r, s) in ensemble.iter().enumerate() {
        for (i, (v, f)) in s.values.iter().zip(&s.flags).enumerate() {
            rows.push(vec![
                r.to_string(),
                i.to_string(),
                fmt_f64(*v),
                f.as_str().to_owned(),
            ]);
        }
    }
    Ok(table_csv(&comments, ENSEMBLE_HEADER, &rows))
}

pub fn parse_descriptor_ensemble_csv(text: &str) -> Result<Vec<DescriptorSeries>> {
    let t = Table::parse(text)?;
    t.expect_header(ENSEMBLE_HEADER)?;
    let g = t.meta_fields("grid")?;
    let descriptor: Descriptor = meta_field(&g, "descriptor")?;
    let grid = EpochGrid::new(meta_field(&g, "source_len")?, meta_field(&g, "epoch_length")?)?;
    let count: usize = meta_field(&g, "realizations")?;
    if t.rows.len() != count.saturating_mul(grid.epoch_count) {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "{} rows for {count} realizations of {} epochs",
                t.rows.len(),
                grid.epoch_count
            ),
        });
    }
    let mut out = Vec::with_capacity(count);
    for (j, chunk) in t.rows.chunks(grid.epoch_count.max(1)).enumerate() {
        let mut values = Vec::with_capacity(chunk.len());
        let mut flags = Vec::with_capacity(chunk.len());
        for (i, (line, r)) in chunk.iter().enumerate() {
            let (real, idx): (usize, usize) = (
                field(*line, &r[0], "realization")?,
                field(*line, &r[1], "epoch_index")?,
            );
            if (real, idx) != (j, i) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("row ({real}, {idx}), expected ({j}, {i})"),
                });
            }
            values.push(field(*line, &r[2], "value")?);
            flags.push(field::<EpochFlag>(*line, &r[3], "flag")?);
        }
        let source_meta = match t.meta.get(&format!("meta.{j}")) {
            Some(m) => m.parse()?,
            None => Provenance::default(),
        };
        out.push(DescriptorSeries {
            descriptor,
            values,
            flags,
            grid,
            source_meta,
        });
    }
    Ok(out)
}

pub fn eb_csv(curve: &EBCurve) -> Vec<u8> {
    let rows: Vec<Vec<String>> = curve
        .lengths
        .iter()
        .zip(&curve.eb)
        .zip(&curve.n_used)
        .map(|((t, e), n)| vec![t.to_string(), fmt_f64(*e), n.to_string()])
        .collect();
    let meta = format!(
        "lag={} unit={} ensemble_size={}",
        curve.lag, curve.unit, curve.ensemble_size
    );
    table_csv(&[("eb", meta)], EB_HEADER, &rows)
}

pub fn parse_eb_csv(text: &str) -> Result<EBCurve> {
    let t = Table::parse(text)?;
    t.expect_header(EB_HEADER)?;
    let m = t.meta_fields("eb")?;
    let ensemble_size: usize = meta_field(&m, "ensemble_size")?;
    let mut c = EBCurve {
        lag: meta_field(&m, "lag")?,
        unit: meta_field::<Unit>(&m, "unit")?,
        ensemble_size,
        lengths: Vec::new(),
        eb: Vec::new(),
        n_used: Vec::new(),
        unreliable: Vec::new(),
    };
    for (line, r) in &t.rows {
        let len: usize = field(*line, &r[0], "t")?;
        if c.lengths.last().is_some_and(|&p| p >= len) || len <= c.lag {
            return Err(Error::Parse {
                line: *line,
                message: format!("length {len} out of order or not above the lag"),
            });
        }
        let n: usize = field(*line, &r[2], "n_used")?;
        c.lengths.push(len);
        c.eb.push(field(*line, &r[1], "eb")?);
        c.n_used.push(n);
        c.unreliable
            .push((n as f64) < MIN_USABLE_SHARE * ensemble_size as f64 || n < 2);
    }
    Ok(c)
}

pub fn dfa_csv(r: &DfaResult) -> Vec<u8> {
    let rows: Vec<Vec<String>> = r
        .scales
        .iter()
        .zip(&r.fluctuations)
        .map(|(s, f)| vec![s.to_string(), fmt_f64(*f)])
        .collect();
    let meta = format!(
        "hurst={} fit_r2={} low_fit={}",
        fmt_f64(r.hurst),
        fmt_f64(r.fit_r2),
        r.low_fit
    );
    table_csv(&[("dfa", meta)], DFA_HEADER, &rows)
}

pub fn parse_dfa_csv(text: &str) -> Result<DfaResult> {
    let t = Table::parse(text)?;
    t.expect_header(DFA_HEADER)?;
    let m = t.meta_fields("dfa")?;
    let mut r = DfaResult {
        hurst: meta_field(&m, "hurst")?,
        fit_r2: meta_field(&m, "fit_r2")?,
        low_fit: meta_field(&m, "low_fit")?,
        scales: Vec::new(),
        fluctuations: Vec::new(),
    };
    for (line, row) in &t.rows {
        r.scales.push(field(*line, &row[0], "scale")?);
        r.fluctuations.push(field(*line, &row[1], "fluctuation")?);
    }
    Ok(r)
}

pub fn spectrum_csv(s: &MultifractalSpectrum) -> Vec<u8> {
    let rows: Vec<Vec<String>> = s
        .points
        .iter()
        .zip(&s.accepted)
        .map(|(p, a)| {
            vec![
                fmt_f64(p.q),
                fmt_f64(p.alpha),
                fmt_f64(p.f),
                fmt_f64(p.r_alpha),
                fmt_f64(p.r_f),
                a.to_string(),
            ]
        })
        .collect();
    let meta = format!(
        "delta_alpha={} nonmonotone={}",
        fmt_f64(s.delta_alpha),
        s.nonmonotone
    );
    table_csv(&[("spectrum", meta)], SPECTRUM_HEADER, &rows)
}

pub fn parse_spectrum_csv(text: &str) -> Result<MultifractalSpectrum> {
    let t = Table::parse(text)?;
    t.expect_header(SPECTRUM_HEADER)?;
    let m = t.meta_fields("spectrum")?;
    let mut s = MultifractalSpectrum {
        points: Vec::new(),
        accepted: Vec::new(),
        delta_alpha: meta_field(&m, "delta_alpha")?,
        nonmonotone: meta_field(&m, "nonmonotone")?,
    };
    for (line, r) in &t.rows {
        s.points.push(SpectrumPoint {
            q: field(*line, &r[0], "q")?,
            alpha: field(*line, &r[1], "alpha")?,
            f: field(*line, &r[2], "f")?,
            r_alpha: field(*line, &r[3], "r_alpha")?,
            r_f: field(*line, &r[4], "r_f")?,
        });
        s.accepted.push(field(*line, &r[5], "accepted")?);
    }
    Ok(s)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series_csv(&read_text(path)?)
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    write_atomic(path, &series_csv(series))
}

pub fn read_descriptor(path: &Path) -> Result<DescriptorSeries> {
    parse_descriptor_csv(&read_text(path)?)
}

pub fn write_descriptor(path: &Path, series: &DescriptorSeries) -> Result<()> {
    write_atomic(path, &descriptor_csv(series))
}

pub fn read_eb(path: &Path) -> Result<EBCurve> {
    parse_eb_csv(&read_text(path)?)
}

pub fn write_eb(path: &Path, curve: &EBCurve) -> Result<()> {
    write_atomic(path, &eb_csv(curve))
}
