//! Static SVG figures with a CSV of exactly the plotted points.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::gamble::{gamble_ensemble_stats, player_seed};
use crate::io;
use crate::linstats::Descriptor;
use crate::noise::{gamble_trajectory, GambleParams};
use crate::pipeline::{self, Condition, STREAM_GAMBLE};
use crate::seed::derive_seed;

pub const GAMBLE_PLAYERS: usize = 10_000;
pub const GAMBLE_SINGLE_PLAYERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureId(u8);

impl FigureId {
    pub const ALL: [FigureId; 10] = [
        FigureId(1),
        FigureId(2),
        FigureId(3),
        FigureId(4),
        FigureId(5),
        FigureId(6),
        FigureId(7),
        FigureId(8),
        FigureId(9),
        FigureId(10),
    ];

    pub fn number(self) -> u8 {
        self.0
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fig{}", self.0)
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("fig").unwrap_or(s);
        match digits.parse::<u8>() {
            Ok(n @ 1..=10) => Ok(FigureId(n)),
            _ => Err(Error::invalid(format!("unknown figure `{s}` (fig1..fig10)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub lines: Vec<Line>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_log: bool, y_log: bool) -> Self {
        Self {
            title: title.to_owned(),
            x_label: x_label.to_owned(),
            y_label: y_label.to_owned(),
            x_log,
            y_log,
            lines: Vec::new(),
        }
    }

    /// Add a line, keeping only points drawable on this panel's axes.
    pub fn line(&mut self, label: impl Into<String>, points: impl IntoIterator<Item = (f64, f64)>) {
        let ok = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
        let points = points
            .into_iter()
            .filter(|&(x, y)| ok(x, self.x_log) && ok(y, self.y_log))
            .collect();
        self.lines.push(Line {
            label: label.into(),
            points,
        });
    }

    fn bounds(&self) -> Option<[f64; 4]> {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for &(x, y) in self.lines.iter().flat_map(|l| &l.points) {
            let (x, y) = (axis(x, self.x_log), axis(y, self.y_log));
            b = [b[0].min(x), b[1].max(x), b[2].min(y), b[3].max(y)];
        }
        if !b[0].is_finite() {
            return None;
        }
        for i in [0, 2] {
            if b[i + 1] - b[i] < 1e-12 {
                b[i] -= 0.5;
                b[i + 1] += 0.5;
            } else {
                let pad = 0.04 * (b[i + 1] - b[i]);
                b[i] -= pad;
                b[i + 1] += pad;
            }
        }
        Some(b)
    }
}

fn axis(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub id: FigureId,
    pub title: String,
    pub panels: Vec<Panel>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: (f64, f64, f64, f64) = (64.0, 16.0, 36.0, 48.0); // left, right, top, bottom

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        format!("{v:.1e}")
    }
}

/// Roughly five round tick positions in `[lo, hi]`.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
        let step = ((b - a) / 5).max(1);
        return (a..=b).step_by(step as usize).map(|e| e as f64).collect();
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(raw);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

impl Figure {
    pub fn svg(&self) -> String {
        let cols = self.panels.len().clamp(1, 3);
        let rows = self.panels.len().div_ceil(cols).max(1);
        let (w, h) = (PANEL_W * cols as f64, PANEL_H * rows as f64 + 28.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            w / 2.0,
            esc(&self.title)
        );
        for (i, p) in self.panels.iter().enumerate() {
            let ox = PANEL_W * (i % cols) as f64;
            let oy = 28.0 + PANEL_H * (i / cols) as f64;
            panel_svg(&mut s, p, ox, oy);
        }
        s.push_str("</svg>\n");
        s
    }

    /// Long-format table `panel,series,x,y` of every drawn point.
    pub fn csv(&self) -> (Vec<u8>, usize) {
        let mut rows = Vec::new();
        for p in &self.panels {
            for l in &p.lines {
                for &(x, y) in &l.points {
                    rows.push(vec![
                        p.title.clone(),
                        l.label.clone(),
                        io::fmt_f64(x),
                        io::fmt_f64(y),
                    ]);
                }
            }
        }
        let n = rows.len();
        (io::table_csv(&[], &["panel", "series", "x", "y"], &rows), n)
    }
}

fn panel_svg(s: &mut String, p: &Panel, ox: f64, oy: f64) {
    let (ml, mr, mt, mb) = MARGIN;
    let (x0, x1, y0, y1) = (ox + ml, ox + PANEL_W - mr, oy + mt, oy + PANEL_H - mb);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        oy + 16.0,
        esc(&p.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 36.0,
        esc(&p.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        ox + 14.0,
        (y0 + y1) / 2.0,
        esc(&p.y_label)
    );
    let Some([bx0, bx1, by0, by1]) = p.bounds() else {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no data</text>"#,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0
        );
        return;
    };
    let px = |v: f64| x0 + (axis(v, p.x_log) - bx0) / (bx1 - bx0) * (x1 - x0);
    let py = |v: f64| y1 - (axis(v, p.y_log) - by0) / (by1 - by0) * (y1 - y0);
    for t in ticks(bx0, bx1, p.x_log) {
        let x = x0 + (t - bx0) / (bx1 - bx0) * (x1 - x0);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y1:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y1 + 4.0,
            y1 + 16.0,
            tick_label(t, p.x_log)
        );
    }
    for t in ticks(by0, by1, p.y_log) {
        let y = y1 - (t - by0) / (by1 - by0) * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            tick_label(t, p.y_log)
        );
    }
    for (i, l) in p.lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !l.points.is_empty() {
            let pts: Vec<String> = l
                .points
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = y0 + 12.0 + 13.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x1 - 120.0,
            x1 - 104.0,
            x1 - 100.0,
            ly + 4.0,
            esc(&l.label)
        );
    }
}

/// Epoch length shown in the per-descriptor figures.
pub fn figure_epoch_length(config: &ExperimentConfig) -> usize {
    if config.epoch_lengths.contains(&1000) {
        1000
    } else {
        config.epoch_lengths[config.epoch_lengths.len() / 2]
    }
}

fn descriptor_of(id: FigureId) -> Option<Descriptor> {
    match id.0 {
        3 => Some(Descriptor::Sd),
        4 => Some(Descriptor::Cv),
        5 => Some(Descriptor::Rms),
        6 => Some(Descriptor::Hfgn),
        7 => Some(Descriptor::DeltaAlpha),
        8 => Some(Descriptor::Tmf),
        _ => None,
    }
}

fn eb_points(c: &crate::ergodicity::EBCurve) -> Vec<(f64, f64)> {
    c.finite_points().map(|(t, e)| (t as f64, e)).collect()
}

/// Build figure `id` from a finished run in `out` (fig1 is computed here).
pub fn build(id: FigureId, config: &ExperimentConfig, out: &Path) -> Result<Figure> {
    let mut panels = Vec::new();
    let title;
    match id.0 {
        1 => {
            title = "Multiplicative coin-toss gamble".to_owned();
            let params = GambleParams::default();
            let seed = derive_seed(config.master_seed, &[STREAM_GAMBLE]);
            let stats = gamble_ensemble_stats(&params, GAMBLE_PLAYERS, seed)?;
            for (name, log) in [("linear axes", false), ("log axes", true)] {
                let mut p = Panel::new(name, "round", "wealth", false, log);
                let rounds = |v: &[f64]| {
                    v.iter()
                        .enumerate()
                        .map(|(k, &w)| (k as f64, w))
                        .collect::<Vec<_>>()
                };
                p.line(format!("mean of {GAMBLE_PLAYERS}"), rounds(&stats.mean));
                p.line("median", rounds(&stats.median));
                p.line(
                    "expected 1.05^k",
                    (0..=params.rounds).map(|k| (k as f64, 1.05f64.powi(k as i32))),
                );
                for i in 0..GAMBLE_SINGLE_PLAYERS {
                    let t = gamble_trajectory(&params, player_seed(seed, i))?;
                    p.line(format!("player {i}"), rounds(t.values()));
                }
                panels.push(p);
            }
        }
        2 => {
            title = "Raw unsigned series: MTE averages and E_B".to_owned();
            for cond in [Condition::WhiteOrig, Condition::PinkOrig] {
                let text = io::read_text(&out.join(pipeline::raw_mte_path(cond)))?;
                let t = io::Table::parse(&text)?;
                let mut p = Panel::new(&format!("MTE average, {cond}"), "sample", "value", false, false);
                for (j, name) in t.header.iter().enumerate().skip(1) {
                    let pts = t.rows.iter().filter_map(|(_, r)| {
                        Some((r[0].parse::<f64>().ok()?, r.get(j)?.parse::<f64>().ok()?))
                    });
                    p.line(name.replace("mean_", "m = "), pts.collect::<Vec<_>>());
                }
                panels.push(p);
            }
            let mut p = Panel::new("E_B, lag 2 samples", "t (samples)", "E_B", true, true);
            for cond in Condition::ALL {
                p.line(cond.name(), eb_points(&pipeline::load_raw_eb(out, cond)?));
            }
            panels.push(p);
        }
        3..=8 => {
            let d = descriptor_of(id).expect("figure 3..8");
            let l = figure_epoch_length(config);
            title = format!("{} series, {l}-sample epochs", d.name());
            let mut a = Panel::new("realization 0", "epoch", d.name(), false, false);
            let mut b = Panel::new("E_B, lag 2 epochs", "t (epochs)", "E_B", true, true);
            for cond in Condition::ALL {
                let table = pipeline::load_descriptor_table(out, cond, l, d)?;
                a.line(
                    cond.name(),
                    table[0].values.iter().enumerate().map(|(i, &v)| (i as f64, v)),
                );
                b.line(
                    cond.name(),
                    eb_points(&pipeline::load_descriptor_eb(out, cond, l, d)?),
                );
            }
            panels.extend([a, b]);
        }
        9 | 10 => {
            let descs: &[Descriptor] = if id.0 == 9 {
                &[Descriptor::Sd, Descriptor::Cv, Descriptor::Rms]
            } else {
                &[Descriptor::Hfgn, Descriptor::DeltaAlpha, Descriptor::Tmf]
            };
            title = "E_B of descriptor series across epoch sizes, unsigned pink noise".to_owned();
            for &d in descs {
                let mut p = Panel::new(d.name(), "t (epochs)", "E_B", true, true);
                for &l in &config.epoch_lengths {
                    for cond in [Condition::PinkOrig, Condition::PinkShuf] {
                        p.line(
                            format!("{cond} {l}"),
                            eb_points(&pipeline::load_descriptor_eb(out, cond, l, d)?),
                        );
                    }
                }
                panels.push(p);
            }
        }
        _ => unreachable!("FigureId is 1..=10"),
    }
    Ok(Figure { id, title, panels })
}

/// `(relative path, bytes, plotted rows)` for the SVG and its CSV.
pub fn render(id: FigureId, config: &ExperimentConfig, out: &Path) -> Result<Vec<(String, Vec<u8>, usize)>> {
    let fig = build(id, config, out)?;
    let (csv, rows) = fig.csv();
    Ok(vec![
        (format!("figures/{id}.svg"), fig.svg().into_bytes(), rows),
        (format!("figures/{id}.csv"), csv, rows),
    ])
}
