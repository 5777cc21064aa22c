//! Static SVG figures from the CSV reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::eval::BAND_COLUMNS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Columns `x,truth,mean,lo,hi,ref_lo,ref_hi`.
    Band,
    /// Columns `run,epoch,loss,reg,<param>...`: one panel per parameter.
    Trajectory,
    /// Columns `x,lambda,loss_kind,component,w1`: one panel per component.
    W1,
}

impl PlotKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "band" => Ok(PlotKind::Band),
            "trajectory" => Ok(PlotKind::Trajectory),
            "w1" => Ok(PlotKind::W1),
            other => Err(Error::config(format!("unknown plot kind '{other}' (band, trajectory, w1)"))),
        }
    }

    pub fn expected_columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Band => &BAND_COLUMNS,
            PlotKind::Trajectory => &["run", "epoch", "loss", "reg", "<param>..."],
            PlotKind::W1 => &["x", "lambda", "loss_kind", "component", "w1"],
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(csv: &str) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<String> =
            lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.split(',').map(|s| s.trim().to_string()).collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != header.len()) {
            return Err(Error::Parse(format!("CSV row {} has a different number of columns than the header", i + 2)));
        }
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        let v = &self.rows[row][col];
        v.parse().map_err(|_| Error::Parse(format!("row {}: '{v}' in column {} is not a number", row + 2, self.header[col])))
    }
}

fn schema_error(kind: PlotKind, found: &[String]) -> Error {
    Error::Parse(format!(
        "CSV columns [{}] do not match the {kind:?} plot; expected columns: {}",
        found.join(", "),
        kind.expected_columns().join(", ")
    ))
}

const W: f64 = 720.0;
const PANEL_H: f64 = 360.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Linear map of a data box onto one panel.
struct Panel {
    top: f64,
    x: (f64, f64),
    y: (f64, f64),
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y.0, self.y.1);
        self.top + PANEL_H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (PANEL_H - 2.0 * MARGIN)
    }

    fn points(&self, xs: &[f64], ys: &[f64]) -> String {
        xs.iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn frame(&self, svg: &mut String, title: &str, xlabel: &str) {
        let (l, r) = (MARGIN, W - MARGIN);
        let (t, b) = (self.top + MARGIN, self.top + PANEL_H - MARGIN);
        let _ = writeln!(svg, r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##, r - l, b - t);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0, t - 12.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{xlabel}</text>"#, W / 2.0, b + 36.0);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#, self.px(xv), b + 16.0, tick(xv));
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, l - 6.0, self.py(yv) + 3.0, tick(yv));
        }
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn document(panels: usize, body: &str) -> String {
    let h = PANEL_H * panels as f64;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h}\" viewBox=\"0 0 {W} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn legend(svg: &mut String, panel: &Panel, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = panel.top + MARGIN + 14.0 + 14.0 * i as f64;
        let x = W - MARGIN - 150.0;
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#, x + 18.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="10">{label}</text>"#, x + 22.0, y + 3.0);
    }
}

/// Renders `csv` as a self-contained SVG. `points` adds a scatter of training
/// data to band plots.
pub fn plot(csv: &str, kind: PlotKind, points: Option<&Dataset>) -> Result<String> {
    let table = Table::parse(csv)?;
    match kind {
        PlotKind::Band => band_plot(&table, points),
        PlotKind::Trajectory => trajectory_plot(&table),
        PlotKind::W1 => w1_plot(&table),
    }
}

fn band_plot(t: &Table, points: Option<&Dataset>) -> Result<String> {
    let idx: Vec<usize> = BAND_COLUMNS
        .iter()
        .map(|c| t.col(c))
        .collect::<Option<_>>()
        .ok_or_else(|| schema_error(PlotKind::Band, &t.header))?;
    let cols: Vec<Vec<f64>> =
        idx.iter().map(|&c| (0..t.rows.len()).map(|r| t.num(r, c)).collect::<Result<_>>()).collect::<Result<_>>()?;
    let [x, truth, mean, lo, hi, ref_lo, ref_hi] = [0, 1, 2, 3, 4, 5, 6].map(|i| &cols[i]);
    let scatter: Vec<(f64, f64)> = points.map(|d| d.xs.iter().zip(&d.ys).map(|(x, y)| (*x, y.as_f64())).collect()).unwrap_or_default();
    let panel = Panel {
        top: 0.0,
        x: extent(x.iter().copied()),
        y: extent(cols[1..].iter().flatten().copied().chain(scatter.iter().map(|p| p.1))),
    };
    let mut svg = String::new();
    let polygon = |lo: &[f64], hi: &[f64]| {
        let rev_x: Vec<f64> = x.iter().rev().copied().collect();
        let rev_hi: Vec<f64> = hi.iter().rev().copied().collect();
        format!("{} {}", panel.points(x, lo), panel.points(&rev_x, &rev_hi))
    };
    let _ = writeln!(svg, r##"<polygon class="reference-band" points="{}" fill="#999" fill-opacity="0.35" stroke="none"/>"##, polygon(ref_lo, ref_hi));
    let _ = writeln!(svg, r##"<polygon class="model-band" points="{}" fill="#1f77b4" fill-opacity="0.3" stroke="none"/>"##, polygon(lo, hi));
    let _ = writeln!(svg, r##"<polyline class="truth" points="{}" fill="none" stroke="#2ca02c" stroke-width="2"/>"##, panel.points(x, truth));
    let _ = writeln!(svg, r##"<polyline class="mean" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, panel.points(x, mean));
    for (px, py) in &scatter {
        let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#000" fill-opacity="0.5"/>"##, panel.px(*px), panel.py(*py));
    }
    panel.frame(&mut svg, "reference band (grey) vs model band (blue)", "x");
    legend(&mut svg, &panel, &[("truth".into(), "#2ca02c"), ("model mean".into(), "#1f77b4"), ("reference band".into(), "#999")]);
    Ok(document(1, &svg))
}

fn trajectory_plot(t: &Table) -> Result<String> {
    let (run_c, epoch_c) = match (t.col("run"), t.col("epoch"), t.col("loss"), t.col("reg")) {
        (Some(r), Some(e), Some(_), Some(_)) if t.header.len() > 4 => (r, e),
        _ => return Err(schema_error(PlotKind::Trajectory, &t.header)),
    };
    let params: Vec<usize> = (0..t.header.len()).filter(|&c| !["run", "epoch", "loss", "reg"].contains(&t.header[c].as_str())).collect();
    let mut runs: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let run = t.rows[r][run_c].parse::<u64>().map_err(|_| schema_error(PlotKind::Trajectory, &t.header))?;
        runs.entry(run).or_default().push(r);
    }
    let epochs: Vec<f64> = (0..t.rows.len()).map(|r| t.num(r, epoch_c)).collect::<Result<_>>()?;
    let mut svg = String::new();
    for (p, &c) in params.iter().enumerate() {
        let values: Vec<f64> = (0..t.rows.len()).map(|r| t.num(r, c)).collect::<Result<_>>()?;
        let mut by_epoch: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for (e, v) in epochs.iter().zip(&values) {
            let slot = by_epoch.entry(*e as u64).or_insert((0.0, 0));
            slot.0 += v;
            slot.1 += 1;
        }
        let mean_x: Vec<f64> = by_epoch.keys().map(|&e| e as f64).collect();
        let mean_y: Vec<f64> = by_epoch.values().map(|(s, k)| s / *k as f64).collect();
        let panel = Panel { top: PANEL_H * p as f64, x: extent(epochs.iter().copied()), y: extent(values.iter().copied()) };
        for (run, rows) in &runs {
            let xs: Vec<f64> = rows.iter().map(|&r| epochs[r]).collect();
            let ys: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
            let _ = writeln!(
                svg,
                r##"<polyline class="run" data-run="{run}" data-rows="{}" points="{}" fill="none" stroke="#888" stroke-width="1"/>"##,
                rows.len(),
                panel.points(&xs, &ys)
            );
        }
        let _ = writeln!(svg, r##"<polyline class="mean" points="{}" fill="none" stroke="#d62728" stroke-width="2.5"/>"##, panel.points(&mean_x, &mean_y));
        panel.frame(&mut svg, &format!("mean {} over the grid", t.header[c]), "epoch");
        legend(&mut svg, &panel, &[("single run".into(), "#888"), ("mean over runs".into(), "#d62728")]);
    }
    Ok(document(params.len(), &svg))
}

fn w1_plot(t: &Table) -> Result<String> {
    let cols: Vec<usize> = ["x", "lambda", "loss_kind", "component", "w1"]
        .iter()
        .map(|c| t.col(c))
        .collect::<Option<_>>()
        .ok_or_else(|| schema_error(PlotKind::W1, &t.header))?;
    let (xc, lc, kc, cc, wc) = (cols[0], cols[1], cols[2], cols[3], cols[4]);
    let mut panels: BTreeMap<String, BTreeMap<(String, String), Vec<usize>>> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let row = &t.rows[r];
        panels.entry(row[cc].clone()).or_default().entry((row[kc].clone(), row[lc].clone())).or_default().push(r);
    }
    let mut svg = String::new();
    for (p, (component, series)) in panels.iter().enumerate() {
        let rows: Vec<usize> = series.values().flatten().copied().collect();
        let xs: Vec<f64> = rows.iter().map(|&r| t.num(r, xc)).collect::<Result<_>>()?;
        let ws: Vec<f64> = rows.iter().map(|&r| t.num(r, wc)).collect::<Result<_>>()?;
        let panel = Panel { top: PANEL_H * p as f64, x: extent(xs.into_iter()), y: extent(ws.into_iter().chain([0.0])) };
        let mut entries = Vec::new();
        for (i, ((kind, lambda), rows)) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let xs: Vec<f64> = rows.iter().map(|&r| t.num(r, xc)).collect::<Result<_>>()?;
            let ws: Vec<f64> = rows.iter().map(|&r| t.num(r, wc)).collect::<Result<_>>()?;
            let _ = writeln!(svg, r#"<polyline class="w1" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, panel.points(&xs, &ws));
            entries.push((format!("{kind}, λ={lambda}"), color));
        }
        panel.frame(&mut svg, &format!("W1 to the reference ({component})"), "x");
        legend(&mut svg, &panel, &entries);
    }
    Ok(document(panels.len().max(1), &svg))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAND: &str = "x,truth,mean,lo,hi,ref_lo,ref_hi\n0,0.5,0.5,0.5,0.5,0.5,0.5\n1,0.9,0.8,0.8,0.8,0.7,0.7\n";

    #[test]
    fn band_plot_is_deterministic_and_valid() {
        let a = plot(BAND, PlotKind::Band, None).unwrap();
        assert_eq!(a, plot(BAND, PlotKind::Band, None).unwrap());
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polygon").count(), 2);
    }

    #[test]
    fn schema_mismatch_lists_columns() {
        let err = plot("a,b\n1,2\n", PlotKind::W1, None).unwrap_err().to_string();
        assert!(err.contains("x, lambda, loss_kind, component, w1"), "{err}");
        assert!(plot("x,y\n1,2\n", PlotKind::Band, None).is_err());
        assert!(plot("run,epoch,loss,reg\n0,1,2,3\n", PlotKind::Trajectory, None).is_err());
    }

    #[test]
    fn trajectory_series_per_run() {
        let csv = "run,epoch,loss,reg,beta,alpha\n0,10,5,0,1,2\n0,20,4,0,2,3\n1,10,5,0,1.5,2\n1,20,4,0,2.5,4\n";
        let svg = plot(csv, PlotKind::Trajectory, None).unwrap();
        assert_eq!(svg.matches(r#"class="run""#).count(), 4);
        assert_eq!(svg.matches(r#"class="mean""#).count(), 2);
        let rows: usize = svg.match_indices("data-rows=\"").map(|(i, m)| svg[i + m.len()..].split('"').next().unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(rows, 8);
    }
}
