//! Minimal deterministic SVG line charts and the CSV tables behind them.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Data range padded so that a constant series still gets a visible band.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#444"/>"##
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let base = MARGIN_TOP + plot_h;
        let _ =
            writeln!(out, r##"<line x1="{px:.2}" y1="{base:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/>"##, base + 4.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, base + 18.0, tick(xv));
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT:.2}" y2="{py:.2}" stroke="#444"/>"##,
            MARGIN_LEFT - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 7.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
        }
        let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(out, r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 15.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-model weights under one or more selection criteria.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTable {
    pub series: Vec<(String, Vec<f64>)>,
    /// `delta` of each base model; when present the chart is drawn over it.
    pub deltas: Option<Vec<f64>>,
    /// Standalone accuracy of each base model, when labels are known.
    pub model_acc: Option<Vec<f64>>,
}

impl WeightTable {
    pub fn single(weights: Vec<f64>) -> Self {
        WeightTable { series: vec![("weight".into(), weights)], ..Default::default() }
    }

    fn len(&self) -> usize {
        self.series.first().map_or(0, |s| s.1.len())
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["model".to_string()];
        if self.deltas.is_some() {
            header.push("delta".into());
        }
        header.extend(self.series.iter().map(|s| s.0.clone()));
        if self.model_acc.is_some() {
            header.push("acc".into());
        }
        let mut out = header.join(",") + "\n";
        for z in 0..self.len() {
            let mut row = vec![z.to_string()];
            if let Some(d) = &self.deltas {
                row.push(cell(d.get(z).copied()));
            }
            row.extend(self.series.iter().map(|s| cell(s.1.get(z).copied())));
            if let Some(a) = &self.model_acc {
                row.push(cell(a.get(z).copied()));
            }
            out += &(row.join(",") + "\n");
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let x_of = |z: usize| self.deltas.as_ref().map_or(z as f64, |d| d[z]);
        order.sort_by(|&a, &b| x_of(a).total_cmp(&x_of(b)).then(a.cmp(&b)));
        let mut series: Vec<Series> = self
            .series
            .iter()
            .map(|(name, w)| Series { name: name.clone(), points: order.iter().map(|&z| (x_of(z), w[z])).collect() })
            .collect();
        if let Some(acc) = &self.model_acc {
            series.push(Series { name: "acc".into(), points: order.iter().map(|&z| (x_of(z), acc[z])).collect() });
        }
        let x_label = if self.deltas.is_some() { "delta" } else { "model" };
        line_chart("Base model weights", x_label, "weight", &series)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

pub fn curve_csv(x_name: &str, rows: &[CurveRow]) -> String {
    let mut out = format!("{x_name},mean_acc,std_acc\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.x, cell(r.mean), cell(r.std));
    }
    out
}

pub fn curve_svg(title: &str, x_name: &str, rows: &[CurveRow]) -> String {
    let points = rows.iter().filter_map(|r| r.mean.map(|m| (r.x, m))).collect();
    line_chart(title, x_name, "ACC", &[Series { name: "mean ACC".into(), points }])
}
