//! CSV, JSON and SVG writers. Every file carries the resolved configuration
//! and its SHA-256 so results can be traced back to their inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::Result;

/// Config echo attached to every output.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_json: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch written into SVGs, if any.
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn new(config: &LoadedConfig) -> Self {
        let timestamp = if config.config.run.svg_timestamp {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs())
        } else {
            None
        };
        Provenance {
            config_json: config.resolved_json(),
            config_hash: config.hash(),
            timestamp,
        }
    }
}

/// Format a float so that it parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub struct Writer {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, provenance: Provenance) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = String::new();
        writeln!(s, "# config_sha256: {}", self.provenance.config_hash).unwrap();
        writeln!(s, "# config: {}", self.provenance.config_json).unwrap();
        writeln!(s, "{}", header.join(",")).unwrap();
        for r in rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        let p = self.path(name);
        std::fs::write(&p, s)?;
        Ok(p)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<PathBuf> {
        let config: serde_json::Value =
            serde_json::from_str(&self.provenance.config_json).expect("valid json");
        let doc = serde_json::json!({
            "config_sha256": self.provenance.config_hash,
            "config": config,
            "result": result,
        });
        let p = self.path(name);
        std::fs::write(
            &p,
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n",
        )?;
        Ok(p)
    }

    pub fn svg(&mut self, name: &str, figure: &Figure) -> Result<PathBuf> {
        let text = figure.render(&self.provenance);
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub enum Panel {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<Series>,
    },
    /// `values[ix][iy]` on the `x` × `y` grid.
    Heatmap {
        title: String,
        x_label: String,
        y_label: String,
        x: Vec<f64>,
        y: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

/// Panels stacked vertically.
#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub panels: Vec<Panel>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const W: f64 = 720.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 + 1e-12 * hi.abs().max(lo.abs()) {
        let pad = if hi == 0.0 { 1.0 } else { 0.5 * hi.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn heat_colour(u: f64) -> String {
    // dark blue → white → dark red
    let u = u.clamp(0.0, 1.0);
    let (r, g, b) = if u < 0.5 {
        let k = u / 0.5;
        (30.0 + 225.0 * k, 60.0 + 195.0 * k, 150.0 + 105.0 * k)
    } else {
        let k = (u - 0.5) / 0.5;
        (255.0 - 75.0 * k, 255.0 - 225.0 * k, 255.0 - 225.0 * k)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

impl Figure {
    pub fn render(&self, prov: &Provenance) -> String {
        let height = TOP + self.panels.len().max(1) as f64 * PANEL_H;
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif" font-size="11">"#).unwrap();
        writeln!(s, "<metadata>").unwrap();
        writeln!(s, "  <config_sha256>{}</config_sha256>", prov.config_hash).unwrap();
        writeln!(s, "  <config>{}</config>", escape(&prov.config_json)).unwrap();
        if let Some(t) = prov.timestamp {
            writeln!(s, "  <generated unix=\"{t}\"/>").unwrap();
        }
        writeln!(s, "</metadata>").unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        )
        .unwrap();
        for (k, p) in self.panels.iter().enumerate() {
            let y0 = TOP + k as f64 * PANEL_H;
            match p {
                Panel::Lines {
                    title,
                    x_label,
                    y_label,
                    series,
                } => Self::lines(&mut s, y0, title, x_label, y_label, series),
                Panel::Heatmap {
                    title,
                    x_label,
                    y_label,
                    x,
                    y,
                    values,
                } => Self::heatmap(&mut s, y0, title, x_label, y_label, x, y, values),
            }
        }
        s.push_str("</svg>\n");
        s
    }

    fn frame(
        s: &mut String,
        y0: f64,
        title: &str,
        x_label: &str,
        y_label: &str,
        xr: (f64, f64),
        yr: (f64, f64),
    ) {
        let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - BOTTOM - 20.0);
        let top = y0 + 20.0;
        writeln!(
            s,
            r#"<rect x="{LEFT}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            y0 + 14.0,
            escape(title)
        )
        .unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = xr.0 + f * (xr.1 - xr.0);
            let yv = yr.0 + f * (yr.1 - yr.0);
            let px = LEFT + f * pw;
            let py = top + ph - f * ph;
            writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.3e}</text>"#,
                top + ph + 14.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3e}</text>"#,
                LEFT - 4.0,
                py + 4.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            top + ph + 30.0,
            escape(x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{y:.1}" text-anchor="middle" transform="rotate(-90 14 {y:.1})">{}</text>"#,
            escape(y_label),
            y = top + ph / 2.0
        )
        .unwrap();
    }

    fn lines(
        s: &mut String,
        y0: f64,
        title: &str,
        x_label: &str,
        y_label: &str,
        series: &[Series],
    ) {
        let xr = range(series.iter().flat_map(|se| se.points.iter().map(|p| p.0)));
        let yr = range(series.iter().flat_map(|se| se.points.iter().map(|p| p.1)));
        Self::frame(s, y0, title, x_label, y_label, xr, yr);
        let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - BOTTOM - 20.0);
        let top = y0 + 20.0;
        for (k, se) in series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = se
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| {
                    let px = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
                    let py = top + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            )
            .unwrap();
            let ly = top + 12.0 + 14.0 * k as f64;
            writeln!(s, r#"<line x1="{x1}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, x1 = W - RIGHT + 10.0, x2 = W - RIGHT + 28.0).unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                W - RIGHT + 32.0,
                ly + 4.0,
                escape(&se.label)
            )
            .unwrap();
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn heatmap(
        s: &mut String,
        y0: f64,
        title: &str,
        x_label: &str,
        y_label: &str,
        x: &[f64],
        y: &[f64],
        values: &[Vec<f64>],
    ) {
        let xr = range(x.iter().cloned());
        let yr = range(y.iter().cloned());
        Self::frame(s, y0, title, x_label, y_label, xr, yr);
        let vr = range(values.iter().flatten().cloned());
        let (pw, ph) = (W - LEFT - RIGHT, PANEL_H - BOTTOM - 20.0);
        let top = y0 + 20.0;
        let cw = pw / x.len().max(1) as f64;
        let chh = ph / y.len().max(1) as f64;
        for (ix, col) in values.iter().enumerate() {
            for (iy, &v) in col.iter().enumerate() {
                let u = (v - vr.0) / (vr.1 - vr.0);
                writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    LEFT + ix as f64 * cw,
                    top + ph - (iy + 1) as f64 * chh,
                    cw + 0.3,
                    chh + 0.3,
                    heat_colour(u)
                )
                .unwrap();
            }
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}">min {:.3e}</text>"#,
            W - RIGHT + 10.0,
            top + 12.0,
            vr.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}">max {:.3e}</text>"#,
            W - RIGHT + 10.0,
            top + 26.0,
            vr.1
        )
        .unwrap();
    }
}
