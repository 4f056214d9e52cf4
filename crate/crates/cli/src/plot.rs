//! PR curves as a standalone SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use placegan::placerec::read_pr_csv;
use placegan::PrCurve;

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// PR curve files written by `match-eval`
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Output SVG file
    #[arg(long, default_value = "pr.svg")]
    pub out: PathBuf,
}

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const PLOT_W: f64 = 360.0;
const PLOT_H: f64 = 340.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn to_px(recall: f64, precision: f64) -> (f64, f64) {
    (LEFT + recall * PLOT_W, TOP + (1.0 - precision) * PLOT_H)
}

fn from_px(x: f64, y: f64) -> (f64, f64) {
    ((x - LEFT) / PLOT_W, 1.0 - (y - TOP) / PLOT_H)
}

/// Precision over recall on fixed `[0, 1] × [0, 1]` axes, one polyline per curve.
pub fn render_svg(curves: &[PrCurve]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g id="axes" data-x-range="0 1" data-y-range="0 1"><rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (x, y0) = to_px(v, 0.0);
        let (x0, y) = to_px(0.0, v);
        let _ = writeln!(s, r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="#999"/><text x="{x}" y="{}" text-anchor="middle">{v:.1}</text>"##, y0 + 5.0, y0 + 18.0);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="#999"/><text x="{}" y="{}" text-anchor="end">{v:.1}</text>"##, x0 - 5.0, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">recall</text>"#, LEFT + PLOT_W / 2.0, TOP + PLOT_H + 36.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">precision</text></g>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| {
                let (x, y) = to_px(p.recall, p.precision);
                format!("{x:?},{y:?}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="pr-curve" data-n="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            c.sequence_length,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + PLOT_W + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">n = {}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            c.sequence_length
        );
    }
    s.push_str("</svg>\n");
    s
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    Some(&tag[start..start + tag[start..].find('"')?])
}

/// `(n, [(recall, precision)])` of every curve in an SVG from [`render_svg`].
pub fn parse_svg_curves(svg: &str) -> Result<Vec<(usize, Vec<(f64, f64)>)>> {
    let mut out = Vec::new();
    for tag in svg.split('<').filter(|t| t.starts_with("polyline") && t.contains("class=\"pr-curve\"")) {
        let n = attr(tag, "data-n").context("curve without data-n")?.parse()?;
        let pts = attr(tag, "points")
            .context("curve without points")?
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').context("malformed point")?;
                Ok(from_px(x.parse()?, y.parse()?))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((n, pts));
    }
    Ok(out)
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let mut curves = Vec::new();
    for f in &args.files {
        curves.extend(read_pr_csv(f).with_context(|| format!("reading {}", f.display()))?);
    }
    if curves.is_empty() {
        bail!("no curves to plot");
    }
    fs::write(&args.out, render_svg(&curves)).with_context(|| format!("writing {}", args.out.display()))?;
    log::info!("plotted {} curves to {}", curves.len(), args.out.display());
    Ok(())
}
