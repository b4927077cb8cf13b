//! Optional SVG renderings. The CSV written next to each plot is the
//! source of truth; these are for eyeballing only.

use std::path::Path;

use plotters::prelude::*;

use crate::output::{data, CliResult};

const SIZE: (u32, u32) = (640, 480);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(40, 40, 40),
    RGBColor(44, 160, 44),
    RGBColor(23, 190, 207),
    RGBColor(148, 103, 189),
    RGBColor(214, 39, 40),
];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> crate::output::CliError {
    data(format!("plotting {}: {e}", path.display()))
}

pub fn scatter(path: &Path, title: &str, labels: (&str, &str), series: &[Series<'_>], diagonal: bool) -> CliResult {
    let (x0, x1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(path, e))?;
    chart.configure_mesh().x_desc(labels.0).y_desc(labels.1).draw().map_err(|e| plot_err(path, e))?;
    if diagonal {
        let (lo, hi) = (x0.max(y0), x1.min(y1));
        chart.draw_series(LineSeries::new([(lo, lo), (hi, hi)], BLACK.mix(0.5))).map_err(|e| plot_err(path, e))?;
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(s.points.iter().map(|&p| Circle::new(p, 2, color.mix(0.6).filled())))
            .map_err(|e| plot_err(path, e))?
            .label(s.name)
            .legend(move |(x, y)| Circle::new((x, y), 3, color.filled()));
    }
    if series.len() > 1 {
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| plot_err(path, e))?;
    }
    root.present().map_err(|e| plot_err(path, e))
}

pub struct Histogram<'a> {
    pub name: &'a str,
    /// Fraction of pairs per bin; bins evenly split `[0, 1]`.
    pub fractions: Vec<f64>,
    pub mean: f64,
}

/// Step histograms over `[0, 1]` with dashed mean lines and an optional
/// shaded null band.
pub fn histograms(path: &Path, title: &str, xlabel: &str, hists: &[Histogram<'_>], band: Option<(f64, f64)>) -> CliResult {
    let top = hists.iter().flat_map(|h| h.fractions.iter().copied()).fold(0.0f64, f64::max).max(1e-9) * 1.1;
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..1.0, 0.0..top)
        .map_err(|e| plot_err(path, e))?;
    chart.configure_mesh().x_desc(xlabel).y_desc("fraction of pairs").draw().map_err(|e| plot_err(path, e))?;
    if let Some((lo, hi)) = band {
        chart
            .draw_series([Rectangle::new([(lo, 0.0), (hi, top)], BLACK.mix(0.15).filled())])
            .map_err(|e| plot_err(path, e))?;
    }
    for (i, h) in hists.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let width = 1.0 / h.fractions.len() as f64;
        let mut steps = Vec::with_capacity(2 * h.fractions.len() + 2);
        steps.push((0.0, 0.0));
        for (b, &f) in h.fractions.iter().enumerate() {
            steps.push((b as f64 * width, f));
            steps.push(((b + 1) as f64 * width, f));
        }
        steps.push((1.0, 0.0));
        chart
            .draw_series(LineSeries::new(steps, color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(h.name)
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color.stroke_width(2)));
        chart
            .draw_series(DashedLineSeries::new([(h.mean, 0.0), (h.mean, top)], 6, 4, color.into()))
            .map_err(|e| plot_err(path, e))?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}
