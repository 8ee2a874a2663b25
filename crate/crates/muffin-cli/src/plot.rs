//! Static PNG line charts for the per-iteration metric traces.
//!
//! The bitmap backend carries no built-in fonts, so a system font is
//! registered once at startup. If no font can be found the charts are still
//! emitted with bare polylines (no captions, tick labels, or legend) rather
//! than failing the run.

use crate::error::{CliError, Result};
use plotters::prelude::*;
use plotters::style::register_font;
use std::path::Path;
use std::sync::OnceLock;

const FONT_CANDIDATES: &[&str] = &[
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
];

/// Register a system TTF under the family name used by all chart text.
/// Returns whether text rendering is available.
fn fonts_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        for candidate in FONT_CANDIDATES {
            if let Ok(bytes) = std::fs::read(candidate) {
                let leaked: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if register_font("sans-serif", FontStyle::Normal, leaked).is_ok() {
                    return true;
                }
            }
        }
        false
    })
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: &[RGBColor] = &[BLUE, RED, RGBColor(0, 140, 0), MAGENTA];

fn draw_err(path: &Path, stage: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("plotting {} ({stage}): {err}", path.display()))
}

/// Draw one PNG line chart of the given series. Non-finite points are
/// dropped; returns `false` (and writes nothing) if no finite data remains.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_desc: &str,
    y_desc: &str,
    series: &[Series],
) -> Result<bool> {
    let cleaned: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|&(x, y)| x.is_finite() && y.is_finite())
                .collect();
            (s.label.as_str(), pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    if cleaned.is_empty() {
        return Ok(false);
    }

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in &cleaned {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    // Pad degenerate ranges so the axes stay well-formed.
    if x_max - x_min < f64::EPSILON {
        x_min -= 0.5;
        x_max += 0.5;
    }
    let y_pad = ((y_max - y_min) * 0.05).max(1e-12 + 0.05 * y_max.abs().max(y_min.abs()));
    y_min -= y_pad;
    y_max += y_pad;

    let with_text = fonts_available();
    let root = BitMapBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, "fill", e))?;

    let mut builder = ChartBuilder::on(&root);
    builder.margin(12);
    if with_text {
        builder
            .caption(title, ("sans-serif", 28))
            .x_label_area_size(46)
            .y_label_area_size(74);
    }
    let mut chart = builder
        .build_cartesian_2d(x_min..x_max, y_min..y_max)
        .map_err(|e| draw_err(path, "layout", e))?;

    if with_text {
        chart
            .configure_mesh()
            .x_desc(x_desc)
            .y_desc(y_desc)
            .label_style(("sans-serif", 16))
            .axis_desc_style(("sans-serif", 18))
            .draw()
            .map_err(|e| draw_err(path, "mesh", e))?;
    }

    for (idx, (label, pts)) in cleaned.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let drawn = chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw_err(path, "series", e))?;
        if with_text {
            drawn.label(label.to_string()).legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
        }
    }

    if with_text {
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperRight)
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .label_font(("sans-serif", 16))
            .draw()
            .map_err(|e| draw_err(path, "legend", e))?;
    }

    root.present().map_err(|e| draw_err(path, "write", e))?;
    Ok(true)
}
