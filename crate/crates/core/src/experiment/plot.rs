//! Static SVG figures rendered in-process.

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::eval::Psd;
use crate::mpc::ControlLog;
use crate::neural_mass::SimTrace;

const PALETTE: [RGBColor; 4] = [RGBColor(20, 20, 20), RGBColor(214, 39, 40), RGBColor(31, 119, 180), RGBColor(44, 160, 44)];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Panel<'a> {
    title: String,
    x_label: &'a str,
    y_label: &'a str,
    series: Vec<Series<'a>>,
    log_y: bool,
    x_range: Option<(f64, f64)>,
    marker: Option<f64>,
}

fn draw_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Format(format!("plot rendering failed: {e:?}"))
}

fn bounds(points: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in points.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn draw_panel(area: &DrawingArea<SVGBackend, Shift>, panel: &Panel) -> Result<()> {
    let xs = panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x0, x1) = panel.x_range.unwrap_or_else(|| {
        let (a, b) = bounds(xs);
        (a, b)
    });
    let in_x = |p: &&(f64, f64)| p.0 >= x0 && p.0 <= x1;
    let mut builder = ChartBuilder::on(area);
    builder.caption(&panel.title, ("sans-serif", 16)).margin(10).x_label_area_size(36).y_label_area_size(60);
    if panel.log_y {
        let ys = panel.series.iter().flat_map(|s| s.points.iter().filter(in_x).map(|p| p.1).filter(|v| *v > 0.0));
        let (lo, hi) = bounds(ys);
        let (lo, hi) = (lo.max(hi * 1e-12).max(f64::MIN_POSITIVE), hi.max(1e-300));
        let mut chart = builder.build_cartesian_2d(x0..x1, (lo..hi).log_scale()).map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc(panel.x_label)
            .y_desc(panel.y_label)
            .y_label_formatter(&|v| format!("{v:.0e}"))
            .draw()
            .map_err(draw_err)?;
        for (i, s) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts = s.points.iter().filter(in_x).filter(|p| p.1 > 0.0).copied();
            chart
                .draw_series(LineSeries::new(pts, color.stroke_width(1)))
                .map_err(draw_err)?
                .label(s.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(draw_err)?;
    } else {
        let ys = panel.series.iter().flat_map(|s| s.points.iter().filter(in_x).map(|p| p.1));
        let (lo, hi) = bounds(ys);
        let mut chart = builder.build_cartesian_2d(x0..x1, lo..hi).map_err(draw_err)?;
        chart.configure_mesh().x_desc(panel.x_label).y_desc(panel.y_label).draw().map_err(draw_err)?;
        if let Some(t) = panel.marker {
            chart
                .draw_series(LineSeries::new(vec![(t, lo), (t, hi)], RGBColor(128, 128, 128).stroke_width(1)))
                .map_err(draw_err)?;
        }
        for (i, s) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(s.points.iter().filter(in_x).copied(), color.stroke_width(1)))
                .map_err(draw_err)?
                .label(s.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(draw_err)?;
    }
    Ok(())
}

fn render(panels: &[Panel], width: u32) -> Result<String> {
    let mut svg = String::new();
    {
        let height = 260 * panels.len() as u32;
        let root = SVGBackend::with_string(&mut svg, (width, height)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let areas = root.split_evenly((panels.len(), 1));
        for (area, panel) in areas.iter().zip(panels) {
            draw_panel(area, panel)?;
        }
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}

fn channel_points(trace: &SimTrace, ch: usize) -> Vec<(f64, f64)> {
    trace.channels[ch].iter().enumerate().map(|(i, v)| (trace.time(i), *v)).collect()
}

/// One panel per channel.
pub fn trace_figure(trace: &SimTrace, title: &str) -> Result<String> {
    let panels: Vec<Panel> = (0..trace.n_channels())
        .map(|c| Panel {
            title: format!("{title}, channel {c}"),
            x_label: "time (s)",
            y_label: "EEG (mV)",
            series: vec![Series { label: "eeg", points: channel_points(trace, c) }],
            log_y: false,
            x_range: None,
            marker: None,
        })
        .collect();
    render(&panels, 900)
}

/// Truth overlaid with one or more predictions, one panel per channel.
pub fn prediction_figure(truth: &SimTrace, predictions: &[(&str, &SimTrace)]) -> Result<String> {
    let mut panels = Vec::new();
    for c in 0..truth.n_channels() {
        let mut series = vec![Series { label: "truth", points: channel_points(truth, c) }];
        for (label, p) in predictions {
            series.push(Series { label, points: channel_points(p, c) });
        }
        panels.push(Panel {
            title: format!("prediction, channel {c}"),
            x_label: "time (s)",
            y_label: "EEG (mV)",
            series,
            log_y: false,
            x_range: None,
            marker: None,
        });
    }
    render(&panels, 900)
}

/// Log-scale density over `[0, max_hz]`, one panel per channel.
pub fn psd_figure(spectra: &[Vec<(&str, &Psd)>], max_hz: f64) -> Result<String> {
    let panels: Vec<Panel> = spectra
        .iter()
        .enumerate()
        .map(|(c, group)| Panel {
            title: format!("power spectral density, channel {c}"),
            x_label: "frequency (Hz)",
            y_label: "PSD (mV²/Hz)",
            series: group
                .iter()
                .map(|(label, psd)| Series {
                    label,
                    points: psd.frequencies.iter().copied().zip(psd.density.iter().copied()).collect(),
                })
                .collect(),
            log_y: true,
            x_range: Some((0.0, max_hz)),
            marker: None,
        })
        .collect();
    render(&panels, 700)
}

/// Stacked controlled vs uncontrolled EEG per channel, then u(t), with a
/// vertical marker at the control onset.
pub fn control_figure(uncontrolled: &SimTrace, controlled: &SimTrace, log: &ControlLog, onset: f64) -> Result<String> {
    let mut panels = Vec::new();
    for c in 0..controlled.n_channels() {
        panels.push(Panel {
            title: format!("EEG, channel {c}"),
            x_label: "time (s)",
            y_label: "EEG (mV)",
            series: vec![
                Series { label: "uncontrolled", points: channel_points(uncontrolled, c) },
                Series { label: "controlled", points: channel_points(controlled, c) },
            ],
            log_y: false,
            x_range: None,
            marker: Some(onset),
        });
    }
    panels.push(Panel {
        title: "control input".into(),
        x_label: "time (s)",
        y_label: "u (Hz)",
        series: vec![Series { label: "u", points: log.times.iter().copied().zip(log.u.iter().copied()).collect() }],
        log_y: false,
        x_range: None,
        marker: Some(onset),
    });
    render(&panels, 900)
}
