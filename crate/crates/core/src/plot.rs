//! Static SVG chart emission: per-place timelines, layered density ridges,
//! and overlaid density plots. Charts only transform data that has already
//! been exported; nothing here recomputes simulation quantities, so every
//! number in an SVG can be re-derived from the exported files it was built
//! from.

use std::fmt::Write as _;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// One named data series.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_series(series: &[Series]) -> Frame {
        let mut frame = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for s in series {
            for &(x, y) in &s.points {
                frame.x_min = frame.x_min.min(x);
                frame.x_max = frame.x_max.max(x);
                frame.y_min = frame.y_min.min(y);
                frame.y_max = frame.y_max.max(y);
            }
        }
        if !frame.x_min.is_finite() {
            frame = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if frame.x_min == frame.x_max {
            frame.x_max = frame.x_min + 1.0;
        }
        if frame.y_min == frame.y_max {
            frame.y_max = frame.y_min + 1.0;
            frame.y_min -= 1.0;
        }
        let pad = (frame.y_max - frame.y_min) * 0.05;
        frame.y_min -= pad;
        frame.y_max += pad;
        frame
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, clock_x: bool) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=5 {
        let fraction = i as f64 / 5.0;
        let xv = frame.x_min + fraction * (frame.x_max - frame.x_min);
        let yv = frame.y_min + fraction * (frame.y_max - frame.y_min);
        let xp = frame.x(xv);
        let yp = frame.y(yv);
        let x_text = if clock_x {
            crate::config::format_clock(xv.round() as u32)
        } else {
            format_tick(xv)
        };
        let _ = write!(
            out,
            "<line x1=\"{xp}\" y1=\"{y0}\" x2=\"{xp}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{x_text}</text>\n\
             <line x1=\"{}\" y1=\"{yp}\" x2=\"{x0}\" y2=\"{yp}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            y0 + 5.0,
            y0 + 20.0,
            x0 - 5.0,
            x0 - 8.0,
            yp + 4.0,
            format_tick(yv)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    let x = WIDTH - MARGIN_RIGHT + 12.0;
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN_TOP + 8.0 + i as f64 * 18.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = write!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            y - 10.0,
            x + 16.0,
            y,
            escape(name)
        );
    }
}

/// Multi-series line chart. X values in minutes render as HH:MM ticks when
/// `clock_x` is set.
pub fn line_chart(series: &[Series], title: &str, x_label: &str, y_label: &str, clock_x: bool) -> String {
    let frame = Frame::from_series(series);
    let mut out = svg_header(title);
    axes(&mut out, &frame, x_label, y_label, clock_x);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: String = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Gaussian kernel density estimate over an even grid spanning the samples
/// plus three bandwidths, using Silverman's rule.
pub fn kde(samples: &[f64], grid_points: usize) -> Vec<(f64, f64)> {
    if samples.is_empty() {
        return Vec::new();
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.max(2.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = sorted[(0.75 * (sorted.len() - 1) as f64) as usize]
        - sorted[(0.25 * (sorted.len() - 1) as f64) as usize];
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bandwidth = if spread > 0.0 {
        0.9 * spread * n.powf(-0.2)
    } else {
        // degenerate distribution: a narrow bump around the single value
        (sorted[sorted.len() - 1] - sorted[0]).max(1.0) * 0.01
    };
    let lo = sorted[0] - 3.0 * bandwidth;
    let hi = sorted[sorted.len() - 1] + 3.0 * bandwidth;
    let step = (hi - lo) / (grid_points.max(2) - 1) as f64;
    (0..grid_points.max(2))
        .map(|i| {
            let x = lo + i as f64 * step;
            let density = samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                / (n * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
            (x, density)
        })
        .collect()
}

/// One ridge row: an entity with one or more named sample sets layered on
/// the same baseline.
#[derive(Debug, Clone)]
pub struct RidgeRow {
    pub entity: String,
    pub groups: Vec<(String, Vec<f64>)>,
}

/// Ridgeline chart: one row per entity, each group drawn as a translucent
/// density polygon. Entities with no samples render as a flat line.
pub fn ridge_chart(rows: &[RidgeRow], title: &str, x_label: &str) -> String {
    let mut out = svg_header(title);
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in rows {
        for (_, samples) in &row.groups {
            for &v in samples {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if lo == hi {
        hi = lo + 1.0;
    }
    let span = hi - lo;
    lo -= span * 0.05;
    hi += span * 0.05;
    let x_of = |v: f64| x0 + (v - lo) / (hi - lo) * (x1 - x0);

    let usable = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let row_height = usable / rows.len().max(1) as f64;
    let amplitude = row_height * 0.85;

    for (r, row) in rows.iter().enumerate() {
        let base_y = MARGIN_TOP + (r as f64 + 1.0) * row_height;
        let _ = write!(
            out,
            "<line x1=\"{x0}\" y1=\"{base_y}\" x2=\"{x1}\" y2=\"{base_y}\" stroke=\"#ccc\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            base_y,
            escape(&row.entity)
        );
        let peak = row
            .groups
            .iter()
            .flat_map(|(_, samples)| kde(samples, 160))
            .map(|(_, d)| d)
            .fold(0.0f64, f64::max);
        for (g, (_, samples)) in row.groups.iter().enumerate() {
            if samples.is_empty() || peak == 0.0 {
                continue;
            }
            let color = PALETTE[g % PALETTE.len()];
            let density = kde(samples, 160);
            let mut path = format!("M {:.2} {base_y:.2}", x_of(density[0].0));
            for &(x, d) in &density {
                let _ = write!(path, " L {:.2} {:.2}", x_of(x), base_y - d / peak * amplitude);
            }
            let _ = write!(path, " L {:.2} {base_y:.2} Z", x_of(density[density.len() - 1].0));
            let _ = writeln!(
                out,
                "<path d=\"{path}\" fill=\"{color}\" fill-opacity=\"0.45\" stroke=\"{color}\"/>"
            );
        }
    }
    for i in 0..=5 {
        let v = lo + i as f64 / 5.0 * (hi - lo);
        let x = x_of(v);
        let _ = write!(
            out,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0,
            HEIGHT - MARGIN_BOTTOM + 20.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    if let Some(first) = rows.first() {
        let names: Vec<&str> = first.groups.iter().map(|(n, _)| n.as_str()).collect();
        legend(&mut out, &names);
    }
    out.push_str("</svg>\n");
    out
}

/// Overlaid filled density chart for a handful of sample sets.
pub fn density_chart(groups: &[(String, Vec<f64>)], title: &str, x_label: &str) -> String {
    let series: Vec<Series> = groups
        .iter()
        .filter(|(_, samples)| !samples.is_empty())
        .map(|(name, samples)| Series {
            name: name.clone(),
            points: kde(samples, 200),
        })
        .collect();
    if series.is_empty() {
        let mut out = svg_header(title);
        out.push_str("</svg>\n");
        return out;
    }
    let frame = Frame::from_series(&series);
    let mut out = svg_header(title);
    axes(&mut out, &frame, x_label, "density", false);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = format!(
            "M {:.2} {:.2}",
            frame.x(s.points[0].0),
            frame.y(0.0f64.max(frame.y_min))
        );
        for &(x, y) in &s.points {
            let _ = write!(path, " L {:.2} {:.2}", frame.x(x), frame.y(y));
        }
        let _ = write!(
            path,
            " L {:.2} {:.2} Z",
            frame.x(s.points[s.points.len() - 1].0),
            frame.y(0.0f64.max(frame.y_min))
        );
        let _ = writeln!(
            out,
            "<path d=\"{path}\" fill=\"{color}\" fill-opacity=\"0.4\" stroke=\"{color}\"/>"
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    let magnitude = v.abs();
    if magnitude == 0.0 {
        "0".into()
    } else if magnitude >= 1000.0 {
        format!("{v:.0}")
    } else if magnitude >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3e}")
    }
}
