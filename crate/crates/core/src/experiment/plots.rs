//! Static SVG plot emitters. Pure string construction with fixed numeric
//! precision — regenerating a plot from the same inputs is byte-identical
//! (no timestamps, ids, or absolute paths in the output).

use crate::{Error, Result};

const W: f64 = 480.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"12\">\n"
    )
}

fn polyline(points: &[(f64, f64)], style: &str) -> String {
    let coords: Vec<String> =
        points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!("<polyline points=\"{}\" {style}/>\n", coords.join(" "))
}

/// Reliability diagram: empirical coverage against nominal level with the
/// ideal diagonal for reference.
pub fn reliability_svg(curve: &[(f64, f64)]) -> Result<String> {
    if curve.is_empty() {
        return Err(Error::Data("reliability plot needs at least one point".into()));
    }
    let span = W - 2.0 * MARGIN;
    let x = |v: f64| MARGIN + v * span;
    let y = |v: f64| H - MARGIN - v * span;
    let mut out = svg_header(W, H);
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{m:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{m:.2}\" y1=\"{b:.2}\" x2=\"{m:.2}\" y2=\"{t:.2}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    ));
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.2}</text>\n",
            x(v),
            H - MARGIN + 20.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>\n",
            MARGIN - 8.0,
            y(v) + 4.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">nominal level</text>\n",
        W / 2.0,
        H - 12.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">\
         empirical coverage</text>\n",
        H / 2.0,
        H / 2.0
    ));
    // Ideal diagonal.
    out.push_str(&polyline(
        &[(x(0.0), y(0.0)), (x(1.0), y(1.0))],
        "fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 4\"",
    ));
    // Observed curve with markers.
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(a, c)| (x(a), y(c))).collect();
    out.push_str(&polyline(&pts, "fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\""));
    for (px, py) in &pts {
        out.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"crimson\"/>\n"
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One hour of an interval trace.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub actual: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// Interval trace: the central 90% band, its median, and the realized
/// actuals over a contiguous stretch of forecast hours (MW units).
pub fn interval_trace_svg(points: &[TracePoint]) -> Result<String> {
    if points.len() < 2 {
        return Err(Error::Data("interval trace needs at least two hours".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.lower > p.upper {
            return Err(Error::Data(format!("crossed interval at hour {i}")));
        }
    }
    let width = 720.0;
    let span_x = width - 2.0 * MARGIN;
    let span_y = H - 2.0 * MARGIN;
    let lo = points
        .iter()
        .flat_map(|p| [p.actual, p.lower])
        .fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .flat_map(|p| [p.actual, p.upper])
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let n = points.len();
    let x = |i: usize| MARGIN + span_x * i as f64 / (n - 1) as f64;
    let y = |v: f64| H - MARGIN - span_y * (v - lo) / (hi - lo);

    let mut out = svg_header(width, H);
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Band polygon: upper edge forward, lower edge back.
    let mut band: Vec<(f64, f64)> =
        points.iter().enumerate().map(|(i, p)| (x(i), y(p.upper))).collect();
    band.extend(points.iter().enumerate().rev().map(|(i, p)| (x(i), y(p.lower))));
    let coords: Vec<String> = band.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
    out.push_str(&format!(
        "<polygon points=\"{}\" fill=\"lightsteelblue\" fill-opacity=\"0.6\" stroke=\"none\"/>\n",
        coords.join(" ")
    ));
    let medians: Vec<(f64, f64)> =
        points.iter().enumerate().map(|(i, p)| (x(i), y(p.median))).collect();
    out.push_str(&polyline(&medians, "fill=\"none\" stroke=\"navy\" stroke-width=\"1.5\""));
    let actuals: Vec<(f64, f64)> =
        points.iter().enumerate().map(|(i, p)| (x(i), y(p.actual))).collect();
    out.push_str(&polyline(&actuals, "fill=\"none\" stroke=\"black\" stroke-width=\"1\""));
    // Axis frame and labels.
    out.push_str(&format!(
        "<line x1=\"{m:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{m:.2}\" y1=\"{b:.2}\" x2=\"{m:.2}\" y2=\"{t:.2}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = width - MARGIN,
        t = MARGIN
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">forecast hour</text>\n",
        width / 2.0,
        H - 12.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">\
         load (MW)</text>\n",
        H / 2.0,
        H / 2.0
    ));
    out.push_str(&format!(
        "<text x=\"{m:.2}\" y=\"{:.2}\" text-anchor=\"start\">{hi:.0}</text>\n\
         <text x=\"{m:.2}\" y=\"{:.2}\" text-anchor=\"start\">{lo:.0}</text>\n",
        MARGIN - 36.0,
        H - MARGIN - 4.0,
        m = MARGIN - 48.0,
    ));
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reliability_svg_is_deterministic_and_wellformed() {
        let curve = vec![(0.05, 0.041), (0.5, 0.52), (0.95, 0.958)];
        let a = reliability_svg(&curve).unwrap();
        let b = reliability_svg(&curve).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg "));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<circle").count(), 3);
        assert!(reliability_svg(&[]).is_err());
    }

    #[test]
    fn interval_trace_handles_band_and_errors() {
        let pts: Vec<TracePoint> = (0..24)
            .map(|i| {
                let m = 500.0 + 30.0 * (i as f64 * 0.3).sin();
                TracePoint { actual: m + 5.0, lower: m - 40.0, median: m, upper: m + 40.0 }
            })
            .collect();
        let svg = interval_trace_svg(&pts).unwrap();
        assert!(svg.contains("<polygon"));
        assert_eq!(svg, interval_trace_svg(&pts).unwrap());
        let crossed = vec![
            TracePoint { actual: 0.0, lower: 1.0, median: 0.0, upper: -1.0 },
            TracePoint { actual: 0.0, lower: -1.0, median: 0.0, upper: 1.0 },
        ];
        assert!(interval_trace_svg(&crossed).is_err());
        assert!(interval_trace_svg(&pts[..1]).is_err());
    }
}
