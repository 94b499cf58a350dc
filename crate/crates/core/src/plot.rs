//! Minimal SVG renderers for the exported figures.

use std::fmt::Write as _;

use ndarray::ArrayView2;

use crate::dps::SamplingPattern;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Grayscale heatmap, one cell per entry, darkest at the matrix maximum.
pub fn heatmap_svg(values: ArrayView2<f64>, cell: f64) -> String {
    let (rows, cols) = values.dim();
    let max = values
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for ((r, c), v) in values.indexed_iter() {
        let level = (255.0 * (1.0 - (v / max).clamp(0.0, 1.0))).round() as u8;
        if level == 255 {
            continue;
        }
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({level},{level},{level})"/>"#,
            c as f64 * cell,
            r as f64 * cell
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One horizontal strip per pattern with a tick at every sampled position.
pub fn pattern_strips_svg(strips: &[(String, SamplingPattern)]) -> String {
    let label_w = 120.0;
    let width = 640.0;
    let strip_h = 24.0;
    let gap = 10.0;
    let total_h = strips.len() as f64 * (strip_h + gap) + gap;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{total_h}">"#,
        label_w + width + 10.0
    );
    for (i, (label, pattern)) in strips.iter().enumerate() {
        let y = gap + i as f64 * (strip_h + gap);
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            y + strip_h * 0.7,
            escape(label)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{label_w}" y="{y}" width="{width}" height="{strip_h}" fill="none" stroke="#999"/>"##
        );
        let dx = width / pattern.n() as f64;
        for &idx in pattern.indices() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{y}" width="{:.3}" height="{strip_h}" fill="black"/>"#,
                label_w + idx as f64 * dx,
                dx.max(1.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Polyline chart with a logarithmic y axis.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let points = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| top + (y1 - y.log10()) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom
    );
    for e in (y0 as i32)..=(y1 as i32) {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">1e{e}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let mut xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.1.iter().map(|p| p.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#,
            px(x),
            h - bottom + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - right + 10.0,
            w - right + 30.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            w - right + 35.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn renders_well_formed_documents() {
        let heat = heatmap_svg(array![[0.0, 1.0], [0.5, 0.0]].view(), 4.0);
        assert!(heat.starts_with("<svg") && heat.trim_end().ends_with("</svg>"));
        assert_eq!(heat.matches("<rect").count(), 3);

        let p = SamplingPattern::new(vec![0, 4], 8).unwrap();
        let strips = pattern_strips_svg(&[("uniform <4>".into(), p)]);
        assert!(strips.contains("uniform &lt;4&gt;"));

        let plot = line_plot_svg(
            "t",
            "x",
            "y",
            &[("a".into(), vec![(2.0, 0.1), (4.0, 0.01)])],
        );
        assert!(plot.contains("<polyline"));
    }
}
