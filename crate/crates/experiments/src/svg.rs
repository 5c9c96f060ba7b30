//! Minimal static SVG figures: cell heatmaps and line profiles.

use std::fmt::Write;

use habopt_core::ScalarField;

const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

const SERIES: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let f = x - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of a 2D field, one `rect` per cell; axis 0 runs left to right, axis 1 bottom
/// to top. Values are scaled linearly over `[lo, hi]`.
pub fn heatmap(field: &ScalarField<f64>, lo: f64, hi: f64, title: &str) -> String {
    let g = field.grid();
    assert_eq!(g.dim(), 2, "heatmap needs a 2D field");
    let (nx, ny) = (g.cells_per_axis()[0], g.cells_per_axis()[1]);
    let px = (512 / nx.max(ny)).max(1);
    let (w, h) = (nx * px, ny * px);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + 24,
        h + 24
    );
    let _ = writeln!(s, r#"<text x="4" y="16" font-family="sans-serif" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<g transform="translate(0,24)" shape-rendering="crispEdges">"#);
    for (k, &v) in field.values().iter().enumerate() {
        let (i, j) = (g.axis_index(k, 0), g.axis_index(k, 1));
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{px}" height="{px}" fill="{}"/>"#,
            i * px,
            (ny - 1 - j) * px,
            color((v - lo) / span)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Line plot of several profiles sampled at the same abscissae.
pub fn profiles(x: &[f64], series: &[(String, Vec<f64>)], title: &str) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let all = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let (x0, x1) = (
        x.first().copied().unwrap_or(0.0),
        x.last().copied().unwrap_or(1.0),
    );
    let xs = if x1 > x0 { x1 - x0 } else { 1.0 };
    let sx = |v: f64| pad + (v - x0) / xs * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - lo) / (hi - lo) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{}</text>"#,
        pad + 4.0,
        short(hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{}</text>"#,
        h - pad,
        short(lo)
    );
    for (k, (label, v)) in series.iter().enumerate() {
        let colour = SERIES[k % SERIES.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(v)
            .filter(|(_, y)| y.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", sx(a), sy(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{colour}">{}</text>"#,
            w - pad - 150.0,
            pad + 14.0 * (k + 1) as f64,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    format!("{v:.4e}")
}

/// Cell centers of a 1D grid with `n` cells.
pub fn centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use habopt_core::Grid;

    #[test]
    fn one_rect_per_cell() {
        let g = Grid::<f64>::new(2, &[3, 5]).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0] + x[1]).unwrap();
        let s = heatmap(&f, 0.0, 2.0, "a < b");
        assert_eq!(s.matches("<rect ").count(), 15);
        assert!(s.contains("a &lt; b"));
    }

    #[test]
    fn palette_ends() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }
}
