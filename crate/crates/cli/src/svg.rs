//! Minimal static SVG line plots: a row of panels, each with a few series.

use std::fmt::Write as _;

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [Option<f64>],
}

pub struct PlotPanel<'a> {
    pub title: &'a str,
    pub series: Vec<Series<'a>>,
}

const W: f64 = 260.0;
const H: f64 = 200.0;
const PAD: f64 = 36.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn bounds(p: &PlotPanel<'_>) -> (f64, f64) {
    let vals = p.series.iter().flat_map(|s| s.values.iter().flatten().copied());
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

pub fn render(title: &str, panels: &[PlotPanel<'_>]) -> String {
    let width = W * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="11">"#,
        H + 40.0
    );
    let _ = writeln!(out, r#"<text x="8" y="16" font-size="13">{title}</text>"#);
    for (i, p) in panels.iter().enumerate() {
        let x0 = W * i as f64;
        let (lo, hi) = bounds(p);
        let n = p.series.iter().map(|s| s.values.len()).max().unwrap_or(1).max(2);
        let px = |k: usize| x0 + PAD + (W - 2.0 * PAD) * k as f64 / (n - 1) as f64;
        let py = |v: f64| 30.0 + (H - PAD) * (1.0 - (v - lo) / (hi - lo));
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="30" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            x0 + PAD,
            W - 2.0 * PAD,
            H - PAD
        );
        let _ = writeln!(out, r#"<text x="{}" y="27">{}</text>"#, x0 + PAD, p.title);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, x0 + PAD - 2.0, 38.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{lo:.3}</text>"#, x0 + PAD - 2.0, H - 6.0);
        for (j, s) in p.series.iter().enumerate() {
            let pts: Vec<String> = s
                .values
                .iter()
                .enumerate()
                .filter_map(|(k, v)| v.map(|v| format!("{:.2},{:.2}", px(k), py(v))))
                .collect();
            let colour = COLOURS[j % COLOURS.len()];
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
                x0 + PAD + 4.0,
                H + 8.0 + 12.0 * j as f64,
                s.label
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_every_series() {
        let a = [Some(0.1), Some(0.2), None];
        let b = [Some(0.3), Some(0.3), Some(0.4)];
        let svg = render(
            "t",
            &[PlotPanel {
                title: "risk",
                series: vec![Series { label: "a", values: &a }, Series { label: "b", values: &b }],
            }],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
