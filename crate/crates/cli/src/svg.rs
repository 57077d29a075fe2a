//! Minimal SVG scatter plot colored by cluster.

use std::fmt::Write;

use miro::{Partition, NOISE};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#393b79",
];
const NOISE_COLOR: &str = "#b0b0b0";
const WIDTH: f64 = 800.0;
const MARGIN: f64 = 10.0;

pub fn scatter(points: &[[f64; 2]], labels: &Partition) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if points.is_empty() {
        lo = [0.0; 2];
        hi = [1.0; 2];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let height = (hi[1] - lo[1]) * scale + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.1}" viewBox="0 0 {WIDTH} {height:.1}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // noise first so clusters are drawn on top
    for pass in [true, false] {
        for (p, &l) in points.iter().zip(labels.labels()) {
            if (l == NOISE) != pass {
                continue;
            }
            let color = if l == NOISE { NOISE_COLOR } else { PALETTE[l as usize % PALETTE.len()] };
            let x = MARGIN + (p[0] - lo[0]) * scale;
            // SVG y grows downward
            let y = height - MARGIN - (p[1] - lo[1]) * scale;
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{color}"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}
