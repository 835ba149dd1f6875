use std::fmt::Write as _;

use crate::boxtree::HyperBox;
use crate::pstrel::Parameter;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn color(label: usize) -> &'static str {
    PALETTE[(label.max(1) - 1) % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of the first two parameters, points colored by cluster, with the
/// tree's boxes drawn underneath. One-parameter templates use a flat axis.
pub fn scatter(params: &[Parameter], points: &[(String, Vec<f64>, usize)], boxes: &[HyperBox]) -> String {
    let x_param = &params[0];
    let y_param = params.get(1);
    let sx = |v: f64| MARGIN + (v - x_param.lo) / (x_param.hi - x_param.lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| match y_param {
        Some(p) => HEIGHT - MARGIN - (v - p.lo) / (p.hi - p.lo) * (HEIGHT - 2.0 * MARGIN),
        None => HEIGHT / 2.0,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for b in boxes {
        let (x0, x1) = (sx(b.sides[0].lo), sx(b.sides[0].hi));
        let (y0, y1) = match y_param {
            Some(_) => (sy(b.sides[1].hi), sy(b.sides[1].lo)),
            None => (MARGIN, HEIGHT - MARGIN),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.12" stroke="{c}" stroke-dasharray="4 2"/>"#,
            x1 - x0,
            y1 - y0,
            c = color(b.label)
        );
    }
    for (id, v, label) in points {
        let y = v.get(1).copied().unwrap_or(0.0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"><title>{} (cluster {label})</title></circle>"#,
            sx(v[0]),
            sy(y),
            color(*label),
            escape(id)
        );
    }
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" font-size="12" text-anchor="{anchor}">{}</text>"#, escape(body));
    };
    text(&mut s, left, bottom + 16.0, "middle", &x_param.lo.to_string());
    text(&mut s, right, bottom + 16.0, "middle", &x_param.hi.to_string());
    text(&mut s, WIDTH / 2.0, bottom + 36.0, "middle", &x_param.name);
    if let Some(p) = y_param {
        text(&mut s, left - 6.0, bottom, "end", &p.lo.to_string());
        text(&mut s, left - 6.0, top + 4.0, "end", &p.hi.to_string());
        text(&mut s, 16.0, HEIGHT / 2.0, "middle", &p.name);
    }
    s.push_str("</svg>\n");
    s
}
