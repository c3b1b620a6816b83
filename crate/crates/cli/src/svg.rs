//! Deterministic SVG rendering of a bifurcation diagram.
//!
//! Abscissa `λ`, ordinate `seed_sign · ‖u‖_∞`. Stable stretches are solid,
//! unstable ones dashed; `λₙ` are marked on the axis. All numbers are
//! printed with fixed precision so the output is byte-stable.

use std::fmt::Write;

use onsager_degree::BifurcationDiagram;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Frame {
    lambda_max: f64,
    amp_max: f64,
}

impl Frame {
    fn x(&self, lambda: f64) -> f64 {
        PAD + (WIDTH - 2.0 * PAD) * lambda / self.lambda_max
    }

    fn y(&self, amp: f64) -> f64 {
        HEIGHT / 2.0 - (HEIGHT / 2.0 - PAD) * amp / self.amp_max
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, dashed: bool) {
    if pts.len() < 2 {
        return;
    }
    let _ = write!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5""#);
    if dashed {
        out.push_str(r#" stroke-dasharray="6,4""#);
    }
    out.push_str(r#" points=""#);
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Splits `(x, y, stable)` into maximal runs of equal stability; adjacent
/// runs share their junction point so the curve stays connected.
fn runs(pts: &[(f64, f64, bool)]) -> Vec<(bool, Vec<(f64, f64)>)> {
    let mut out: Vec<(bool, Vec<(f64, f64)>)> = Vec::new();
    for &(x, y, s) in pts {
        match out.last_mut() {
            Some((cur, v)) if *cur == s => v.push((x, y)),
            Some((_, v)) => {
                let last = *v.last().expect("runs are non-empty");
                out.push((s, vec![last, (x, y)]));
            }
            None => out.push((s, vec![(x, y)])),
        }
    }
    out
}

pub fn diagram_svg(d: &BifurcationDiagram) -> String {
    let amp_max = d
        .branches
        .iter()
        .flat_map(|b| b.samples.iter().map(|s| s.amplitude))
        .fold(0.0f64, f64::max)
        .max(1e-3)
        * 1.05;
    let f = Frame {
        lambda_max: d.lambda_max,
        amp_max,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    let (x0, x1) = (f.x(0.0), f.x(d.lambda_max));
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}" stroke="#888" stroke-width="1"/>"##,
        PAD,
        HEIGHT - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">lambda</text>"#,
        x1,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">±sup|u|  (max {:.4})</text>"#,
        PAD + 4.0,
        PAD - 10.0,
        amp_max
    );

    // trivial branch
    let triv: Vec<(f64, f64, bool)> = d.trivial_branch.iter().map(|s| (f.x(s.lambda), f.y(0.0), s.stable)).collect();
    for (stable, pts) in runs(&triv) {
        polyline(&mut out, &pts, "#000000", !stable);
    }

    // bifurcation markers
    for (i, l) in d.lambda_points.iter().enumerate() {
        let x = f.x(*l);
        let y = f.y(0.0);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="black"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">lambda_{} = {:.4}</text>"#,
            y + 16.0,
            i + 1,
            l
        );
    }

    for b in &d.branches {
        let color = PALETTE[(b.parent_mode - 1) % PALETTE.len()];
        let sign = b.seed_sign as f64;
        let pts: Vec<(f64, f64, bool)> = b
            .samples
            .iter()
            .map(|s| (f.x(s.lambda), f.y(sign * s.amplitude), s.stable))
            .collect();
        let _ = writeln!(out, r#"<g id="{}">"#, b.id());
        for (stable, run) in runs(&pts) {
            polyline(&mut out, &run, color, !stable);
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
