//! Phase-portrait SVG output. Plain SVG 1.1 strings with fixed-precision
//! coordinates, so the same input always gives the same bytes.

use std::fmt::Write;

use canard_core::controllers::NeighborhoodParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayKind {
    CriticalManifold,
    ReferenceCycle,
    /// Drawn shaded with a dashed outline.
    Neighborhood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub kind: OverlayKind,
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Overlay {
    pub fn new(kind: OverlayKind, label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { kind, label: label.to_string(), points }
    }
}

pub fn critical_fold(x0: f64, x1: f64) -> Vec<(f64, f64)> {
    sample(x0, x1, 200, |x| x * x)
}

pub fn critical_vdp(x0: f64, x1: f64) -> Vec<(f64, f64)> {
    sample(x0, x1, 300, |x| x * x - x * x * x / 3.0)
}

fn sample(x0: f64, x1: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..=n).map(|k| x0 + (x1 - x0) * k as f64 / n as f64).map(|x| (x, f(x))).collect()
}

/// Outline of the support of N₁ (`which == 1`) or N₂ (`which == 2`): the band
/// of half-width β around the branch, cut to the neighbourhood's x and y range.
pub fn neighborhood_polygon(nbhd: &NeighborhoodParams, which: u8) -> Vec<(f64, f64)> {
    let (x0, x1, beta) = if which == 1 { (0.0, 2.0, nbhd.beta1) } else { (-nbhd.x_min, nbhd.x_max, nbhd.beta2) };
    let branch = |x: f64| if which == 1 { x * x - x * x * x / 3.0 } else { x * x };
    let (y_lo, y_hi) = if which == 1 { (nbhd.y_min, nbhd.y_h) } else { (f64::NEG_INFINITY, f64::INFINITY) };
    let n = 200;
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for k in 0..=n {
        let x = x0 + (x1 - x0) * k as f64 / n as f64;
        let b = branch(x);
        let lo = (b - beta).max(y_lo);
        let hi = (b + beta).min(y_hi);
        if lo < hi {
            upper.push((x, hi));
            lower.push((x, lo));
        }
    }
    upper.extend(lower.into_iter().rev());
    upper
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn around(points: &[(f64, f64)]) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
        }
        let pad = |a: f64, b: f64| {
            let w = (b - a).max(1e-9 * a.abs().max(1.0));
            (a - 0.08 * w, b + 0.08 * w)
        };
        (f.x0, f.x1) = pad(f.x0, f.x1);
        (f.y0, f.y1) = pad(f.y0, f.y1);
        f
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let u = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN);
        let v = HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN);
        (u, v)
    }
}

fn path(frame: &Frame, pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, &(x, y)) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
        let (u, v) = frame.px(x, y);
        // clamp far-off overlay points so the path stays well-formed
        let (u, v) = (u.clamp(-1e4, 1e4), v.clamp(-1e4, 1e4));
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{u:.2},{v:.2}");
    }
    s
}

fn ticks(a: f64, b: f64) -> Vec<f64> {
    let raw = (b - a) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (a / step).ceil() * step;
    let mut out = Vec::new();
    while t <= b + 1e-12 * step && out.len() < 20 {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Phase portrait of `trajectory` with `overlays`. The frame is fitted to the
/// trajectory; overlays are clipped to it.
pub fn emit_svg(trajectory: &[(f64, f64)], overlays: &[Overlay], axes: (&str, &str), title: &str) -> String {
    let frame = Frame::around(trajectory);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></clipPath></defs>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // axes box and ticks
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    for t in ticks(frame.x0, frame.x1) {
        let (u, _) = frame.px(t, frame.y0);
        let _ = writeln!(s, r#"<line x1="{u:.2}" y1="{:.2}" x2="{u:.2}" y2="{:.2}" stroke="black"/>"#, HEIGHT - MARGIN, HEIGHT - MARGIN + 4.0);
        let _ = writeln!(s, r#"<text x="{u:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, HEIGHT - MARGIN + 16.0, fmt_tick(t));
    }
    for t in ticks(frame.y0, frame.y1) {
        let (_, v) = frame.px(frame.x0, t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{v:.2}" x2="{MARGIN}" y2="{v:.2}" stroke="black"/>"#, MARGIN - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 6.0, v + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 10.0, escape(axes.0));
    let _ = writeln!(s, r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0, escape(axes.1));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, MARGIN - 16.0, escape(title));
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
    let fills = ["#2ca02c", "#d62728"];
    let mut shade = 0;
    for o in overlays.iter().filter(|o| o.kind == OverlayKind::Neighborhood && o.points.len() > 2) {
        let c = fills[shade % fills.len()];
        shade += 1;
        let _ = writeln!(
            s,
            r#"<polygon class="neighborhood" points="{}" fill="{c}" fill-opacity="0.18" stroke="{c}" stroke-width="1" stroke-dasharray="4 3"><title>{}</title></polygon>"#,
            path(&frame, &o.points),
            escape(&o.label)
        );
    }
    for o in overlays.iter().filter(|o| o.kind != OverlayKind::Neighborhood && o.points.len() > 1) {
        let (class, color, dash) = match o.kind {
            OverlayKind::CriticalManifold => ("critical-manifold", "#888888", "6 4"),
            _ => ("reference", "#555555", "2 3"),
        };
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"><title>{}</title></polyline>"#,
            path(&frame, &o.points),
            escape(&o.label)
        );
    }
    if trajectory.len() > 1 {
        let _ = writeln!(s, r##"<polyline class="trajectory" points="{}" fill="none" stroke="#1f77b4" stroke-width="1.2"/>"##, path(&frame, trajectory));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> Vec<(f64, f64)> {
        (0..=64).map(|k| k as f64 * std::f64::consts::TAU / 64.0).map(|a| (a.cos(), a.sin())).collect()
    }

    #[test]
    fn deterministic_bytes() {
        let o = vec![Overlay::new(OverlayKind::CriticalManifold, "c", critical_fold(-1.0, 1.0))];
        assert_eq!(emit_svg(&circle(), &o, ("x", "y"), "t"), emit_svg(&circle(), &o, ("x", "y"), "t"));
    }

    #[test]
    fn empty_overlays_give_trajectory_only() {
        let s = emit_svg(&circle(), &[], ("x", "y"), "t");
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.contains(r#"class="trajectory""#));
        assert!(!s.contains("stroke-dasharray"));
        assert!(!s.contains("<polygon"));
    }

    #[test]
    fn neighborhoods_are_shaded_and_dashed() {
        let nb = NeighborhoodParams::defaults(0.01, 1.25);
        let o = vec![
            Overlay::new(OverlayKind::CriticalManifold, "c", critical_vdp(-1.0, 3.0)),
            Overlay::new(OverlayKind::Neighborhood, "N1", neighborhood_polygon(&nb, 1)),
            Overlay::new(OverlayKind::Neighborhood, "N2", neighborhood_polygon(&nb, 2)),
        ];
        let s = emit_svg(&circle(), &o, ("x", "y"), "t");
        assert_eq!(s.matches("<polygon").count(), 2);
        assert_eq!(s.matches("fill-opacity").count(), 2);
        assert_eq!(s.matches("stroke-dasharray").count(), 3);
    }

    #[test]
    fn ticks_cover_range() {
        let t = ticks(-0.13, 1.7);
        assert!(t.len() >= 3);
        assert!(t.iter().all(|v| (-0.13..=1.7).contains(v)));
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(-0.0), "0");
    }

    #[test]
    fn polygon_stays_inside_band() {
        let nb = NeighborhoodParams::defaults(0.01, 1.0);
        for (x, y) in neighborhood_polygon(&nb, 1) {
            assert!((0.0..=2.0).contains(&x));
            assert!(y >= nb.y_min - 1e-12 && y <= nb.y_h + 1e-12);
        }
    }
}
