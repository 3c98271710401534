//! Contour plots by marching triangles over the P1 field.

use std::fmt::Write;

use fpl_core::domain::ConvexDomain;
use fpl_core::solver::DiscreteField;
use fpl_core::Vec2;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;

/// Segments where the linear interpolant on each triangle crosses `level`.
pub fn level_segments(field: &DiscreteField, level: f64) -> Vec<(Vec2, Vec2)> {
    let mesh = field.mesh();
    let nodes = mesh.nodes();
    let vals = field.values();
    let mut out = Vec::new();
    for tri in mesh.triangles() {
        let mut pts = [Vec2::ZERO; 2];
        let mut k = 0;
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let (va, vb) = (vals[a] - level, vals[b] - level);
            // Half-open test so a vertex exactly on the level is counted once.
            if (va < 0.0) != (vb < 0.0) && k < 2 {
                let s = va / (va - vb);
                pts[k] = nodes[a].lerp(nodes[b], s);
                k += 1;
            }
        }
        if k == 2 {
            out.push((pts[0], pts[1]));
        }
    }
    out
}

/// Evenly spaced interior levels between the field's min and max.
pub fn levels(field: &DiscreteField, n: usize) -> Vec<f64> {
    let (lo, hi) = (field.min(), field.max());
    if !(hi > lo) || n == 0 {
        return Vec::new();
    }
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

struct Frame {
    lo: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(domain: &ConvexDomain) -> Self {
        let (lo, hi) = domain.bounding_box();
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        Frame { lo, scale, height: (hi.y - lo.y) * scale + 2.0 * MARGIN }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let x = MARGIN + (p.x - self.lo.x) * self.scale;
        let y = self.height - MARGIN - (p.y - self.lo.y) * self.scale;
        (x, y)
    }
}

fn color(t: f64) -> String {
    // Blue to red.
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Standalone SVG with the domain outline and `n` contour levels.
pub fn contour_svg(field: &DiscreteField, domain: &ConvexDomain, n: usize, title: &str) -> String {
    let frame = Frame::new(domain);
    let (lo, hi) = domain.bounding_box();
    let width = (hi.x - lo.x) * frame.scale + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{:.1}" viewBox="0 0 {width:.1} {:.1}">"#,
        frame.height, frame.height
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    match domain {
        ConvexDomain::Disc { center, radius } => {
            let (cx, cy) = frame.map(*center);
            let _ = writeln!(
                s,
                r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                radius * frame.scale
            );
        }
        ConvexDomain::Polygon { vertices } => {
            let pts: Vec<String> = vertices
                .iter()
                .map(|v| {
                    let (x, y) = frame.map(*v);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
    }
    let lv = levels(field, n);
    let count = lv.len().max(2) - 1;
    for (i, &level) in lv.iter().enumerate() {
        let mut d = String::new();
        for (a, b) in level_segments(field, level) {
            let (ax, ay) = frame.map(a);
            let (bx, by) = frame.map(b);
            let _ = write!(d, "M{ax:.3} {ay:.3}L{bx:.3} {by:.3}");
        }
        if d.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<path data-level="{level:.6e}" d="{d}" fill="none" stroke="{}" stroke-width="1"/>"#,
            color(i as f64 / count as f64)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn linear_field_contours_are_straight() {
        let d = ConvexDomain::unit_square();
        let mesh = Arc::new(d.triangulate(0.1).unwrap());
        let f = DiscreteField::from_fn(mesh, |x| x.x, false).unwrap();
        let segs = level_segments(&f, 0.37);
        assert!(!segs.is_empty());
        for (a, b) in &segs {
            assert!((a.x - 0.37).abs() < 1e-12 && (b.x - 0.37).abs() < 1e-12, "{a:?} {b:?}");
        }
        let total: f64 = segs.iter().map(|(a, b)| (*a - *b).norm()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn svg_is_well_formed() {
        let d = ConvexDomain::unit_disc();
        let mesh = Arc::new(d.triangulate(0.2).unwrap());
        let f = DiscreteField::from_fn(mesh, |x| 1.0 - x.norm_sq(), false).unwrap();
        let s = contour_svg(&f, &d, 5, "a<b");
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<path").count(), 5);
        assert!(s.contains("a&lt;b"));
    }
}
