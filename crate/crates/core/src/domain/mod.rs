//! Convex planar domains, their inner parallel sets `Ω_δ` and triangulations.

mod mesh;

pub use mesh::{Element, Mesh};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// A bounded convex planar region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub enum ConvexDomain {
    /// Counter-clockwise vertex list of a convex polygon.
    Polygon { vertices: Vec<Vec2> },
    Disc { center: Vec2, radius: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawDomain {
    Polygon { vertices: Vec<Vec2> },
    Disc { center: Vec2, radius: f64 },
}

impl TryFrom<RawDomain> for ConvexDomain {
    type Error = Error;

    fn try_from(raw: RawDomain) -> Result<Self> {
        match raw {
            RawDomain::Polygon { vertices } => ConvexDomain::polygon(vertices),
            RawDomain::Disc { center, radius } => ConvexDomain::disc(center, radius),
        }
    }
}

impl From<ConvexDomain> for RawDomain {
    fn from(d: ConvexDomain) -> Self {
        match d {
            ConvexDomain::Polygon { vertices } => RawDomain::Polygon { vertices },
            ConvexDomain::Disc { center, radius } => RawDomain::Disc { center, radius },
        }
    }
}

/// A point of `∂Ω` with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySample {
    pub point: Vec2,
    pub normal: Vec2,
}

impl ConvexDomain {
    pub fn disc(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::Configuration(format!("disc radius {radius} must be positive")));
        }
        Ok(ConvexDomain::Disc { center, radius })
    }

    pub fn unit_disc() -> Self {
        ConvexDomain::Disc { center: Vec2::ZERO, radius: 1.0 }
    }

    /// `[0, 1]²`.
    pub fn unit_square() -> Self {
        ConvexDomain::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0)).expect("valid square")
    }

    pub fn rectangle(lo: Vec2, hi: Vec2) -> Result<Self> {
        ConvexDomain::polygon(vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)])
    }

    /// Validates convexity, counter-clockwise orientation and positive area.
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Configuration("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::Configuration("polygon vertices must be finite".into()));
        }
        let scale = vertices.iter().map(|v| (*v - vertices[0]).norm()).fold(0.0, f64::max);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = (b - a).cross(c - b);
            if !(turn > 1e-12 * scale * scale) {
                return Err(Error::Configuration(format!(
                    "polygon is not strictly convex and counter-clockwise at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        // Winding number one: the turning angles must add to 2π.
        let total: f64 = (0..n)
            .map(|i| {
                let e0 = vertices[(i + 1) % n] - vertices[i];
                let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (total - TAU).abs() > 1e-6 {
            return Err(Error::Configuration("polygon winds more than once".into()));
        }
        Ok(ConvexDomain::Polygon { vertices })
    }

    pub fn is_disc(&self) -> bool {
        matches!(self, ConvexDomain::Disc { .. })
    }

    pub fn vertices(&self) -> &[Vec2] {
        match self {
            ConvexDomain::Polygon { vertices } => vertices,
            ConvexDomain::Disc { .. } => &[],
        }
    }

    /// Lower-left and upper-right corners.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            ConvexDomain::Disc { center, radius } => {
                (*center - Vec2::new(*radius, *radius), *center + Vec2::new(*radius, *radius))
            }
            ConvexDomain::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            ConvexDomain::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            ConvexDomain::Polygon { vertices } => polygon_area(vertices),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            ConvexDomain::Disc { radius, .. } => TAU * radius,
            ConvexDomain::Polygon { vertices } => edges(vertices).map(|(a, b)| (b - a).norm()).sum(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ConvexDomain::Disc { radius, .. } => 2.0 * radius,
            ConvexDomain::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        d = d.max((*a - *b).norm());
                    }
                }
                d
            }
        }
    }

    /// Center of mass.
    pub fn centroid(&self) -> Vec2 {
        match self {
            ConvexDomain::Disc { center, .. } => *center,
            ConvexDomain::Polygon { vertices } => {
                let mut c = Vec2::ZERO;
                let mut a2 = 0.0;
                for (a, b) in edges(vertices) {
                    let w = a.cross(b);
                    a2 += w;
                    c += (a + b) * w;
                }
                c / (3.0 * a2)
            }
        }
    }

    /// Positive inside, negative outside, zero on `∂Ω`.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        match self {
            ConvexDomain::Disc { center, radius } => radius - (x - *center).norm(),
            ConvexDomain::Polygon { vertices } => {
                let inside = edges(vertices).map(|(a, b)| edge_line_distance(a, b, x)).fold(f64::INFINITY, f64::min);
                if inside >= 0.0 {
                    inside
                } else {
                    -edges(vertices).map(|(a, b)| segment_distance(a, b, x)).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.signed_distance(x) >= 0.0
    }

    /// Radius of the largest inscribed disc.
    pub fn inradius(&self) -> f64 {
        match self {
            ConvexDomain::Disc { radius, .. } => *radius,
            ConvexDomain::Polygon { vertices } => {
                // Linear program max r s.t. edge_line_distance_i(x) ≥ r; the
                // optimum sits at a vertex where three constraints are active.
                let lines: Vec<(Vec2, f64)> = edges(vertices)
                    .map(|(a, b)| {
                        let n = (b - a).perp() / (b - a).norm();
                        (n, n.dot(a))
                    })
                    .collect();
                let m = lines.len();
                let mut best: f64 = 0.0;
                for i in 0..m {
                    for j in i + 1..m {
                        for k in j + 1..m {
                            // n·x − r = c for the three active lines.
                            let rows = [lines[i], lines[j], lines[k]];
                            let det3 = |c: [[f64; 3]; 3]| {
                                c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
                                    - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
                                    + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
                            };
                            let a = rows.map(|(n, _)| [n.x, n.y, -1.0]);
                            let d = det3(a);
                            if d.abs() < 1e-14 {
                                continue;
                            }
                            let mut ar = a;
                            for (row, (_, c)) in ar.iter_mut().zip(rows) {
                                row[2] = c;
                            }
                            let mut ax = a;
                            for (row, (_, c)) in ax.iter_mut().zip(rows) {
                                row[0] = c;
                            }
                            let mut ay = a;
                            for (row, (_, c)) in ay.iter_mut().zip(rows) {
                                row[1] = c;
                            }
                            let r = det3(ar) / d;
                            let x = Vec2::new(det3(ax) / d, det3(ay) / d);
                            let scale = 1e-12 * (1.0 + x.norm());
                            if r > best && lines.iter().all(|(n, c)| n.dot(x) - c >= r - scale) {
                                best = r;
                            }
                        }
                    }
                }
                best
            }
        }
    }

    /// Inner parallel body `Ω_δ = {x ∈ Ω : dist(x, ∂Ω) > δ}`.
    pub fn inner_domain(&self, delta: f64) -> Result<ConvexDomain> {
        if !(delta >= 0.0) {
            return Err(Error::Domain(format!("offset δ = {delta} must be nonnegative")));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        let rho = self.inradius();
        if delta >= rho {
            return Err(Error::EmptyDomain(format!("offset δ = {delta} reaches the inradius {rho}")));
        }
        match self {
            ConvexDomain::Disc { center, radius } => ConvexDomain::disc(*center, radius - delta),
            ConvexDomain::Polygon { vertices } => {
                let inner = offset_polygon(vertices, delta).ok_or_else(|| {
                    Error::EmptyDomain(format!("offset δ = {delta} leaves no interior"))
                })?;
                ConvexDomain::polygon(inner)
            }
        }
    }

    /// Image under `x ↦ t·x`.
    pub fn dilate(&self, t: f64) -> Result<ConvexDomain> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("dilation factor {t} must be positive")));
        }
        match self {
            ConvexDomain::Disc { center, radius } => ConvexDomain::disc(*center * t, radius * t),
            ConvexDomain::Polygon { vertices } => {
                ConvexDomain::polygon(vertices.iter().map(|v| *v * t).collect())
            }
        }
    }

    /// Up to `n` boundary points with outward normals, evenly spaced by arc
    /// length. On polygons, points closer than `vertex_margin` to a vertex are
    /// skipped.
    pub fn boundary_samples(&self, n: usize, vertex_margin: f64) -> Vec<BoundarySample> {
        match self {
            ConvexDomain::Disc { center, radius } => (0..n)
                .map(|i| {
                    let e = Vec2::polar(TAU * i as f64 / n as f64);
                    BoundarySample { point: *center + e * *radius, normal: e }
                })
                .collect(),
            ConvexDomain::Polygon { vertices } => {
                let per = self.perimeter();
                let mut out = Vec::with_capacity(n);
                let mut start = 0.0;
                for (a, b) in edges(vertices) {
                    let len = (b - a).norm();
                    let normal = Vec2::new(b.y - a.y, a.x - b.x) / len;
                    for i in 0..n {
                        let s = (i as f64 + 0.5) * per / n as f64 - start;
                        if s >= 0.0 && s < len && s >= vertex_margin && len - s >= vertex_margin {
                            out.push(BoundarySample { point: a.lerp(b, s / len), normal });
                        }
                    }
                    start += len;
                }
                out
            }
        }
    }

    /// Distance from `x` to the nearest polygon vertex; infinite for discs.
    pub fn vertex_distance(&self, x: Vec2) -> f64 {
        self.vertices().iter().map(|v| (*v - x).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Triangulation with maximum edge `h`; see [`Mesh`].
    pub fn triangulate(&self, h: f64) -> Result<Mesh> {
        mesh::triangulate(self, h)
    }
}

fn edges(vertices: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

fn polygon_area(vertices: &[Vec2]) -> f64 {
    0.5 * edges(vertices).map(|(a, b)| a.cross(b)).sum::<f64>()
}

/// Distance of `x` to the line through the CCW edge `ab`, positive on the
/// inner side.
fn edge_line_distance(a: Vec2, b: Vec2, x: Vec2) -> f64 {
    let e = b - a;
    e.cross(x - a) / e.norm()
}

fn segment_distance(a: Vec2, b: Vec2, x: Vec2) -> f64 {
    let e = b - a;
    let t = ((x - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
    (a + e * t - x).norm()
}

/// Intersection of the inward-shifted edge half-planes, or `None` if empty.
/// Edges that collapse simply stop contributing vertices.
fn offset_polygon(vertices: &[Vec2], delta: f64) -> Option<Vec<Vec2>> {
    let mut poly = vertices.to_vec();
    let scale = vertices.iter().map(|v| v.norm()).fold(1.0, f64::max);
    for (a, b) in edges(vertices) {
        let e = b - a;
        let len = e.norm();
        let c = delta;
        // Keep points with edge_line_distance ≥ δ.
        let side = |x: Vec2| e.cross(x - a) / len - c;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                next.push(p + (q - p) * (sp / (sp - sq)));
            }
        }
        next.dedup_by(|x, y| (*x - *y).norm() <= 1e-12 * scale);
        while next.len() > 1 && (next[0] - next[next.len() - 1]).norm() <= 1e-12 * scale {
            next.pop();
        }
        if next.len() < 3 {
            return None;
        }
        poly = next;
    }
    // Drop vertices where the boundary does not turn.
    let mut out: Vec<Vec2> = Vec::with_capacity(poly.len());
    let n = poly.len();
    for i in 0..n {
        let prev = poly[(i + n - 1) % n];
        let next = poly[(i + 1) % n];
        if (poly[i] - prev).cross(next - poly[i]) > 1e-12 * scale * scale {
            out.push(poly[i]);
        }
    }
    if out.len() < 3 || polygon_area(&out) <= 1e-14 * scale * scale {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn signed_distance_examples() {
        assert_eq!(ConvexDomain::unit_disc().signed_distance(Vec2::new(0.25, 0.0)), 0.75);
        let sq = ConvexDomain::unit_square();
        assert_relative_eq!(sq.signed_distance(Vec2::new(0.5, 0.1)), 0.1, epsilon = 1e-15);
        assert_relative_eq!(sq.signed_distance(Vec2::new(1.5, 0.5)), -0.5, epsilon = 1e-15);
        assert_relative_eq!(sq.signed_distance(Vec2::new(2.0, 2.0)), -2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn inner_domains() {
        let sq = ConvexDomain::unit_square();
        let inner = sq.inner_domain(0.1).unwrap();
        let v = inner.vertices();
        assert_eq!(v.len(), 4);
        for (got, want) in v.iter().zip([[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]]) {
            assert_relative_eq!(got.x, want[0], epsilon = 1e-14);
            assert_relative_eq!(got.y, want[1], epsilon = 1e-14);
        }
        assert_eq!(
            ConvexDomain::unit_disc().inner_domain(0.2).unwrap(),
            ConvexDomain::Disc { center: Vec2::ZERO, radius: 0.8 }
        );
        assert_eq!(sq.inner_domain(0.0).unwrap(), sq);
        assert!(matches!(sq.inner_domain(0.5), Err(Error::EmptyDomain(_))));
        assert_relative_eq!(sq.inradius(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn offsets_drop_collapsing_edges() {
        // A short edge between two long ones disappears under a moderate offset.
        let d = ConvexDomain::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.05, 0.1),
            Vec2::new(0.0, 3.0),
        ])
        .unwrap();
        let inner = d.inner_domain(0.5).unwrap();
        assert_eq!(inner.vertices().len(), 3);
        for v in inner.vertices() {
            assert_relative_eq!(d.signed_distance(*v), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        assert!(ConvexDomain::polygon(cw).is_err());
        let collinear = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert!(ConvexDomain::polygon(collinear).is_err());
        let json = r#"{"kind":"disc","center":[0,0],"radius":-1}"#;
        assert!(serde_json::from_str::<ConvexDomain>(json).is_err());
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"kind":"polygon","vertices":[[0,0],[1,0],[0,1]]}"#;
        let d: ConvexDomain = serde_json::from_str(json).unwrap();
        let back: ConvexDomain = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, back);
        assert_relative_eq!(d.area(), 0.5);
        assert_relative_eq!(d.centroid().x, 1.0 / 3.0, epsilon = 1e-15);
    }

    fn arb_point() -> impl Strategy<Value = Vec2> {
        (-1.5f64..2.5, -1.5f64..2.5).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn signed_distance_is_one_lipschitz(a in arb_point(), b in arb_point()) {
            let pent = ConvexDomain::polygon(
                (0..5).map(|k| Vec2::polar(TAU * k as f64 / 5.0) * 0.8 + Vec2::new(0.5, 0.5)).collect(),
            ).unwrap();
            for d in [ConvexDomain::unit_square(), ConvexDomain::unit_disc(), pent] {
                let diff = (d.signed_distance(a) - d.signed_distance(b)).abs();
                prop_assert!(diff <= (a - b).norm() * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn inner_domains_are_nested(d1 in 0.0f64..0.45, d2 in 0.0f64..0.45) {
            let (d1, d2) = (d1.min(d2), d1.max(d2));
            let tri = ConvexDomain::polygon(vec![
                Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(1.0, 2.0),
            ]).unwrap();
            for d in [ConvexDomain::unit_square(), tri] {
                let outer = d.inner_domain(d1).unwrap();
                let inner = d.inner_domain(d2).unwrap();
                for v in inner.vertices() {
                    prop_assert!(outer.signed_distance(*v) >= -1e-12);
                }
            }
        }
    }
}
