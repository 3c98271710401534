use std::f64::consts::{PI, TAU};
use std::io::Write;

use delaunator::Point;

use super::ConvexDomain;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Geometry of one P1 element: area and the constant gradients of its three
/// barycentric basis functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub area: f64,
    pub grads: [Vec2; 3],
}

/// Triangulation of a planar region.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    h: f64,
    elements: Vec<Element>,
    locator: Locator,
}

const MIN_AREA: f64 = 1e-14;
const MIN_ANGLE_DEG: f64 = 20.0;

impl Mesh {
    /// Builds a mesh from raw parts, orienting triangles counter-clockwise.
    /// `h` is the nominal mesh size recorded with the mesh.
    pub fn from_parts(
        nodes: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        h: f64,
    ) -> Result<Mesh> {
        if boundary.len() != nodes.len() {
            return Err(Error::Meshing("boundary flags and nodes differ in length".into()));
        }
        let mut elements = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Meshing(format!("triangle {k} references a missing node")));
            }
            let mut a2 = (nodes[t[1]] - nodes[t[0]]).cross(nodes[t[2]] - nodes[t[0]]);
            if a2 < 0.0 {
                t.swap(1, 2);
                a2 = -a2;
            }
            if !(0.5 * a2 >= MIN_AREA) {
                return Err(Error::Meshing(format!("triangle {k} has area {} below {MIN_AREA}", 0.5 * a2)));
            }
            let p = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
            let grads = [
                (p[2] - p[1]).perp() / a2,
                (p[0] - p[2]).perp() / a2,
                (p[1] - p[0]).perp() / a2,
            ];
            elements.push(Element { area: 0.5 * a2, grads });
        }
        let locator = Locator::new(&nodes, &triangles);
        Ok(Mesh { nodes, triangles, boundary, h, elements, locator })
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Nominal mesh size.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.boundary[i])
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (self.nodes[t[k]] - self.nodes[t[(k + 1) % 3]]).norm()))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_min_angle([self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]))
            .fold(180.0, f64::min)
    }

    /// Vertex-rule masses `m_i = Σ_{T ∋ i} |T|/3`, so that `Σ m_i g(w_i)`
    /// approximates `∫g(w)`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.len()];
        for (t, e) in self.triangles.iter().zip(&self.elements) {
            for &i in t {
                m[i] += e.area / 3.0;
            }
        }
        m
    }

    /// `‖φ_i‖_{L²}` of the hat functions, `(Σ_{T ∋ i} |T|/6)^{1/2}`.
    pub fn hat_l2_norms(&self) -> Vec<f64> {
        self.lumped_mass().iter().map(|m| (0.5 * m).sqrt()).collect()
    }

    /// Sorted adjacency lists.
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for t in &self.triangles {
            for k in 0..3 {
                adj[t[k]].push(t[(k + 1) % 3]);
                adj[t[k]].push(t[(k + 2) % 3]);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Triangle containing `x` and the barycentric coordinates of `x` in it.
    pub fn locate(&self, x: Vec2) -> Option<(usize, [f64; 3])> {
        self.locator.candidates(x).find_map(|k| {
            let b = self.barycentric(k, x);
            (b.iter().all(|&l| l >= -1e-12)).then_some((k, b))
        })
    }

    pub fn barycentric(&self, k: usize, x: Vec2) -> [f64; 3] {
        let t = self.triangles[k];
        let e = &self.elements[k];
        let l1 = e.grads[1].dot(x - self.nodes[t[0]]);
        let l2 = e.grads[2].dot(x - self.nodes[t[0]]);
        [1.0 - l1 - l2, l1, l2]
    }

    /// P1 interpolant of nodal `values` at `x`, `None` outside the mesh.
    pub fn interpolate(&self, values: &[f64], x: Vec2) -> Option<f64> {
        let (k, b) = self.locate(x)?;
        let t = self.triangles[k];
        Some(b[0] * values[t[0]] + b[1] * values[t[1]] + b[2] * values[t[2]])
    }

    /// Constant gradient of the P1 field on triangle `k`.
    pub fn gradient(&self, values: &[f64], k: usize) -> Vec2 {
        let t = self.triangles[k];
        let g = &self.elements[k].grads;
        g[0] * values[t[0]] + g[1] * values[t[1]] + g[2] * values[t[2]]
    }

    /// `id,x,y,boundary` rows.
    pub fn write_nodes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,x,y,boundary")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", p.x, p.y, u8::from(self.boundary[i]))?;
        }
        Ok(())
    }

    /// `id,a,b,c` rows of counter-clockwise node indices.
    pub fn write_triangles_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,a,b,c")?;
        for (k, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{k},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn triangle_min_angle(p: [Vec2; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let a = p[(k + 1) % 3] - p[k];
            let b = p[(k + 2) % 3] - p[k];
            a.cross(b).abs().atan2(a.dot(b)).to_degrees()
        })
        .fold(180.0, f64::min)
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
struct Locator {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl Locator {
    fn new(nodes: &[Vec2], triangles: &[[usize; 3]]) -> Locator {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in nodes {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if nodes.is_empty() {
            lo = Vec2::ZERO;
            hi = Vec2::ZERO;
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
        let side = (triangles.len() as f64).sqrt().ceil().max(1.0);
        let cell = span / side * (1.0 + 1e-12);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        let index = |v: f64, lo: f64, n: usize| (((v - lo) / cell).floor().max(0.0) as usize).min(n - 1);
        for (k, t) in triangles.iter().enumerate() {
            let p = t.map(|i| nodes[i]);
            let (x0, x1) = (p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max));
            for j in index(y0, lo.y, ny)..=index(y1, lo.y, ny) {
                for i in index(x0, lo.x, nx)..=index(x1, lo.x, nx) {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        let mut start = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        for b in buckets {
            start.push(items.len());
            items.extend(b);
        }
        start.push(items.len());
        Locator { lo, cell, nx, ny, start, items }
    }

    fn candidates(&self, x: Vec2) -> impl Iterator<Item = usize> + '_ {
        let fx = (x.x - self.lo.x) / self.cell;
        let fy = (x.y - self.lo.y) / self.cell;
        let range = if fx < -1e-9 || fy < -1e-9 || fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            0..0
        } else {
            let i = (fx.max(0.0) as usize).min(self.nx - 1);
            let j = (fy.max(0.0) as usize).min(self.ny - 1);
            let b = j * self.nx + i;
            self.start[b]..self.start[b + 1]
        };
        self.items[range].iter().copied()
    }
}

/// Node spacings tried, as fractions of `h`, before giving up.
const SPACING_FACTORS: [f64; 4] = [0.85, 0.78, 0.7, 0.62];

pub(super) fn triangulate(domain: &ConvexDomain, h: f64) -> Result<Mesh> {
    let diam = domain.diameter();
    if !(h > 0.0 && h < diam) {
        return Err(Error::Meshing(format!("mesh size {h} must lie in (0, {diam})")));
    }
    // A sharp domain corner bounds the achievable angle.
    let min_angle = match domain {
        ConvexDomain::Disc { .. } => MIN_ANGLE_DEG,
        ConvexDomain::Polygon { vertices } => {
            let n = vertices.len();
            let corner = (0..n)
                .map(|i| {
                    let (a, b, c) = (vertices[(i + n - 1) % n], vertices[i], vertices[(i + 1) % n]);
                    let (u, v) = (a - b, c - b);
                    u.cross(v).abs().atan2(u.dot(v)).to_degrees()
                })
                .fold(180.0, f64::min);
            MIN_ANGLE_DEG.min(0.9 * corner)
        }
    };
    let mut report = Vec::new();
    // Level-set-aligned layers first; the relaxed lattice is the fallback.
    for layered in [true, false] {
        for factor in SPACING_FACTORS {
            let s = factor * h;
            let (points, boundary) = match domain {
                ConvexDomain::Disc { center, radius } if layered => ring_points(*center, *radius, s),
                ConvexDomain::Disc { .. } => continue,
                ConvexDomain::Polygon { vertices } if layered => layer_points(domain, vertices, s)?,
                ConvexDomain::Polygon { vertices } => lattice_points(domain, vertices, s)?,
            };
            let mesh = delaunay(points, boundary, h)?;
            let (angle, edge) = (mesh.min_angle_deg(), mesh.max_edge());
            if angle >= min_angle && edge <= h {
                return Ok(mesh);
            }
            report.push(format!("spacing {s:.4e}: min angle {angle:.2}°, max edge {edge:.4e}"));
        }
    }
    Err(Error::Meshing(format!(
        "no spacing met min angle {min_angle:.2}° and max edge {h}: {}",
        report.join("; ")
    )))
}

/// Concentric rings with roughly `s` spacing; the outer ring lies exactly on
/// the circle.
fn ring_points(center: Vec2, radius: f64, s: f64) -> (Vec<Vec2>, Vec<bool>) {
    let rings = (radius / (s * 0.5 * 3f64.sqrt())).ceil().max(1.0) as usize;
    let dr = radius / rings as f64;
    let mut pts = vec![center];
    let mut boundary = vec![false];
    for k in 1..=rings {
        let r = dr * k as f64;
        let n = ((TAU * r / s).ceil() as usize).max(6);
        // Staggering avoids cocircular quadruples between equal rings.
        let shift = if k % 2 == 1 { PI / n as f64 } else { 0.0 };
        for i in 0..n {
            let e = Vec2::polar(shift + TAU * i as f64 / n as f64);
            pts.push(if k == rings { center + e * radius } else { center + e * r });
            boundary.push(k == rings);
        }
    }
    (pts, boundary)
}

/// Nested inner offsets of the polygon, each split evenly along its edges,
/// with a hexagonal lattice filling whatever core remains.
fn layer_points(domain: &ConvexDomain, vertices: &[Vec2], s: f64) -> Result<(Vec<Vec2>, Vec<bool>)> {
    let dy = s * 0.5 * 3f64.sqrt();
    let rho = domain.inradius();
    let mut pts = Vec::new();
    let mut boundary = Vec::new();
    let mut k = 0usize;
    let mut depth = 0.0;
    loop {
        let d = dy * k as f64;
        if k > 0 && d > rho - 0.6 * dy {
            break;
        }
        let ring = if k == 0 { vertices.to_vec() } else { domain.inner_domain(d)?.vertices().to_vec() };
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let len = (b - a).norm();
            let m = (len / s).ceil().max(1.0) as usize;
            pts.push(a);
            boundary.push(k == 0);
            // Alternate layers are staggered when the edge is long enough.
            let shift = if k % 2 == 1 && m >= 3 { 0.5 } else { 0.0 };
            let count = if shift > 0.0 { m - 1 } else { m };
            for j in 1..count {
                let frac = (j as f64 + shift) / m as f64;
                pts.push(a.lerp(b, frac));
                boundary.push(k == 0);
            }
        }
        depth = d;
        k += 1;
    }
    let (lo, hi) = domain.bounding_box();
    let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
    let cols = ((hi.x - lo.x) / s).ceil() as usize + 2;
    for j in 0..rows {
        let y = lo.y + dy * j as f64;
        let x0 = lo.x + if j % 2 == 1 { 0.5 * s } else { 0.0 };
        for i in 0..cols {
            let x = Vec2::new(x0 + s * i as f64, y);
            if domain.signed_distance(x) >= depth + 0.6 * dy {
                pts.push(x);
                boundary.push(false);
            }
        }
    }
    Ok((pts, boundary))
}

/// Hexagonal lattice inside the polygon plus evenly split edges, relaxed by
/// a few sweeps of Laplacian smoothing on the Delaunay graph.
fn lattice_points(domain: &ConvexDomain, vertices: &[Vec2], s: f64) -> Result<(Vec<Vec2>, Vec<bool>)> {
    let mut pts = Vec::new();
    let mut boundary = Vec::new();
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let m = ((b - a).norm() / s).ceil().max(1.0) as usize;
        for j in 0..m {
            pts.push(a.lerp(b, j as f64 / m as f64));
            boundary.push(true);
        }
    }
    let (lo, hi) = domain.bounding_box();
    let dy = s * 0.5 * 3f64.sqrt();
    let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
    let cols = ((hi.x - lo.x) / s).ceil() as usize + 2;
    for j in 0..rows {
        let y = lo.y + dy * j as f64;
        let x0 = lo.x + if j % 2 == 1 { 0.5 * s } else { 0.0 };
        for i in 0..cols {
            let x = Vec2::new(x0 + s * i as f64, y);
            if domain.signed_distance(x) >= 0.45 * s {
                pts.push(x);
                boundary.push(false);
            }
        }
    }
    for _ in 0..6 {
        let tri = delaunator::triangulate(&to_points(&pts));
        let mut sum = vec![Vec2::ZERO; pts.len()];
        let mut count = vec![0usize; pts.len()];
        for t in tri.triangles.chunks_exact(3) {
            for k in 0..3 {
                let (i, j) = (t[k], t[(k + 1) % 3]);
                sum[i] += pts[j];
                count[i] += 1;
                sum[j] += pts[i];
                count[j] += 1;
            }
        }
        for i in 0..pts.len() {
            if boundary[i] || count[i] == 0 {
                continue;
            }
            let target = sum[i] / count[i] as f64;
            if domain.signed_distance(target) >= 0.3 * s {
                pts[i] = target;
            }
        }
    }
    if pts.len() < 3 {
        return Err(Error::Meshing("too few nodes".into()));
    }
    Ok((pts, boundary))
}

fn to_points(pts: &[Vec2]) -> Vec<Point> {
    pts.iter().map(|p| Point { x: p.x, y: p.y }).collect()
}

fn delaunay(points: Vec<Vec2>, boundary: Vec<bool>, h: f64) -> Result<Mesh> {
    let tri = delaunator::triangulate(&to_points(&points));
    if tri.triangles.is_empty() {
        return Err(Error::Meshing("degenerate point set".into()));
    }
    let scale = h * h;
    let triangles: Vec<[usize; 3]> = tri
        .triangles
        .chunks_exact(3)
        .map(|t| [t[0], t[1], t[2]])
        .filter(|t| {
            let a2 = (points[t[1]] - points[t[0]]).cross(points[t[2]] - points[t[0]]).abs();
            // Slivers between collinear boundary nodes.
            a2 > 1e-10 * scale
        })
        .collect();
    Mesh::from_parts(points, triangles, boundary, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_mesh_covers_area() {
        let sq = ConvexDomain::unit_square();
        let m = sq.triangulate(0.5).unwrap();
        assert!(m.num_triangles() >= 8);
        assert_relative_eq!(m.total_area(), 1.0, epsilon = 1e-12);
        assert!(m.max_edge() <= 0.5);
        assert!(m.min_angle_deg() >= 20.0);
    }

    #[test]
    fn disc_mesh_quality_and_boundary() {
        let d = ConvexDomain::unit_disc();
        for h in [0.1, 0.05] {
            let m = d.triangulate(h).unwrap();
            assert!((m.total_area() - PI).abs() < 2.0 * h * h, "{}", m.total_area());
            assert!(m.max_edge() <= h && m.min_angle_deg() >= 20.0);
            for (i, p) in m.nodes().iter().enumerate() {
                let on = d.signed_distance(*p).abs() <= 1e-9 * 2.0;
                assert_eq!(on, m.is_boundary(i));
            }
        }
    }

    #[test]
    fn meshing_is_deterministic_and_refines() {
        let sq = ConvexDomain::unit_square();
        let a = sq.triangulate(0.1).unwrap();
        let b = sq.triangulate(0.1).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.triangles(), b.triangles());
        let c = sq.triangulate(0.05).unwrap();
        assert!(c.num_triangles() >= 4 * a.num_triangles() - a.num_triangles() / 10);
    }

    #[test]
    fn polygon_boundary_flags() {
        let tri = ConvexDomain::polygon(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.7, 1.5),
        ])
        .unwrap();
        let m = tri.triangulate(0.1).unwrap();
        assert_relative_eq!(m.total_area(), tri.area(), epsilon = 1e-12);
        for (i, p) in m.nodes().iter().enumerate() {
            assert_eq!(tri.signed_distance(*p).abs() <= 1e-9 * tri.diameter(), m.is_boundary(i));
        }
    }

    #[test]
    fn interpolation_is_exact_for_linear_fields() {
        let m = ConvexDomain::unit_disc().triangulate(0.2).unwrap();
        let v: Vec<f64> = m.nodes().iter().map(|p| 1.0 + 2.0 * p.x - 3.0 * p.y).collect();
        for x in [Vec2::new(0.1, 0.2), Vec2::new(-0.5, 0.3), Vec2::new(0.0, -0.9)] {
            assert_relative_eq!(m.interpolate(&v, x).unwrap(), 1.0 + 2.0 * x.x - 3.0 * x.y, epsilon = 1e-12);
        }
        assert!(m.interpolate(&v, Vec2::new(2.0, 0.0)).is_none());
        let g = m.gradient(&v, 7);
        assert_relative_eq!(g.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.y, -3.0, epsilon = 1e-12);
    }
}
