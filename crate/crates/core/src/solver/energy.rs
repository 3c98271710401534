//! Element-local P1 energies with vertex quadrature for the reaction terms.

use rayon::prelude::*;

use crate::anisotropy::Anisotropy;
use crate::domain::{Element, Mesh};
use crate::reaction::Reaction;
use crate::vec2::{Sym2, Vec2};

/// Gradients below this norm use a nearby Hessian in the Newton model.
const HESSIAN_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy)]
pub(crate) enum ReactionTerm<'a> {
    /// `−∫F(w)`.
    Primitive(&'a Reaction),
    /// `−∫r w` with nodal weights `r` (a frozen reaction).
    Frozen(&'a [f64]),
    None,
}

/// `∫K(w, Dw) − reaction term`, where `K` is either `H(Dw)/p` or the mixed
/// integrand `(1/p)[εF(w)^{2/p} + H^{2/p}(Dw)]^{p/2}`.
#[derive(Clone, Copy)]
pub(crate) struct Functional<'a> {
    pub aniso: &'a Anisotropy,
    pub mixed: Option<(f64, &'a Reaction)>,
    pub reaction: ReactionTerm<'a>,
}

#[derive(Clone, Copy, Default)]
pub(crate) struct Local {
    pub e: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

fn hessian_or_nearby(z: Vec2, eval: impl Fn(Vec2) -> Option<Sym2>) -> Sym2 {
    if z.norm() >= HESSIAN_FLOOR {
        if let Some(h) = eval(z) {
            return h;
        }
    }
    let s = z.norm().max(HESSIAN_FLOOR);
    let dirs = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)];
    let mut acc = Sym2::ZERO;
    let mut n = 0.0;
    for d in dirs {
        if let Some(h) = eval(z + d * s) {
            acc = acc.add(&h);
            n += 1.0;
        }
    }
    if n == 0.0 {
        Sym2::identity()
    } else {
        acc.scale(1.0 / n)
    }
}

/// `A(s) = εF(s)^{2/p}` with its first two derivatives (zero where `F ≤ 0`).
fn mixed_a(eps: f64, r: &Reaction, s: f64) -> (f64, f64, f64) {
    let p = r.p();
    let big_f = r.primitive(s);
    if !(big_f > 0.0) {
        return (0.0, 0.0, 0.0);
    }
    let f = r.f(s);
    let e = 2.0 / p;
    let a = eps * big_f.powf(e);
    let a1 = eps * e * big_f.powf(e - 1.0) * f;
    let a2 = eps * e * ((e - 1.0) * big_f.powf(e - 2.0) * f * f + big_f.powf(e - 1.0) * r.f_prime(s));
    let fin = |v: f64| if v.is_finite() { v } else { 0.0 };
    (a, fin(a1), fin(a2))
}

impl<'a> Functional<'a> {
    pub fn element(&self, el: &Element, w: [f64; 3], want_hess: bool) -> Local {
        let mut out = Local::default();
        // Differences make constant fields exactly gradient-free.
        let z = el.grads[1] * (w[1] - w[0]) + el.grads[2] * (w[2] - w[0]);
        let area = el.area;
        let p = self.aniso.p();
        match self.mixed {
            None => {
                out.e = area * self.aniso.eval_h(z) / p;
                let dk = self.aniso.gradient_h(z) * (area / p);
                for b in 0..3 {
                    out.g[b] = dk.dot(el.grads[b]);
                }
                if want_hess {
                    let d2 = hessian_or_nearby(z, |y| self.aniso.hessian_h(y)).scale(area / p);
                    for b in 0..3 {
                        let hb = d2.apply(el.grads[b]);
                        for c in 0..3 {
                            out.h[b][c] = hb.dot(el.grads[c]);
                        }
                    }
                }
            }
            Some((eps, r)) => {
                let bz = self.aniso.eval_h2p(z);
                let db = self.aniso.gradient_h2p(z);
                let d2b = if want_hess {
                    hessian_or_nearby(z, |y| self.aniso.hessian_h2p(y))
                } else {
                    Sym2::ZERO
                };
                let wq = area / 3.0;
                for a in 0..3 {
                    let (aa, a1, a2) = mixed_a(eps, r, w[a]);
                    let s = aa + bz;
                    if !(s > 0.0) {
                        continue;
                    }
                    let s1 = s.powf(0.5 * p - 1.0);
                    out.e += wq * s * s1 / p;
                    // ∂_s Q, ∂_z Q.
                    let qs = 0.5 * s1 * a1;
                    let qz = db * (0.5 * s1);
                    out.g[a] += wq * qs;
                    for b in 0..3 {
                        out.g[b] += wq * qz.dot(el.grads[b]);
                    }
                    if want_hess {
                        let s2 = (0.5 * p - 1.0) * s.powf(0.5 * p - 2.0);
                        let qss = 0.5 * (s2 * a1 * a1 + s1 * a2);
                        let qsz = db * (0.5 * s2 * a1);
                        let qzz = Sym2::outer(db).scale(0.5 * s2).add(&d2b.scale(0.5 * s1));
                        out.h[a][a] += wq * qss;
                        for b in 0..3 {
                            let cross = wq * qsz.dot(el.grads[b]);
                            out.h[a][b] += cross;
                            out.h[b][a] += cross;
                            let hb = qzz.apply(el.grads[b]);
                            for c in 0..3 {
                                out.h[b][c] += wq * hb.dot(el.grads[c]);
                            }
                        }
                    }
                }
            }
        }
        let wq = area / 3.0;
        match self.reaction {
            ReactionTerm::Primitive(r) => {
                for a in 0..3 {
                    out.e -= wq * r.primitive(w[a]);
                    out.g[a] -= wq * r.f(w[a]);
                    if want_hess && w[a] > 0.0 {
                        let d = r.f_prime(w[a]);
                        if d.is_finite() {
                            out.h[a][a] -= wq * d;
                        }
                    }
                }
            }
            // Frozen nodal weights need global indices; see `locals`.
            ReactionTerm::Frozen(_) | ReactionTerm::None => {}
        }
        out
    }

    fn frozen(&self) -> Option<&'a [f64]> {
        match self.reaction {
            ReactionTerm::Frozen(r) => Some(r),
            _ => None,
        }
    }

    fn locals(&self, mesh: &Mesh, x: &[f64], want_hess: bool) -> Vec<Local> {
        mesh.elements()
            .par_iter()
            .zip(mesh.triangles().par_iter())
            .map(|(el, t)| {
                let w = [x[t[0]], x[t[1]], x[t[2]]];
                let mut l = self.element(el, w, want_hess);
                if let Some(rhs) = self.frozen() {
                    let wq = el.area / 3.0;
                    for a in 0..3 {
                        l.e -= wq * rhs[t[a]] * w[a];
                        l.g[a] -= wq * rhs[t[a]];
                    }
                }
                l
            })
            .collect()
    }

    pub fn energy(&self, mesh: &Mesh, x: &[f64]) -> f64 {
        self.locals(mesh, x, false).iter().map(|l| l.e).sum()
    }

    pub fn energy_gradient(&self, mesh: &Mesh, x: &[f64]) -> (f64, Vec<f64>) {
        let locals = self.locals(mesh, x, false);
        let mut g = vec![0.0; x.len()];
        let mut e = 0.0;
        for (l, t) in locals.iter().zip(mesh.triangles()) {
            e += l.e;
            for a in 0..3 {
                g[t[a]] += l.g[a];
            }
        }
        (e, g)
    }

    /// Energy, gradient and the element Hessians.
    pub fn second_order(&self, mesh: &Mesh, x: &[f64]) -> (f64, Vec<f64>, Vec<Local>) {
        let locals = self.locals(mesh, x, true);
        let mut g = vec![0.0; x.len()];
        let mut e = 0.0;
        for (l, t) in locals.iter().zip(mesh.triangles()) {
            e += l.e;
            for a in 0..3 {
                g[t[a]] += l.g[a];
            }
        }
        (e, g, locals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::reaction::ReactionSpec;

    /// Finite-difference check of gradients and Hessians for all variants.
    #[test]
    fn derivatives_match_finite_differences() {
        let mesh = ConvexDomain::unit_disc().triangulate(0.5).unwrap();
        let x: Vec<f64> = mesh.nodes().iter().map(|p| 0.3 + 0.2 * p.x - 0.1 * p.y * p.y).collect();
        let r = ReactionSpec::Power { c: 1.5, q: 1.5 }.build(3.0).unwrap();
        let shifted = crate::anisotropy::ConvexBody::Disc { center: Vec2::new(0.3, -0.1), radius: 1.0 };
        let aniso = Anisotropy::from_body(&shifted, 3.0).unwrap();
        let rhs: Vec<f64> = (0..x.len()).map(|i| 0.1 * i as f64).collect();
        let funcs = [
            Functional { aniso: &aniso, mixed: None, reaction: ReactionTerm::Primitive(&r) },
            Functional { aniso: &aniso, mixed: Some((0.05, &r)), reaction: ReactionTerm::Primitive(&r) },
            Functional { aniso: &aniso, mixed: None, reaction: ReactionTerm::Frozen(&rhs) },
        ];
        for f in funcs {
            let (_, g, locals) = f.second_order(&mesh, &x);
            let h = 1e-6;
            for i in [0usize, 3, 7] {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (f.energy(&mesh, &xp) - f.energy(&mesh, &xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
                // Hessian row i against differences of the gradient.
                let gp = f.energy_gradient(&mesh, &xp).1;
                let gm = f.energy_gradient(&mesh, &xm).1;
                let mut row = vec![0.0; x.len()];
                for (l, t) in locals.iter().zip(mesh.triangles()) {
                    for a in 0..3 {
                        if t[a] == i {
                            for b in 0..3 {
                                row[t[b]] += l.h[a][b];
                            }
                        }
                    }
                }
                for j in 0..x.len() {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd - row[j]).abs() < 1e-5 * (1.0 + fd.abs()), "H[{i}][{j}] {fd} vs {}", row[j]);
                }
            }
        }
    }
}
