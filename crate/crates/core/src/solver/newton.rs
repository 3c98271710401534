//! Projected Newton-CG with backtracking for box-constrained (`w ≥ 0`)
//! minimisation of assembled energies.

use serde::{Deserialize, Serialize};

use super::energy::Functional;
use crate::domain::Mesh;
use crate::sparse::{pcg, CsrMatrix};

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    /// Stop when the projected gradient norm is below `tol·(1 + |E|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub nonneg: bool,
}

/// One optimiser iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: usize,
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

fn project(x: &mut [f64], nonneg: bool) {
    if nonneg {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

/// Minimises `f` over nodal vectors with `x = x0` on boundary nodes.
pub(crate) fn minimize(f: &Functional, mesh: &Mesh, x: Vec<f64>, opts: NewtonOptions, stage: usize) -> NewtonOutcome {
    minimize_fixed(f, mesh, mesh.boundary_flags(), x, opts, stage)
}

/// Minimises `f` with `x = x0` on the nodes flagged in `fixed`.
pub(crate) fn minimize_fixed(
    f: &Functional,
    mesh: &Mesh,
    fixed: &[bool],
    mut x: Vec<f64>,
    opts: NewtonOptions,
    stage: usize,
) -> NewtonOutcome {
    let n = x.len();
    project(&mut x, opts.nonneg);
    let mut trace = Vec::new();
    let mut shift = 0.0f64;
    let mut last: (f64, f64);
    let mut step = 0.0;
    for it in 0..opts.max_iter {
        let (e, g, locals) = f.second_order(mesh, &x);
        // Free variables: interior nodes not held at the bound by the gradient.
        let free: Vec<bool> = (0..n)
            .map(|i| !fixed[i] && !(opts.nonneg && x[i] <= 0.0 && g[i] > 0.0))
            .collect();
        let gnorm = (0..n).filter(|&i| free[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        trace.push(TraceEntry { stage, iteration: it, energy: e, grad_norm: gnorm, step });
        last = (e, gnorm);
        if gnorm <= opts.tol * (1.0 + e.abs()) {
            return NewtonOutcome { x, energy: e, grad_norm: gnorm, iterations: it, converged: true, trace };
        }
        let mut index = vec![usize::MAX; n];
        let mut m = 0;
        for i in 0..n {
            if free[i] {
                index[i] = m;
                m += 1;
            }
        }
        let mut triplets = Vec::with_capacity(9 * locals.len());
        for (l, t) in locals.iter().zip(mesh.triangles()) {
            for a in 0..3 {
                let ia = index[t[a]];
                if ia == usize::MAX {
                    continue;
                }
                for b in 0..3 {
                    let ib = index[t[b]];
                    if ib != usize::MAX {
                        triplets.push((ia, ib, l.h[a][b]));
                    }
                }
            }
        }
        let base = CsrMatrix::from_triplets(m, triplets);
        let diag_scale = {
            let d = base.diagonal();
            d.iter().map(|v| v.abs()).sum::<f64>() / m.max(1) as f64
        };
        let rhs: Vec<f64> = (0..n).filter(|&i| free[i]).map(|i| -g[i]).collect();
        let mut accepted = false;
        for _attempt in 0..12 {
            let mut h = base.clone();
            if shift > 0.0 {
                h.add_diagonal(&vec![shift * diag_scale; m]);
            }
            let mut d = vec![0.0; m];
            let forcing = (gnorm / (1.0 + e.abs())).sqrt().clamp(1e-10, 0.1);
            let cg = pcg(&h, &rhs, &mut d, forcing, 4 * m.max(50));
            let slope: f64 = d.iter().zip(&rhs).map(|(a, b)| -a * b).sum();
            if !(slope < 0.0) || d.iter().any(|v| !v.is_finite()) {
                // Fall back to the diagonally scaled gradient.
                let diag = h.diagonal();
                for (k, v) in d.iter_mut().enumerate() {
                    *v = rhs[k] / diag[k].abs().max(1e-300);
                }
            }
            let mut alpha = 1.0;
            let mut trial = x.clone();
            for _ in 0..40 {
                let mut k = 0;
                for i in 0..n {
                    if free[i] {
                        trial[i] = x[i] + alpha * d[k];
                        k += 1;
                    }
                }
                project(&mut trial, opts.nonneg);
                let et = f.energy(mesh, &trial);
                let actual: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
                let flat = (et - e).abs() <= 1e-13 * (1.0 + e.abs()) && alpha == 1.0;
                if et.is_finite() && (et <= e + 1e-4 * actual || flat) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                step = alpha;
                x = trial;
                if alpha == 1.0 && !cg.negative_curvature {
                    shift *= 0.1;
                    if shift < 1e-12 {
                        shift = 0.0;
                    }
                }
                break;
            }
            shift = if shift == 0.0 { 1e-8 } else { shift * 100.0 };
        }
        if !accepted {
            return NewtonOutcome { x, energy: last.0, grad_norm: last.1, iterations: it, converged: false, trace };
        }
    }
    let (e, g) = f.energy_gradient(mesh, &x);
    let gnorm = (0..n)
        .filter(|&i| !fixed[i] && !(opts.nonneg && x[i] <= 0.0 && g[i] > 0.0))
        .map(|i| g[i] * g[i])
        .sum::<f64>()
        .sqrt();
    let converged = gnorm <= opts.tol * (1.0 + e.abs());
    NewtonOutcome { x, energy: e, grad_norm: gnorm, iterations: opts.max_iter, converged, trace }
}
