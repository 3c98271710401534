use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fpl_core::anisotropy::{Anisotropy, ConvexBody};
use fpl_core::concavity::{max_concavity_violation_field, ScanOptions};
use fpl_core::domain::ConvexDomain;
use fpl_core::reaction::ReactionSpec;
use fpl_core::solver::{minimize_j, rayleigh_eigen, EnergyProblem, SolverOptions};

fn problem(reaction: ReactionSpec, h: f64) -> EnergyProblem {
    let a = Anisotropy::from_body(&ConvexBody::euclidean(), 2.0).unwrap();
    let r = reaction.build(2.0).unwrap();
    EnergyProblem::build(a, r, ConvexDomain::unit_disc(), h, SolverOptions::default()).unwrap()
}

fn mesher(c: &mut Criterion) {
    let disc = ConvexDomain::unit_disc();
    let square = ConvexDomain::unit_square();
    c.bench_function("triangulate disc h=0.02", |b| b.iter(|| disc.triangulate(black_box(0.02)).unwrap()));
    c.bench_function("triangulate square h=0.02", |b| b.iter(|| square.triangulate(black_box(0.02)).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let torsion = problem(ReactionSpec::Constant { c: 1.0 }, 0.05);
    c.bench_function("torsion disc h=0.05", |b| b.iter(|| minimize_j(black_box(&torsion)).unwrap()));
    let eigen = problem(ReactionSpec::Eigen { lambda: None }, 0.05);
    c.bench_function("eigen disc h=0.05", |b| b.iter(|| rayleigh_eigen(black_box(&eigen)).unwrap()));
}

fn scan(c: &mut Criterion) {
    let d = ConvexDomain::unit_disc();
    let u = minimize_j(&problem(ReactionSpec::Constant { c: 1.0 }, 0.05)).unwrap().field;
    let v = u.map(|w| w.max(0.0).sqrt());
    let region = d.inner_domain(0.1).unwrap();
    let opts = ScanOptions::default();
    c.bench_function("concavity scan default", |b| {
        b.iter(|| max_concavity_violation_field(black_box(&v), &region, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = mesher, solvers, scan
}
criterion_main!(benches);
