//! Anisotropic p-Laplacian Dirichlet problems on convex planar domains.
//!
//! The crate solves `−div(DH(Du)) = f(u)` for convex, positively
//! p-homogeneous integrands `H = Φ^p` (including non-even and crystalline
//! gauges) by P1 finite-element energy minimisation, and checks the
//! concavity of `φ(u)` for the transform `φ(t) = ∫_1^t F(s)^{−1/p} ds`
//! with the accompanying hypothesis validators, Hopf barriers and ellipticity
//! probes.

pub mod anisotropy;
pub mod barrier;
pub mod concavity;
pub mod domain;
pub mod error;
pub mod numerics;
pub mod reaction;
pub mod solver;
pub mod sparse;
pub mod spline;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::{Sym2, Vec2};
