//! Legendre-Fenchel conjugation of sampled and smooth convex functions, and
//! the bridge from graphs of functions to the Legendre polarity.

mod bridge;
mod discrete;
mod sampled;
mod smooth;

pub use bridge::{epigraph_body, verify_legendre_polarity, ConjugateReference, PolarityCheck};
pub use discrete::{
    auto_dual_grid, biconjugate, biconjugate_on, conjugate, conjugate_bruteforce,
    conjugate_fast_1d, Conjugate, ConjugatePair,
};
pub use sampled::{linspace, Grid, SampledFunction};
pub use smooth::{
    conjugate_smooth, conjugate_smooth_with, FnConvex, HalfSquaredNorm, Quadratic1d,
    SmoothConjugate, SmoothConvex, SmoothOptions,
};
