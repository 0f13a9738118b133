//! Solver and verification harness for `-Δ_p u - Δ_q u = f(x) u^{-δ}` with
//! `f = c_f d(x)^{-β}` on intervals and balls.

pub mod artifacts;
pub mod barriers;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod field;
pub mod mesh;
mod newton;
pub mod solver;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
pub use field::DiscreteField;
pub use mesh::{build_mesh, Domain, DomainKind, Mesh};
pub use newton::NewtonStats;
pub use solver::SolverSettings;
pub use weights::ProblemSpec;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/barriers.md")]
    mod barriers {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
