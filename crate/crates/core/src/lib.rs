//! Spectral-Galerkin solver and finite-rank Brouwer degree engine for the
//! stationary Doi–Onsager equation `u = λΓ[u]` on the circle.
//!
//! Functions live in the even, π-periodic, zero-mean cosine space
//! ([`spectral`]); [`operator`] evaluates `Γ`, the residual, its Gâteaux
//! derivative and the level-N finite-rank maps; [`degree`] computes Brouwer
//! degrees of those maps by certified Jacobian sign sums; [`bifurcation`]
//! locates `λₙ = −2/kₙ` and traces the pitchfork branches.

pub mod bifurcation;
pub mod degree;
pub mod error;
pub mod kernel;
mod newton;
pub mod operator;
pub mod spectral;
pub mod verify;

pub use bifurcation::{
    assemble_diagram, bifurcation_points, continue_branch, trivial_stability, BifurcationDiagram, Branch,
    BranchSample, ContinuationConfig,
};
pub use degree::{brouwer_degree, find_zeros, DegreeReport, MultistartConfig, Zero};
pub use error::{Error, Result};
pub use kernel::{onsager_kernel, KernelSelector, KernelSpec};
pub use operator::{OperatorContext, Pairing};
pub use spectral::{analyze, inner_x, inner_y, synthesize, SpectralFn};

/// Library version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
