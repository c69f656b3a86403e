//! Generalized probabilistic theories on polygon and house-shaped state spaces.
//!
//! States and effects of a single system are vectors in `R^d` paired by the
//! Euclidean inner product. Joint states of two systems are `d_A x d_B`
//! matrices, so that `(e ⊗ f)(ω) = eᵀ M f`.
//!
//! The crate covers:
//!
//! * [`gpt`]: vectors, models, measurements and validity checks.
//! * [`polygon`]: the regular `n`-gon models and their maximally entangled state.
//! * [`bipartite`]: joint states, maximal tensor product membership, extremality,
//!   inner product states and local-map pushforward.
//! * [`correlations`]: correlation tables, CHSH / chained / Uffink functionals,
//!   brute-force and analytic CHSH maximization, PR-box decomposition.
//! * [`q1`]: first-level moment matrix certificates.
//! * [`selfdual`]: weak / strong self-duality and isomorphism-induced states.
//! * [`house`]: the house-shaped model and its Uffink violation.

pub mod bipartite;
pub mod correlations;
pub mod error;
pub mod gpt;
pub mod house;
pub mod io;
pub mod linalg;
pub mod polygon;
pub mod q1;
pub mod selfdual;

pub use bipartite::{push_local_map, InnerProductReport, JointState, LocalMap};
pub use correlations::CorrelationTable;
pub use error::{GptError, Result};
pub use gpt::{probability, Measurement, ModelSpec, ValidationIssue, ValidationReport, Vector};
pub use q1::{Q1Certificate, Verdict};

/// Tolerance used for every equality / inequality check unless a caller
/// passes its own.
pub const DEFAULT_TOL: f64 = 1e-9;
