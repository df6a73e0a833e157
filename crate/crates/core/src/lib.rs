//! Preconditioned difference-of-convex minimization of the graph
//! Ginzburg-Landau functional.
//!
//! The crate builds sparse nonlocal weight graphs from images (patch
//! similarity inside a search window) or point clouds (exact KNN), exposes
//! the unnormalized and normalized graph Laplacians as matrix-free
//! operators, and minimizes
//!
//! ```text
//! F(u) = (eps/2) <u, L u> + (1/eps) sum_i (u_i^2 - 1)^2 / 4 + (eta/2) sum_i lambda_i (u_i - y_i)^2
//! ```
//!
//! by a DC iteration whose convex subproblem `T u = b` (or `T_k u = b_k`
//! for a finite step size) is only approximately solved with a few sweeps
//! of a diagonal feasible preconditioner (damped Jacobi, perturbed Jacobi
//! or generalized Richardson). Every sweep is data-parallel over nodes.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | weight construction, [`graph::SparseSym`], [`graph::LaplacianOp`], graph files |
//! | [`energy`] | objective, gradient, DC split |
//! | [`precond`] | diagonal preconditioners and the power method |
//! | [`solver`] | outer DC loop, inner sweeps, initialization |
//! | [`spectral`] | second eigenvector of the normalized Laplacian |
//! | [`metrics`] | DICE, Jaccard, accuracy, rate logging |
//! | [`data`] | PNM images and priors, MNIST, PCA, synthetic data |

pub mod data;
pub mod energy;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod precond;
pub mod solver;
pub mod spectral;

pub use energy::{EnergyParams, LabelField, PriorField};
pub use error::{Error, Result};
pub use graph::{LaplacianOp, Normalization, SparseSym};
pub use precond::{DiagPrecond, PrecondKind, StepSize};
pub use solver::{SolveTrace, SolverConfig, StoppingRule};
