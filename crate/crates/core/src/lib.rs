//! Multigrid for stabilized saddle-point systems with Uzawa-type smoothers.
//!
//! The crate assembles a PSPG-stabilized P1–P1 discretization of the Stokes
//! equations on the unit cube, provides the block smoothers (diagonal, lower,
//! upper, factorization, symmetric and Braess–Sarazin), V- and W-cycles with an
//! exact coarse solve, and the measuring tools used to study them: smoothing
//! norms, asymptotic rates, a dense theorem checker and a cost model.

pub mod analysis;
pub mod assembly;
pub mod bench;
pub mod dense;
pub mod error;
pub mod hierarchy;
pub mod iterative;
pub mod mesh;
pub mod multigrid;
pub mod norm;
pub mod smoother;
pub mod sparse;
pub mod transfer;
pub mod vector;

pub use assembly::{assemble_mass, assemble_system, SaddlePointSystem};
pub use error::{Error, Result};
pub use hierarchy::Hierarchy;
pub use mesh::{build_hierarchy, MeshHierarchy, MeshLevel};
pub use multigrid::{CycleSpec, MultigridSolver, PostSmoother, SolveResult};
pub use norm::NormOperator;
pub use smoother::{AHatKind, SHatKind, Smoother, SmootherClass, SmootherSpec};
pub use sparse::SparseMatrix;
pub use transfer::TransferOperator;
