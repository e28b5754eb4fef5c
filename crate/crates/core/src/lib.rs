//! Principal Dirichlet eigenpairs of the killed simple random walk on lattice
//! domains, the confined (Doob-transformed) walk, and the random-walk
//! estimates that control the eigenvector's regularity.

pub mod cli;
pub mod confined;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod spectral;
pub mod verify;
pub mod walkstats;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use geometry::{discretize, distance_field, DomainConfig, DomainKind, DomainSpec, LatticeDomain};
pub use spectral::{assemble, principal_eigenpair, renormalize, EigenPair, Normalization, SparseKernel};
