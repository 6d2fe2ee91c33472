//! Compile finite rank-one measurements on a two-dimensional subspace of a
//! multipartite space into one-way LOCC protocols, and execute or verify them.

pub mod compiler;
pub mod demos;
pub mod error;
pub mod io;
pub mod runtime;
pub mod subspace;
pub mod tensor;
pub mod walgate;

pub use compiler::{CompileConfig, Protocol, ProtocolTree};
pub use error::{Error, Result};
pub use io::Problem;
pub use runtime::{ExecutionPlan, VerificationReport};
pub use subspace::TwoDimSubspace;
pub use tensor::{DensityMatrix, Ket, Operator, Povm, Tolerances};
