//! Soft-margin kernel classifier trained in the dual.

mod gram;
mod kernel;
mod model;
mod reference;
mod smo;

pub use gram::{gram_matrix, Gram, DENSE_GRAM_LIMIT};
pub use kernel::{kernel_eval, KernelSpec};
pub use model::{sign, SvmModel, TrainDiagnostics, MODEL_FORMAT};
pub use reference::{reference_dual_solve, ReferenceSolution, REFERENCE_MAX_ROWS};
pub use smo::{train, train_detailed, ClassWeights, DualSolution, PairSelection, TrainConfig};
