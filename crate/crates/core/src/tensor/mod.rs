//! Dense and sparse matrices plus a small reverse-mode differentiation tape.

mod dense;
mod sparse;
mod tape;

pub use dense::{dot, Matrix};
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};
