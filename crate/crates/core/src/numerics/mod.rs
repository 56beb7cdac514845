//! Complex arithmetic, 2x2 complex linear algebra, the reverse-mode tape
//! and finite-difference gradient checking.

mod complex;
mod fdcheck;
mod linalg;
mod real;
mod tape;

pub use complex::{Complex, Complex64};
pub use fdcheck::{finite_diff_check, FdConfig, FdReport};
pub use linalg::{solve2x2, ComplexVec2, Jones, Jones2x2, JonesRecord, Vec2c, DET_EPS};
pub use real::Real;
pub use tape::{GradientTape, Gradients, OpKind, Var};
