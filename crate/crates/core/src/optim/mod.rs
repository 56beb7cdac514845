//! First- and second-order optimizers over flat parameter vectors.

mod adam;
pub mod lbfgs;
mod plateau;

pub use adam::{Adam, ParamGroup};
pub use lbfgs::{minimize as lbfgs_minimize, LbfgsConfig, LbfgsReport, StopReason};
pub use plateau::{PlateauConfig, ReduceLrOnPlateau};
