//! Network building blocks with batched manual backpropagation:
//! sinusoidal encodings, fully connected residual MLPs and a gated
//! multiresolution hash grid.

mod encoding;
mod hashgrid;
mod mlp;

pub use encoding::PositionalEncoding;
pub use hashgrid::{HashCache, HashGrid, HashGridSpec, HASH_PRIMES};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};
