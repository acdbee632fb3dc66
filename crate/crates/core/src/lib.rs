//! Hyperbolic neural networks on the hyperboloid and low-distortion
//! embeddings of weighted trees.

pub mod embed;
pub mod error;
pub mod hypgeom;
pub mod networks;
pub mod seed;
pub mod train;
pub mod trees;

pub use error::{Error, Result, TreeError};
