//! Dirichlet eigenvalue problems for the drift Laplacian `L = -Δ - x·∇` under
//! the growing Gaussian measure `dm_N = e^{|x|²/2} dx`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod hardy;
pub mod measure;
pub mod quad;
pub mod radial;
pub mod raster;
pub mod rearrange;
pub mod reverse_holder;
pub mod shapeopt;
pub mod sparse_eigen;
pub mod special;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{Dimension, WeightedVolume};
