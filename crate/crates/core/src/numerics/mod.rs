//! Dense numeric substrate shared by every algorithm: matrices, the symmetric
//! eigensolver, LU inversion and k-means.

mod eigen;
mod inverse;
mod kmeans;
mod matrix;

pub use eigen::{sym_eigen, sym_eigs_smallest, EigenPairs};
pub use inverse::inverse;
pub use kmeans::{kmeans, kmeans_restarts, KMeansResult};
pub use matrix::{gemm, DenseMatrix};
