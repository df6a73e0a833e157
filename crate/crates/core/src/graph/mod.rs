//! Nonlocal weight graphs and their Laplacians.
//!
//! Weights are `w_ij = K(i, j) * N(i, j)`: a Gaussian similarity of feature
//! vectors (image patches or point coordinates) times a proximity indicator
//! (a pixel search window or a KNN relation).

mod image;
mod io;
mod kernel;
mod knn;
mod laplacian;
mod sparse;
mod window;

pub use image::{build_image_graph, patch_alpha, patch_features, DEFAULT_PATCH_HALFWIDTH};
pub use io::{read_graph, read_triplets, write_graph, write_triplets, GRAPH_MAGIC, GRAPH_VERSION};
pub use kernel::{default_bandwidth, similarity_kernel};
pub use knn::{
    build_knn_graph, knn_lists, local_scaling_sigmas, proximity_knn, FeatureSet, FeatureSource,
    KernelScaling, DEFAULT_LOCAL_SCALING_M,
};
pub use laplacian::{LaplacianOp, Normalization};
pub use sparse::{DegreeVector, SparseSym};
pub use window::{proximity_image, WindowSpec};
