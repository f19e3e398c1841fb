//! Dense matrix compression with product quantization and hierarchical
//! pair reordering.
//!
//! The algorithms are generic over the element type through [`Scalar`]
//! (`f32` and `f64`). The aliases below fix the element type to `f32`, which
//! is what the budget accounting and the file formats assume.

pub mod budget;
pub mod clustering;
pub mod codec;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod quantizer;
pub mod scalar;

pub use budget::{account_hera, account_pq, code_bit_width, match_budget, BitBudget, BudgetPolicy, CodeWidth};
pub use clustering::{kmeans_assign, kmeans_fit, KMeansConfig, KMeansResult};
pub use codec::{
    decode_artifact, encode_artifact, load_artifact, save_artifact, Artifact, ArtifactFile,
    ArtifactHeader, Method,
};
pub use error::{Error, Result};
pub use matrix::{
    generate_truncated_normal, load_matrix, merge_rows_by_mask, read_matrix, save_matrix,
    split_rows_by_mask, write_matrix, DenseMatrix, PairMask, TruncNormalSpec,
};
pub use metrics::{compute_errors, ErrorReport};
pub use quantizer::{
    hera_dequantize, hera_inverse_transform, hera_pair_merge, hera_pair_split, hera_quantize,
    hera_transform, pq_dequantize, pq_encode, pq_quantize, CodeMatrix, FeatureMap, HeraArtifact,
    PqArtifact, PqConfig, SplitTree,
};
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f32>;
pub type Matrix64 = DenseMatrix<f64>;
pub type PqArtifact32 = PqArtifact<f32>;
pub type HeraArtifact32 = HeraArtifact<f32>;
pub type Artifact32 = Artifact<f32>;
