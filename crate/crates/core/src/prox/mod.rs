//! Dense linear algebra and closed-form proximal and projection operators.

mod affine;
mod least_squares;
mod lowrank;
mod sparsity;
mod svd;

pub use affine::{dist_prox, project_affine, AffineSetHandle};
pub use least_squares::{lambda_max, LeastSquaresData, LsProxHandle, PowerEstimate};
pub use lowrank::{
    masked_quadratic_prox, project_rank, project_rank_flat, sorted_svd, svt_shrink,
    svt_shrink_flat, truncated_svd_subspace, SampledEntries, DENSE_SVD_LIMIT,
};
pub use sparsity::{project_sparsity_box, SparsityBox};
