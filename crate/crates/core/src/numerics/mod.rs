//! Dense real and complex linear algebra, activations and spectral tests.

mod activation;
mod cmatrix;
mod eigen;
mod matrix;
pub mod random;
pub mod vector;

pub use activation::{apply_activation, monotonicity_probe, monotonicity_probe_fn, Activation};
pub use cmatrix::{ckron, cnorm, embed_complex_as_real, CMatrix, C64};
pub use eigen::{
    eig_hermitian, eig_symmetric, eigenvalues_symmetric, is_psd, min_eigenvalue, symmetry_tolerance, HermEig, SymEig, DEFAULT_PSD_TOL,
    MAX_SWEEPS,
};
pub use matrix::{diag_embed, kron, Matrix};
pub use random::cayley;
