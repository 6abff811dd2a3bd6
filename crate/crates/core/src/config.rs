//! Numerical tolerances shared by every module.

/// SVD reconstruction: `‖M − UΣV*‖_F ≤ RECONSTRUCTION_TOL · max(1, ‖M‖_F)`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Orthonormality of singular / eigen bases.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Residual of `W*GW − I` on the retained subspace.
pub const GRAM_RESIDUAL_TOL: f64 = 1e-8;
/// Eigenvalues below `-NOT_PSD_REL_TOL · ‖G‖` reject a Gram matrix.
pub const NOT_PSD_REL_TOL: f64 = 1e-8;
/// Density matrices: PSD and unit trace within this tolerance.
pub const DENSITY_TOL: f64 = 1e-9;
/// Slack allowed on each retained cut of a domination certificate.
pub const CUT_SLACK: f64 = 1e-8;
/// The cutting-plane loop stops once the best violation found is below this.
pub const CUT_VIOLATION_STOP: f64 = 1e-7;
/// The cutting-plane loop stops once `(upper − lower) ≤ CUT_GAP_TOL · lower`.
pub const CUT_GAP_TOL: f64 = 1e-6;
/// `verify_certificate` passes iff the worst margin is at most this.
pub const CERTIFICATE_PASS_TOL: f64 = 1e-6;
/// `K∘J = T` on the canonical basis.
pub const FACTORIZATION_RESIDUAL_TOL: f64 = 1e-8;
/// `‖Jx‖² ≤ (1 + J_CONTRACTION_TOL)·‖x‖²_op`.
pub const J_CONTRACTION_TOL: f64 = 1e-8;
/// Additive slack on the adjoint summing inequality.
pub const SUMMING_AUDIT_TOL: f64 = 1e-6;
/// Default mixing weight of the normalized trace in the faithful state.
pub const DEFAULT_DELTA: f64 = 1e-3;
/// Gram eigenvalues at or below `GRAM_CUTOFF_PER_DIM · n²` are not inverted.
pub const GRAM_CUTOFF_PER_DIM: f64 = 1e-12;
/// Largest covering the lattice construction will report.
pub const MAX_COVERING_COUNT: u128 = 1_000_000_000;
/// Ratio of the geometric search grid for entropy numbers.
pub const ENTROPY_GRID_RATIO: f64 = 1.02;
