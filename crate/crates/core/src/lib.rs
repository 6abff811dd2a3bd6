//! Finite-dimensional workbench for absolutely summing operators on `Mₙ(ℂ)`.
//!
//! The crate covers four connected pieces:
//!
//! * [`linalg`]: dense complex linear algebra (Jacobi SVD and Hermitian
//!   eigensolver, Schatten norms, `|x|`, Gram whitening).
//! * [`spaces`] and [`summing`]: linear maps out of `B(ℓ₂ⁿ)`, lower-bound
//!   estimators for `π_p` / `π_{p,q}`, and a cutting-plane search for a Pietsch
//!   domination state `g` with `‖Tx‖ ≤ C·tr(g|x|)`.
//! * [`gns`]: the factorization `T = K∘J` through `L₂(f)` with `‖J‖ ≤ 1` and a
//!   certified bound on `σ₄(K)`.
//! * [`entropy`] and [`counterexample`]: lattice coverings of ellipsoids,
//!   entropy numbers, capacity bounds, and the `Iₙ/αₙ` family that pins the
//!   Schatten exponent at 4.

pub mod config;
pub mod counterexample;
pub mod entropy;
pub mod error;
pub mod gns;
pub mod linalg;
pub mod rng;
pub mod spaces;
pub mod summing;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
