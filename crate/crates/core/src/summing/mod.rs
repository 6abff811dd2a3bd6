//! Summing-norm estimators and Pietsch domination.

mod estimate;
mod pietsch;

pub use estimate::{
    canonical_basis, diagonal_weak_norm, hilbert_weak_norm, pi2_hilbert_exact, summing_lower_bound,
    summing_lower_bound_hilbert, EstimateKind, SummingEstimate, WitnessFamily,
};
pub use pietsch::{
    find_pietsch_domination, trace_weighted_abs, verify_certificate, CutRound, DominationCertificate,
    InnerSearchOptions, MarginReport,
};
pub(crate) use pietsch::check_density;
