//! Factorization `T = K∘J` through the GNS space `L₂(f)` of a faithful state.
//!
//! `L₂(f)` is `Mₙ` with `⟨x, y⟩ = f((xy* + y*x)/2)`. `J` is the identity on
//! coordinates, so `K = T∘J⁻¹`; singular values of `K` are read off in
//! Gram-orthonormalized coordinates `K̃ = T·Γ^{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::config::{
    DENSITY_TOL, FACTORIZATION_RESIDUAL_TOL, GRAM_CUTOFF_PER_DIM, J_CONTRACTION_TOL, SUMMING_AUDIT_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{gram_sqrt_inverse, schatten_norm, svd, vec_norm, ComplexMatrix, C64};
use crate::rng::{random_complex_matrix, stream_rng};
use crate::spaces::{DualOptions, MatrixOperator};
use crate::summing::{check_density, summing_lower_bound_hilbert, DominationCertificate, EstimateKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulState {
    pub density: ComplexMatrix,
    pub delta: f64,
    pub source_g: ComplexMatrix,
}

/// `f = (g + δ·I/n)/(1 + δ)`.
pub fn mix_faithful(g: &ComplexMatrix, delta: f64) -> Result<FaithfulState> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    check_density(g, DENSITY_TOL)?;
    let n = g.rows();
    let density = g.add(&ComplexMatrix::identity(n).scale(delta / n as f64)).scale(1.0 / (1.0 + delta));
    Ok(FaithfulState { density: density.hermitian_part(), delta, source_g: g.clone() })
}

impl FaithfulState {
    pub fn n(&self) -> usize {
        self.density.rows()
    }

    /// Lower bound `δ/(n(1+δ))` on the spectrum of the density.
    pub fn faithfulness_margin(&self) -> f64 {
        self.delta / (self.n() as f64 * (1.0 + self.delta))
    }

    /// `‖x‖²_f = f((xx* + x*x)/2)`.
    pub fn norm_sqr(&self, x: &ComplexMatrix) -> f64 {
        let xa = x.adjoint();
        let sym = (x * &xa).add(&(&xa * x)).scale(0.5);
        (&self.density * &sym).trace().re
    }
}

/// Gram matrix `G[(i,j),(k,l)] = ⟨E_ij, E_kl⟩ = (δ_jl f_ki + δ_ik f_jl)/2`, row-major pairs.
pub fn l2f_gram(f: &FaithfulState) -> ComplexMatrix {
    let n = f.n();
    let d = &f.density;
    let half = C64::new(0.5, 0.0);
    ComplexMatrix::from_fn(n * n, n * n, |a, b| {
        let (i, j) = (a / n, a % n);
        let (k, l) = (b / n, b % n);
        let mut z = C64::new(0.0, 0.0);
        if j == l {
            z += d[(k, i)];
        }
        if i == k {
            z += d[(j, l)];
        }
        z * half
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JRepresentation {
    /// `J` maps `x` to itself; only the inner product changes.
    CoordinateInclusion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Factorization {
    pub n: usize,
    pub state: FaithfulState,
    pub gram: ComplexMatrix,
    pub j_rep: JRepresentation,
    /// `K̃ = T·Γ^{-1/2}` with `Γ = Gᵀ`, so `‖ξ‖²_f = ξ*Γξ`.
    pub k_rep: ComplexMatrix,
    /// `Γ^{1/2}`: coordinates of `J(x)` in the orthonormalized basis.
    pub gram_sqrt: ComplexMatrix,
    pub sigma4_k: f64,
    pub l_norm_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub domination_c: f64,
    pub gram_min_eigenvalue: f64,
}

impl Factorization {
    /// Coordinates of `J(x)` in an orthonormal basis of `L₂(f)`.
    pub fn apply_j(&self, x: &ComplexMatrix) -> Vec<C64> {
        let xi: Vec<C64> = x.data().to_vec();
        self.gram_sqrt.mul_vec(&xi)
    }

    /// `‖T − K∘J‖` on the canonical basis (max over basis elements).
    pub fn reconstruction_error(&self, op: &MatrixOperator) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n * n {
            let e = ComplexMatrix::unit(n, a / n, a % n);
            let kj = self.k_rep.mul_vec(&self.apply_j(&e));
            let t = op.apply(&e).expect("shapes match");
            let diff: Vec<C64> = kj.iter().zip(&t).map(|(a, b)| a - b).collect();
            worst = worst.max(vec_norm(&diff));
        }
        worst
    }

    /// `2(1+ε)·C`.
    pub fn schatten_capacity_bound(&self) -> f64 {
        2.0 * (1.0 + self.epsilon) * self.domination_c
    }

    /// Passes iff `σ₄(K) ≤ 2(1+ε)·C + 1e-6`.
    pub fn bound_holds(&self) -> bool {
        self.sigma4_k <= self.schatten_capacity_bound() + SUMMING_AUDIT_TOL
    }
}

/// Smallest `ε` allowed for a given `δ`: `(1+δ)^{1/2} − 1`.
pub fn epsilon_for_delta(delta: f64) -> f64 {
    (1.0 + delta).sqrt() - 1.0
}

pub fn gns_factorize(
    op: &MatrixOperator,
    cert: &DominationCertificate,
    delta: f64,
    epsilon: f64,
) -> Result<Factorization> {
    let n = op.n();
    if cert.g.rows() != n {
        return Err(Error::InvalidInput(format!("certificate state is {0}x{0}, operator acts on {n}x{n}", cert.g.rows())));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if epsilon.is_nan() || (1.0 + delta).sqrt() > (1.0 + epsilon) * (1.0 + 1e-15) {
        return Err(Error::Domain(format!(
            "need (1+delta)^(1/2) <= 1+epsilon; delta = {delta} requires epsilon >= {:e}",
            epsilon_for_delta(delta)
        )));
    }
    let state = mix_faithful(&cert.g, delta)?;
    let gram = l2f_gram(&state);
    let gamma = ComplexMatrix::from_fn(n * n, n * n, |a, b| gram[(b, a)]);
    let cutoff = GRAM_CUTOFF_PER_DIM * (n * n) as f64;
    let white = gram_sqrt_inverse(&gamma, cutoff)?;
    let min_eig = white.eigenvalues[0];
    if white.retained_rank < n * n {
        return Err(Error::Conditioning { min_eigenvalue: min_eig, cutoff });
    }
    let k_rep = op.action() * &white.w;
    let sigma4_k = schatten_norm(&k_rep, 4.0)?;
    Ok(Factorization {
        n,
        state,
        gram,
        j_rep: JRepresentation::CoordinateInclusion,
        k_rep,
        gram_sqrt: white.sqrt,
        sigma4_k,
        l_norm_bound: 4.0 * (1.0 + delta) * cert.c,
        epsilon,
        delta,
        domination_c: cert.c,
        gram_min_eigenvalue: min_eig,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub max_ratio: f64,
    pub pass: bool,
    pub trials: usize,
    pub worst: ComplexMatrix,
}

/// Unitary polar factor of `m` (maximizes `Re tr(m* u)` over the operator-norm ball).
fn polar_factor(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let d = svd(m).ok()?;
    if d.singular_values[0] == 0.0 {
        return None;
    }
    Some(&d.left_basis * &d.right_basis.adjoint())
}

/// Checks `‖x‖²_f ≤ ‖x‖²_op` on random `x` and on ascent iterates; passes iff
/// the max ratio is at most `1 + 1e-8`.
pub fn verify_j_contraction(fact: &Factorization, trials: usize, seed: u64) -> ContractionReport {
    let n = fact.n;
    let f = &fact.state;
    let ratio = |x: &ComplexMatrix| {
        let op = crate::linalg::operator_norm(x);
        if op == 0.0 { 0.0 } else { f.norm_sqr(x) / (op * op) }
    };
    let mut worst = ComplexMatrix::identity(n);
    let mut max_ratio = ratio(&worst);
    let mut count = 1;
    let mut probes = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let x = random_complex_matrix(&mut stream_rng(seed, t), n, n);
        let r = ratio(&x);
        count += 1;
        if r > max_ratio {
            max_ratio = r;
            worst = x.clone();
        }
        probes.push((r, x));
    }
    probes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // The form is convex, so linearize and jump to the maximizing unitary.
    for (_, x0) in probes.into_iter().take(8) {
        let mut x = x0;
        for _ in 0..50 {
            let grad = (&f.density * &x).add(&(&x * &f.density));
            let Some(next) = polar_factor(&grad) else { break };
            x = next;
            let r = ratio(&x);
            count += 1;
            if r > max_ratio {
                max_ratio = r;
                worst = x.clone();
            }
        }
    }
    ContractionReport { max_ratio, pass: max_ratio <= 1.0 + J_CONTRACTION_TOL, trials: count, worst }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjointSummingEntry {
    pub family_size: usize,
    pub value: f64,
    /// `true` when the weak norm is exact, so `value` is a true lower bound.
    pub exact_denominator: bool,
    pub holds_summing_bound: bool,
    pub holds_schatten_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjointSummingReport {
    pub p: f64,
    /// `C^{1/2}·‖L‖^{1/2}` with `‖L‖` replaced by `4(1+δ)C`.
    pub summing_bound: f64,
    pub sigma4_k: f64,
    pub entries: Vec<AdjointSummingEntry>,
    /// Every entry with an exact weak norm satisfies both bounds.
    pub pass: bool,
}

/// Sampled lower bounds of `π_{2p,p}(K*)` against `C^{1/2}·(4(1+δ)C)^{1/2}`.
///
/// For `p = 2` the weak norm is exact and the ratio is also checked against
/// `σ₄(K)(1 + 1e-8)`. For other `p` the weak norm is under-estimated and the
/// entries are reported but do not decide `pass`.
pub fn verify_adjoint_summing_bound(
    fact: &Factorization,
    p: f64,
    families: &[Vec<Vec<C64>>],
    dual_opts: &DualOptions,
) -> Result<AdjointSummingReport> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    let k_adj = fact.k_rep.adjoint();
    let summing_bound = (fact.domination_c * fact.l_norm_bound).sqrt();
    let mut entries = Vec::with_capacity(families.len());
    for family in families {
        let est = summing_lower_bound_hilbert(&k_adj, family, 2.0 * p, p, dual_opts)?;
        let exact = est.kind != EstimateKind::HeuristicRatio;
        entries.push(AdjointSummingEntry {
            family_size: family.len(),
            value: est.value,
            exact_denominator: exact,
            holds_summing_bound: est.value <= summing_bound + SUMMING_AUDIT_TOL,
            holds_schatten_bound: p != 2.0 || est.value <= fact.sigma4_k * (1.0 + 1e-8),
        });
    }
    let pass = entries
        .iter()
        .filter(|e| e.exact_denominator)
        .all(|e| e.holds_summing_bound && e.holds_schatten_bound);
    Ok(AdjointSummingReport { p, summing_bound, sigma4_k: fact.sigma4_k, entries, pass })
}

/// Canonical basis of `ℓ₂^m` plus `random` seeded Gaussian families of `size` vectors.
pub fn audit_families(m: usize, random: usize, size: usize, seed: u64) -> Vec<Vec<Vec<C64>>> {
    let mut out = vec![crate::summing::canonical_basis(m)];
    for r in 0..random as u64 {
        let z = random_complex_matrix(&mut stream_rng(seed, r), m, size);
        out.push((0..size).map(|j| z.column(j)).collect());
    }
    out
}

/// `true` when the reconstruction residual is within tolerance.
pub fn reconstruction_ok(fact: &Factorization, op: &MatrixOperator) -> bool {
    fact.reconstruction_error(op) <= FACTORIZATION_RESIDUAL_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, schatten_norm};
    use crate::rng::random_hermitian;
    use crate::summing::{find_pietsch_domination, verify_certificate, InnerSearchOptions};

    fn random_density(seed: u64, n: usize) -> ComplexMatrix {
        let b = random_complex_matrix(&mut stream_rng(seed, 0), n, n);
        let g = &b * &b.adjoint();
        g.scale(1.0 / g.trace().re)
    }

    fn trivial_cert(g: ComplexMatrix, c: f64) -> DominationCertificate {
        DominationCertificate {
            g,
            c,
            tested_margin: 0.0,
            test_count: 0,
            seed: 0,
            converged: true,
            cuts: vec![],
            history: vec![],
        }
    }

    #[test]
    fn mixing_examples() {
        let i3 = ComplexMatrix::identity(3).scale(1.0 / 3.0);
        for delta in [1e-3, 0.5, 4.0] {
            assert!(mix_faithful(&i3, delta).unwrap().density.sub(&i3).frobenius_norm() < 1e-15);
        }
        let f = mix_faithful(&ComplexMatrix::unit(2, 0, 0), 1.0).unwrap();
        assert!(f.density.sub(&ComplexMatrix::from_diag(&[0.75, 0.25])).frobenius_norm() < 1e-15);
        assert!(matches!(mix_faithful(&i3, 0.0), Err(Error::Domain(_))));
        assert!(mix_faithful(&ComplexMatrix::identity(2), 0.1).is_err());
    }

    #[test]
    fn mixing_keeps_spectrum_away_from_zero() {
        for s in 0..20 {
            let n = 2 + (s as usize % 3);
            let b = random_complex_matrix(&mut stream_rng(s, 1), n, 1);
            let g = &b * &b.adjoint();
            let g = g.scale(1.0 / g.trace().re);
            let f = mix_faithful(&g, 1e-3).unwrap();
            let expect = g.add(&ComplexMatrix::identity(n).scale(1e-3 / n as f64)).scale(1.0 / 1.001);
            assert!(f.density.sub(&expect).max_abs() < 1e-12);
            assert!(eigh(&f.density).min_value() >= f.faithfulness_margin() - 1e-10);
            assert!((f.density.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_for_normalized_trace() {
        for n in 1..=4 {
            let f = mix_faithful(&ComplexMatrix::identity(n).scale(1.0 / n as f64), 0.1).unwrap();
            let g = l2f_gram(&f);
            // Direct expansion: tr((E_ij E_lk + E_lk E_ij)/2)/n.
            for a in 0..n * n {
                for b in 0..n * n {
                    let ea = ComplexMatrix::unit(n, a / n, a % n);
                    let eb = ComplexMatrix::unit(n, b / n, b % n);
                    let sym = (&ea * &eb.adjoint()).add(&(&eb.adjoint() * &ea)).scale(0.5);
                    let want = sym.trace() / n as f64;
                    assert!((g[(a, b)] - want).norm() < 1e-15);
                }
            }
            assert!(g.sub(&ComplexMatrix::identity(n * n).scale(1.0 / n as f64)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn gram_quadratic_form_matches_norm() {
        let f = mix_faithful(&random_density(4, 3), 1e-2).unwrap();
        let g = l2f_gram(&f);
        let gamma = ComplexMatrix::from_fn(9, 9, |a, b| g[(b, a)]);
        let lam_min = eigh(&gamma).min_value();
        assert!(lam_min >= f.faithfulness_margin() * (1.0 - 1e-9));
        for t in 0..1000 {
            let x = random_complex_matrix(&mut stream_rng(5, t), 3, 3);
            let xi = x.data().to_vec();
            let q: C64 = xi.iter().zip(gamma.mul_vec(&xi)).map(|(a, b)| a.conj() * b).sum();
            let direct = f.norm_sqr(&x);
            assert!(direct > 0.0);
            assert!((q.re - direct).abs() < 1e-12 * direct.max(1.0));
            assert!(direct >= lam_min * x.frobenius_norm().powi(2) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn zero_and_scalar_factorizations() {
        let zero = MatrixOperator::zero(2, 3);
        let cert = find_pietsch_domination(&zero, 10, &InnerSearchOptions::default(), 0).unwrap();
        let fact = gns_factorize(&zero, &cert, 1e-3, 1e-3).unwrap();
        assert_eq!(fact.sigma4_k, 0.0);
        assert!(fact.k_rep.max_abs() == 0.0);

        let id = MatrixOperator::new(1, ComplexMatrix::identity(1)).unwrap();
        let delta = 1.1f64.powi(2) - 1.0;
        let fact = gns_factorize(&id, &trivial_cert(ComplexMatrix::identity(1), 1.0), delta, 0.1).unwrap();
        assert!((fact.sigma4_k - 1.0).abs() < 1e-12);
        assert!(fact.sigma4_k <= 2.0 * 1.1);
        assert!((fact.k_rep[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(reconstruction_ok(&fact, &id));
    }

    #[test]
    fn coupling_precondition() {
        let id = MatrixOperator::new(1, ComplexMatrix::identity(1)).unwrap();
        let cert = trivial_cert(ComplexMatrix::identity(1), 1.0);
        assert!(matches!(gns_factorize(&id, &cert, 0.5, 0.1), Err(Error::Domain(_))));
        assert!(gns_factorize(&id, &cert, 1e-3, epsilon_for_delta(1e-3)).is_ok());
    }

    #[test]
    fn random_operator_pipeline() {
        let mut rng = stream_rng(21, 0);
        let op = MatrixOperator::new(3, random_complex_matrix(&mut rng, 4, 9)).unwrap();
        let cert = find_pietsch_domination(&op, 200, &InnerSearchOptions::default(), 21).unwrap();
        assert!(verify_certificate(&op, &cert, 10_000, 5).unwrap().pass);
        let fact = gns_factorize(&op, &cert, 1e-3, epsilon_for_delta(1e-3)).unwrap();
        assert!(fact.reconstruction_error(&op) <= 1e-8);
        assert!(fact.bound_holds(), "{} vs {}", fact.sigma4_k, fact.schatten_capacity_bound());
        let adj = schatten_norm(&fact.k_rep.adjoint(), 4.0).unwrap();
        assert!((adj - fact.sigma4_k).abs() < 1e-10);
        assert!(verify_j_contraction(&fact, 1000, 2).pass);
    }

    #[test]
    fn j_contraction_examples() {
        let f2 = mix_faithful(&ComplexMatrix::identity(2).scale(0.5), 1e-3).unwrap();
        assert!((f2.norm_sqr(&ComplexMatrix::identity(2)) - 1.0).abs() < 1e-15);
        assert!((f2.norm_sqr(&ComplexMatrix::unit(2, 0, 0)) - 0.5).abs() < 1e-15);

        let op = MatrixOperator::new(4, random_complex_matrix(&mut stream_rng(3, 3), 2, 16)).unwrap();
        let fact = gns_factorize(&op, &trivial_cert(random_density(8, 4), 1.0), 1e-3, 1e-3).unwrap();
        let report = verify_j_contraction(&fact, 1000, 9);
        assert!(report.max_ratio <= 1.0 + 1e-10, "{}", report.max_ratio);
        // A unitary attains the ratio 1.
        assert!(report.max_ratio >= 1.0 - 1e-9);
    }

    #[test]
    fn adjoint_audit_on_scalar_identity() {
        let id = MatrixOperator::new(1, ComplexMatrix::identity(1)).unwrap();
        let fact = gns_factorize(&id, &trivial_cert(ComplexMatrix::identity(1), 1.0), 1e-3, 1e-3).unwrap();
        let report = verify_adjoint_summing_bound(&fact, 2.0, &audit_families(1, 0, 1, 0), &DualOptions::default()).unwrap();
        assert!((report.entries[0].value - 1.0).abs() < 1e-12);
        assert!((report.summing_bound - (4.0 * 1.001f64).sqrt()).abs() < 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn adjoint_audit_on_hermitian_density() {
        let op = MatrixOperator::new(2, random_hermitian(&mut stream_rng(1, 1), 4)).unwrap();
        let cert = find_pietsch_domination(&op, 150, &InnerSearchOptions::default(), 1).unwrap();
        let fact = gns_factorize(&op, &cert, 1e-3, 1e-3).unwrap();
        let fams = audit_families(4, 20, 6, 3);
        let report = verify_adjoint_summing_bound(&fact, 2.0, &fams, &DualOptions::default()).unwrap();
        assert!(report.pass);
        assert!(report.entries.iter().all(|e| e.exact_denominator));
    }
}
