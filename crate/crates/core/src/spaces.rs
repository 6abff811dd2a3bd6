//! The normed spaces `B(ℓ₂ⁿ)` and `HS(ℓ₂ⁿ)`, linear maps out of `Mₙ(ℂ)`, and
//! rank-one estimates of the dual (trace-class) ball.
//!
//! The canonical basis `{E_ij}` of `Mₙ(ℂ)` is ordered row-major: coordinate
//! `i·n + j` holds the `(i, j)` entry. Every module vectorizes matrices this way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lp_norm, schatten_norm, svd, vec_dot, vec_norm, ComplexMatrix, C64};
use crate::rng::{random_unit_vector, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTag {
    /// Largest singular value.
    Operator,
    /// Frobenius norm.
    HilbertSchmidt,
    /// Sum of singular values.
    Trace,
    /// Euclidean norm of a coordinate vector.
    Euclidean,
}

/// A square matrix viewed as an element of `B(ℓ₂ⁿ)`, `HS(ℓ₂ⁿ)` or `S₁ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSpaceElement {
    matrix: ComplexMatrix,
    norm_tag: NormTag,
}

impl MatrixSpaceElement {
    pub fn new(matrix: ComplexMatrix, norm_tag: NormTag) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("matrix space elements must be square".into()));
        }
        if norm_tag == NormTag::Euclidean {
            return Err(Error::InvalidInput("euclidean is not a matrix norm".into()));
        }
        Ok(Self { matrix, norm_tag })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn norm_tag(&self) -> NormTag {
        self.norm_tag
    }

    pub fn norm(&self) -> f64 {
        let p = match self.norm_tag {
            NormTag::Operator => f64::INFINITY,
            NormTag::HilbertSchmidt | NormTag::Euclidean => 2.0,
            NormTag::Trace => 1.0,
        };
        schatten_norm(&self.matrix, p).expect("valid Schatten index")
    }
}

/// Linear map `Mₙ(ℂ) → ℂ^m` stored as its `m × n²` matrix in the basis `{E_ij}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct MatrixOperator {
    n: usize,
    m: usize,
    action: ComplexMatrix,
    domain: NormTag,
    range: NormTag,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorJson {
    n: usize,
    m: usize,
    action: ComplexMatrix,
    domain: NormTag,
    range: NormTag,
}

impl TryFrom<OperatorJson> for MatrixOperator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        MatrixOperator::with_norms(j.n, j.action, j.domain, j.range).and_then(|op| {
            if op.m != j.m {
                Err(Error::InvalidInput(format!("declared m = {} but action has {} rows", j.m, op.m)))
            } else {
                Ok(op)
            }
        })
    }
}

impl From<MatrixOperator> for OperatorJson {
    fn from(op: MatrixOperator) -> Self {
        OperatorJson { n: op.n, m: op.m, action: op.action, domain: op.domain, range: op.range }
    }
}

impl MatrixOperator {
    /// Map from `B(ℓ₂ⁿ)` into Euclidean `ℂ^m`.
    pub fn new(n: usize, action: ComplexMatrix) -> Result<Self> {
        Self::with_norms(n, action, NormTag::Operator, NormTag::Euclidean)
    }

    pub fn with_norms(n: usize, action: ComplexMatrix, domain: NormTag, range: NormTag) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("domain size n must be positive".into()));
        }
        if action.cols() != n * n {
            return Err(Error::InvalidInput(format!(
                "action has {} columns, expected n² = {}",
                action.cols(),
                n * n
            )));
        }
        if !matches!(range, NormTag::Euclidean | NormTag::HilbertSchmidt) {
            return Err(Error::InvalidInput("range must be a Hilbert space".into()));
        }
        let m = action.rows();
        Ok(Self { n, m, action, domain, range })
    }

    /// Operator given by its values on the basis matrices `E_ij`.
    pub fn from_fn(n: usize, m: usize, f: impl Fn(&ComplexMatrix) -> Vec<C64>) -> Result<Self> {
        let mut columns = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let col = f(&ComplexMatrix::unit(n, i, j));
                if col.len() != m {
                    return Err(Error::InvalidInput(format!("image has length {}, expected {m}", col.len())));
                }
                columns.push(col);
            }
        }
        Self::new(n, ComplexMatrix::from_columns(m, &columns))
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self::new(n, ComplexMatrix::zeros(m, n * n)).expect("valid shape")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn action(&self) -> &ComplexMatrix {
        &self.action
    }

    pub fn domain_norm(&self) -> NormTag {
        self.domain
    }

    pub fn range_norm(&self) -> NormTag {
        self.range
    }

    pub fn is_zero(&self) -> bool {
        self.action.max_abs() == 0.0
    }

    /// `T(x)` as a coordinate vector of length `m`.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<Vec<C64>> {
        if x.rows() != self.n || x.cols() != self.n {
            return Err(Error::InvalidInput(format!(
                "expected a {0}x{0} matrix, got {1}x{2}",
                self.n,
                x.rows(),
                x.cols()
            )));
        }
        Ok(self.action.mul_vec(x.data()))
    }

    /// `‖T(x)‖₂`.
    pub fn apply_norm(&self, x: &ComplexMatrix) -> Result<f64> {
        Ok(vec_norm(&self.apply(x)?))
    }

    /// `T*(w)` reshaped to an `n×n` matrix, so that `⟨w, T x⟩ = tr(T*(w)* x)`.
    pub fn adjoint_apply(&self, w: &[C64]) -> ComplexMatrix {
        ComplexMatrix::from_vectorized(self.n, &self.action.adjoint_mul_vec(w))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { action: self.action.scale(s), ..self.clone() }
    }
}

/// `Iₙ : B(ℓ₂ⁿ) → HS(ℓ₂ⁿ)`, the formal identity.
pub fn make_identity_in(n: usize) -> MatrixOperator {
    MatrixOperator::with_norms(n, ComplexMatrix::identity(n * n), NormTag::Operator, NormTag::HilbertSchmidt)
        .expect("n >= 1")
}

/// `‖Iₙ‖ = sup{‖x‖_HS : ‖x‖_op ≤ 1} = √n`, attained at every unitary.
pub fn norm_of_in(n: usize) -> f64 {
    (n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, max_iters: 500 }
    }
}

/// Best rank-one functional found by [`dual_sup_trace_ball`].
#[derive(Clone, Debug)]
pub struct DualEstimate {
    pub value: f64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

/// Lower estimate of `sup{(Σ|tr(ξ x_i)|^p)^{1/p} : ‖ξ‖₁ ≤ 1}`.
///
/// The supremum of a convex function over the trace-class ball is attained at a
/// rank-one extreme point `ξ = v u*`, for which `tr(ξ x) = u* x v`. Each start
/// runs alternating maximization over `u` and `v`; every step is monotone.
/// Starts are the top singular pairs of the largest member and of the sum,
/// then `opts.restarts` random pairs drawn from streams `(seed, r)`.
pub fn dual_sup_trace_ball(family: &[ComplexMatrix], p: f64, opts: &DualOptions) -> Result<DualEstimate> {
    let n = check_square_family(family)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("summing index p = {p} must be >= 1")));
    }

    let mut starts: Vec<(Vec<C64>, Vec<C64>)> = Vec::new();
    if let Some(big) = family
        .iter()
        .max_by(|a, b| a.frobenius_norm().total_cmp(&b.frobenius_norm()))
    {
        starts.push(top_singular_pair(big)?);
    }
    let sum = family.iter().skip(1).fold(family[0].clone(), |acc, x| acc.add(x));
    if sum.max_abs() > 0.0 {
        starts.push(top_singular_pair(&sum)?);
    }
    for r in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, r as u64);
        starts.push((random_unit_vector(&mut rng, n), random_unit_vector(&mut rng, n)));
    }

    let mut best: Option<DualEstimate> = None;
    for (u, v) in starts {
        let est = alternate(family, p, u, v, opts.max_iters);
        if best.as_ref().map_or(true, |b| est.value > b.value) {
            best = Some(est);
        }
    }
    Ok(best.expect("at least one start"))
}

pub(crate) fn check_square_family(family: &[ComplexMatrix]) -> Result<usize> {
    let first = family
        .first()
        .ok_or_else(|| Error::InvalidInput("family must be nonempty".into()))?;
    let n = first.rows();
    if family.iter().any(|x| x.rows() != n || x.cols() != n) {
        return Err(Error::InvalidInput(format!("family members must all be {n}x{n}")));
    }
    Ok(n)
}

fn top_singular_pair(x: &ComplexMatrix) -> Result<(Vec<C64>, Vec<C64>)> {
    let d = svd(x)?;
    Ok((d.left_basis.column(0), d.right_basis.column(0)))
}

fn pairing_values(family: &[ComplexMatrix], u: &[C64], v: &[C64]) -> Vec<C64> {
    family.iter().map(|x| vec_dot(u, &x.mul_vec(v))).collect()
}

fn objective(values: &[C64], p: f64) -> f64 {
    lp_norm(&values.iter().map(|c| c.norm()).collect::<Vec<_>>(), p)
}

/// `normalize(Σ |c_i|^{p-2} conj(c_i) a_i)`, the maximizer of the linearized objective.
pub(crate) fn ascent_direction(vectors: &[Vec<C64>], coeffs: &[C64], p: f64) -> Option<Vec<C64>> {
    let dim = vectors[0].len();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (a, c) in vectors.iter().zip(coeffs) {
        let r = c.norm();
        if r == 0.0 {
            continue;
        }
        let w = (r / scale).powf(p - 1.0) * (c.conj() / r);
        out.iter_mut().zip(a).for_each(|(o, x)| *o += w * x);
    }
    let norm = vec_norm(&out);
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    out.iter_mut().for_each(|z| *z /= norm);
    Some(out)
}

fn alternate(family: &[ComplexMatrix], p: f64, mut u: Vec<C64>, mut v: Vec<C64>, max_iters: usize) -> DualEstimate {
    let mut value = objective(&pairing_values(family, &u, &v), p);
    for _ in 0..max_iters {
        let images: Vec<Vec<C64>> = family.iter().map(|x| x.mul_vec(&v)).collect();
        let coeffs: Vec<C64> = images.iter().map(|a| vec_dot(&u, a)).collect();
        if let Some(nu) = ascent_direction(&images, &coeffs, p) {
            u = nu;
        }
        let pulls: Vec<Vec<C64>> = family.iter().map(|x| x.adjoint_mul_vec(&u)).collect();
        // |u* x v| = |v* b| with b = x* u, so v plays the role of u.
        let coeffs: Vec<C64> = pulls.iter().map(|b| vec_dot(&v, b)).collect();
        if let Some(nv) = ascent_direction(&pulls, &coeffs, p) {
            v = nv;
        }
        let next = objective(&pairing_values(family, &u, &v), p);
        let improved = next - value;
        value = value.max(next);
        if improved <= 1e-14 * value.max(1e-300) {
            break;
        }
    }
    DualEstimate { value, u, v }
}
