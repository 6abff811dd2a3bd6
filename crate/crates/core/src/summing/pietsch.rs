//! Cutting-plane search for a Pietsch domination state.
//!
//! Given `T` on `(Mₙ, ‖·‖_op)`, look for a density matrix `g` and the smallest
//! `C` with `‖Tx‖ ≤ C·tr(g|x|)` on Hermitian `x`. With `h = C·g` the master
//! problem on a finite cut set `{x_k}` is the linear program over the PSD cone
//!
//! ```text
//! minimize tr(h)  subject to  tr(h·|x_k|) ≥ ‖Tx_k‖,  h ⪰ 0,
//! ```
//!
//! solved here by a log-barrier Newton method in an orthonormal basis of the
//! `n²`-dimensional real space of Hermitian matrices.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CERTIFICATE_PASS_TOL, CUT_GAP_TOL, CUT_VIOLATION_STOP};
use crate::error::{Error, Result};
use crate::linalg::{eigh, solve_spd, vec_dot, vec_norm, ComplexMatrix, C64};
use crate::rng::{random_unitary, stream_rng};
use crate::spaces::{MatrixOperator, NormTag};

/// Violation search: ascent over unitary frames `x = U·diag(ε)·U*`, signs `ε` chosen exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSearchOptions {
    pub starts: usize,
    /// Accepted steps per ascent.
    pub steps: usize,
    pub step0: f64,
    /// Step multiplier after an accepted step.
    pub growth: f64,
    /// The ascent stops once backtracking drives the step below this.
    pub min_step: f64,
}

impl Default for InnerSearchOptions {
    fn default() -> Self {
        Self { starts: 8, steps: 200, step0: 0.1, growth: 1.5, min_step: 1e-9 }
    }
}

/// One round of the cutting-plane loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutRound {
    pub cuts: usize,
    /// Optimal value of the master problem; nondecreasing as cuts are added.
    pub master_c: f64,
    /// Smallest `sup ‖Tx‖/tr(g|x|)` found over the states queried so far; nonincreasing.
    pub best_upper: f64,
    pub violation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominationCertificate {
    pub g: ComplexMatrix,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "margin")]
    pub tested_margin: f64,
    pub test_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub cuts: Vec<ComplexMatrix>,
    #[serde(default)]
    pub history: Vec<CutRound>,
}

impl DominationCertificate {
    /// `‖Tx‖ − C·tr(g|x|)`.
    pub fn violation(&self, op: &MatrixOperator, x: &ComplexMatrix) -> Result<f64> {
        Ok(op.apply_norm(x)? - self.c * trace_weighted_abs(&self.g, x))
    }

    /// Density-matrix checks: Hermitian, PSD and unit trace within `tol`.
    pub fn check_state(&self, tol: f64) -> Result<()> {
        check_density(&self.g, tol)
    }
}

pub(crate) fn check_density(g: &ComplexMatrix, tol: f64) -> Result<()> {
    if !g.is_square() {
        return Err(Error::InvalidInput("state must be square".into()));
    }
    if g.hermitian_defect() > tol {
        return Err(Error::InvalidInput("state is not Hermitian".into()));
    }
    let min = eigh(g).min_value();
    if min < -tol {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let tr = g.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidInput(format!("state has trace {tr}, expected 1")));
    }
    Ok(())
}

/// `tr(g|x|)` for Hermitian `x`.
pub fn trace_weighted_abs(g: &ComplexMatrix, x: &ComplexMatrix) -> f64 {
    let e = eigh(x);
    let n = x.rows();
    let mut total = 0.0;
    for (l, &lam) in e.values.iter().enumerate() {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += (e.vectors[(i, l)].conj() * g[(i, j)] * e.vectors[(j, l)]).re;
            }
        }
        total += lam.abs() * q;
    }
    total
}

// Coordinates of a Hermitian matrix in the basis
// E_ii, (E_ij + E_ji)/√2, i(E_ij − E_ji)/√2 (i < j).
fn herm_coords(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(a[(i, i)].re);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out.push(std::f64::consts::SQRT_2 * z.re);
            out.push(std::f64::consts::SQRT_2 * z.im);
        }
    }
    out
}

fn herm_from_coords(n: usize, y: &[f64]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = C64::new(y[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = C64::new(y[k], y[k + 1]) * std::f64::consts::FRAC_1_SQRT_2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

fn herm_basis(n: usize) -> Vec<ComplexMatrix> {
    (0..n * n)
        .map(|a| {
            let mut y = vec![0.0; n * n];
            y[a] = 1.0;
            herm_from_coords(n, &y)
        })
        .collect()
}

/// Log-barrier Newton solver over the cut polytope intersected with the PSD cone.
struct Barrier<'a> {
    n: usize,
    dim: usize,
    basis: Vec<ComplexMatrix>,
    cuts: &'a [Vec<f64>],
    /// `tr(h)` coefficients.
    c: Vec<f64>,
}

/// `φ(y) = t·tr(h) − Σ log(tr(h a_k) − 1) − log det h − w·log(U − tr(h))`.
#[derive(Clone, Copy)]
struct BarrierTerms {
    t: f64,
    upper: Option<(f64, f64)>,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

impl<'a> Barrier<'a> {
    fn new(n: usize, cuts: &'a [Vec<f64>]) -> Self {
        let dim = n * n;
        Self { n, dim, basis: herm_basis(n), cuts, c: (0..dim).map(|a| if a < n { 1.0 } else { 0.0 }).collect() }
    }

    fn value(&self, y: &[f64], terms: BarrierTerms) -> Option<f64> {
        let tr = dot(&self.c, y);
        let mut val = terms.t * tr;
        if let Some((u, w)) = terms.upper {
            if tr >= u {
                return None;
            }
            val -= w * (u - tr).ln();
        }
        for a in self.cuts {
            let s = dot(a, y) - 1.0;
            if s <= 0.0 {
                return None;
            }
            val -= s.ln();
        }
        let e = eigh(&herm_from_coords(self.n, y));
        if e.min_value() <= 0.0 {
            return None;
        }
        Some(val - e.values.iter().map(|l| l.ln()).sum::<f64>())
    }

    /// Damped Newton from a strictly feasible `y` until the decrement is below `tol`.
    fn minimize(&self, y: &mut Vec<f64>, terms: BarrierTerms, tol: f64) -> Result<()> {
        let dim = self.dim;
        for _ in 0..200 {
            let hinv = eigh(&herm_from_coords(self.n, y)).apply_fn(|l| 1.0 / l);
            let mut grad: Vec<f64> = self.c.iter().map(|v| terms.t * v).collect();
            let mut hess = vec![0.0; dim * dim];
            for (gv, gi) in grad.iter_mut().zip(herm_coords(&hinv)) {
                *gv -= gi;
            }
            if let Some((u, w)) = terms.upper {
                let r = u - dot(&self.c, y);
                for i in 0..dim {
                    grad[i] += w * self.c[i] / r;
                    for j in 0..dim {
                        hess[i * dim + j] += w * self.c[i] * self.c[j] / (r * r);
                    }
                }
            }
            for a in self.cuts {
                let s = dot(a, y) - 1.0;
                for i in 0..dim {
                    grad[i] -= a[i] / s;
                    let ai = a[i] / (s * s);
                    for j in 0..dim {
                        hess[i * dim + j] += ai * a[j];
                    }
                }
            }
            for (b, bm) in self.basis.iter().enumerate() {
                let col = herm_coords(&(&(&hinv * bm) * &hinv));
                for a in 0..dim {
                    hess[a * dim + b] += col[a];
                }
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = solve_spd(&hess, &rhs).or_else(|| {
                let reg = 1e-12 * (0..dim).map(|i| hess[i * dim + i]).fold(0.0, f64::max);
                let mut h2 = hess.clone();
                (0..dim).for_each(|i| h2[i * dim + i] += reg);
                solve_spd(&h2, &rhs)
            });
            let Some(step) = step else {
                return Err(Error::Solver(format!(
                    "singular Newton system with {} cuts at barrier parameter {:e}",
                    self.cuts.len(),
                    terms.t
                )));
            };
            let decrement = -dot(&grad, &step);
            if decrement / 2.0 < tol {
                return Ok(());
            }
            let f0 = self.value(y, terms).ok_or_else(|| Error::Solver("iterate left the barrier domain".into()))?;
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
                if let Some(f1) = self.value(&trial, terms) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        *y = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    /// Master problem: minimize `tr(h)` subject to `tr(h a_k) ≥ 1`, `h ⪰ 0`.
    /// Returns `h` on the central path with duality gap below `1e-11·tr(h)`.
    fn lower_bound(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let min_trace = self.cuts.iter().map(|a| a[..n].iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
        if !(min_trace > 0.0) {
            return Err(Error::Solver(format!("cut set with {} cuts has a zero-trace member", self.cuts.len())));
        }
        let mut y: Vec<f64> = self.c.iter().map(|v| v * 2.0 / min_trace).collect();
        let weight = (self.cuts.len() + n) as f64;
        let mut t = weight / dot(&self.c, &y);
        for _ in 0..80 {
            self.minimize(&mut y, BarrierTerms { t, upper: None }, 1e-11)?;
            if weight / t <= 1e-11 * dot(&self.c, &y) {
                break;
            }
            t *= 8.0;
        }
        Ok(y)
    }

    /// Analytic center of `{h : tr(h a_k) > 1, h ≻ 0, tr(h) < upper}`, started from
    /// a push of the master solution `y_low` into the interior.
    fn center(&self, y_low: &[f64], upper: f64) -> Result<Vec<f64>> {
        let low = dot(&self.c, y_low);
        let theta = 0.5 * (upper / low - 1.0);
        let eta = (upper - (1.0 + theta) * low) / (2.0 * self.n as f64);
        let mut y: Vec<f64> = y_low.iter().zip(&self.c).map(|(v, c)| (1.0 + theta) * v + eta * c).collect();
        let w = self.cuts.len() as f64;
        self.minimize(&mut y, BarrierTerms { t: 0.0, upper: Some((upper, w)) }, 1e-9)?;
        Ok(y)
    }
}

/// `x = U·diag(ε)·U*` with `ε ∈ {−1, 0, 1}ⁿ`.
#[derive(Clone, Debug)]
struct AscentResult {
    u: ComplexMatrix,
    eps: Vec<f64>,
    value: f64,
    evaluations: usize,
}

impl AscentResult {
    fn x(&self) -> ComplexMatrix {
        ComplexMatrix::spectral(&self.u, &self.eps)
    }
}

fn rank_one(v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
}

fn quad_form(g: &ComplexMatrix, v: &[C64]) -> f64 {
    vec_dot(v, &g.mul_vec(v)).re
}

/// Best nonzero eigenvalue pattern for the eigenvectors `u`.
///
/// With the eigenvectors fixed the violation is convex on every orthant of the
/// eigenvalues, so its maximum over `[−1, 1]ⁿ` sits at a vertex of `{−1, 0, 1}ⁿ`.
fn best_signs(op: &MatrixOperator, g: &ComplexMatrix, c: f64, u: &ComplexMatrix) -> (Vec<f64>, f64) {
    let n = u.rows();
    let cols: Vec<Vec<C64>> = (0..n).map(|i| u.column(i)).collect();
    let images: Vec<Vec<C64>> = cols.iter().map(|v| op.apply(&rank_one(v)).expect("square unitary")).collect();
    let weights: Vec<f64> = cols.iter().map(|v| c * quad_form(g, v)).collect();
    let value = |eps: &[f64]| {
        let mut sum = vec![C64::new(0.0, 0.0); op.m()];
        let mut pen = 0.0;
        for ((e, t), w) in eps.iter().zip(&images).zip(&weights) {
            if *e != 0.0 {
                sum.iter_mut().zip(t).for_each(|(s, z)| *s += z * *e);
                pen += w;
            }
        }
        vec_norm(&sum) - pen
    };
    if n <= MAX_ENUMERATED_DIM {
        let mut best = (vec![0.0; n], f64::NEG_INFINITY);
        let mut eps = vec![0.0; n];
        // Base-3 digits 0, 1, 2 stand for 0, 1, −1; code 0 is the zero pattern.
        for code in 1..3usize.pow(n as u32) {
            let mut k = code;
            for e in eps.iter_mut() {
                *e = [0.0, 1.0, -1.0][k % 3];
                k /= 3;
            }
            let v = value(&eps);
            if v > best.1 {
                best = (eps.clone(), v);
            }
        }
        best
    } else {
        // Coordinate ascent from the all-ones pattern.
        let mut eps = vec![1.0; n];
        let mut val = value(&eps);
        loop {
            let mut improved = false;
            for i in 0..n {
                for cand in [-1.0, 0.0, 1.0] {
                    let old = eps[i];
                    eps[i] = cand;
                    let v = value(&eps);
                    if v > val + 1e-15 * val.abs() {
                        val = v;
                        improved = true;
                    } else {
                        eps[i] = old;
                    }
                }
            }
            if !improved {
                return (eps, val);
            }
        }
    }
}

const MAX_ENUMERATED_DIM: usize = 8;

/// Ascent direction for `U ↦ φ(U·diag(ε)·U*)` along `U ← exp(A)·U`:
/// `A = [G, x] − C·[g, |x|]` with `G` the gradient of `‖Tx‖`.
fn orbit_direction(op: &MatrixOperator, g: &ComplexMatrix, c: f64, u: &ComplexMatrix, eps: &[f64]) -> ComplexMatrix {
    let n = u.rows();
    let x = ComplexMatrix::spectral(u, eps);
    let ax = ComplexMatrix::spectral(u, &eps.iter().map(|e| e.abs()).collect::<Vec<_>>());
    let y = op.apply(&x).expect("square unitary");
    let ny = vec_norm(&y);
    let comm = |a: &ComplexMatrix, b: &ComplexMatrix| (a * b).sub(&(b * a));
    let mut dir = ComplexMatrix::zeros(n, n);
    if ny > 0.0 {
        let grad = op.adjoint_apply(&y.iter().map(|z| z / ny).collect::<Vec<_>>()).hermitian_part();
        dir = comm(&grad, &x);
    }
    dir.sub(&comm(g, &ax).scale(c))
}

/// `exp(t·a)` for skew-Hermitian `a`.
fn expm_skew(a: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let k = a.scale_c(C64::new(0.0, -1.0));
    let e = eigh(&k);
    let n = a.rows();
    let phases: Vec<C64> = e.values.iter().map(|l| C64::from_polar(1.0, t * l)).collect();
    let v = &e.vectors;
    ComplexMatrix::from_fn(n, n, |i, j| (0..n).map(|l| v[(i, l)] * phases[l] * v[(j, l)].conj()).sum())
}

fn orbit_value(op: &MatrixOperator, g: &ComplexMatrix, c: f64, u: &ComplexMatrix, eps: &[f64]) -> f64 {
    let x = ComplexMatrix::spectral(u, eps);
    let abs_part: f64 = (0..u.cols()).map(|i| eps[i].abs() * quad_form(g, &u.column(i))).sum();
    op.apply_norm(&x).expect("square unitary") - c * abs_part
}

/// Alternate exact sign selection with monotone rotation of the eigenvectors.
fn ascend(op: &MatrixOperator, g: &ComplexMatrix, c: f64, start: ComplexMatrix, opts: &InnerSearchOptions) -> AscentResult {
    let mut u = start;
    let (mut eps, mut val) = best_signs(op, g, c, &u);
    let mut evaluations = 1;
    let mut eta = opts.step0;
    for _ in 0..opts.steps {
        let dir = orbit_direction(op, g, c, &u, &eps);
        let dn = dir.frobenius_norm();
        if dn <= 1e-14 * (1.0 + c) {
            break;
        }
        let mut moved = false;
        while eta > opts.min_step {
            let cand = &expm_skew(&dir, eta / dn) * &u;
            let mut cv = orbit_value(op, g, c, &cand, &eps);
            let (ce, sv) = best_signs(op, g, c, &cand);
            evaluations += 1;
            let mut cand_eps = eps.clone();
            if sv > cv {
                cv = sv;
                cand_eps = ce;
            }
            if cv > val {
                u = cand;
                eps = cand_eps;
                val = cv;
                eta *= opts.growth;
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    AscentResult { u, eps, value: val, evaluations }
}

/// Structured starting frames: the identity, the eigenbasis of `g`, and the
/// eigenbases of `T*w` for the top singular directions `w` of `T`.
fn structured_starts(op: &MatrixOperator, g: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let mut out = vec![ComplexMatrix::identity(op.n()), eigh(g).vectors];
    if let Ok(d) = crate::linalg::svd(op.action()) {
        for l in 0..d.singular_values.len().min(4) {
            if d.singular_values[l] <= 0.0 {
                break;
            }
            out.push(eigh(&op.adjoint_apply(&d.left_basis.column(l))).vectors);
        }
    }
    out
}

/// Multi-start search for the largest violation; results sorted by value, descending.
///
/// `samples` random frames are scored by their best sign pattern. Ascents
/// start from the structured frames, `opts.starts` fresh random frames, and the
/// best `opts.starts` of the scored samples.
fn search_violations(
    op: &MatrixOperator,
    g: &ComplexMatrix,
    c: f64,
    opts: &InnerSearchOptions,
    samples: usize,
    seed: u64,
    round: u64,
    warm: &[ComplexMatrix],
) -> (Vec<AscentResult>, usize) {
    let n = op.n();
    let frame = |stream: u64| random_unitary(&mut stream_rng(seed, stream), n);
    let mut probes: Vec<(f64, ComplexMatrix)> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let u = frame((round << 32) | (1 << 31) | s);
            (best_signs(op, g, c, &u).1, u)
        })
        .collect();
    probes.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut starts = structured_starts(op, g);
    starts.extend(warm.iter().cloned());
    starts.extend((0..opts.starts as u64).map(|s| frame((round << 32) | s)));
    starts.extend(probes.into_iter().take(opts.starts).map(|(_, u)| u));
    let mut results: Vec<AscentResult> = starts.into_par_iter().map(|u| ascend(op, g, c, u, opts)).collect();
    results.sort_by(|a, b| b.value.total_cmp(&a.value));
    let evaluations = samples + results.iter().map(|r| r.evaluations).sum::<usize>();
    (results, evaluations)
}

fn cut_vector(op: &MatrixOperator, x: &ComplexMatrix) -> Option<Vec<f64>> {
    let tx = op.apply_norm(x).ok()?;
    if tx <= 1e-14 * x.frobenius_norm().max(1.0) {
        return None;
    }
    let a = eigh(x).apply_fn(f64::abs).scale(1.0 / tx);
    Some(herm_coords(&a))
}

fn initial_cuts(op: &MatrixOperator, seed: u64) -> Vec<ComplexMatrix> {
    let n = op.n();
    let mut cuts = vec![ComplexMatrix::identity(n)];
    for i in 0..n {
        cuts.push(ComplexMatrix::unit(n, i, i));
        for j in (i + 1)..n {
            let s = ComplexMatrix::unit(n, i, j).add(&ComplexMatrix::unit(n, j, i));
            let a = ComplexMatrix::unit(n, i, j).scale_c(C64::new(0.0, 1.0)).sub(&ComplexMatrix::unit(n, j, i).scale_c(C64::new(0.0, 1.0)));
            cuts.push(s);
            cuts.push(a);
        }
    }
    for s in 0..(2 * n) as u64 {
        let mut rng = stream_rng(seed, u64::MAX - s);
        let u = random_unitary(&mut rng, n);
        let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        cuts.push(ComplexMatrix::spectral(&u, &signs));
    }
    cuts
}

/// Upper limit on confirmation passes after the cutting-plane loop.
const CONFIRM_PASSES: u64 = 6;

/// Cutting-plane search for `(g, C)` with `‖Tx‖ ≤ C·tr(g|x|)`.
pub fn find_pietsch_domination(
    op: &MatrixOperator,
    max_cuts: usize,
    inner: &InnerSearchOptions,
    seed: u64,
) -> Result<DominationCertificate> {
    if op.domain_norm() != NormTag::Operator {
        return Err(Error::Domain(format!(
            "domination needs the operator-norm domain, operator has {:?}",
            op.domain_norm()
        )));
    }
    let n = op.n();
    if op.is_zero() {
        return Ok(DominationCertificate {
            g: ComplexMatrix::identity(n).scale(1.0 / n as f64),
            c: 0.0,
            tested_margin: 0.0,
            test_count: 0,
            seed,
            converged: true,
            cuts: Vec::new(),
            history: Vec::new(),
        });
    }

    let mut cuts: Vec<ComplexMatrix> = Vec::new();
    let mut cut_vecs: Vec<Vec<f64>> = Vec::new();
    let add_cut = |x: ComplexMatrix, cuts: &mut Vec<ComplexMatrix>, cut_vecs: &mut Vec<Vec<f64>>| {
        if let Some(v) = cut_vector(op, &x) {
            cuts.push(x);
            cut_vecs.push(v);
        }
    };
    for x in initial_cuts(op, seed) {
        add_cut(x, &mut cuts, &mut cut_vecs);
    }

    let mut history = Vec::new();
    let mut test_count = 0usize;
    let mut upper = f64::INFINITY;
    let mut best_g = ComplexMatrix::identity(n).scale(1.0 / n as f64);
    let mut converged = false;
    let mut warm: Vec<ComplexMatrix> = Vec::new();
    let mut round = 0u64;
    loop {
        let barrier = Barrier::new(n, &cut_vecs);
        let y_low = barrier.lower_bound()?;
        let g_low = herm_from_coords(n, &y_low);
        let lower = exact_cut_constant(op, &g_low.scale(1.0 / g_low.trace().re), &cuts);
        // Query the analytic center of the localization set once an upper bound exists.
        let y_query = if upper.is_finite() && upper > lower * (1.0 + 1e-9) {
            barrier.center(&y_low, upper)?
        } else {
            y_low
        };
        let h = herm_from_coords(n, &y_query);
        let g = h.scale(1.0 / h.trace().re);
        let c = exact_cut_constant(op, &g, &cuts);
        let (found, evals) = search_violations(op, &g, c, inner, 256, seed, round, &warm);
        warm = found.iter().take(4).map(|r| r.u.clone()).collect();
        test_count += evals;
        let violation = found.first().map(|r| r.value).unwrap_or(f64::NEG_INFINITY);
        let ratio = found.iter().map(|r| ratio_at(op, &g, &r.x())).fold(c, f64::max);
        if ratio < upper {
            upper = ratio;
            best_g = g;
        }
        history.push(CutRound { cuts: cuts.len(), master_c: lower, best_upper: upper, violation });

        if upper - lower <= CUT_GAP_TOL * lower {
            converged = true;
            break;
        }
        if cuts.len() >= max_cuts {
            break;
        }
        let room = max_cuts - cuts.len();
        let mut added: Vec<ComplexMatrix> = Vec::new();
        for r in found {
            if added.len() >= room.min(4) {
                break;
            }
            let x = r.x();
            if added.iter().any(|y| y.sub(&x).frobenius_norm() < 1e-6) {
                continue;
            }
            added.push(x.clone());
            add_cut(x, &mut cuts, &mut cut_vecs);
        }
        round += 1;
    }

    // Confirm on the best state with wider searches from fresh streams, raising
    // C to cover whatever they find, until a pass finds nothing new.
    let wide = InnerSearchOptions { starts: 4 * inner.starts, ..*inner };
    let mut c = upper;
    let mut margin = f64::NEG_INFINITY;
    for pass in 0..CONFIRM_PASSES {
        let stream = u32::MAX as u64 + 1 + pass;
        let (found, evals) = search_violations(op, &best_g, c, &wide, 4096, seed, stream, &warm);
        test_count += evals;
        let raised = found.iter().map(|r| ratio_at(op, &best_g, &r.x())).fold(c, f64::max);
        margin = found
            .iter()
            .map(|r| op.apply_norm(&r.x()).unwrap_or(0.0) - raised * trace_weighted_abs(&best_g, &r.x()))
            .fold(f64::NEG_INFINITY, f64::max);
        warm = found.iter().take(4).map(|r| r.u.clone()).collect();
        let stalled = raised <= c * (1.0 + 1e-12);
        c = raised;
        if stalled && pass >= 1 {
            break;
        }
    }
    Ok(DominationCertificate {
        g: best_g,
        c,
        tested_margin: margin,
        test_count,
        seed,
        converged: converged && margin <= CUT_VIOLATION_STOP,
        cuts,
        history,
    })
}

/// `‖Tx‖ / tr(g|x|)`, or 0 when the denominator vanishes.
fn ratio_at(op: &MatrixOperator, g: &ComplexMatrix, x: &ComplexMatrix) -> f64 {
    let d = trace_weighted_abs(g, x);
    if d > 0.0 { op.apply_norm(x).unwrap_or(0.0) / d } else { 0.0 }
}

/// `max_k ‖Tx_k‖ / tr(g|x_k|)` over cuts with nonzero image.
fn exact_cut_constant(op: &MatrixOperator, g: &ComplexMatrix, cuts: &[ComplexMatrix]) -> f64 {
    cuts.iter()
        .filter_map(|x| {
            let tx = op.apply_norm(x).ok()?;
            (tx > 0.0).then(|| tx / trace_weighted_abs(g, x))
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub max_margin: f64,
    pub pass: bool,
    pub trials: usize,
    pub worst: ComplexMatrix,
}

/// Sample Hermitian `x` (random, then adversarial ascent from the worst
/// samples) and report `max ‖Tx‖ − C·tr(g|x|)`. Passes iff the max is ≤ 1e-6.
pub fn verify_certificate(
    op: &MatrixOperator,
    cert: &DominationCertificate,
    trials: usize,
    seed: u64,
) -> Result<MarginReport> {
    let n = op.n();
    if cert.g.rows() != n || !cert.g.is_square() {
        return Err(Error::InvalidInput(format!("certificate state is {}x{}, operator acts on {n}x{n}", cert.g.rows(), cert.g.cols())));
    }
    let ascents = (trials / 1000).clamp(4, 64);
    let opts = InnerSearchOptions { starts: ascents, ..InnerSearchOptions::default() };
    let samples = trials.saturating_sub(2 * ascents * opts.steps).max(trials / 2);
    let (found, count) = search_violations(op, &cert.g, cert.c, &opts, samples, seed, u32::MAX as u64, &[]);
    let best = found.into_iter().next().expect("search always has structured starts");
    let (worst_val, worst) = (best.value, best.x());
    Ok(MarginReport { max_margin: worst_val, pass: worst_val <= CERTIFICATE_PASS_TOL, trials: count, worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CUT_SLACK, DENSITY_TOL};
    use crate::rng::random_hermitian;

    fn diag_map_m2() -> MatrixOperator {
        MatrixOperator::from_fn(2, 2, |x| vec![x[(0, 0)], x[(1, 1)]]).unwrap()
    }

    #[test]
    fn coordinates_round_trip() {
        let mut rng = stream_rng(3, 0);
        let h = random_hermitian(&mut rng, 3);
        let back = herm_from_coords(3, &herm_coords(&h));
        assert!(back.sub(&h).frobenius_norm() < 1e-14);
        let k = random_hermitian(&mut rng, 3);
        let ip: f64 = herm_coords(&h).iter().zip(herm_coords(&k)).map(|(a, b)| a * b).sum();
        assert!((ip - (&h * &k).trace().re).abs() < 1e-12);
    }

    #[test]
    fn orbit_direction_is_steepest() {
        // Along U ← exp(tA)U the derivative of the violation is ‖A‖²_F.
        let mut rng = stream_rng(5, 0);
        let op = MatrixOperator::new(3, crate::rng::random_complex_matrix(&mut rng, 4, 9)).unwrap();
        let b = crate::rng::random_complex_matrix(&mut rng, 3, 3);
        let g = &b * &b.adjoint();
        let g = g.scale(1.0 / g.trace().re);
        let u = random_unitary(&mut rng, 3);
        let eps = [1.0, -1.0, 1.0];
        let a = orbit_direction(&op, &g, 1.3, &u, &eps);
        assert!(a.add(&a.adjoint()).frobenius_norm() < 1e-12);
        let f = |t: f64| orbit_value(&op, &g, 1.3, &(&expm_skew(&a, t) * &u), &eps);
        let h = 1e-6;
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let want = a.frobenius_norm().powi(2);
        assert!((fd - want).abs() < 1e-6 * (1.0 + want), "{fd} vs {want}");
    }

    #[test]
    fn sign_enumeration_matches_direct_evaluation() {
        let mut rng = stream_rng(6, 0);
        let op = MatrixOperator::new(3, crate::rng::random_complex_matrix(&mut rng, 2, 9)).unwrap();
        let g = ComplexMatrix::from_diag(&[0.5, 0.3, 0.2]);
        let u = random_unitary(&mut rng, 3);
        let (eps, v) = best_signs(&op, &g, 1.0, &u);
        let x = ComplexMatrix::spectral(&u, &eps);
        let direct = op.apply_norm(&x).unwrap() - trace_weighted_abs(&g, &x);
        assert!((v - direct).abs() < 1e-12);
        // No eigenvalue pattern in a fine grid beats the vertex.
        for t in 0..500 {
            let lam: Vec<f64> = (0..3).map(|i| ((t * 7 + i * 13) % 21) as f64 / 10.0 - 1.0).collect();
            let y = ComplexMatrix::spectral(&u, &lam);
            assert!(op.apply_norm(&y).unwrap() - trace_weighted_abs(&g, &y) <= v + 1e-12);
        }
    }

    #[test]
    fn scalar_identity() {
        let op = MatrixOperator::new(1, ComplexMatrix::identity(1)).unwrap();
        let cert = find_pietsch_domination(&op, 50, &InnerSearchOptions::default(), 0).unwrap();
        assert!((cert.c - 1.0).abs() < 1e-6);
        assert!((cert.g[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_trace_functional() {
        let op = MatrixOperator::from_fn(2, 1, |x| vec![x.trace() * 0.5]).unwrap();
        let cert = find_pietsch_domination(&op, 100, &InnerSearchOptions::default(), 1).unwrap();
        assert!(cert.converged);
        assert!((cert.c - 1.0).abs() < 1e-6, "C = {}", cert.c);
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(cert.g.sub(&half).frobenius_norm() < 1e-4);
    }

    #[test]
    fn diagonal_map_reaches_two() {
        let op = diag_map_m2();
        let cert = find_pietsch_domination(&op, 200, &InnerSearchOptions::default(), 7).unwrap();
        assert!(cert.converged);
        assert!(cert.c <= 2.0 + 1e-3, "C = {}", cert.c);
        cert.check_state(DENSITY_TOL).unwrap();
        for x in &cert.cuts {
            assert!(cert.violation(&op, x).unwrap() <= CUT_SLACK);
        }
        let report = verify_certificate(&op, &cert, 10_000, 3).unwrap();
        assert!(report.pass, "margin {} C {} g {:?} hist {:?}", report.max_margin, cert.c, cert.g, cert.history);
    }

    fn cert_violation(op: &MatrixOperator, c: f64, x: &ComplexMatrix) -> f64 {
        op.apply_norm(x).unwrap() - c * trace_weighted_abs(&ComplexMatrix::identity(2).scale(0.5), x)
    }

    #[test]
    fn scaling_c_moves_margin() {
        let op = diag_map_m2();
        let cert = DominationCertificate {
            g: ComplexMatrix::identity(2).scale(0.5),
            c: 2.0,
            tested_margin: 0.0,
            test_count: 0,
            seed: 0,
            converged: true,
            cuts: vec![],
            history: vec![],
        };
        let base = verify_certificate(&op, &cert, 10_000, 1).unwrap();
        assert!(base.pass);
        let up = verify_certificate(&op, &DominationCertificate { c: 4.0, ..cert.clone() }, 10_000, 1).unwrap();
        assert!(up.pass && up.max_margin < base.max_margin);
        let down = verify_certificate(&op, &DominationCertificate { c: 1.0, ..cert }, 10_000, 1).unwrap();
        assert!(!down.pass);
        // The supremum 1/2 is attained at the diagonal units.
        let w = &down.worst;
        assert!((down.max_margin - 0.5).abs() < 1e-9);
        assert!((cert_violation(&op, 1.0, w) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn feasibility_oracle_for_diagonal_map() {
        // |x_ii| ≤ ⟨|x| e_i, e_i⟩ gives ‖(x11, x22)‖ ≤ tr|x| = 2·tr(|x|)/2.
        let op = diag_map_m2();
        let g = ComplexMatrix::identity(2).scale(0.5);
        for s in 0..100_000u64 {
            let x = random_hermitian(&mut stream_rng(s, 17), 2);
            let lhs = op.apply_norm(&x).unwrap();
            assert!(lhs <= 2.0 * trace_weighted_abs(&g, &x) + 1e-12);
        }
    }

    #[test]
    fn zero_operator_short_circuits() {
        let cert = find_pietsch_domination(&MatrixOperator::zero(3, 2), 10, &InnerSearchOptions::default(), 0).unwrap();
        assert_eq!(cert.c, 0.0);
        assert!(cert.g.sub(&ComplexMatrix::identity(3).scale(1.0 / 3.0)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn non_operator_domain_rejected() {
        let op = crate::spaces::make_identity_in(2);
        let hs = MatrixOperator::with_norms(2, op.action().clone(), NormTag::HilbertSchmidt, NormTag::Euclidean).unwrap();
        assert!(matches!(
            find_pietsch_domination(&hs, 10, &InnerSearchOptions::default(), 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn history_is_monotone() {
        let mut rng = stream_rng(12, 0);
        let op = MatrixOperator::new(2, crate::rng::random_complex_matrix(&mut rng, 3, 4)).unwrap();
        let cert = find_pietsch_domination(&op, 120, &InnerSearchOptions::default(), 2).unwrap();
        for w in cert.history.windows(2) {
            assert!(w[1].master_c >= w[0].master_c * (1.0 - 1e-8));
            assert!(w[1].best_upper <= w[0].best_upper);
        }
    }

    #[test]
    fn certificate_json_round_trip() {
        let op = diag_map_m2();
        let cert = find_pietsch_domination(&op, 60, &InnerSearchOptions::default(), 4).unwrap();
        let s = serde_json::to_string(&cert).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("C").is_some() && v.get("margin").is_some() && v.get("seed").is_some());
        let back: DominationCertificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back.c, cert.c);
        assert_eq!(back.g, cert.g);
    }
}
