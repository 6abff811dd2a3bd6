//! The family `Tₙ = Iₙ/αₙ` on `B(ℓ₂ⁿ)`, whose natural factorization through
//! `HS(ℓ₂ⁿ)` shows that the Schatten exponent 4 cannot be lowered.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{schatten_norm, ComplexMatrix};
use crate::rng::{random_unitary, stream_rng};
use crate::spaces::{make_identity_in, norm_of_in, DualOptions};
use crate::summing::{summing_lower_bound, EstimateKind};

/// `Tₙ = K∘J` with `J = Iₙ/√n` into `HS(ℓ₂ⁿ)` and `K = (√n/α)·id`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NaturalFactorization {
    pub n: usize,
    pub alpha: f64,
    pub j_norm: f64,
    pub k_scale: f64,
}

pub fn natural_factorization(n: usize, alpha: f64) -> Result<NaturalFactorization> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let root = (n as f64).sqrt();
    Ok(NaturalFactorization { n, alpha, j_norm: norm_of_in(n) / root, k_scale: root / alpha })
}

impl NaturalFactorization {
    /// `σ_p(K) = (√n/α)·n^{2/p}`: `K` is a multiple of the identity on `n²` dimensions.
    pub fn sigma_p(&self, p: f64) -> f64 {
        self.k_scale * (self.n as f64).powf(2.0 / p)
    }

    pub fn explicit_k(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.n * self.n).scale(self.k_scale)
    }

    pub fn sigma_p_explicit(&self, p: f64) -> Result<f64> {
        schatten_norm(&self.explicit_k(), p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// `αₙ = n`.
    AnalyticN,
    /// Best certified lower bound on `π₁(Iₙ)` over seeded Hermitian families.
    SampledPi1Lb,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub n_values: Vec<usize>,
    pub p: f64,
    pub alpha_policy: AlphaPolicy,
    pub seed: u64,
    /// Random families tried per `n` by the sampled policy.
    #[serde(default = "default_families")]
    pub families: usize,
}

fn default_families() -> usize {
    8
}

impl CounterexampleConfig {
    pub fn new(n_values: Vec<usize>, p: f64, alpha_policy: AlphaPolicy, seed: u64) -> Self {
        Self { n_values, p, alpha_policy, seed, families: default_families() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Domain("n_values must be nonempty and each >= 1".into()));
        }
        if self.p.is_nan() || self.p < 2.0 {
            return Err(Error::Domain(format!("p must be >= 2, got {}", self.p)));
        }
        let mut distinct = self.n_values.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 4 {
            return Err(Error::Domain(format!("the sweep needs at least 4 distinct n, got {}", distinct.len())));
        }
        Ok(())
    }
}

/// Lower bound on `π₁(Iₙ)` from the canonical diagonal projections and from
/// `families` rank-one projection frames `{u_i u_i*}` of seeded random unitaries.
///
/// Each frame is unitarily equivalent to a diagonal family, so its weak `ℓ₁`
/// norm is exact and every value is a certified lower bound. Returns the
/// running maximum after each family.
pub fn sampled_pi1_lower_bounds(n: usize, families: usize, seed: u64) -> Result<Vec<f64>> {
    let op = make_identity_in(n);
    let opts = DualOptions { seed, ..DualOptions::default() };
    let mut frames = vec![ComplexMatrix::identity(n)];
    frames.extend((0..families as u64).map(|f| random_unitary(&mut stream_rng(seed, (n as u64) << 32 | f), n)));
    let mut best = 0.0f64;
    let mut running = Vec::with_capacity(frames.len());
    for u in frames {
        let family: Vec<ComplexMatrix> = (0..n)
            .map(|i| {
                let col = u.column(i);
                ComplexMatrix::from_fn(n, n, |a, b| col[a] * col[b].conj())
            })
            .collect();
        let est = summing_lower_bound(&op, &family, 1.0, 1.0, &opts)?;
        // Off-diagonal frames go through the heuristic dual, but their exact weak norm is 1.
        let value = match est.kind {
            EstimateKind::LowerBound | EstimateKind::Exact => est.value,
            EstimateKind::HeuristicRatio => est.numerator,
        };
        best = best.max(value);
        running.push(best);
    }
    Ok(running)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub alpha: f64,
    pub sigma_p: f64,
    /// `n^{(4−p)/(2p)}`, the floor with `β = 1`.
    pub floor: f64,
    /// `σ_p` of the explicit `n²×n²` matrix, for `n ≤ 16`.
    pub sigma_p_explicit: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeReport {
    pub config: CounterexampleConfig,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log σ_p(K)` against `log n`.
    pub slope: f64,
    /// `(4 − p)/(2p)`.
    pub target: f64,
}

impl SlopeReport {
    pub fn within(&self, tol: f64) -> bool {
        (self.slope - self.target).abs() <= tol
    }
}

const EXPLICIT_MAX_N: usize = 16;

pub fn exponent_sweep(config: &CounterexampleConfig) -> Result<SlopeReport> {
    config.validate()?;
    let p = config.p;
    let mut ns = config.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let rows: Vec<SweepRow> = ns
        .par_iter()
        .map(|&n| {
            let alpha = match config.alpha_policy {
                AlphaPolicy::AnalyticN => n as f64,
                AlphaPolicy::SampledPi1Lb => *sampled_pi1_lower_bounds(n, config.families, config.seed)?
                    .last()
                    .expect("at least the canonical family"),
            };
            let fact = natural_factorization(n, alpha)?;
            let sigma_p_explicit =
                if n <= EXPLICIT_MAX_N { Some(fact.sigma_p_explicit(p)?) } else { None };
            Ok(SweepRow { n, alpha, sigma_p: fact.sigma_p(p), floor: schatten_floor(n, p, 1.0)?, sigma_p_explicit })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sigma_p.ln()).collect();
    Ok(SlopeReport { config: config.clone(), rows, slope: least_squares_slope(&xs, &ys), target: (4.0 - p) / (2.0 * p) })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderReport {
    pub p: f64,
    pub dim: usize,
    pub sigma_2: f64,
    /// `σ_p(K)·d^{1/2 − 1/p}`.
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// `σ₂(K) ≤ σ_p(K)·d^{1/2−1/p}` for `K` acting on a `d`-dimensional space.
pub fn holder_chain_check(k: &ComplexMatrix, p: f64) -> Result<HolderReport> {
    if p.is_nan() || p < 2.0 {
        return Err(Error::Domain(format!("p must be >= 2, got {p}")));
    }
    let dim = k.cols();
    let sigma_2 = schatten_norm(k, 2.0)?;
    let rhs = schatten_norm(k, p)? * (dim as f64).powf(0.5 - 1.0 / p);
    let ratio = if rhs > 0.0 { sigma_2 / rhs } else { 0.0 };
    Ok(HolderReport { p, dim, sigma_2, rhs, ratio, pass: sigma_2 <= rhs + 1e-9 })
}

/// `β·n^{(4−p)/(2p)}`.
pub fn schatten_floor(n: usize, p: f64, beta: f64) -> Result<f64> {
    if n == 0 || p.is_nan() || p < 2.0 || beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("need n >= 1, p >= 2, beta > 0; got n={n}, p={p}, beta={beta}")));
    }
    Ok(beta * (n as f64).powf((4.0 - p) / (2.0 * p)))
}
