//! Lattice coverings, entropy numbers and ε-capacity of ellipsoids `S(B_H)`
//! for diagonal operators `S e_i = α_i e_i`.
//!
//! A cover keeps the first `k` axes, lays a rectangular grid of cells over the
//! box `Π[−α_i, α_i]` and keeps the cells that meet the ellipsoid. Every point
//! of the ellipsoid rounds to the center of its own cell, so the distance is at
//! most `(tail² + Σ(s_i/2)²)^{1/2} ≤ ε`, where `tail = α_{k+1}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::config::{ENTROPY_GRID_RATIO, MAX_COVERING_COUNT};
use crate::error::{Error, Result};
use crate::linalg::lp_norm;
use crate::rng::stream_rng;

/// Resolution of the kept-cell count: per-axis distances are floored to
/// multiples of `1/KEEP_BINS`, which can only keep extra cells.
const KEEP_BINS: usize = 4096;

/// Finite nonincreasing sequence of singular values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct DiagonalOperatorSpec {
    alphas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    alphas: Vec<f64>,
}

impl TryFrom<SpecRepr> for DiagonalOperatorSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        Self::new(r.alphas)
    }
}

impl From<DiagonalOperatorSpec> for SpecRepr {
    fn from(s: DiagonalOperatorSpec) -> Self {
        SpecRepr { alphas: s.alphas }
    }
}

impl DiagonalOperatorSpec {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput("alphas must have at least one entry".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::InvalidInput(format!("alphas must be finite and >= 0, got {a}")));
        }
        if let Some(i) = (1..alphas.len()).find(|&i| alphas[i] > alphas[i - 1]) {
            return Err(Error::InvalidInput(format!(
                "alphas must be nonincreasing, but alpha[{i}] = {} > alpha[{}] = {}",
                alphas[i],
                i - 1,
                alphas[i - 1]
            )));
        }
        Ok(Self { alphas })
    }

    /// `α_i = ratio^i`, `i = 0..len`.
    pub fn geometric(ratio: f64, len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| ratio.powi(i as i32)).collect())
    }

    /// `α_i = (len − i)/len`, `i = 0..len`.
    pub fn linear(len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| (len - i) as f64 / len as f64).collect())
    }

    /// Sorts and takes absolute values.
    pub fn from_unsorted(values: &[f64]) -> Result<Self> {
        let mut alphas: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        alphas.sort_by(|a, b| b.total_cmp(a));
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn leading(&self) -> f64 {
        self.alphas[0]
    }

    pub fn sigma_p(&self, p: f64) -> f64 {
        lp_norm(&self.alphas, p)
    }

    fn alpha(&self, i: usize) -> f64 {
        self.alphas.get(i).copied().unwrap_or(0.0)
    }

    fn positive_len(&self) -> usize {
        self.alphas.iter().take_while(|a| **a > 0.0).count()
    }
}

/// `ρ(p) = (8^p/p + ∫₀^{8^{-p}} ln(1/t) dt + 1)^p`, with the integral in closed
/// form `a(1 − ln a)`.
pub fn rho_constant(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("rho needs p >= 1, got {p}")));
    }
    let a = 8f64.powf(-p);
    Ok((8f64.powf(p) / p + a * (1.0 - a.ln()) + 1.0).powf(p))
}

/// Capacity constant `3⁴·ρ(4)` for an operator with `σ₄ ≤ 3`.
pub fn s4_capacity_constant() -> f64 {
    81.0 * rho_constant(4.0).expect("p = 4 is valid")
}

/// Grid along one retained axis: `count` cells of width `spacing` starting at `−alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub alpha: f64,
    pub count: u64,
    pub spacing: f64,
}

impl AxisGrid {
    fn cell_of(&self, x: f64) -> u64 {
        let j = ((x + self.alpha) / self.spacing).floor();
        (j.max(0.0) as u64).min(self.count - 1)
    }

    fn center(&self, j: u64) -> f64 {
        -self.alpha + self.spacing * (j as f64 + 0.5)
    }

    /// `(bin, cells)` pairs over all cells with bin at most `KEEP_BINS`.
    ///
    /// Bins are monotone on either side of the cell containing the origin, so
    /// runs of equal bins are found by binary search instead of a cell scan.
    fn bin_histogram(&self) -> Vec<(usize, f64)> {
        let mut hist = vec![0.0f64; KEEP_BINS + 1];
        let origin = self.cell_of(0.0);
        // Right side: bins nondecreasing in j.
        let mut j = origin;
        while j < self.count {
            let b = self.keep_bin(j);
            if b > KEEP_BINS {
                break;
            }
            let (mut lo, mut hi) = (j, self.count - 1);
            while lo < hi {
                let mid = lo + (hi - lo + 1) / 2;
                if self.keep_bin(mid) == b {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            hist[b] += (lo - j + 1) as f64;
            j = lo + 1;
        }
        // Left side: bins nondecreasing as j decreases.
        let mut j = origin as i64 - 1;
        while j >= 0 {
            let b = self.keep_bin(j as u64);
            if b > KEEP_BINS {
                break;
            }
            let (mut lo, mut hi) = (0i64, j);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if self.keep_bin(mid as u64) == b {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            hist[b] += (j - lo + 1) as f64;
            j = lo - 1;
        }
        hist.into_iter().enumerate().filter(|(_, c)| *c > 0.0).collect()
    }

    /// `min{(x/α)² : x in cell j}`, floored to a bin index.
    fn keep_bin(&self, j: u64) -> usize {
        let a = -self.alpha + self.spacing * j as f64;
        let b = a + self.spacing;
        let d = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) / self.alpha };
        ((d * d * KEEP_BINS as f64).floor() as usize).min(KEEP_BINS + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidCover {
    pub epsilon: f64,
    /// Number of retained axes.
    pub k: usize,
    /// `α_{k+1}`, the worst distance contributed by the dropped axes.
    pub tail: f64,
    pub axes: Vec<AxisGrid>,
    pub covering_count: u64,
}

impl EllipsoidCover {
    pub fn per_axis_counts(&self) -> Vec<u64> {
        self.axes.iter().map(|a| a.count).collect()
    }

    /// `log₂` of the covering count, an upper bound on `H_ε`.
    pub fn capacity(&self) -> f64 {
        (self.covering_count as f64).log2()
    }

    /// Center assigned to `x` by coordinate rounding and whether its cell is kept.
    pub fn nearest_center(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let mut bins = 0;
        let center = self
            .axes
            .iter()
            .enumerate()
            .map(|(i, axis)| {
                let j = axis.cell_of(x.get(i).copied().unwrap_or(0.0));
                bins += axis.keep_bin(j);
                axis.center(j)
            })
            .collect();
        (center, bins <= KEEP_BINS)
    }
}

/// Number of kept cells; `None` once it provably exceeds `MAX_COVERING_COUNT`.
fn kept_cells(axes: &[AxisGrid]) -> Option<f64> {
    // The kept cells cover the ellipsoid, so their volume is at least its volume.
    let k = axes.len();
    let log_ball = (k as f64 / 2.0) * std::f64::consts::PI.ln() - ln_gamma(k as f64 / 2.0 + 1.0);
    let log_cells: f64 = axes.iter().map(|a| (a.count as f64).ln()).sum();
    // The box itself has `2^k` unit-ball-halfwidths; volume ratio is `V_k/2^k`.
    if log_ball - k as f64 * std::f64::consts::LN_2 + log_cells > (MAX_COVERING_COUNT as f64).ln() {
        return None;
    }
    let mut dp = vec![0.0f64; KEEP_BINS + 1];
    dp[0] = 1.0;
    for axis in axes {
        let used = axis.bin_histogram();
        let mut next = vec![0.0f64; KEEP_BINS + 1];
        for (b, &ways) in dp.iter().enumerate() {
            if ways == 0.0 {
                continue;
            }
            for &(c, mult) in &used {
                if b + c > KEEP_BINS {
                    break;
                }
                next[b + c] += ways * mult;
            }
        }
        dp = next;
    }
    let total: f64 = dp.iter().sum();
    (total <= MAX_COVERING_COUNT as f64).then_some(total)
}

/// Per-axis cell counts for the retained `head` with rounding budget `budget²`.
///
/// Axes no wider than the common error get one cell; the rest share the budget
/// equally, then cells are removed greedily while the budget allows.
fn plan_axes(head: &[f64], budget2: f64) -> Option<Vec<AxisGrid>> {
    let k = head.len();
    let mut single = vec![false; k];
    let mut e2;
    loop {
        let fixed: f64 = (0..k).filter(|&i| single[i]).map(|i| head[i] * head[i]).sum();
        let active = single.iter().filter(|s| !**s).count();
        if active == 0 {
            if fixed > budget2 {
                return None;
            }
            e2 = 0.0;
            break;
        }
        e2 = (budget2 - fixed) / active as f64;
        if e2 <= 0.0 {
            return None;
        }
        let newly: Vec<usize> = (0..k).filter(|&i| !single[i] && head[i] * head[i] <= e2).collect();
        if newly.is_empty() {
            break;
        }
        newly.into_iter().for_each(|i| single[i] = true);
    }
    let e = e2.sqrt();
    let mut counts: Vec<u64> = (0..k)
        .map(|i| if single[i] { 1 } else { (head[i] / e).ceil().max(1.0) as u64 })
        .collect();
    let err2 = |i: usize, c: u64| (head[i] / c as f64).powi(2);
    let mut used: f64 = (0..k).map(|i| err2(i, counts[i])).sum();
    loop {
        let slack = budget2 - used;
        let pick = (0..k)
            .filter(|&i| counts[i] > 1 && err2(i, counts[i] - 1) - err2(i, counts[i]) <= slack)
            .min_by_key(|&i| counts[i]);
        match pick {
            Some(i) => {
                used += err2(i, counts[i] - 1) - err2(i, counts[i]);
                counts[i] -= 1;
            }
            None => break,
        }
    }
    Some(
        (0..k)
            .map(|i| AxisGrid { alpha: head[i], count: counts[i], spacing: 2.0 * head[i] / counts[i] as f64 })
            .collect(),
    )
}

/// Cover of `S(B_H)` by radius-`ε` balls centered at kept lattice points.
///
/// Every admissible truncation `k` (dropped tail `α_{k+1} < ε`) is tried with
/// the remaining budget `ε² − α_{k+1}²` spent on lattice rounding; the smallest
/// count wins.
pub fn cover_ellipsoid(spec: &DiagonalOperatorSpec, epsilon: f64) -> Result<EllipsoidCover> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if spec.leading() <= epsilon {
        return Ok(EllipsoidCover { epsilon, k: 0, tail: spec.leading(), axes: Vec::new(), covering_count: 1 });
    }
    let mut best: Option<EllipsoidCover> = None;
    let mut exceeded = false;
    for k in 1..=spec.positive_len() {
        let tail = spec.alpha(k);
        if tail >= epsilon {
            continue;
        }
        let Some(axes) = plan_axes(&spec.alphas[..k], epsilon * epsilon - tail * tail) else {
            continue;
        };
        match kept_cells(&axes) {
            Some(count) => {
                let count = count as u64;
                if best.as_ref().map_or(true, |b| count < b.covering_count) {
                    best = Some(EllipsoidCover { epsilon, k, tail, axes, covering_count: count });
                }
            }
            None => exceeded = true,
        }
        // Further axes buy almost no budget once the tail is negligible.
        if tail < 1e-3 * epsilon {
            break;
        }
    }
    match best {
        Some(cover) => Ok(cover),
        None if exceeded => Err(Error::Resource(format!(
            "covering at epsilon = {epsilon} needs more than {MAX_COVERING_COUNT} centers; use a larger epsilon"
        ))),
        None => Err(Error::Solver(format!("no admissible truncation at epsilon = {epsilon}"))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverValidation {
    pub pass: bool,
    pub samples: usize,
    pub max_distance: f64,
    /// Up to five points farther than `ε` from their center or in a dropped cell.
    pub witnesses: Vec<Vec<f64>>,
}

/// Samples the ellipsoid and checks that each point rounds to a kept center
/// within `ε`. Half the samples are uniform in the ellipsoid, half on its boundary.
pub fn validate_cover(
    spec: &DiagonalOperatorSpec,
    epsilon: f64,
    cover: &EllipsoidCover,
    samples: usize,
    seed: u64,
) -> CoverValidation {
    let alphas = spec.alphas();
    let d = alphas.len();
    let mut rng = stream_rng(seed, 0);
    let mut max_distance = 0.0f64;
    let mut witnesses = Vec::new();
    for s in 0..samples {
        let mut z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let radius = if s % 2 == 0 { rng.random::<f64>().powf(1.0 / d as f64) } else { 1.0 };
        z.iter_mut().zip(alphas).for_each(|(v, a)| *v = *v / norm * radius * a);
        let (center, kept) = cover.nearest_center(&z);
        let dist = z
            .iter()
            .enumerate()
            .map(|(i, v)| (v - center.get(i).copied().unwrap_or(0.0)).powi(2))
            .sum::<f64>()
            .sqrt();
        max_distance = max_distance.max(dist);
        if (!kept || dist > epsilon * (1.0 + 1e-12)) && witnesses.len() < 5 {
            witnesses.push(z);
        }
    }
    CoverValidation { pass: witnesses.is_empty(), samples, max_distance, witnesses }
}

/// `max_k ⌊Π_{i≤k} α_i/ε⌋` over `k` with `α_k > ε`, and 1 if there is none.
///
/// Projection onto `k` coordinates is non-expansive and a set of diameter `2ε`
/// has at most the volume of a radius-`ε` ball, so this never exceeds `N_ε`.
pub fn capacity_lower_volumetric(spec: &DiagonalOperatorSpec, epsilon: f64) -> u64 {
    let mut best = 1.0f64;
    let mut prod = 1.0f64;
    for &a in spec.alphas().iter().take_while(|a| **a > epsilon) {
        prod *= a / epsilon;
        best = best.max(prod.floor());
    }
    best as u64
}

/// Covering counts along the grid `δ_j = α₁·ENTROPY_GRID_RATIO^{−j}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub leading: f64,
    /// `(δ_j, covering_count(δ_j))`, descending in `δ`.
    pub grid: Vec<(f64, u64)>,
    /// True if the scan stopped because the count exceeded `MAX_COVERING_COUNT`.
    pub truncated: bool,
}

impl EntropyProfile {
    /// Scans until `δ < floor` or the covering count leaves the resource bound.
    pub fn scan(spec: &DiagonalOperatorSpec, floor: f64) -> Result<Self> {
        let leading = spec.leading();
        let mut grid = Vec::new();
        let mut truncated = false;
        if leading == 0.0 {
            return Ok(Self { leading, grid, truncated });
        }
        let mut j = 0i32;
        loop {
            let delta = leading * ENTROPY_GRID_RATIO.powi(-j);
            if delta < floor {
                break;
            }
            match cover_ellipsoid(spec, delta) {
                Ok(c) => grid.push((delta, c.covering_count)),
                Err(Error::Resource(_)) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            j += 1;
        }
        Ok(Self { leading, grid, truncated })
    }

    /// Smallest grid `δ ≥ α₁·2^{−(n−1)}/10` whose cover uses at most `2^{n−1}` balls.
    pub fn upper(&self, n: usize) -> f64 {
        if self.leading == 0.0 {
            return 0.0;
        }
        let budget = 2f64.powi(n as i32 - 1);
        let floor = grid_floor(self.leading, n);
        self.grid
            .iter()
            .filter(|(d, c)| *d >= floor && (*c as f64) <= budget)
            .map(|(d, _)| *d)
            .fold(self.leading, f64::min)
    }
}

fn grid_floor(leading: f64, n: usize) -> f64 {
    leading * 2f64.powi(-(n as i32 - 1)) / 10.0
}

/// Upper bound on the `n`-th outer entropy number of `S`.
pub fn entropy_number_upper(spec: &DiagonalOperatorSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("entropy numbers are indexed from n = 1".into()));
    }
    Ok(EntropyProfile::scan(spec, grid_floor(spec.leading(), n))?.upper(n))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropySumReport {
    pub p: f64,
    pub n_max: usize,
    pub entropy_numbers: Vec<f64>,
    /// `(Σ_{n≤n_max} e_n^p)^{1/p}`.
    pub lhs: f64,
    /// `ρ(p)^{1/p}·σ_p`.
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `(Σ e_n(S)^p)^{1/p} ≤ ρ(p)^{1/p}·σ_p(S)` over `n ≤ n_max`.
pub fn check_entropy_sum_bound(spec: &DiagonalOperatorSpec, p: f64, n_max: usize) -> Result<EntropySumReport> {
    let rho = rho_constant(p)?;
    if n_max == 0 {
        return Err(Error::Domain("n_max must be >= 1".into()));
    }
    let profile = EntropyProfile::scan(spec, grid_floor(spec.leading(), n_max))?;
    let entropy_numbers: Vec<f64> = (1..=n_max).map(|n| profile.upper(n)).collect();
    let lhs = lp_norm(&entropy_numbers, p);
    let rhs = rho.powf(1.0 / p) * spec.sigma_p(p);
    Ok(EntropySumReport { p, n_max, entropy_numbers, lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-12) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityReport {
    pub epsilon: f64,
    pub p: f64,
    pub covering_count: u64,
    /// `log₂(covering_count)`, an upper bound on `H_ε`.
    pub capacity: f64,
    pub volumetric_lower: u64,
    /// `σ_p^p·ρ(p)/ε^p`.
    pub capacity_bound: f64,
    /// `max{k : e_k ≥ ε}` from the entropy upper bounds, 0 if none.
    pub k_epsilon: usize,
    /// `(ρ(p)^{1/p}·σ_p/ε)^p`.
    pub k_bound: f64,
    pub sandwich_ok: bool,
    pub bound_ok: bool,
    pub k_bound_ok: bool,
}

impl CapacityReport {
    pub fn pass(&self) -> bool {
        self.sandwich_ok && self.bound_ok && self.k_bound_ok
    }
}

/// Cover, volumetric lower bound, capacity bound and `k(ε)` at one `ε`.
pub fn capacity_verdict(spec: &DiagonalOperatorSpec, p: f64, epsilon: f64) -> Result<CapacityReport> {
    let rho = rho_constant(p)?;
    let cover = cover_ellipsoid(spec, epsilon)?;
    let volumetric_lower = capacity_lower_volumetric(spec, epsilon);
    let sigma = spec.sigma_p(p);
    let capacity_bound = sigma.powf(p) * rho / epsilon.powf(p);
    let k_bound = (rho.powf(1.0 / p) * sigma / epsilon).powf(p);

    let profile = EntropyProfile::scan(spec, epsilon / ENTROPY_GRID_RATIO)?;
    let mut k_epsilon = 0;
    // `e_n` is nonincreasing and reaches the last grid point once 2^{n−1} exceeds every count.
    let n_cap = 2 + (MAX_COVERING_COUNT as f64).log2().ceil() as usize;
    for n in 1..=n_cap {
        if profile.upper(n) >= epsilon {
            k_epsilon = n;
        } else {
            break;
        }
    }
    let capacity = cover.capacity();
    Ok(CapacityReport {
        epsilon,
        p,
        covering_count: cover.covering_count,
        capacity,
        volumetric_lower,
        capacity_bound,
        k_epsilon,
        k_bound,
        sandwich_ok: volumetric_lower <= cover.covering_count,
        bound_ok: capacity <= capacity_bound,
        k_bound_ok: k_epsilon as f64 <= k_bound,
    })
}
