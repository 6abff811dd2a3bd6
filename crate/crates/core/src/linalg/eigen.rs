//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use super::matrix::{ComplexMatrix, C64};

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a Hermitian matrix: `A = V·diag(values)·V*`, values ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Rotation coefficients that zero the `(p,q)` entry of the 2×2 Hermitian
/// block `[[a, c], [conj c, b]]`. Returns `G` such that `G*·block·G` is
/// diagonal, stored as `(g11, g12, g21, g22)`.
#[inline]
pub(crate) fn jacobi_rotation(a: f64, b: f64, c: C64) -> (C64, C64, C64, C64) {
    let r = c.norm();
    let omega_conj = (c / r).conj();
    let theta = (b - a) / (2.0 * r);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    (
        C64::new(cs, 0.0),
        C64::new(sn, 0.0),
        -omega_conj * sn,
        omega_conj * cs,
    )
}

/// Eigen-decomposition of the Hermitian part of `a`.
pub fn eigh(a: &ComplexMatrix) -> HermitianEigen {
    assert!(a.is_square(), "eigh needs a square matrix");
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-16 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let c = m[(p, q)];
                    if c.norm() <= 1e-300 {
                        continue;
                    }
                    let (g11, g12, g21, g22) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, c);
                    for k in 0..n {
                        let xp = m[(k, p)];
                        let xq = m[(k, q)];
                        m[(k, p)] = xp * g11 + xq * g21;
                        m[(k, q)] = xp * g12 + xq * g22;
                    }
                    for k in 0..n {
                        let xp = m[(p, k)];
                        let xq = m[(q, k)];
                        m[(p, k)] = g11.conj() * xp + g21.conj() * xq;
                        m[(q, k)] = g12.conj() * xp + g22.conj() * xq;
                    }
                    m[(p, q)] = C64::new(0.0, 0.0);
                    m[(q, p)] = C64::new(0.0, 0.0);
                    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                    for k in 0..n {
                        let xp = v[(k, p)];
                        let xq = v[(k, q)];
                        v[(k, p)] = xp * g11 + xq * g21;
                        v[(k, q)] = xp * g12 + xq * g22;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    HermitianEigen { values, vectors }
}

impl HermitianEigen {
    /// `Σ φ(λ_i) v_i v_i*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::spectral(&self.vectors, &mapped)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_hermitian, stream_rng};

    #[test]
    fn diagonal_input_is_sorted() {
        let e = eigh(&ComplexMatrix::from_diag(&[3.0, -1.0, 2.0]));
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn reconstructs_random_hermitian() {
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let n = 1 + (seed as usize % 9);
            let a = random_hermitian(&mut rng, n);
            let e = eigh(&a);
            let back = e.apply_fn(|l| l);
            assert!(back.sub(&a).frobenius_norm() < 1e-12 * a.frobenius_norm().max(1.0));
            let vv = &e.vectors.adjoint() * &e.vectors;
            assert!(vv.sub(&ComplexMatrix::identity(n)).frobenius_norm() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn complex_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let a = ComplexMatrix::new(
            2,
            2,
            vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let e = eigh(&a);
        assert!((e.values[0]).abs() < 1e-14 && (e.values[1] - 2.0).abs() < 1e-14);
    }
}
