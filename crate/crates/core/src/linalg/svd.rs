//! One-sided (Hestenes) Jacobi SVD for complex matrices.

use super::eigen::jacobi_rotation;
use super::matrix::{vec_dot, vec_norm, ComplexMatrix, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U·diag(s)·V*` with `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct SingularDecomposition {
    pub left_basis: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub right_basis: ComplexMatrix,
}

impl SingularDecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let u = &self.left_basis;
        let v = &self.right_basis;
        let s = &self.singular_values;
        ComplexMatrix::from_fn(u.rows(), v.rows(), |i, j| {
            (0..s.len()).map(|l| u[(i, l)] * v[(j, l)].conj() * s[l]).sum()
        })
    }
}

/// Singular value decomposition; deterministic for a fixed input.
pub fn svd(m: &ComplexMatrix) -> Result<SingularDecomposition> {
    if m.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("svd input has non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        Ok(tall_svd(m))
    } else {
        let t = tall_svd(&m.adjoint());
        Ok(SingularDecomposition {
            left_basis: t.right_basis,
            singular_values: t.singular_values,
            right_basis: t.left_basis,
        })
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.singular_values)
}

fn tall_svd(m: &ComplexMatrix) -> SingularDecomposition {
    let rows = m.rows();
    let n = m.cols();
    let mut u: Vec<Vec<C64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = u[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = u[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = vec_dot(&u[p], &u[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (g11, g12, g21, g22) = jacobi_rotation(alpha, beta, gamma);
                rotate_pair(&mut u, p, q, (g11, g12, g21, g22));
                rotate_pair(&mut v, p, q, (g11, g12, g21, g22));
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = u.iter().map(|c| vec_norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let negligible = smax * (rows.max(n) as f64) * f64::EPSILON;

    let mut left: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > negligible && norms[j] > 0.0 {
            left.push(u[j].iter().map(|z| z / norms[j]).collect());
        } else {
            left.push(Vec::new());
            deficient.push(slot);
        }
    }
    complete_orthonormal(&mut left, &deficient, rows);

    SingularDecomposition {
        left_basis: ComplexMatrix::from_columns(rows, &left),
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        right_basis: ComplexMatrix::from_columns(n, &order.iter().map(|&j| v[j].clone()).collect::<Vec<_>>()),
    }
}

fn rotate_pair(cols: &mut [Vec<C64>], p: usize, q: usize, g: (C64, C64, C64, C64)) {
    let (g11, g12, g21, g22) = g;
    let (lo, hi) = cols.split_at_mut(q);
    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = a * g11 + b * g21;
        *xq = a * g12 + b * g22;
    }
}

/// Fill the listed empty slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(cols: &mut [Vec<C64>], slots: &[usize], dim: usize) {
    let mut candidate = 0;
    for &slot in slots {
        loop {
            assert!(candidate < dim, "cannot complete orthonormal basis");
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[candidate] = C64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for c in cols.iter().filter(|c| !c.is_empty()) {
                    let proj = vec_dot(c, &e);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = vec_norm(&e);
            if norm > 1e-6 {
                e.iter_mut().for_each(|z| *z /= norm);
                cols[slot] = e;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_complex_matrix, stream_rng};

    fn unitary_defect(u: &ComplexMatrix) -> f64 {
        (&u.adjoint() * u).sub(&ComplexMatrix::identity(u.cols())).frobenius_norm()
    }

    #[test]
    fn diagonal_values_sorted() {
        let d = svd(&ComplexMatrix::from_diag(&[3.0, 4.0])).unwrap();
        assert_eq!(d.singular_values, vec![4.0, 3.0]);
    }

    #[test]
    fn zero_matrix_has_orthonormal_bases() {
        let d = svd(&ComplexMatrix::zeros(3, 2)).unwrap();
        assert_eq!(d.singular_values, vec![0.0, 0.0]);
        assert!(unitary_defect(&d.left_basis) < 1e-12);
        assert!(unitary_defect(&d.right_basis) < 1e-12);
    }

    #[test]
    fn random_reconstruction_all_shapes() {
        let mut rng = stream_rng(11, 0);
        for &(r, c) in &[(4, 4), (6, 3), (3, 6), (1, 5), (5, 1), (9, 9)] {
            let m = random_complex_matrix(&mut rng, r, c);
            let d = svd(&m).unwrap();
            let err = d.reconstruct().sub(&m).frobenius_norm();
            assert!(err <= 1e-10 * m.frobenius_norm().max(1.0), "{r}x{c}: {err}");
            assert!(unitary_defect(&d.left_basis) < 1e-10);
            assert!(unitary_defect(&d.right_basis) < 1e-10);
            assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_input() {
        let mut rng = stream_rng(5, 0);
        let a = random_complex_matrix(&mut rng, 5, 1);
        let b = random_complex_matrix(&mut rng, 1, 4);
        let m = &a * &b;
        let d = svd(&m).unwrap();
        assert!(d.singular_values[1..].iter().all(|&s| s < 1e-12));
        assert!(d.reconstruct().sub(&m).frobenius_norm() < 1e-12);
        assert!(unitary_defect(&d.left_basis) < 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(f64::INFINITY, 0.0);
        assert!(matches!(svd(&m), Err(Error::InvalidInput(_))));
    }
}
