//! Dense complex linear algebra on small matrices.

mod eigen;
mod matrix;
mod svd;

pub use eigen::{eigh, HermitianEigen};
pub use matrix::{vec_dot, vec_norm, ComplexMatrix, C64};
pub use svd::{singular_values, svd, SingularDecomposition};

use crate::config::NOT_PSD_REL_TOL;
use crate::error::{Error, Result};

/// `ℓ_p` norm of a nonnegative sequence, `p = ∞` allowed.
pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return max;
    }
    max * values.iter().map(|v| (v.abs() / max).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Schatten `p`-norm `σ_p(M) = (Σ s_i^p)^{1/p}`; `p = f64::INFINITY` gives `s₁`.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    check_schatten_index(p)?;
    Ok(lp_norm(&singular_values(m)?, p))
}

pub(crate) fn check_schatten_index(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Schatten index p = {p} must be >= 1")));
    }
    Ok(())
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).map(|s| s[0]).unwrap_or(f64::NAN)
}

/// `|x| = (x²)^{1/2}` of a Hermitian matrix.
///
/// Rejects inputs with `‖x − x*‖_F > tol·‖x‖_F`.
pub fn abs_hermitian(x: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !x.is_square() {
        return Err(Error::Domain(format!("|x| needs a square matrix, got {}x{}", x.rows(), x.cols())));
    }
    let defect = x.hermitian_defect();
    if defect > tol * x.frobenius_norm() {
        return Err(Error::Domain(format!("matrix is not Hermitian (defect {defect:e})")));
    }
    Ok(eigh(x).apply_fn(f64::abs))
}

/// Whitening of a PSD Gram matrix.
#[derive(Clone, Debug)]
pub struct GramWhitening {
    /// `W = Σ_{λ > cutoff} λ^{-1/2} v v*`, so `W*GW` is the projector on the retained subspace.
    pub w: ComplexMatrix,
    /// `Σ_{λ > cutoff} λ^{1/2} v v*`, the inverse of `W` on the retained subspace.
    pub sqrt: ComplexMatrix,
    pub retained_rank: usize,
    /// Eigenvalues at or below the cutoff, ascending.
    pub discarded: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Inverse square root of a Hermitian PSD Gram matrix on eigenvalues above `cutoff`.
pub fn gram_sqrt_inverse(g: &ComplexMatrix, cutoff: f64) -> Result<GramWhitening> {
    if !g.is_square() {
        return Err(Error::InvalidInput("Gram matrix must be square".into()));
    }
    let e = eigh(g);
    let scale = e.max_abs_value();
    if e.min_value() < -NOT_PSD_REL_TOL * scale {
        return Err(Error::NotPsd { min_eigenvalue: e.min_value() });
    }
    let retained_rank = e.values.iter().filter(|&&l| l > cutoff).count();
    let discarded = e.values.iter().copied().filter(|&l| l <= cutoff).collect();
    let w = e.apply_fn(|l| if l > cutoff { l.powf(-0.5) } else { 0.0 });
    let sqrt = e.apply_fn(|l| if l > cutoff { l.sqrt() } else { 0.0 });
    Ok(GramWhitening { w, sqrt, retained_rank, discarded, eigenvalues: e.values })
}

/// Solve `A x = b` for a real symmetric positive definite `A` (row-major, `n×n`).
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_complex_matrix, random_hermitian, stream_rng};

    #[test]
    fn schatten_examples() {
        let d = ComplexMatrix::from_diag(&[3.0, 4.0]);
        assert!((schatten_norm(&d, 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((schatten_norm(&d, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
        let i4 = ComplexMatrix::identity(4);
        assert!((schatten_norm(&i4, 4.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(schatten_norm(&d, 0.5), Err(Error::Domain(_))));
        assert!(matches!(schatten_norm(&d, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn schatten_two_is_frobenius() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..10 {
            let m = random_complex_matrix(&mut rng, 4, 6);
            let fro = m.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((schatten_norm(&m, 2.0).unwrap() - fro).abs() < 1e-10);
        }
    }

    #[test]
    fn abs_hermitian_examples() {
        let x = ComplexMatrix::from_diag(&[1.0, -2.0]);
        let a = abs_hermitian(&x, 1e-12).unwrap();
        assert!(a.sub(&ComplexMatrix::from_diag(&[1.0, 2.0])).frobenius_norm() < 1e-14);

        let mut rng = stream_rng(9, 0);
        let b = random_complex_matrix(&mut rng, 4, 4);
        let psd = &b * &b.adjoint();
        assert!(abs_hermitian(&psd, 1e-12).unwrap().sub(&psd).frobenius_norm() < 1e-10);

        let h = random_hermitian(&mut rng, 5);
        let ah = abs_hermitian(&h, 1e-12).unwrap();
        let sq = &ah * &ah;
        assert!(sq.sub(&(&h * &h)).frobenius_norm() < 1e-9);
        let mut want: Vec<f64> = eigh(&h).values.iter().map(|l| l.abs()).collect();
        want.sort_by(f64::total_cmp);
        for (got, w) in eigh(&ah).values.iter().zip(&want) {
            assert!((got - w).abs() < 1e-10);
        }

        assert!(matches!(abs_hermitian(&b, 1e-6), Err(Error::Domain(_))));
    }

    #[test]
    fn gram_whitening_examples() {
        let w = gram_sqrt_inverse(&ComplexMatrix::identity(3), 1e-12).unwrap();
        assert!(w.w.sub(&ComplexMatrix::identity(3)).frobenius_norm() < 1e-14);
        let w = gram_sqrt_inverse(&ComplexMatrix::from_diag(&[4.0, 1.0]), 1e-12).unwrap();
        assert!(w.w.sub(&ComplexMatrix::from_diag(&[0.5, 1.0])).frobenius_norm() < 1e-14);

        let mut rng = stream_rng(4, 0);
        let b = random_complex_matrix(&mut rng, 6, 6);
        let g = &b * &b.adjoint();
        let wh = gram_sqrt_inverse(&g, 1e-12).unwrap();
        let res = (&(&wh.w.adjoint() * &g) * &wh.w).sub(&ComplexMatrix::identity(6));
        assert!(res.frobenius_norm() < 1e-8);

        assert!(matches!(
            gram_sqrt_inverse(&ComplexMatrix::from_diag(&[1.0, -0.5]), 1e-12),
            Err(Error::NotPsd { .. })
        ));
        let rank1 = ComplexMatrix::from_diag(&[1.0, 0.0]);
        let wh = gram_sqrt_inverse(&rank1, 1e-12).unwrap();
        assert_eq!(wh.retained_rank, 1);
        assert_eq!(wh.discarded, vec![0.0]);
    }

    #[test]
    fn spd_solve() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve_spd(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], &[0.0, 0.0]).is_none());
    }
}
