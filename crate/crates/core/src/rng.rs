//! Seeded random streams and random matrix generators.
//!
//! Every randomized routine derives its generator from `(seed, stream)` so a
//! result never depends on scheduling or on how many other streams were used.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex standard normal: `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| complex_normal(rng)).collect();
    ComplexMatrix::from_data(rows, cols, data)
}

/// `(A + A*)/2` for Gaussian `A`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_complex_matrix(rng, n, n).hermitian_part()
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
        let norm = crate::linalg::vec_norm(&v);
        if norm > 1e-12 {
            v.iter_mut().for_each(|z| *z /= norm);
            return v;
        }
    }
}

/// Haar-ish unitary from Gram–Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = random_complex_matrix(rng, n, n);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for q in &cols {
                let proj = crate::linalg::vec_dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = crate::linalg::vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    ComplexMatrix::from_columns(n, &cols)
}
