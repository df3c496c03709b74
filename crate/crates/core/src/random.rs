//! Seeded random matrices and structured polynomials.
//!
//! Every generator draws real and imaginary parts independently from the
//! standard normal distribution. Streams are ChaCha8 so results are identical
//! across platforms for the same seed.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, ComplexMatrix, HermitianMatrix, SymmetricMatrix};

/// RNG for `(seed, stream)`; distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    c64(normal(rng), normal(rng))
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    // row-major draw order
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<Complex64> {
    DVector::from_iterator(n, (0..n).map(|_| complex_normal(rng)))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let a = random_complex(rng, n, n);
    HermitianMatrix::from_trusted((&a + a.adjoint()).unscale(2.0))
}

pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymmetricMatrix {
    let a = random_complex(rng, n, n);
    SymmetricMatrix::from_trusted((&a + a.transpose()).unscale(2.0))
}

pub fn random_skew<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = random_complex(rng, n, n);
    (&a - a.transpose()).unscale(2.0)
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = random_complex(rng, n, n);
    a.qr().q()
}

/// Uniform point in the Euclidean ball of radius `radius` in ℝ^d.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = unit_direction(rng, d);
    let u: f64 = rng.random::<f64>();
    let r = radius * u.powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * r).collect()
}

/// Uniform point on the unit sphere of ℝ^d.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
