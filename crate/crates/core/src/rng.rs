//! Seeded random source shared by the oracles and the data generators.
//!
//! All draws come from ChaCha8 keyed with `SeedableRng::seed_from_u64(seed)`
//! and positioned on an explicit 64-bit stream. Oracle trial `i` reads stream
//! `i`, so serial and parallel runs see identical numbers. Uniforms take the
//! top 53 bits of one `u64` and are shifted by half an ulp into the open
//! interval (0, 1). Normals use the Box–Muller transform on two uniforms and
//! hand out the cosine branch first, then the sine branch.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Stream ids reserved for non-trial consumers.
pub mod streams {
    /// Synthetic data matrices.
    pub const DATA: u64 = 0xDA7A_0000_0000_0001;
    /// Train/test permutations.
    pub const SPLIT: u64 = 0x5B11_7000_0000_0002;
    /// Random starts inside the brute-force principal-angle oracle.
    pub const ANGLE_STARTS: u64 = 0xA261_E000_0000_0003;
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, spare: None }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn gaussian_vector<T: Real>(&mut self, len: usize) -> DVector<T> {
        DVector::from_fn(len, |_, _| T::lit(self.gaussian()))
    }

    /// Gaussian matrix filled in row-major order.
    pub fn gaussian_matrix<T: Real>(&mut self, rows: usize, cols: usize) -> DMatrix<T> {
        let data: Vec<T> = (0..rows * cols).map(|_| T::lit(self.gaussian())).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    }

    /// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign of R's diagonal removed).
    pub fn orthogonal<T: Real>(&mut self, dim: usize) -> DMatrix<T> {
        let qr = self.gaussian_matrix::<T>(dim, dim).qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..dim {
            if r[(j, j)] < T::zero() {
                q.column_mut(j).neg_mut();
            }
        }
        q
    }

    /// Fisher–Yates shuffle, walking from the back.
    pub fn shuffle<U>(&mut self, items: &mut [U]) {
        for i in (1..items.len()).rev() {
            let j = ((self.uniform() * (i + 1) as f64) as usize).min(i);
            items.swap(i, j);
        }
    }
}
