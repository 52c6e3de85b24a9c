//! Seeded circularly-symmetric complex Gaussian sampling.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, stream)`, so Monte
//! Carlo trial `t` of run `seed` draws the same numbers no matter which thread
//! runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{matrix_sqrt_psd, CMat, C64};
use crate::error::Result;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix of i.i.d. CN(0, 1) entries (real and imaginary parts of variance ½).
pub fn standard_cn<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Fill column by column so the draw order is fixed.
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = C64::new(s * re, s * im);
        }
    }
    m
}

/// One draw of `x ~ CN(0, cov)` as a column.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(cov: &CMat, rng: &mut R) -> Result<CMat> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}

/// Caches the covariance square root for repeated draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    root: CMat,
}

impl GaussianSampler {
    pub fn new(cov: &CMat) -> Result<Self> {
        Ok(Self {
            root: matrix_sqrt_psd(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        let z = standard_cn(rng, self.root.ncols(), 1);
        &self.root * z
    }
}
