//! Counter-based random substreams.
//!
//! Substream `k` of a run is ChaCha8 keyed by the run seed with stream id `k`,
//! so sample `k` is the same no matter which worker draws it or in which
//! order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{CMatrix, CVector};

pub type Substream = ChaCha8Rng;

pub fn substream(seed: u64, k: u64) -> Substream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Circularly-symmetric standard complex normal: `E|z|² = 1`, `E z² = 0`.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let u: f64 = rng.sample(StandardNormal);
    let v: f64 = rng.sample(StandardNormal);
    Complex64::new(u, v) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn fill_standard_complex_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [Complex64]) {
    for z in out {
        *z = standard_complex_normal(rng);
    }
}

/// `S z` for fresh standard complex normal `z`.
pub fn correlated_complex_normal<R: Rng + ?Sized>(rng: &mut R, sqrt_cov: &CMatrix) -> CVector {
    let n = sqrt_cov.nrows();
    let z = CVector::from_fn(n, |_, _| standard_complex_normal(rng));
    sqrt_cov * z
}
