//! Seeded random instances: matrices, PSD operators, unitaries and GKSL
//! generators. Used by verification runs that need reproducible inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use num_complex::Complex64;

use crate::generators::{GkslSpec, JumpOperator};
use crate::operator::{hermitian_part, CMatrix, HermitianOperator, PositiveOperator};

pub type InstanceRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with independent standard normal real and imaginary parts.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    hermitian_part(&random_matrix(rng, n))
}

pub fn random_hermitian_operator<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianOperator {
    HermitianOperator::new(random_hermitian(rng, n)).expect("Hermitian part is Hermitian")
}

/// `S S† / n` for a Gaussian `S`, so entries stay O(1).
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PositiveOperator {
    let s = random_matrix(rng, n);
    PositiveOperator::gram(&s.unscale((n as f64).sqrt())).expect("Gram matrix is PSD")
}

/// Unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    random_matrix(rng, n).qr().q()
}

/// Random Hamiltonian plus `jumps` random jump operators with rates in
/// `[0.1, 1.1)`, scaled so the generator norm stays moderate.
pub fn random_gksl<R: Rng + ?Sized>(rng: &mut R, n: usize, jumps: usize) -> GkslSpec {
    let hamiltonian = random_hermitian_operator(rng, n);
    let scale = 1.0 / (n as f64).sqrt();
    let jumps = (0..jumps)
        .map(|_| JumpOperator {
            operator: random_matrix(rng, n).scale(scale),
            rate: 0.1 + rng.random::<f64>(),
        })
        .collect();
    GkslSpec { hamiltonian, jumps }
}
