//! Seeded random instance generators.
//!
//! States are normalized complex Wishart draws `G G† / tr(G G†)` with `G` a
//! `d x rank` matrix of standard complex Gaussians. Sub-unital positive
//! operators are random Hermitian matrices centred at `id/2` whose spectrum is
//! clamped into `[0, 1]`. All sweeps derive per-instance seeds with
//! [`derive_seed`], so instance `i` does not depend on how many came before.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, eigh, hermitian_part, CMat, DensityOperator};

/// SplitMix64 finalizer over `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    Mat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMat {
    let g = gaussian_matrix(rng, dim, dim);
    Mat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * (0.5 * scale))
}

/// `G G†` with `G` of shape `dim x rank`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> CMat {
    let g = gaussian_matrix(rng, dim, rank);
    hermitian_part(&(&g * g.adjoint()))
}

pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let w = random_psd(rng, dim, rank.max(1));
    let tr: f64 = (0..dim).map(|i| w[(i, i)].re).sum();
    DensityOperator::from_trusted(hermitian_part(&Mat::from_fn(dim, dim, |i, j| w[(i, j)] / tr)))
}

/// Random `0 <= X <= id`: Hermitian centred at `id/2`, spectrum clamped into `[0, 1]`.
pub fn random_sub_unital<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let spread = 0.25 + rng.random::<f64>();
    let mut h = random_hermitian(rng, dim, spread / (dim as f64).sqrt());
    for i in 0..dim {
        h[(i, i)] += c64::new(0.5, 0.0);
    }
    let clamped = eigh(&h).map_spectrum(|v| v.clamp(0.0, 1.0));
    hermitian_part(&clamped)
}

/// Haar-distributed unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let mut q = gaussian_matrix(rng, dim, dim);
    for j in 0..dim {
        for k in 0..j {
            let proj: c64 = (0..dim).map(|i| q[(i, k)].conj() * q[(i, j)]).sum();
            for i in 0..dim {
                let v = q[(i, k)];
                q[(i, j)] -= v * proj;
            }
        }
        let norm: f64 = (0..dim).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            q[(i, j)] /= norm;
        }
    }
    q
}
