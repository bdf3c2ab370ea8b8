//! Seeded random streams. Every probe column draws from its own stream keyed by
//! `(seed, salt, index)`, so results do not depend on the number of workers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of stream identifiers.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &id| splitmix64(acc ^ splitmix64(id)))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// `rows x cols` matrix of i.i.d. standard normal samples; column `j` is drawn
/// from stream `(seed, salt, j)`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, salt: u64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(rows, cols);
    if rows == 0 {
        return g;
    }
    g.as_mut_slice()
        .par_chunks_mut(rows)
        .enumerate()
        .for_each(|(j, col)| {
            let mut rng = stream(seed, &[salt, j as u64]);
            for v in col.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        });
    g
}
