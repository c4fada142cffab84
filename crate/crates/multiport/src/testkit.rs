//! Deterministic generators for randomized validation: seeded matrices and
//! structured scattering systems used by the test suites and benchmarks.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{ComplexMatrix, C64};
use crate::network::{NetworkSystem, PortPartition};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

/// Random contraction: entries scaled so the spectral radius stays below one.
pub fn random_contraction(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).scale(Complex64::new(0.9 / (n as f64).max(1.0), 0.0))
}

/// Random symmetric (reciprocal) contraction.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_contraction(rng, n);
    a.add(&a.transpose()).scale(Complex64::new(0.5, 0.0))
}

/// Random unitary matrix via modified Gram-Schmidt on a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n, n);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| a[(i, j)]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = cols[k]
                .iter()
                .zip(&cols[j])
                .map(|(&q, &v)| q.conj() * v)
                .sum();
            let reference: Vec<C64> = cols[k].iter().map(|&q| proj * q).collect();
            for (v, correction) in cols[j].iter_mut().zip(reference) {
                *v -= correction;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in &mut cols[j] {
            *v /= norm;
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Scattering system with `n_free` free ports ("N") followed by `n_conn`
/// connected ports ("C").
pub fn system_nc(matrix: ComplexMatrix, n_free: usize, n_conn: usize) -> NetworkSystem {
    let partition = PortPartition::new(
        n_free + n_conn,
        vec![
            ("N".to_string(), (0..n_free).collect()),
            ("C".to_string(), (n_free..n_free + n_conn).collect()),
        ],
    )
    .unwrap();
    NetworkSystem::scattering(matrix, partition).unwrap()
}
