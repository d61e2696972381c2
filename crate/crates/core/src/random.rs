//! Seeded random matrices and states for tests and model presets.

use faer::Mat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hilbert::{DensityMatrix, Operator, SiteSet};
use crate::linalg::{self, c64, CMat};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = c64::new(gauss(rng), gauss(rng)) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    m
}

/// GUE-distributed Hermitian matrix.
pub fn hermitian(d: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(d, d, rng);
    linalg::hermitian_part(g.as_ref())
}

/// Real symmetric Gaussian matrix.
pub fn real_symmetric(d: usize, rng: &mut impl Rng) -> CMat {
    let mut m = Mat::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let x = gauss(rng);
            m[(i, j)] = c64::new(x, 0.0);
            m[(j, i)] = c64::new(x, 0.0);
        }
    }
    m
}

/// Hermitian matrix rescaled to operator norm `norm`.
pub fn hermitian_with_norm(d: usize, norm: f64, rng: &mut impl Rng) -> Result<CMat> {
    let h = hermitian(d, rng);
    let n = linalg::op_norm(h.as_ref())?;
    Ok(linalg::scale(h.as_ref(), norm / n))
}

/// Haar-distributed unitary: Gram–Schmidt on the columns of a Ginibre matrix.
pub fn unitary(d: usize, rng: &mut impl Rng) -> Result<CMat> {
    let g = ginibre(d, d, rng);
    let mut q: CMat = Mat::zeros(d, d);
    for k in 0..d {
        let mut v: Vec<c64> = g.col_as_slice(k).to_vec();
        for p in 0..k {
            let qp = q.col_as_slice(p);
            let dot: c64 = qp.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, a) in v.iter_mut().zip(qp) {
                *x -= dot * a;
            }
        }
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (i, x) in v.iter().enumerate() {
            q[(i, k)] = x / n;
        }
    }
    Ok(q)
}

/// Random state `G G† / Tr` with `G` a `d × rank` Ginibre matrix.
pub fn density(sites: SiteSet, dims: Vec<usize>, rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let d: usize = dims.iter().product();
    let g = ginibre(d, rank.max(1), rng);
    let m = linalg::matmul(g.as_ref(), g.adjoint().to_owned().as_ref());
    DensityMatrix::normalized(Operator::new(sites, dims, linalg::hermitian_part(m.as_ref()))?)
}

/// Random pure state.
pub fn pure(sites: SiteSet, dims: Vec<usize>, rng: &mut impl Rng) -> Result<DensityMatrix> {
    density(sites, dims, 1, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(7);
        let u = unitary(6, &mut r).unwrap();
        let p = u.adjoint() * &u;
        assert!((&p - linalg::identity(6)).norm_max() < 1e-12);
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = hermitian(3, &mut rng(11));
        let b = hermitian(3, &mut rng(11));
        assert_eq!((&a - &b).norm_max(), 0.0);
    }
}
