//! Reference states with known conditional mutual information.

use rand::Rng;

use crate::error::{domain, Result};
use crate::hilbert::{DensityMatrix, Operator, SiteSet};
use crate::linalg::{self, c64};
use crate::random;

/// `(|0…0⟩ + |1…1⟩)/√2` on `n` qubits.
pub fn ghz(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return domain("GHZ state needs at least one qubit");
    }
    let d = 1usize << n;
    let mut psi = vec![c64::new(0.0, 0.0); d];
    psi[0] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[d - 1] = psi[0];
    DensityMatrix::pure(SiteSet::range(0, n), vec![2; n], &psi)
}

/// `(1 − w)ρ + w·τ` with `τ` maximally mixed.
pub fn mix_with_identity(rho: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&w) {
        return domain(format!("mixing weight must lie in [0, 1], got {w}"));
    }
    let tau = DensityMatrix::maximally_mixed(rho.sites().clone(), rho.dims().to_vec());
    rho.mix(&tau, w)
}

/// Full-rank modification with weight `2^{−(N−1)}` on the maximally mixed state,
/// `N` the number of qubits (sites).
pub fn full_rank_mixed(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.sites().len() as i32;
    mix_with_identity(rho, 2f64.powi(-(n - 1)))
}

/// Exact quantum Markov chain `A − B − C` on qubits with `|B| = 2`.
///
/// Built as `U_B (Σ_j p_j σ^j_A ⊗ |j⟩⟨j| ⊗ ω^j_{B₂C}) U_B†` with a random
/// unitary on `B`, so `I(A:C|B) = 0` while `A` and `C` stay correlated.
/// Sites are `A = 0..a`, `B = {a, a+1}`, `C = a+2..a+2+c`.
pub fn markov_triple(a: usize, c: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    if a == 0 || c == 0 {
        return domain("A and C must each hold at least one qubit");
    }
    let n = a + 2 + c;
    let all = SiteSet::range(0, n);
    let mut acc = Operator::zeros(all.clone(), vec![2; n]);
    let p0: f64 = rng.gen_range(0.25..0.75);
    for (j, p) in [(0usize, p0), (1, 1.0 - p0)] {
        let sa = random::density(SiteSet::range(0, a), vec![2; a], 1 << a, rng)?;
        let mut flag = Operator::zeros(SiteSet::single(a), vec![2]);
        let mut m = flag.matrix().clone();
        m[(j, j)] = c64::new(1.0, 0.0);
        flag = flag.with_matrix(m)?;
        let wc = random::density(SiteSet::range(a + 1, n), vec![2; c + 1], 1 << (c + 1), rng)?;
        let term = sa.op().tensor(&flag)?.tensor(wc.op())?;
        acc = acc.add(&term.scale(p))?;
    }
    let u = random::unitary(4, rng)?;
    let ub = Operator::new(SiteSet::range(a, a + 2), vec![2, 2], u)?.extend_to(&all, &vec![2; n])?;
    let rotated = linalg::sandwich(ub.as_ref(), acc.as_ref());
    DensityMatrix::normalized(acc.with_matrix(linalg::hermitian_part(rotated.as_ref()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info;

    #[test]
    fn ghz_reduction_is_classical() {
        let r = ghz(4).unwrap().reduce(&SiteSet::range(0, 3)).unwrap();
        let m = r.matrix();
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((m[(7, 7)].re - 0.5).abs() < 1e-15);
        assert!(m.norm_l2() - 0.5f64.sqrt() < 1e-15);
    }

    #[test]
    fn markov_triple_has_zero_cmi() {
        let mut r = random::rng(5);
        let rho = markov_triple(2, 2, &mut r).unwrap();
        let (a, b, c) = (SiteSet::range(0, 2), SiteSet::range(2, 4), SiteSet::range(4, 6));
        assert!(info::cmi(&rho, &a, &b, &c).unwrap().abs() < 1e-10);
        assert!(info::mutual_information(&rho, &a, &c).unwrap() > 1e-4);
    }
}
