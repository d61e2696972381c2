//! Entropic quantities in nats: von Neumann entropy, relative entropy,
//! (conditional) mutual information and Markov-gap scans over block chains.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::hilbert::{DensityMatrix, SiteSet, EIG_CUTOFF, NEG_TOL};
use crate::linalg;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `−Σ λ ln λ` over a spectrum, ignoring eigenvalues at or below the cutoff.
pub fn entropy_of_spectrum(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &x in values {
        if x < -NEG_TOL {
            return domain(format!("state has negative eigenvalue {x:.3e}"));
        }
        if x > EIG_CUTOFF {
            s -= x * x.ln();
        }
    }
    Ok(s.max(0.0))
}

/// Von Neumann entropy in nats.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues()?)
}

/// `S(ρ‖σ) = Tr ρ (ln ρ − ln σ)`, `+∞` when the support of ρ is not inside that of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.sites() != sigma.sites() || rho.dims() != sigma.dims() {
        return domain(format!("relative entropy between supports {} and {}", rho.sites(), sigma.sites()));
    }
    let e = linalg::eigh(sigma.matrix().as_ref())?;
    let weights = e.diagonal_in_basis(rho.matrix().as_ref());
    let mut cross = 0.0;
    let mut leak = 0.0;
    for (&lam, &w) in e.values.iter().zip(&weights) {
        if lam > EIG_CUTOFF {
            cross += w * lam.ln();
        } else {
            leak += w;
        }
    }
    if leak > 1e-10 {
        return Ok(f64::INFINITY);
    }
    let s_rho = entropy(rho)?;
    Ok(-s_rho - cross)
}

/// Memoized entropies of reduced states of one global state.
pub struct EntropyCache<'a> {
    rho: &'a DensityMatrix,
    memo: HashMap<SiteSet, f64>,
}

impl<'a> EntropyCache<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        Self { rho, memo: HashMap::new() }
    }

    /// `S(X)`; the empty set has entropy 0.
    pub fn s(&mut self, x: &SiteSet) -> Result<f64> {
        if x.is_empty() {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.get(x) {
            return Ok(v);
        }
        let v = entropy(&self.rho.reduce(x)?)?;
        self.memo.insert(x.clone(), v);
        Ok(v)
    }

    /// `I(A:C|B) = S(AB) + S(BC) − S(ABC) − S(B)`.
    pub fn cmi(&mut self, a: &SiteSet, b: &SiteSet, c: &SiteSet) -> Result<f64> {
        if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
            return domain(format!("regions {a}, {b}, {c} overlap"));
        }
        let abc = a.union(b).union(c);
        if !abc.is_subset(self.rho.sites()) {
            return domain(format!("regions {abc} exceed the support {}", self.rho.sites()));
        }
        if a.is_empty() || c.is_empty() {
            return Ok(0.0);
        }
        Ok(self.s(&a.union(b))? + self.s(&b.union(c))? - self.s(&abc)? - self.s(b)?)
    }
}

/// Quantum conditional mutual information `I(A:C|B)` in nats; `B` may be empty.
pub fn cmi(rho: &DensityMatrix, a: &SiteSet, b: &SiteSet, c: &SiteSet) -> Result<f64> {
    EntropyCache::new(rho).cmi(a, b, c)
}

pub fn mutual_information(rho: &DensityMatrix, a: &SiteSet, b: &SiteSet) -> Result<f64> {
    cmi(rho, a, &SiteSet::empty(), b)
}

/// `S(A|B) = S(AB) − S(B)`.
pub fn conditional_entropy(rho: &DensityMatrix, a: &SiteSet, b: &SiteSet) -> Result<f64> {
    let mut c = EntropyCache::new(rho);
    Ok(c.s(&a.union(b))? - c.s(b)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutConvention {
    /// `I(A_1…A_{i−1} : A_{i+1}…A_n | A_i)` over interior blocks.
    Open,
    /// `I(A_i : A∖A_{i−1}A_iA_{i+1} | A_{i−1}A_{i+1})`, cyclic.
    Closed,
    /// `I(A_i : A∖A_{i−1}A_iA_{i+1})`, cyclic.
    MutualInfo,
    /// For each `i`, the open scan of `Tr_{A_i} ρ` read from `A_{i+1}` around to `A_{i−1}`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutValue {
    pub cut_index: usize,
    pub cmi_nats: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovGapReport {
    pub convention: CutConvention,
    pub per_cut: Vec<CutValue>,
    pub epsilon_nats: f64,
}

fn open_scan(cache: &mut EntropyCache<'_>, blocks: &[&SiteSet]) -> Result<Vec<f64>> {
    let n = blocks.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let left = SiteSet::union_all(blocks[..i].iter().copied());
        let right = SiteSet::union_all(blocks[i + 1..].iter().copied());
        out.push(cache.cmi(&left, blocks[i], &right)?);
    }
    Ok(out)
}

/// Scans every cut of a block chain under the given convention.
pub fn markov_gap_scan(rho: &DensityMatrix, blocks: &[SiteSet], convention: CutConvention) -> Result<MarkovGapReport> {
    let n = blocks.len();
    if n < 3 {
        return domain(format!("a Markov-gap scan needs at least 3 blocks, got {n}"));
    }
    let all = SiteSet::union_all(blocks);
    if all.len() != blocks.iter().map(|b| b.len()).sum::<usize>() || &all != rho.sites() {
        return domain("blocks must partition the state's support");
    }
    if blocks.iter().any(|b| b.is_empty()) {
        return domain("blocks must be non-empty");
    }
    let mut cache = EntropyCache::new(rho);
    let per_cut: Vec<CutValue> = match convention {
        CutConvention::Open => {
            let refs: Vec<&SiteSet> = blocks.iter().collect();
            open_scan(&mut cache, &refs)?
                .into_iter()
                .enumerate()
                .map(|(k, v)| CutValue { cut_index: k + 1, cmi_nats: v })
                .collect()
        }
        CutConvention::Closed | CutConvention::MutualInfo => {
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let nb = blocks[(i + n - 1) % n].union(&blocks[(i + 1) % n]);
                let rest = all.difference(&nb).difference(&blocks[i]);
                let cond = if convention == CutConvention::Closed { nb } else { SiteSet::empty() };
                v.push(CutValue { cut_index: i, cmi_nats: cache.cmi(&blocks[i], &cond, &rest)? });
            }
            v
        }
        CutConvention::Uniform => {
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let order: Vec<&SiteSet> = (1..n).map(|k| &blocks[(i + k) % n]).collect();
                let rest = SiteSet::union_all(order.iter().copied());
                let reduced = rho.reduce(&rest)?;
                let mut sub = EntropyCache::new(&reduced);
                let worst = open_scan(&mut sub, &order)?.into_iter().fold(0.0f64, f64::max);
                v.push(CutValue { cut_index: i, cmi_nats: worst });
            }
            v
        }
    };
    let epsilon_nats = per_cut.iter().map(|c| c.cmi_nats).fold(0.0f64, f64::max);
    Ok(MarkovGapReport { convention, per_cut, epsilon_nats })
}

/// Simplified Fannes-type bound `6 √δ |A|` with `|A| = ln dim H_A`.
pub fn fannes_bound(delta: f64, region_log_dim: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return domain(format!("Fannes bound needs 0 <= delta <= 1, got {delta}"));
    }
    Ok(6.0 * delta.sqrt() * region_log_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Operator;
    use crate::linalg::c64;
    use faer::Mat;

    fn diag(v: &[f64]) -> DensityMatrix {
        let n = v.len();
        let m = Mat::from_fn(n, n, |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) });
        DensityMatrix::new(Operator::new(SiteSet::single(0), vec![n], m).unwrap()).unwrap()
    }

    #[test]
    fn entropy_of_simple_states() {
        assert!(entropy(&diag(&[1.0, 0.0])).unwrap().abs() < 1e-15);
        assert!((entropy(&diag(&[0.5, 0.5])).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let s = entropy(&diag(&[0.9, 0.1])).unwrap();
        let oracle = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((s - oracle).abs() < 1e-15);
        assert!((s - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn relative_entropy_cases() {
        let p0 = diag(&[1.0, 0.0]);
        let p1 = diag(&[0.0, 1.0]);
        let mm = diag(&[0.5, 0.5]);
        assert!(relative_entropy(&mm, &mm).unwrap().abs() < 1e-15);
        assert!((relative_entropy(&p0, &mm).unwrap() - std::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(relative_entropy(&p0, &p1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn fannes_bound_values() {
        assert_eq!(fannes_bound(0.0, 1.0).unwrap(), 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((fannes_bound(1.0, ln2).unwrap() - 6.0 * ln2).abs() < 1e-15);
        assert!(fannes_bound(1.5, 1.0).is_err());
    }
}
