use faer::Mat;
use serde::Serialize;

use super::funcs::{psd_power, NEG_TOL};
use super::geometry::SiteSet;
use super::operator::Operator;
use crate::error::{domain, Result};
use crate::linalg::{self, c64, CMat};

/// Hermitian, positive semidefinite, unit-trace operator on a labelled site set.
#[derive(Clone, Debug)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates Hermiticity (1e-12 relative), trace (1e-10) and positivity (-1e-10).
    pub fn new(op: Operator) -> Result<Self> {
        let op = op.hermitian()?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return domain(format!("density matrix has trace {:.12}{:+.3e}i", tr.re, tr.im));
        }
        let min = linalg::eigvalsh(op.as_ref())?.first().copied().unwrap_or(0.0);
        if min < -NEG_TOL {
            return domain(format!("density matrix has eigenvalue {min:.3e}"));
        }
        Ok(Self(op))
    }

    /// Wraps an operator known to be a state by construction (Hermitian part taken, no spectral check).
    pub fn from_operator_unchecked(op: Operator) -> Self {
        let mat = linalg::hermitian_part(op.as_ref());
        Self(op.with_matrix(mat).expect("same shape"))
    }

    /// `op / Tr op` for a positive semidefinite operator.
    pub fn normalized(op: Operator) -> Result<Self> {
        let tr = op.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return domain(format!("cannot normalize an operator with trace {tr}"));
        }
        Self::new(op.scale(1.0 / tr))
    }

    /// `|ψ⟩⟨ψ|` for a normalized (or normalizable) vector.
    pub fn pure(sites: SiteSet, dims: Vec<usize>, psi: &[c64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return domain("state vector has zero or non-finite norm");
        }
        let d = psi.len();
        let m = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self(Operator::new(sites, dims, m)?))
    }

    pub fn maximally_mixed(sites: SiteSet, dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self(Operator::identity(sites, dims).scale(1.0 / d as f64))
    }

    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn sites(&self) -> &SiteSet {
        self.0.sites()
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.0.matrix()
    }

    /// Reduced state on `keep`.
    pub fn reduce(&self, keep: &SiteSet) -> Result<DensityMatrix> {
        Ok(Self(self.0.partial_trace(keep)?))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self(self.0.tensor(&other.0)?))
    }

    /// `(1 − w)·self + w·other` on a common support.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.sites() != other.sites() {
            return domain(format!("cannot mix states on {} and {}", self.sites(), other.sites()));
        }
        Ok(Self(self.0.scale(1.0 - w).add(&other.0.scale(w))?))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(self.0.as_ref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateMetrics {
    /// `‖a − b‖₁`, not halved.
    pub trace_distance: f64,
    /// `Tr √(√b a √b)`.
    pub fidelity: f64,
}

fn same_support(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.sites() != b.sites() || a.dims() != b.dims() {
        return domain(format!("states live on different supports {} and {}", a.sites(), b.sites()));
    }
    Ok(())
}

/// `‖a − b‖₁` (sum of singular values of the difference).
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_support(a, b)?;
    linalg::trace_norm((a.matrix() - b.matrix()).as_ref())
}

/// Uhlmann fidelity `‖√ρ √σ‖₁`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_support(rho, sigma)?;
    let a = psd_power(rho.op(), 0.5)?;
    let b = psd_power(sigma.op(), 0.5)?;
    Ok(linalg::trace_norm(linalg::matmul(a.as_ref(), b.as_ref()).as_ref())?.min(1.0))
}

pub fn state_metrics(a: &DensityMatrix, b: &DensityMatrix) -> Result<StateMetrics> {
    Ok(StateMetrics { trace_distance: trace_distance(a, b)?, fidelity: fidelity(a, b)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_state(v: &[f64]) -> DensityMatrix {
        let n = v.len();
        let m = Mat::from_fn(n, n, |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) });
        DensityMatrix::new(Operator::new(SiteSet::single(0), vec![n], m).unwrap()).unwrap()
    }

    #[test]
    fn identical_and_orthogonal_states() {
        let a = diag_state(&[1.0, 0.0]);
        let b = diag_state(&[0.0, 1.0]);
        let m = state_metrics(&a, &a).unwrap();
        assert!(m.trace_distance.abs() < 1e-15 && (m.fidelity - 1.0).abs() < 1e-12);
        let m = state_metrics(&a, &b).unwrap();
        assert!((m.trace_distance - 2.0).abs() < 1e-15 && m.fidelity.abs() < 1e-12);
    }

    #[test]
    fn diagonal_trace_distance() {
        let d = trace_distance(&diag_state(&[0.6, 0.4]), &diag_state(&[0.5, 0.5])).unwrap();
        assert!((d - 0.2).abs() < 1e-14);
    }

    #[test]
    fn validation_rejects_non_states() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { c64::new([1.2, -0.2][i], 0.0) } else { c64::new(0.0, 0.0) });
        assert!(DensityMatrix::new(Operator::new(SiteSet::single(0), vec![2], m).unwrap()).is_err());
        let m = Mat::from_fn(2, 2, |i, j| if i == j { c64::new(0.6, 0.0) } else { c64::new(0.0, 0.0) });
        assert!(DensityMatrix::new(Operator::new(SiteSet::single(0), vec![2], m).unwrap()).is_err());
    }
}
