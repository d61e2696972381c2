//! Dense linear-algebra helpers on top of `faer`.
//!
//! Every operator in the toolkit is a complex matrix, but the model
//! Hamiltonians we care about (transverse-field Ising, Heisenberg) are real.
//! Eigendecompositions and products check for an exactly-zero imaginary part
//! and fall back to the real kernels, which are three to four times faster.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Dense complex matrix used for every operator.
pub type CMat = Mat<c64>;

/// Switches faer to single-threaded kernels for the whole process. Parallel
/// reductions can change the last bits of a result between runs.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub fn is_real(m: MatRef<'_, c64>) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].im != 0.0 {
                return false;
            }
        }
    }
    true
}

fn real_part(m: MatRef<'_, c64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

fn complexify(m: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

/// `a * b`, using the real kernel when both factors are real.
pub fn matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    if is_real(a) && is_real(b) {
        let p = real_part(a) * real_part(b);
        complexify(p.as_ref())
    } else {
        a * b
    }
}

/// `a * b * a^†`.
pub fn sandwich(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let ab = matmul(a, b);
    matmul(ab.as_ref(), a.adjoint().to_owned().as_ref())
}

pub fn adjoint(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

pub fn identity(d: usize) -> CMat {
    Mat::identity(d, d)
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    let mut t = ZERO;
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut t = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

pub fn scale(m: MatRef<'_, c64>, s: f64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn hermitian_part(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Largest entrywise modulus of `m - m^†`.
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

enum Basis {
    Real(Mat<f64>),
    Complex(CMat),
}

/// Eigendecomposition `m = U diag(values) U^†` of a Hermitian matrix, values ascending.
pub struct Eigh {
    pub values: Vec<f64>,
    basis: Basis,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vectors(&self) -> CMat {
        match &self.basis {
            Basis::Real(u) => complexify(u.as_ref()),
            Basis::Complex(u) => u.clone(),
        }
    }

    /// `U diag(f(values)) U^†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let w: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.from_diagonal(&w)
    }

    pub fn from_diagonal(&self, w: &[f64]) -> CMat {
        match &self.basis {
            Basis::Real(u) => {
                let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * w[j]);
                let p = scaled * u.transpose();
                complexify(p.as_ref())
            }
            Basis::Complex(u) => {
                let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * w[j]);
                scaled * u.adjoint()
            }
        }
    }

    /// `U^† m U`: express `m` in the eigenbasis.
    pub fn to_eigenbasis(&self, m: MatRef<'_, c64>) -> CMat {
        match &self.basis {
            Basis::Real(u) if is_real(m) => {
                let p = u.transpose() * real_part(m) * u;
                complexify(p.as_ref())
            }
            Basis::Real(u) => {
                let uc = complexify(u.as_ref());
                uc.adjoint() * m * &uc
            }
            Basis::Complex(u) => u.adjoint() * m * u,
        }
    }

    /// Diagonal of `U^† m U` (real parts), without forming the full product.
    pub fn diagonal_in_basis(&self, m: MatRef<'_, c64>) -> Vec<f64> {
        let u = self.vectors();
        let mu = matmul(m, u.as_ref());
        (0..u.ncols())
            .map(|k| {
                let (a, b) = (u.col_as_slice(k), mu.col_as_slice(k));
                a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
            })
            .collect()
    }

    /// `U m U^†`: map an eigenbasis matrix back.
    pub fn from_eigenbasis(&self, m: MatRef<'_, c64>) -> CMat {
        match &self.basis {
            Basis::Real(u) if is_real(m) => {
                let p = u * real_part(m) * u.transpose();
                complexify(p.as_ref())
            }
            Basis::Real(u) => {
                let uc = complexify(u.as_ref());
                &uc * m * uc.adjoint()
            }
            Basis::Complex(u) => u * m * u.adjoint(),
        }
    }
}

/// Hermitian eigendecomposition. Only the lower triangle of `m` is read.
pub fn eigh(m: MatRef<'_, c64>) -> Result<Eigh> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("eigh of non-square {}x{} matrix", m.nrows(), m.ncols())));
    }
    check_finite(m)?;
    if is_real(m) {
        let r = real_part(m);
        let e = r
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let values = (0..r.nrows()).map(|i| e.S()[i]).collect();
        Ok(Eigh { values, basis: Basis::Real(e.U().to_owned()) })
    } else {
        let e = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let values = (0..m.nrows()).map(|i| e.S()[i].re).collect();
        Ok(Eigh { values, basis: Basis::Complex(e.U().to_owned()) })
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("eigvalsh of non-square {}x{} matrix", m.nrows(), m.ncols())));
    }
    check_finite(m)?;
    if is_real(m) {
        real_part(m)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))
    } else {
        m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
    }
}

pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    m.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))
}

fn check_finite(m: MatRef<'_, c64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NumericDomain("matrix has non-finite entries".into()));
            }
        }
    }
    Ok(())
}

/// Trace norm `‖m‖₁` (sum of singular values). Hermitian input is handled through its spectrum.
pub fn trace_norm(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == m.ncols() && hermiticity_defect(m) <= 1e-13 * (1.0 + m.norm_max()) {
        let h = hermitian_part(m);
        Ok(eigvalsh(h.as_ref())?.iter().map(|x| x.abs()).sum())
    } else {
        Ok(singular_values(m)?.iter().sum())
    }
}

/// Operator norm `‖m‖` (largest singular value).
pub fn op_norm(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    if m.nrows() == m.ncols() && hermiticity_defect(m) <= 1e-13 * (1.0 + m.norm_max()) {
        let h = hermitian_part(m);
        Ok(eigvalsh(h.as_ref())?.iter().fold(0.0f64, |a, x| a.max(x.abs())))
    } else {
        Ok(singular_values(m)?.iter().fold(0.0f64, |a, &x| a.max(x)))
    }
}

/// Largest eigenvalue of `m^† m`.
pub fn max_gram_eigenvalue(m: MatRef<'_, c64>) -> Result<f64> {
    let g = matmul(m.adjoint().to_owned().as_ref(), m);
    let g = hermitian_part(g.as_ref());
    Ok(eigvalsh(g.as_ref())?.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_paths_agree() {
        let m = Mat::from_fn(5, 5, |i, j| c64::new(((i * 3 + j * 3) % 7) as f64, 0.0));
        let e = eigh(m.as_ref()).unwrap();
        let back = e.map(|x| x);
        assert!((&back - &m).norm_max() < 1e-12);

        let h = Mat::from_fn(4, 4, |i, j| {
            let s = if i < j { 1.0 } else if i > j { -1.0 } else { 0.0 };
            c64::new((i + j) as f64, s * 0.5)
        });
        let e = eigh(h.as_ref()).unwrap();
        assert!((&e.map(|x| x) - &h).norm_max() < 1e-12);
        let d = e.to_eigenbasis(h.as_ref());
        for i in 0..4 {
            assert!((d[(i, i)].re - e.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_norm_of_pauli_z() {
        let z = Mat::from_fn(2, 2, |i, j| if i == j { c64::new(if i == 0 { 1.0 } else { -1.0 }, 0.0) } else { ZERO });
        assert!((trace_norm(z.as_ref()).unwrap() - 2.0).abs() < 1e-14);
        assert!((op_norm(z.as_ref()).unwrap() - 1.0).abs() < 1e-14);
    }
}
