use serde::{Deserialize, Serialize};

use super::operator::Operator;
use crate::error::{Error, Result};
use crate::linalg::{self, Eigh};

/// Eigenvalues at or below this are treated as zero by `log`, `sqrt` and inverses.
pub const EIG_CUTOFF: f64 = 1e-14;

/// Eigenvalues below `-NEG_TOL` make `log`/`sqrt` fail.
pub const NEG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatFn {
    Exp,
    Log,
    Sqrt,
    Sign,
}

/// How `log`/`sqrt` (and powers) treat eigenvalues at or below the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Support {
    /// Fail unless every eigenvalue exceeds the cutoff.
    #[default]
    Strict,
    /// Eigenvalues below the cutoff contribute 0 (pseudo-inverse semantics).
    Pseudo,
}

fn check_spectrum(values: &[f64], support: Support, what: &str) -> Result<()> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEG_TOL {
        return Err(Error::NumericDomain(format!("{what} of a matrix with eigenvalue {min:.3e}")));
    }
    if support == Support::Strict && min <= EIG_CUTOFF {
        return Err(Error::NumericDomain(format!(
            "{what} of a singular matrix (eigenvalue {min:.3e}); use pseudo-inverse support"
        )));
    }
    Ok(())
}

/// `f(scale · op)` through an eigendecomposition of the Hermitian operator `op`.
pub fn hermitian_fn(op: &Operator, f: MatFn, scale: f64, support: Support) -> Result<Operator> {
    let op = op.clone().hermitian()?;
    let e = linalg::eigh(op.as_ref())?;
    let out = apply(&e, f, scale, support)?;
    op.with_matrix(linalg::hermitian_part(out.as_ref()))
}

pub(crate) fn apply(e: &Eigh, f: MatFn, scale: f64, support: Support) -> Result<linalg::CMat> {
    let vals: Vec<f64> = e.values.iter().map(|&x| x * scale).collect();
    let w: Vec<f64> = match f {
        MatFn::Exp => {
            // Exponentials are computed as given; callers shift spectra themselves.
            vals.iter().map(|&x| x.exp()).collect()
        }
        MatFn::Log => {
            check_spectrum(&vals, support, "log")?;
            vals.iter().map(|&x| if x > EIG_CUTOFF { x.ln() } else { 0.0 }).collect()
        }
        MatFn::Sqrt => {
            check_spectrum(&vals, support, "sqrt")?;
            vals.iter().map(|&x| if x > EIG_CUTOFF { x.sqrt() } else { 0.0 }).collect()
        }
        MatFn::Sign => vals
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
            .collect(),
    };
    Ok(e.from_diagonal(&w))
}

/// `op^p` for a positive semidefinite operator; negative powers use pseudo-inverse semantics.
pub fn psd_power(op: &Operator, p: f64) -> Result<Operator> {
    let op = op.clone().hermitian()?;
    let e = linalg::eigh(op.as_ref())?;
    check_spectrum(&e.values, Support::Pseudo, "power")?;
    let w: Vec<f64> = e.values.iter().map(|&x| if x > EIG_CUTOFF { x.powf(p) } else { 0.0 }).collect();
    op.with_matrix(linalg::hermitian_part(e.from_diagonal(&w).as_ref()))
}

/// Projector onto the eigenvectors with eigenvalue above the cutoff.
pub fn support_projector(op: &Operator) -> Result<Operator> {
    let op = op.clone().hermitian()?;
    let e = linalg::eigh(op.as_ref())?;
    let w: Vec<f64> = e.values.iter().map(|&x| if x > EIG_CUTOFF { 1.0 } else { 0.0 }).collect();
    op.with_matrix(linalg::hermitian_part(e.from_diagonal(&w).as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::geometry::SiteSet;
    use crate::linalg::c64;
    use faer::Mat;

    fn diag(v: &[f64]) -> Operator {
        let n = v.len();
        let m = Mat::from_fn(n, n, |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) });
        Operator::new(SiteSet::single(0), vec![n], m).unwrap()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = diag(&[0.0, 0.0]);
        let e = hermitian_fn(&z, MatFn::Exp, 1.0, Support::Strict).unwrap();
        assert!(e.max_abs_diff(&diag(&[1.0, 1.0])).unwrap() < 1e-15);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = hermitian_fn(&diag(&[4.0, 9.0]), MatFn::Sqrt, 1.0, Support::Strict).unwrap();
        assert!(r.max_abs_diff(&diag(&[2.0, 3.0])).unwrap() < 1e-14);
    }

    #[test]
    fn log_rejects_negative_and_singular_inputs() {
        assert!(matches!(
            hermitian_fn(&diag(&[1.0, -0.5]), MatFn::Log, 1.0, Support::Pseudo),
            Err(Error::NumericDomain(_))
        ));
        assert!(hermitian_fn(&diag(&[1.0, 0.0]), MatFn::Log, 1.0, Support::Strict).is_err());
        let l = hermitian_fn(&diag(&[1.0, 0.0]), MatFn::Log, 1.0, Support::Pseudo).unwrap();
        assert!(l.max_abs_diff(&diag(&[0.0, 0.0])).unwrap() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_square_root() {
        let r = psd_power(&diag(&[4.0, 0.0]), -0.5).unwrap();
        assert!(r.max_abs_diff(&diag(&[0.5, 0.0])).unwrap() < 1e-15);
    }
}
