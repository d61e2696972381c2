use faer::{Mat, MatRef};

use super::geometry::{ChainGeometry, SiteSet};
use crate::error::{domain, Error, Result};
use crate::linalg::{self, c64, CMat, ZERO};

/// Row-major multi-index offsets of the sub-register at `positions` inside a
/// register with local dimensions `dims`.
pub(crate) fn offsets(dims: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut stride = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * dims[k + 1];
    }
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &o in &out {
            for x in 0..dims[p] {
                next.push(o + x * stride[p]);
            }
        }
        out = next;
    }
    out
}

fn positions_in(outer: &SiteSet, inner: &SiteSet) -> Vec<usize> {
    inner.iter().map(|i| outer.position(i).expect("subset checked by caller")).collect()
}

/// Merges two labelled registers, checking that shared sites agree on their dimension.
pub(crate) fn merge_registers(a: (&SiteSet, &[usize]), b: (&SiteSet, &[usize])) -> Result<(SiteSet, Vec<usize>)> {
    let sites = a.0.union(b.0);
    let mut dims = Vec::with_capacity(sites.len());
    for i in sites.iter() {
        let da = a.0.position(i).map(|p| a.1[p]);
        let db = b.0.position(i).map(|p| b.1[p]);
        match (da, db) {
            (Some(x), Some(y)) if x != y => {
                return domain(format!("site {i} has dimension {x} in one operand and {y} in the other"));
            }
            (Some(x), _) | (None, Some(x)) => dims.push(x),
            (None, None) => unreachable!(),
        }
    }
    Ok((sites, dims))
}

/// Dense operator on a labelled set of sites.
#[derive(Clone, Debug)]
pub struct Operator {
    sites: SiteSet,
    dims: Vec<usize>,
    mat: CMat,
}

impl Operator {
    pub fn new(sites: SiteSet, dims: Vec<usize>, mat: CMat) -> Result<Self> {
        if dims.len() != sites.len() {
            return domain(format!("{} dimensions given for {} sites", dims.len(), sites.len()));
        }
        let d: usize = dims.iter().product();
        if mat.nrows() != d || mat.ncols() != d {
            return domain(format!(
                "matrix is {}x{} but sites {sites} need dimension {d}",
                mat.nrows(),
                mat.ncols()
            ));
        }
        Ok(Self { sites, dims, mat })
    }

    /// Operator on `sites` of `geom`, taking local dimensions from the chain.
    pub fn on(geom: &ChainGeometry, sites: SiteSet, mat: CMat) -> Result<Self> {
        geom.check(&sites)?;
        let dims = geom.dims_of(&sites);
        Self::new(sites, dims, mat)
    }

    pub fn identity(sites: SiteSet, dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self { sites, dims, mat: linalg::identity(d) }
    }

    pub fn zeros(sites: SiteSet, dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self { sites, dims, mat: Mat::zeros(d, d) }
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    /// Same labels, new matrix.
    pub fn with_matrix(&self, mat: CMat) -> Result<Self> {
        Self::new(self.sites.clone(), self.dims.clone(), mat)
    }

    /// Local dimensions of a subset of this operator's sites.
    pub fn dims_of(&self, sub: &SiteSet) -> Result<Vec<usize>> {
        sub.iter()
            .map(|i| {
                self.sites
                    .position(i)
                    .map(|p| self.dims[p])
                    .ok_or_else(|| Error::Domain(format!("site {i} is not in the support {}", self.sites)))
            })
            .collect()
    }

    /// `self ⊗ 1` on a larger register. Sites already present keep their dimension.
    pub fn extend_to(&self, sites: &SiteSet, dims: &[usize]) -> Result<Operator> {
        if !self.sites.is_subset(sites) {
            return domain(format!("support {} is not contained in {}", self.sites, sites));
        }
        let (merged, mdims) = merge_registers((sites, dims), (&self.sites, &self.dims))?;
        if merged.len() != sites.len() {
            return domain("target register is inconsistent");
        }
        if self.sites.len() == sites.len() {
            return Ok(self.clone());
        }
        let comp = sites.difference(&self.sites);
        let off_s = offsets(&mdims, &positions_in(sites, &self.sites));
        let off_c = offsets(&mdims, &positions_in(sites, &comp));
        let d: usize = mdims.iter().product();
        let mut big = Mat::<c64>::zeros(d, d);
        for (j, &oj) in off_s.iter().enumerate() {
            for (i, &oi) in off_s.iter().enumerate() {
                let v = self.mat[(i, j)];
                if v == ZERO {
                    continue;
                }
                for &oc in &off_c {
                    big[(oi + oc, oj + oc)] = v;
                }
            }
        }
        Ok(Operator { sites: sites.clone(), dims: mdims, mat: big })
    }

    /// `self += coeff · (term ⊗ 1)` in place.
    pub fn add_embedded(&mut self, term: &Operator, coeff: f64) -> Result<()> {
        if !term.sites.is_subset(&self.sites) || self.dims_of(&term.sites)? != term.dims {
            return domain(format!("term on {} does not fit into {}", term.sites, self.sites));
        }
        let comp = self.sites.difference(&term.sites);
        let off_s = offsets(&self.dims, &positions_in(&self.sites, &term.sites));
        let off_c = offsets(&self.dims, &positions_in(&self.sites, &comp));
        for (j, &oj) in off_s.iter().enumerate() {
            for (i, &oi) in off_s.iter().enumerate() {
                let v = term.mat[(i, j)] * coeff;
                if v == ZERO {
                    continue;
                }
                for &oc in &off_c {
                    self.mat[(oi + oc, oj + oc)] += v;
                }
            }
        }
        Ok(())
    }

    /// Embeds into the whole chain, acting as the identity off the support.
    pub fn embed(&self, geom: &ChainGeometry) -> Result<Operator> {
        geom.check(&self.sites)?;
        self.extend_to(&geom.all_sites(), geom.dims())
    }

    /// Partial trace over every site not in `keep`.
    pub fn partial_trace(&self, keep: &SiteSet) -> Result<Operator> {
        if !keep.is_subset(&self.sites) {
            return domain(format!("cannot keep {keep}: support is {}", self.sites));
        }
        if keep.len() == self.sites.len() {
            return Ok(self.clone());
        }
        let comp = self.sites.difference(keep);
        let off_k = offsets(&self.dims, &positions_in(&self.sites, keep));
        let off_c = offsets(&self.dims, &positions_in(&self.sites, &comp));
        let dk = off_k.len();
        let mut out = Mat::<c64>::zeros(dk, dk);
        for (j, &oj) in off_k.iter().enumerate() {
            for (i, &oi) in off_k.iter().enumerate() {
                let mut acc = ZERO;
                for &oc in &off_c {
                    acc += self.mat[(oi + oc, oj + oc)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Operator { sites: keep.clone(), dims: self.dims_of(keep)?, mat: out })
    }

    /// Tensor product of operators on disjoint supports.
    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        if !self.sites.is_disjoint(&other.sites) {
            return domain(format!("supports {} and {} overlap", self.sites, other.sites));
        }
        let (sites, dims) = merge_registers((&self.sites, &self.dims), (&other.sites, &other.dims))?;
        let off_a = offsets(&dims, &positions_in(&sites, &self.sites));
        let off_b = offsets(&dims, &positions_in(&sites, &other.sites));
        let d: usize = dims.iter().product();
        let mut out = Mat::<c64>::zeros(d, d);
        for (j, &oj) in off_a.iter().enumerate() {
            for (i, &oi) in off_a.iter().enumerate() {
                let a = self.mat[(i, j)];
                if a == ZERO {
                    continue;
                }
                for (l, &ol) in off_b.iter().enumerate() {
                    for (k, &ok) in off_b.iter().enumerate() {
                        out[(oi + ok, oj + ol)] = a * other.mat[(k, l)];
                    }
                }
            }
        }
        Ok(Operator { sites, dims, mat: out })
    }

    fn aligned(&self, other: &Operator) -> Result<(Operator, Operator)> {
        let (sites, dims) = merge_registers((&self.sites, &self.dims), (&other.sites, &other.dims))?;
        Ok((self.extend_to(&sites, &dims)?, other.extend_to(&sites, &dims)?))
    }

    /// Sum on the union of supports.
    pub fn add(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        Ok(Operator { mat: &a.mat + &b.mat, ..a })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        Ok(Operator { mat: &a.mat - &b.mat, ..a })
    }

    /// Product on the union of supports.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        let (a, b) = self.aligned(other)?;
        let mat = linalg::matmul(a.mat.as_ref(), b.mat.as_ref());
        Ok(Operator { mat, ..a })
    }

    pub fn scale(&self, s: f64) -> Operator {
        Operator { sites: self.sites.clone(), dims: self.dims.clone(), mat: linalg::scale(self.mat.as_ref(), s) }
    }

    pub fn adjoint(&self) -> Operator {
        Operator { sites: self.sites.clone(), dims: self.dims.clone(), mat: linalg::adjoint(self.mat.as_ref()) }
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.mat.as_ref())
    }

    /// `‖M − M†‖` relative to `‖M‖` (entrywise max).
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.mat.norm_max();
        if scale == 0.0 {
            0.0
        } else {
            linalg::hermiticity_defect(self.mat.as_ref()) / scale
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-12
    }

    /// Projects onto the Hermitian part, failing when the defect exceeds 1e-12 relative.
    pub fn hermitian(self) -> Result<Operator> {
        let d = self.hermiticity_defect();
        if d > 1e-12 {
            return domain(format!("operator is not Hermitian (relative defect {d:.3e})"));
        }
        let mat = linalg::hermitian_part(self.mat.as_ref());
        Ok(Operator { mat, ..self })
    }

    pub fn op_norm(&self) -> Result<f64> {
        linalg::op_norm(self.mat.as_ref())
    }

    pub fn trace_norm(&self) -> Result<f64> {
        linalg::trace_norm(self.mat.as_ref())
    }

    /// Largest entrywise difference after aligning supports.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        let (a, b) = self.aligned(other)?;
        Ok((&a.mat - &b.mat).norm_max())
    }
}

/// `Σ_k (K_k ⊗ 1) X (K_k ⊗ 1)†` where each `K_k` maps the register `input` to `output`.
///
/// Sites of `x` outside `input` are untouched. The result lives on
/// `(x.sites \ input) ∪ output`.
pub(crate) fn conjugate_sum(
    x: &Operator,
    ops: &[CMat],
    input: (&SiteSet, &[usize]),
    output: (&SiteSet, &[usize]),
) -> Result<Operator> {
    let (in_sites, in_dims) = input;
    let (out_sites, out_dims) = output;
    let d_in: usize = in_dims.iter().product();
    let d_out: usize = out_dims.iter().product();
    for k in ops {
        if k.nrows() != d_out || k.ncols() != d_in {
            return domain(format!("Kraus operator is {}x{}, expected {d_out}x{d_in}", k.nrows(), k.ncols()));
        }
    }
    if !in_sites.is_subset(&x.sites) {
        return domain(format!("channel input {in_sites} is not inside the support {}", x.sites));
    }
    if x.dims_of(in_sites)? != in_dims {
        return domain("channel input dimensions do not match the operator");
    }
    let rest = x.sites.difference(in_sites);
    if !rest.is_disjoint(out_sites) {
        return domain(format!("channel output {out_sites} collides with untouched sites {rest}"));
    }
    let rest_dims = x.dims_of(&rest)?;
    let (new_sites, new_dims) = merge_registers((&rest, &rest_dims), (out_sites, out_dims))?;

    let d_r: usize = rest_dims.iter().product();
    let off_r = offsets(&x.dims, &positions_in(&x.sites, &rest));
    let off_i = offsets(&x.dims, &positions_in(&x.sites, in_sites));
    let d = d_r * d_in;

    // Reorder X so the input register is the fastest index: row (r, a) -> r*d_in + a.
    let mut xp = vec![ZERO; d * d];
    for s in 0..d_r {
        for b in 0..d_in {
            let col = x.mat.col_as_slice(off_r[s] + off_i[b]);
            let base = (s * d_in + b) * d;
            for r in 0..d_r {
                for a in 0..d_in {
                    xp[base + r * d_in + a] = col[off_r[r] + off_i[a]];
                }
            }
        }
    }

    let e = d_r * d_out;
    let mut y = vec![ZERO; e * e];
    let mut t1h = vec![ZERO; d * e];
    for k in ops {
        // (1 ⊗ K) acting on every column: view the buffer as d_in x (d_r * d).
        let m = MatRef::from_column_major_slice(&xp, d_in, d_r * d);
        let t1 = linalg::matmul(k.as_ref(), m);
        // t1 is d_out x (d_r * d), i.e. the (e x d) matrix (1⊗K)X in column-major order.
        for c in 0..d {
            for r in 0..d_r {
                for xo in 0..d_out {
                    let v = t1[(xo, c * d_r + r)];
                    t1h[(r * d_out + xo) * d + c] = v.conj();
                }
            }
        }
        let m2 = MatRef::from_column_major_slice(&t1h, d_in, d_r * e);
        let z = linalg::matmul(k.as_ref(), m2);
        // z holds Z = (1⊗K)((1⊗K)X)^†; accumulate Y = Z^† row-major.
        for col in 0..e {
            for s in 0..d_r {
                for yo in 0..d_out {
                    let v = z[(yo, col * d_r + s)];
                    y[col * e + s * d_out + yo] += v.conj();
                }
            }
        }
    }

    let off_r2 = offsets(&new_dims, &positions_in(&new_sites, &rest));
    let off_o2 = offsets(&new_dims, &positions_in(&new_sites, out_sites));
    let mut out = Mat::<c64>::zeros(e, e);
    for r in 0..d_r {
        for xo in 0..d_out {
            let row = r * d_out + xo;
            for s in 0..d_r {
                for yo in 0..d_out {
                    let col = s * d_out + yo;
                    out[(off_r2[r] + off_o2[xo], off_r2[s] + off_o2[yo])] = y[row * e + col];
                }
            }
        }
    }
    Operator::new(new_sites, new_dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::geometry::Boundary;

    fn pauli_z() -> CMat {
        Mat::from_fn(2, 2, |i, j| if i != j { ZERO } else if i == 0 { c64::new(1.0, 0.0) } else { c64::new(-1.0, 0.0) })
    }

    #[test]
    fn site_zero_is_slowest() {
        let g = ChainGeometry::qubits(2, Boundary::Open).unwrap();
        let z0 = Operator::on(&g, SiteSet::single(0), pauli_z()).unwrap().embed(&g).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| z0.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn conjugate_sum_matches_explicit_kron() {
        // X on sites {0,1,2}, K acting on site 1 only.
        let dims = vec![2, 3, 2];
        let sites = SiteSet::range(0, 3);
        let x = Mat::from_fn(12, 12, |i, j| c64::new((i * 7 + j * 3) as f64 % 5.0, (i as f64 - j as f64) * 0.1));
        let xo = Operator::new(sites.clone(), dims.clone(), x.clone()).unwrap();
        let k = Mat::from_fn(3, 3, |i, j| c64::new((i + 2 * j) as f64 * 0.3, (i * j) as f64 * 0.2));
        let one = SiteSet::single(1);
        let y = conjugate_sum(&xo, std::slice::from_ref(&k), (&one, &[3]), (&one, &[3])).unwrap();
        let big = linalg::kron(linalg::kron(linalg::identity(2).as_ref(), k.as_ref()).as_ref(), linalg::identity(2).as_ref());
        let expect = &big * &x * big.adjoint();
        assert!((&expect - y.matrix()).norm_max() < 1e-12);
    }

    #[test]
    fn conjugate_sum_relabels_output_sites() {
        // A map from site 0 to sites {0,3}: append |0> on site 3.
        let sites = SiteSet::range(0, 2);
        let x = Mat::from_fn(4, 4, |i, j| c64::new((i + j) as f64, 0.0));
        let xo = Operator::new(sites, vec![2, 2], x.clone()).unwrap();
        let k = Mat::from_fn(4, 2, |i, j| if i == 2 * j { c64::new(1.0, 0.0) } else { ZERO });
        let out_sites = SiteSet::new([0, 3]).unwrap();
        let y = conjugate_sum(&xo, &[k], (&SiteSet::single(0), &[2]), (&out_sites, &[2, 2])).unwrap();
        assert_eq!(y.sites().as_slice(), &[0, 1, 3]);
        let ket0 = Operator::new(
            SiteSet::single(3),
            vec![2],
            Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c64::new(1.0, 0.0) } else { ZERO }),
        )
        .unwrap();
        let expect = xo.tensor(&ket0).unwrap();
        assert!(y.max_abs_diff(&expect).unwrap() < 1e-12);
    }
}
