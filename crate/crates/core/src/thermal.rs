//! Short-range Hamiltonians, restricted Hamiltonians, Gibbs states and
//! correlation functions.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hilbert::{Boundary, ChainGeometry, DensityMatrix, Operator, SiteSet, DEFAULT_MAX_DIM};
use crate::linalg::{self, c64, CMat};
use crate::random;

/// One bounded Hermitian term on a contiguous set of sites.
#[derive(Clone, Debug)]
pub struct Term {
    pub sites: SiteSet,
    pub matrix: CMat,
}

/// Named preset with its parameters, kept alongside generated terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PresetSpec {
    pub fn new(name: &str, params: &[(&str, f64)], seed: Option<u64>) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seed,
        }
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }
}

/// `H = Σ_i h_i` on a chain; β is never folded into the terms.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    geom: ChainGeometry,
    terms: Vec<Term>,
    strength: f64,
    preset: Option<PresetSpec>,
}

impl Hamiltonian {
    pub fn new(geom: ChainGeometry, terms: Vec<Term>) -> Result<Self> {
        let mut strength: f64 = 0.0;
        for (k, t) in terms.iter().enumerate() {
            geom.check(&t.sites)?;
            if t.sites.is_empty() {
                return domain(format!("term {k} has no sites"));
            }
            if !geom.is_contiguous(&t.sites) {
                return domain(format!("term {k} on {} is not contiguous", t.sites));
            }
            let d = geom.dim_of(&t.sites);
            if t.matrix.nrows() != d || t.matrix.ncols() != d {
                return domain(format!("term {k} matrix is {}x{}, expected {d}x{d}", t.matrix.nrows(), t.matrix.ncols()));
            }
            let op = Operator::on(&geom, t.sites.clone(), t.matrix.clone())?;
            if !op.is_hermitian() {
                return domain(format!("term {k} on {} is not Hermitian", t.sites));
            }
            strength = strength.max(op.op_norm()?);
        }
        Ok(Self { geom, terms, strength, preset: None })
    }

    pub fn geometry(&self) -> &ChainGeometry {
        &self.geom
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn preset(&self) -> Option<&PresetSpec> {
        self.preset.as_ref()
    }

    /// Attaches preset metadata without touching the terms.
    pub fn with_preset(mut self, spec: PresetSpec) -> Self {
        self.preset = Some(spec);
        self
    }

    /// Range `r`: the largest term diameter.
    pub fn range(&self) -> usize {
        self.terms.iter().map(|t| self.geom.diameter(&t.sites)).max().unwrap_or(0)
    }

    /// Strength `J`: the largest term operator norm.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    fn term_op(&self, t: &Term) -> Operator {
        Operator::new(t.sites.clone(), self.geom.dims_of(&t.sites), t.matrix.clone()).expect("validated at construction")
    }

    /// Sum of the given term indices on the register `x`.
    pub fn assemble_terms(&self, indices: &[usize], x: &SiteSet) -> Result<Operator> {
        self.geom.check(x)?;
        let mut h = Operator::zeros(x.clone(), self.geom.dims_of(x));
        for &k in indices {
            h.add_embedded(&self.term_op(&self.terms[k]), 1.0)?;
        }
        Ok(h)
    }

    /// Indices of the terms supported inside `x`.
    pub fn terms_inside(&self, x: &SiteSet) -> Vec<usize> {
        (0..self.terms.len()).filter(|&k| self.terms[k].sites.is_subset(x)).collect()
    }

    /// `H_X` as an operator on `x`.
    pub fn assemble_on(&self, x: &SiteSet) -> Result<Operator> {
        self.assemble_terms(&self.terms_inside(x), x)
    }

    /// The full Hamiltonian on the whole chain.
    pub fn assemble(&self) -> Result<Operator> {
        self.assemble_on(&self.geom.all_sites())
    }

    /// Keeps exactly the terms supported inside `x`.
    pub fn restrict(&self, x: &SiteSet) -> Result<Hamiltonian> {
        self.geom.check(x)?;
        let terms = self.terms_inside(x).into_iter().map(|k| self.terms[k].clone()).collect();
        Ok(Hamiltonian { geom: self.geom.clone(), strength: 0.0, terms, preset: None }.with_strength())
    }

    fn with_strength(mut self) -> Self {
        self.strength = self
            .terms
            .iter()
            .map(|t| self.term_op(t).op_norm().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        self
    }

    /// Adds `c · 1` as a single-site term on site 0 (useful for shift-invariance checks).
    pub fn shifted(&self, c: f64) -> Result<Hamiltonian> {
        let d = self.geom.dim(0);
        let mut terms = self.terms.clone();
        terms.push(Term { sites: SiteSet::single(0), matrix: linalg::scale(linalg::identity(d).as_ref(), c) });
        Hamiltonian::new(self.geom.clone(), terms)
    }

    pub fn from_preset(spec: &PresetSpec, n: usize, boundary: Boundary) -> Result<Hamiltonian> {
        Self::from_preset_capped(spec, n, boundary, DEFAULT_MAX_DIM)
    }

    /// [`Hamiltonian::from_preset`] with an explicit total-dimension cap.
    pub fn from_preset_capped(spec: &PresetSpec, n: usize, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
        let p = |k, d| spec.param(k, d);
        let mut h = match spec.name.as_str() {
            "tfim" => tfim_capped(n, p("g", 1.0), boundary, cap)?,
            "heisenberg" => heisenberg_capped(n, p("jx", 1.0), p("jy", 1.0), p("jz", 1.0), p("h", 0.0), boundary, cap)?,
            "random-nn" => random_nn_capped(n, p("norm", 1.0), spec.seed.unwrap_or(0), boundary, cap)?,
            "classical-ising" => classical_ising_capped(n, p("j", 1.0), p("h", 0.0), boundary, cap)?,
            "uncoupled" => uncoupled_capped(n, p("h", 1.0), boundary, cap)?,
            other => return domain(format!("unknown preset {other:?}; known presets: {}", PRESETS.join(", "))),
        };
        h.preset = Some(spec.clone());
        Ok(h)
    }
}

/// Names accepted by [`Hamiltonian::from_preset`].
pub const PRESETS: &[&str] = &["tfim", "heisenberg", "random-nn", "classical-ising", "uncoupled"];

fn pauli(k: char) -> CMat {
    let (z, o, i) = (c64::new(0.0, 0.0), c64::new(1.0, 0.0), c64::new(0.0, 1.0));
    match k {
        'x' => Mat::from_fn(2, 2, |a, b| if a != b { o } else { z }),
        'y' => Mat::from_fn(2, 2, |a, b| if a == b { z } else if a == 0 { -i } else { i }),
        'z' => Mat::from_fn(2, 2, |a, b| if a != b { z } else if a == 0 { o } else { -o }),
        _ => linalg::identity(2),
    }
}

/// Pauli matrices `1, X, Y, Z` indexed by `'i', 'x', 'y', 'z'`.
pub fn pauli_matrix(k: char) -> CMat {
    pauli(k)
}

fn bonds(n: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Closed && n > 2 {
        b.push((n - 1, 0));
    }
    b
}

/// Two-site term on a bond; for the wrapping bond `(n−1, 0)` the factors are swapped
/// so that the matrix follows the sorted site order.
fn bond_term(i: usize, j: usize, a: &CMat, b: &CMat) -> Term {
    let (lo, hi, m) = if i < j { (i, j, linalg::kron(a.as_ref(), b.as_ref())) } else { (j, i, linalg::kron(b.as_ref(), a.as_ref())) };
    Term { sites: SiteSet::new([lo, hi]).expect("distinct"), matrix: m }
}

fn field_term(i: usize, m: CMat, c: f64) -> Term {
    Term { sites: SiteSet::single(i), matrix: linalg::scale(m.as_ref(), c) }
}

/// Transverse-field Ising: bonds `−Z_iZ_{i+1}` and fields `−g X_i`.
pub fn tfim(n: usize, g: f64, boundary: Boundary) -> Result<Hamiltonian> {
    tfim_capped(n, g, boundary, DEFAULT_MAX_DIM)
}

fn tfim_capped(n: usize, g: f64, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
    let geom = ChainGeometry::with_cap(vec![2; n], boundary, cap)?;
    let mzz = linalg::scale(pauli('z').as_ref(), -1.0);
    let mut terms: Vec<Term> = bonds(n, boundary).into_iter().map(|(i, j)| bond_term(i, j, &mzz, &pauli('z'))).collect();
    if g != 0.0 {
        terms.extend((0..n).map(|i| field_term(i, pauli('x'), -g)));
    }
    Hamiltonian::new(geom, terms)
}

/// XYZ Heisenberg chain `Σ (jx XX + jy YY + jz ZZ) − h Σ Z`.
pub fn heisenberg(n: usize, jx: f64, jy: f64, jz: f64, h: f64, boundary: Boundary) -> Result<Hamiltonian> {
    heisenberg_capped(n, jx, jy, jz, h, boundary, DEFAULT_MAX_DIM)
}

fn heisenberg_capped(n: usize, jx: f64, jy: f64, jz: f64, h: f64, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
    let geom = ChainGeometry::with_cap(vec![2; n], boundary, cap)?;
    let mut bond = Mat::<c64>::zeros(4, 4);
    for (c, k) in [(jx, 'x'), (jy, 'y'), (jz, 'z')] {
        let p = linalg::kron(pauli(k).as_ref(), pauli(k).as_ref());
        bond = &bond + &linalg::scale(p.as_ref(), c);
    }
    // The bond matrix is symmetric under swapping the two sites.
    let mut terms: Vec<Term> = bonds(n, boundary)
        .into_iter()
        .map(|(i, j)| Term { sites: SiteSet::new([i.min(j), i.max(j)]).expect("distinct"), matrix: bond.clone() })
        .collect();
    if h != 0.0 {
        terms.extend((0..n).map(|i| field_term(i, pauli('z'), -h)));
    }
    Hamiltonian::new(geom, terms)
}

/// Seeded random nearest-neighbour chain: GUE bond terms rescaled to operator norm `norm`.
pub fn random_nn(n: usize, norm: f64, seed: u64, boundary: Boundary) -> Result<Hamiltonian> {
    random_nn_capped(n, norm, seed, boundary, DEFAULT_MAX_DIM)
}

fn random_nn_capped(n: usize, norm: f64, seed: u64, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
    let geom = ChainGeometry::with_cap(vec![2; n], boundary, cap)?;
    let mut rng = random::rng(seed);
    let mut terms = Vec::new();
    for (i, j) in bonds(n, boundary) {
        let m = random::hermitian_with_norm(4, norm, &mut rng)?;
        let (lo, hi) = (i.min(j), i.max(j));
        terms.push(Term { sites: SiteSet::new([lo, hi])?, matrix: m });
    }
    Hamiltonian::new(geom, terms)
}

/// Commuting classical Ising chain `−j Σ Z_iZ_{i+1} − h Σ Z_i`.
pub fn classical_ising(n: usize, j: f64, h: f64, boundary: Boundary) -> Result<Hamiltonian> {
    classical_ising_capped(n, j, h, boundary, DEFAULT_MAX_DIM)
}

fn classical_ising_capped(n: usize, j: f64, h: f64, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
    let geom = ChainGeometry::with_cap(vec![2; n], boundary, cap)?;
    let zz = linalg::scale(pauli('z').as_ref(), -j);
    let mut terms: Vec<Term> = bonds(n, boundary).into_iter().map(|(a, b)| bond_term(a, b, &zz, &pauli('z'))).collect();
    if h != 0.0 {
        terms.extend((0..n).map(|i| field_term(i, pauli('z'), -h)));
    }
    Hamiltonian::new(geom, terms)
}

/// Single-site fields `−h X_i` with no couplings.
pub fn uncoupled(n: usize, h: f64, boundary: Boundary) -> Result<Hamiltonian> {
    uncoupled_capped(n, h, boundary, DEFAULT_MAX_DIM)
}

fn uncoupled_capped(n: usize, h: f64, boundary: Boundary, cap: usize) -> Result<Hamiltonian> {
    let geom = ChainGeometry::with_cap(vec![2; n], boundary, cap)?;
    let terms = (0..n).map(|i| field_term(i, pauli('x'), -h)).collect();
    Hamiltonian::new(geom, terms)
}

/// Normalized Gibbs state with its log partition function.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub beta: f64,
    pub state: DensityMatrix,
    pub log_z: f64,
}

/// `e^{−β h} / Z` for a Hermitian operator; the spectrum is shifted by its minimum first.
pub fn gibbs_of_operator(h: &Operator, beta: f64) -> Result<GibbsState> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("inverse temperature {beta} must be finite and non-negative"));
    }
    let h = h.clone().hermitian()?;
    if beta == 0.0 {
        let d = h.dim() as f64;
        return Ok(GibbsState {
            beta,
            state: DensityMatrix::maximally_mixed(h.sites().clone(), h.dims().to_vec()),
            log_z: d.ln(),
        });
    }
    let e = linalg::eigh(h.as_ref())?;
    let e0 = e.values[0];
    let w: Vec<f64> = e.values.iter().map(|&x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let m = linalg::hermitian_part(e.from_diagonal(&p).as_ref());
    Ok(GibbsState {
        beta,
        state: DensityMatrix::from_operator_unchecked(h.with_matrix(m)?),
        log_z: z.ln() - beta * e0,
    })
}

/// Gibbs state of the whole chain.
pub fn gibbs_state(h: &Hamiltonian, beta: f64) -> Result<GibbsState> {
    gibbs_of_operator(&h.assemble()?, beta)
}

/// `ρ^{H_X}`: Gibbs state of the restricted Hamiltonian on `x`.
pub fn gibbs_on(h: &Hamiltonian, x: &SiteSet, beta: f64) -> Result<GibbsState> {
    gibbs_of_operator(&h.assemble_on(x)?, beta)
}

/// Left/right halves of a contiguous block and the terms that cross between them.
#[derive(Clone, Debug)]
pub struct MiddleSplit {
    pub left: SiteSet,
    pub right: SiteSet,
    /// Indices of the crossing terms.
    pub terms: Vec<usize>,
    /// `H_{B^M}` on the union of the crossing term supports.
    pub h_middle: Operator,
    /// `J · r`, a bound on `‖H_{B^M}‖`.
    pub norm_bound: f64,
}

/// Splits a contiguous `b` in walking order (left half takes the extra site).
pub fn split_middle_interaction(h: &Hamiltonian, b: &SiteSet) -> Result<MiddleSplit> {
    if b.len() < 2 {
        return domain("splitting needs at least two sites");
    }
    let order = h.geom.walk_order(b)?;
    let half = b.len().div_ceil(2);
    let left: SiteSet = order[..half].iter().copied().collect();
    let right: SiteSet = order[half..].iter().copied().collect();
    let terms: Vec<usize> = (0..h.terms.len())
        .filter(|&k| {
            let s = &h.terms[k].sites;
            !s.is_disjoint(&left) && !s.is_disjoint(&right)
        })
        .collect();
    let support = SiteSet::union_all(terms.iter().map(|&k| &h.terms[k].sites));
    let support = if support.is_empty() { b.clone() } else { support };
    let h_middle = h.assemble_terms(&terms, &support)?;
    Ok(MiddleSplit { left, right, terms, h_middle, norm_bound: h.strength() * h.range() as f64 })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    /// Best value of `|Tr[(M⊗N)(ρ_XY − ρ_X⊗ρ_Y)]|` found by alternating ascent.
    pub cor_lower: f64,
    /// `‖ρ_XY − ρ_X⊗ρ_Y‖₁`, an upper bound on the correlation function.
    pub cor_upper: f64,
    pub restarts: usize,
}

pub const DEFAULT_RESTARTS: usize = 8;

/// Sign of the Hermitian part; the partial traces fed in here are Hermitian up to
/// rounding but may be tiny, which defeats a relative Hermiticity check.
fn sign_of(op: &Operator) -> Result<Operator> {
    let op = op.with_matrix(linalg::hermitian_part(op.as_ref()))?;
    let e = linalg::eigh(op.as_ref())?;
    let w: Vec<f64> = e.values.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect();
    op.with_matrix(e.from_diagonal(&w))
}

/// Operator correlation `Cor(X:Y)` between disjoint regions.
///
/// Alternates `M = sign(Tr_Y[(1⊗N)Δ])` and `N = sign(Tr_X[(M⊗1)Δ])` over
/// Hermitian contractions from `restarts` seeded random starts.
pub fn correlation(rho: &DensityMatrix, x: &SiteSet, y: &SiteSet, restarts: usize, seed: u64) -> Result<CorrelationReport> {
    if !x.is_disjoint(y) {
        return domain(format!("correlation regions {x} and {y} overlap"));
    }
    let xy = x.union(y);
    let r_xy = rho.reduce(&xy)?;
    let prod = rho.reduce(x)?.tensor(&rho.reduce(y)?)?;
    let delta = r_xy.op().sub(prod.op())?;
    let cor_upper = delta.trace_norm()?;
    let dy = rho.op().dims_of(y)?;
    let dim_y: usize = dy.iter().product();
    let mut rng = random::rng(seed);
    let mut best: f64 = 0.0;
    if cor_upper > 0.0 {
        for _ in 0..restarts {
            let start = Operator::new(y.clone(), dy.clone(), random::hermitian(dim_y, &mut rng))?;
            let mut n = sign_of(&start)?;
            let mut last = f64::NEG_INFINITY;
            for _ in 0..200 {
                let g = n.mul(&delta)?.partial_trace(x)?;
                let m = sign_of(&g)?;
                let f = m.mul(&delta)?.partial_trace(y)?;
                n = sign_of(&f)?;
                let val = n.mul(&f)?.trace().re.abs();
                if (val - last).abs() < 1e-10 {
                    last = val;
                    break;
                }
                last = val;
            }
            best = best.max(last);
        }
    }
    Ok(CorrelationReport { cor_lower: best, cor_upper, restarts })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationFit {
    /// Correlation length; `+∞` when correlations do not decay, 0 when all vanish.
    pub xi: f64,
    pub prefactor: f64,
    pub rsq: f64,
    /// Set when every correlation is below 1e-13.
    pub degenerate: bool,
    /// `(distance, cor_upper)` for every pair.
    pub points: Vec<(usize, f64)>,
}

/// Fits `ln Cor_upper(X:Y) ≈ ln a − d/ξ` over region pairs at increasing distance.
pub fn correlation_length_fit(h: &Hamiltonian, beta: f64, pairs: &[(SiteSet, SiteSet)]) -> Result<CorrelationFit> {
    if pairs.len() < 3 {
        return domain("correlation-length fit needs at least 3 pairs");
    }
    let rho = gibbs_state(h, beta)?.state;
    let mut points = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let r = correlation(&rho, x, y, 0, 0)?;
        points.push((h.geom.set_distance(x, y), r.cor_upper));
    }
    let usable: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 1e-13).map(|&(d, c)| (d as f64, c.ln())).collect();
    if usable.len() < 2 {
        return Ok(CorrelationFit { xi: 0.0, prefactor: 0.0, rsq: 0.0, degenerate: true, points });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all pairs sit at the same distance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rsq = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let xi = if slope >= -1e-6 { f64::INFINITY } else { -1.0 / slope };
    Ok(CorrelationFit { xi, prefactor: intercept.exp(), rsq, degenerate: false, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_keeps_inner_terms_only() {
        let h = tfim(4, 0.5, Boundary::Open).unwrap();
        let r = h.restrict(&SiteSet::new([0, 1]).unwrap()).unwrap();
        // Bond (0,1) plus the two fields on sites 0 and 1.
        assert_eq!(r.terms().len(), 3);
        let single = h.restrict(&SiteSet::single(2)).unwrap();
        assert_eq!(single.terms().len(), 1);
        assert_eq!(single.terms()[0].sites, SiteSet::single(2));
        assert_eq!(h.restrict(&h.geometry().all_sites()).unwrap().terms().len(), h.terms().len());
    }

    #[test]
    fn single_qubit_gibbs_state() {
        let geom = ChainGeometry::qubits(1, Boundary::Open).unwrap();
        let h = Hamiltonian::new(geom, vec![Term { sites: SiteSet::single(0), matrix: pauli('z') }]).unwrap();
        let g = gibbs_state(&h, 1.0).unwrap();
        let e = std::f64::consts::E;
        let z = e + 1.0 / e;
        assert!((g.state.matrix()[(0, 0)].re - (1.0 / e) / z).abs() < 1e-15);
        assert!((g.state.matrix()[(1, 1)].re - e / z).abs() < 1e-15);
        assert!((g.log_z - z.ln()).abs() < 1e-14);
    }

    #[test]
    fn middle_split_of_nearest_neighbour_block() {
        let h = tfim(8, 1.0, Boundary::Open).unwrap();
        let s = split_middle_interaction(&h, &SiteSet::range(2, 6)).unwrap();
        assert_eq!(s.left, SiteSet::range(2, 4));
        assert_eq!(s.right, SiteSet::range(4, 6));
        assert_eq!(s.terms.len(), 1);
        assert_eq!(h.terms()[s.terms[0]].sites, SiteSet::new([3, 4]).unwrap());
        let odd = split_middle_interaction(&h, &SiteSet::range(2, 5)).unwrap();
        assert_eq!(odd.left, SiteSet::range(2, 4));
        assert!(split_middle_interaction(&h, &SiteSet::new([1, 3]).unwrap()).is_err());
    }
}
