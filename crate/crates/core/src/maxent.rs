//! Maximum-entropy states with prescribed marginals, the local Gibbs family
//! they span, and certificates relating entropy gaps to Markov gaps.

use std::collections::VecDeque;

use faer::Mat;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::hilbert::{Boundary, DensityMatrix, MatFn, Operator, SiteSet, Support, EIG_CUTOFF};
use crate::info::{self, CutConvention};
use crate::linalg::{self, c64, CMat};

/// Overlapping regions together with target marginals on each.
#[derive(Clone, Debug)]
pub struct MarginalFamily {
    targets: Vec<DensityMatrix>,
    support: SiteSet,
    dims: Vec<usize>,
}

impl MarginalFamily {
    /// Checks each target and mutual consistency on overlaps (trace norm ≤ 1e-8).
    pub fn new(targets: Vec<DensityMatrix>) -> Result<Self> {
        if targets.is_empty() {
            return domain("a marginal family needs at least one region");
        }
        let mut reg = crate::hilbert::Register::empty();
        for t in &targets {
            reg = reg.union(&crate::hilbert::Register::of(t.op()))?;
        }
        for (i, a) in targets.iter().enumerate() {
            for b in &targets[i + 1..] {
                let o = a.sites().intersection(b.sites());
                if o.is_empty() {
                    continue;
                }
                let d = crate::hilbert::trace_distance(&a.reduce(&o)?, &b.reduce(&o)?)?;
                if d > 1e-8 {
                    return domain(format!(
                        "marginals on {} and {} disagree on {o} (trace distance {d:.3e})",
                        a.sites(),
                        b.sites()
                    ));
                }
            }
        }
        Ok(Self { targets, support: reg.sites, dims: reg.dims })
    }

    /// Family of marginals of `rho` on the given regions.
    pub fn from_state(rho: &DensityMatrix, regions: &[SiteSet]) -> Result<Self> {
        let targets = regions.iter().map(|r| rho.reduce(r)).collect::<Result<Vec<_>>>()?;
        Self::new(targets)
    }

    pub fn regions(&self) -> Vec<SiteSet> {
        self.targets.iter().map(|t| t.sites().clone()).collect()
    }

    pub fn targets(&self) -> &[DensityMatrix] {
        &self.targets
    }

    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
}

/// Consecutive block pairs `A_iA_{i+1}`; a closed chain adds `A_nA_1`.
pub fn pair_regions(blocks: &[SiteSet], boundary: Boundary) -> Vec<SiteSet> {
    let n = blocks.len();
    let mut out: Vec<SiteSet> = (0..n.saturating_sub(1)).map(|i| blocks[i].union(&blocks[i + 1])).collect();
    if boundary == Boundary::Closed && n > 2 {
        out.push(blocks[n - 1].union(&blocks[0]));
    }
    out
}

/// Cyclic triples `A_{i−1}A_iA_{i+1}`.
pub fn triple_regions(blocks: &[SiteSet]) -> Vec<SiteSet> {
    let n = blocks.len();
    (0..n).map(|i| blocks[(i + n - 1) % n].union(&blocks[i]).union(&blocks[(i + 1) % n])).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxEntOptions {
    /// Target for the largest trace-norm marginal mismatch.
    pub tol: f64,
    pub max_iter: usize,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for MaxEntOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, memory: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct MaxEntSolution {
    pub sigma_max: DensityMatrix,
    /// Gauge-fixed Hermitian multipliers, one per family region.
    pub multipliers: Vec<Operator>,
    pub dual_value: f64,
    /// `max_i ‖σ_{X_i} − ρ_{X_i}‖₁`.
    pub marginal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dimension of the face the solution lives on (full dimension when targets are full rank).
    pub face_dim: usize,
    /// Dual objective after every accepted step.
    pub dual_trace: Vec<f64>,
}

impl MaxEntSolution {
    /// Largest operator norm among gauge-fixed multipliers.
    pub fn max_multiplier_norm(&self) -> Result<f64> {
        self.multipliers.iter().map(|m| m.op_norm()).try_fold(0.0f64, |a, x| Ok(a.max(x?)))
    }
}

/// Orthonormal basis (as columns) of the intersection of the supports of the
/// embedded targets, or `None` when every target is full rank.
fn face_basis(family: &MarginalFamily) -> Result<Option<CMat>> {
    let d: usize = family.dims.iter().product();
    let mut outside = Operator::zeros(family.support.clone(), family.dims.clone());
    let mut deficient = false;
    for t in &family.targets {
        let e = linalg::eigh(t.matrix().as_ref())?;
        let w: Vec<f64> = e.values.iter().map(|&x| if x > 1e-12 { 0.0 } else { 1.0 }).collect();
        if w.iter().any(|&x| x > 0.0) {
            deficient = true;
            let kernel = t.op().with_matrix(e.from_diagonal(&w))?;
            outside.add_embedded(&kernel, 1.0)?;
        }
    }
    if !deficient {
        return Ok(None);
    }
    let e = linalg::eigh(linalg::hermitian_part(outside.as_ref()).as_ref())?;
    let keep: Vec<usize> = (0..d).filter(|&k| e.values[k] < 1e-9).collect();
    if keep.is_empty() {
        return domain("the marginals admit no common state");
    }
    let u = e.vectors();
    Ok(Some(Mat::from_fn(d, keep.len(), |i, j| u[(i, keep[j])])))
}

/// Real coordinates of a Hermitian matrix, orthonormal for `Re Tr(A B)`.
fn flatten(ms: &[CMat]) -> Vec<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let mut v = Vec::new();
    for m in ms {
        let d = m.nrows();
        for j in 0..d {
            v.push(m[(j, j)].re);
            for i in 0..j {
                v.push(s2 * m[(i, j)].re);
                v.push(s2 * m[(i, j)].im);
            }
        }
    }
    v
}

fn unflatten(v: &[f64], dims: &[usize]) -> Vec<CMat> {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dims.len());
    let mut k = 0;
    for &d in dims {
        let mut m = Mat::<c64>::zeros(d, d);
        for j in 0..d {
            m[(j, j)] = c64::new(v[k], 0.0);
            k += 1;
            for i in 0..j {
                let z = c64::new(r2 * v[k], r2 * v[k + 1]);
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        out.push(m);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Dual<'a> {
    family: &'a MarginalFamily,
    face: Option<CMat>,
    local_dims: Vec<usize>,
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
    residual: f64,
    sigma: Operator,
}

impl Dual<'_> {
    fn lambdas(&self, x: &[f64]) -> Result<Vec<Operator>> {
        unflatten(x, &self.local_dims)
            .into_iter()
            .zip(&self.family.targets)
            .map(|(m, t)| t.op().with_matrix(m))
            .collect()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let lambdas = self.lambdas(x)?;
        let mut h = Operator::zeros(self.family.support.clone(), self.family.dims.clone());
        let mut linear = 0.0;
        for (l, t) in lambdas.iter().zip(&self.family.targets) {
            h.add_embedded(l, 1.0)?;
            linear += linalg::trace_product(l.as_ref(), t.matrix().as_ref()).re;
        }
        let (log_z, sigma_mat) = match &self.face {
            None => exp_normalized(h.matrix())?,
            Some(v) => {
                let hv = linalg::matmul(h.as_ref(), v.as_ref());
                let hf = linalg::matmul(linalg::adjoint(v.as_ref()).as_ref(), hv.as_ref());
                let (lz, sf) = exp_normalized(&linalg::hermitian_part(hf.as_ref()))?;
                (lz, linalg::sandwich(v.as_ref(), sf.as_ref()))
            }
        };
        let sigma = h.with_matrix(linalg::hermitian_part(sigma_mat.as_ref()))?;
        let mut grads = Vec::with_capacity(lambdas.len());
        let mut residual: f64 = 0.0;
        for t in &self.family.targets {
            let g = sigma.partial_trace(t.sites())?.sub(t.op())?;
            residual = residual.max(g.trace_norm()?);
            grads.push(g.into_matrix());
        }
        Ok(Evaluation { value: log_z - linear, grad: flatten(&grads), residual, sigma })
    }
}

/// `(ln Tr e^{h}, e^{h} / Tr e^{h})` with the spectrum shifted by its maximum.
fn exp_normalized(h: &CMat) -> Result<(f64, CMat)> {
    let e = linalg::eigh(h.as_ref())?;
    let top = e.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = e.values.iter().map(|&x| (x - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    Ok((top + z.ln(), e.from_diagonal(&p)))
}

/// Warm start: `ln ρ_{X_i}` minus `ln` of the overlap with the next region.
fn warm_start(family: &MarginalFamily) -> Result<Vec<CMat>> {
    let n = family.targets.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = &family.targets[i];
        let mut l = crate::hilbert::hermitian_fn(&mix_for_log(t)?, MatFn::Log, 1.0, Support::Pseudo)?;
        if n > 1 {
            let next = &family.targets[(i + 1) % n];
            let o = t.sites().intersection(next.sites());
            let wraps = i + 1 == n;
            if !o.is_empty() && (!wraps || n > 2) && o.len() < t.sites().len() {
                let lo = crate::hilbert::hermitian_fn(&mix_for_log(&t.reduce(&o)?)?, MatFn::Log, 1.0, Support::Pseudo)?;
                l = l.sub(&lo)?;
            }
        }
        out.push(l.into_matrix());
    }
    Ok(out)
}

/// Mixes in a little of the maximally mixed state so the warm-start logarithm stays bounded.
fn mix_for_log(t: &DensityMatrix) -> Result<Operator> {
    let mm = DensityMatrix::maximally_mixed(t.sites().clone(), t.dims().to_vec());
    Ok(t.mix(&mm, 1e-6)?.into_operator())
}

/// Moves each multiplier's component on the overlap with the next region forward,
/// then removes identity parts from all but the first multiplier.
fn gauge_fix(mut lambdas: Vec<Operator>) -> Result<Vec<Operator>> {
    let n = lambdas.len();
    for i in 0..n.saturating_sub(1) {
        let o = lambdas[i].sites().intersection(lambdas[i + 1].sites());
        if o.is_empty() || o.len() == lambdas[i].sites().len() {
            continue;
        }
        let rest: usize = lambdas[i].dim() / lambdas[i].partial_trace(&o)?.dim();
        let m = lambdas[i].partial_trace(&o)?.scale(1.0 / rest as f64);
        let reg = crate::hilbert::Register::of(&lambdas[i]);
        lambdas[i] = lambdas[i].sub(&m.extend_to(&reg.sites, &reg.dims)?)?;
        let reg = crate::hilbert::Register::of(&lambdas[i + 1]);
        lambdas[i + 1] = lambdas[i + 1].add(&m.extend_to(&reg.sites, &reg.dims)?)?;
    }
    let mut shift = 0.0;
    for l in lambdas.iter_mut().skip(1) {
        let c = l.trace().re / l.dim() as f64;
        shift += c;
        *l = l.sub(&Operator::identity(l.sites().clone(), l.dims().to_vec()).scale(c))?;
    }
    if let Some(first) = lambdas.first_mut() {
        *first = first.add(&Operator::identity(first.sites().clone(), first.dims().to_vec()).scale(shift))?;
    }
    Ok(lambdas)
}

/// Maximum-entropy state matching every marginal in `family`.
///
/// Minimizes the convex dual `ln Tr exp(Σ_i λ_i) − Σ_i Tr(λ_i ρ_{X_i})` by
/// L-BFGS with a backtracking line search. When some targets are rank
/// deficient the exponential family is restricted to the common support face,
/// so `σ_max` is reached at finite multipliers.
pub fn maxent_state(family: &MarginalFamily, opts: MaxEntOptions) -> Result<MaxEntSolution> {
    if !(opts.tol > 0.0) {
        return domain(format!("tolerance must be positive, got {}", opts.tol));
    }
    let face = face_basis(family)?;
    let face_dim = face.as_ref().map_or(family.dims.iter().product(), |v| v.ncols());
    let local_dims: Vec<usize> = family.targets.iter().map(|t| t.dim()).collect();
    let dual = Dual { family, face, local_dims };

    let mut x = flatten(&warm_start(family)?);
    let mut cur = dual.evaluate(&x)?;
    let mut trace = vec![cur.value];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while cur.residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        // Two-loop recursion.
        let mut q = cur.grad.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&cur.grad, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = cur.grad.iter().map(|v| -v).collect();
            slope = dot(&cur.grad, &dir);
        }
        let mut t = 1.0;
        let mut accepted = None;
        let noise = 8.0 * f64::EPSILON * (cur.value.abs() + 1.0);
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let next = dual.evaluate(&xn)?;
            let armijo = next.value <= cur.value + 1e-4 * t * slope;
            // Near the optimum the decrease drops below rounding; accept steps that
            // keep the value within noise while shrinking the directional derivative.
            let flat = next.value <= cur.value + noise && dot(&next.grad, &dir).abs() < slope.abs();
            if armijo || flat {
                accepted = Some((xn, next));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, next)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        cur = next;
        trace.push(cur.value);
    }
    let converged = cur.residual <= opts.tol;
    let multipliers = gauge_fix(dual.lambdas(&x)?)?;
    Ok(MaxEntSolution {
        sigma_max: DensityMatrix::from_operator_unchecked(cur.sigma),
        multipliers,
        dual_value: cur.value,
        marginal_residual: cur.residual,
        iterations,
        converged,
        face_dim,
        dual_trace: trace,
    })
}

/// `exp(Σ_i μ_i) / Z` for multipliers on family regions, embedded in `sites`.
pub fn family_gibbs(multipliers: &[Operator], sites: &SiteSet, dims: &[usize]) -> Result<DensityMatrix> {
    let mut h = Operator::zeros(sites.clone(), dims.to_vec());
    for m in multipliers {
        h.add_embedded(m, 1.0)?;
    }
    let (_, s) = exp_normalized(&linalg::hermitian_part(h.as_ref()))?;
    Ok(DensityMatrix::from_operator_unchecked(h.with_matrix(s)?))
}

/// `|S(ρ‖ω) − S(ρ‖σ_max) − S(σ_max‖ω)|`; `+∞` when any term diverges.
pub fn pythagorean_residual(rho: &DensityMatrix, sol: &MaxEntSolution, omega: &DensityMatrix) -> Result<f64> {
    let a = info::relative_entropy(rho, omega)?;
    let b = info::relative_entropy(rho, &sol.sigma_max)?;
    let c = info::relative_entropy(&sol.sigma_max, omega)?;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok((a - b - c).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateOptions {
    pub solver: MaxEntOptions,
    /// Additive slack on every certified inequality.
    pub slack: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        let solver = MaxEntOptions::default();
        Self { solver, slack: 10.0 * solver.tol }
    }
}

/// Markov-gap certificate relating the entropy gap of the max-ent fit to ε.
#[derive(Clone, Debug, Serialize)]
pub struct MarkovCertificate {
    pub epsilon_nats: f64,
    /// Second assumption parameter of the ring variants; 0 for open chains.
    pub epsilon_variant_nats: f64,
    /// `S(σ_max) − S(ρ)`.
    pub entropy_gap_nats: f64,
    /// `(n−1)·ε` for open chains, `n·max(ε, ε′)` for closed ones.
    pub bound_nats: f64,
    /// `S(ρ‖ω_fit)` with `ω_fit = σ_max`, the in-family fit.
    pub rel_entropy_to_witness_nats: f64,
    /// `n·max(ε, ε′)`.
    pub total_bound_nats: f64,
    /// `|S(ρ‖σ_max) − (S(σ_max) − S(ρ))|`.
    pub identity_residual: f64,
    pub slack: f64,
    pub pass: bool,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn fit_and_certify(
    rho: &DensityMatrix,
    regions: &[SiteSet],
    eps: f64,
    eps_variant: f64,
    gap_bound: f64,
    total_bound: f64,
    opts: CertificateOptions,
) -> Result<(MarkovCertificate, MaxEntSolution)> {
    let family = MarginalFamily::from_state(rho, regions)?;
    let sol = maxent_state(&family, opts.solver)?;
    let s_rho = info::entropy(rho)?;
    let s_max = info::entropy(&sol.sigma_max)?;
    let gap = s_max - s_rho;
    let rel = info::relative_entropy(rho, &sol.sigma_max)?;
    let identity_residual = (rel - gap).abs();
    let pass = sol.converged && gap <= gap_bound + opts.slack && rel <= total_bound + opts.slack;
    Ok((
        MarkovCertificate {
            epsilon_nats: eps,
            epsilon_variant_nats: eps_variant,
            entropy_gap_nats: gap,
            bound_nats: gap_bound,
            rel_entropy_to_witness_nats: rel,
            total_bound_nats: total_bound,
            identity_residual,
            slack: opts.slack,
            pass,
            iterations: sol.iterations,
            residual: sol.marginal_residual,
            converged: sol.converged,
        },
        sol,
    ))
}

/// Open-chain certificate: `S(σ_max) − S(ρ) ≤ (n−1)ε` and `S(ρ‖ω_fit) ≤ nε`
/// for the pair family `{A_iA_{i+1}}`.
pub fn thm1_certificate(rho: &DensityMatrix, blocks: &[SiteSet], opts: CertificateOptions) -> Result<MarkovCertificate> {
    let n = blocks.len() as f64;
    let eps = info::markov_gap_scan(rho, blocks, CutConvention::Open)?.epsilon_nats;
    let regions = pair_regions(blocks, Boundary::Open);
    Ok(fit_and_certify(rho, &regions, eps, 0.0, (n - 1.0) * eps, n * eps, opts)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RingVariant {
    /// Mutual-information assumption `I(A_i : A∖A_{i−1}A_iA_{i+1}) ≤ ε′`.
    MutualInfo,
    /// Uniform assumption: every `Tr_{A_i} ρ` is an open approximate Markov chain.
    Uniform,
}

/// Closed-chain certificate over the triple family `{A_{i−1}A_iA_{i+1}}`.
pub fn thm2_certificate(
    rho: &DensityMatrix,
    blocks: &[SiteSet],
    variant: RingVariant,
    opts: CertificateOptions,
) -> Result<MarkovCertificate> {
    if blocks.len() < 4 {
        return domain("closed-chain certificates need at least 4 blocks");
    }
    let n = blocks.len() as f64;
    let eps = info::markov_gap_scan(rho, blocks, CutConvention::Closed)?.epsilon_nats;
    let conv = match variant {
        RingVariant::MutualInfo => CutConvention::MutualInfo,
        RingVariant::Uniform => CutConvention::Uniform,
    };
    let eps2 = info::markov_gap_scan(rho, blocks, conv)?.epsilon_nats;
    let regions = triple_regions(blocks);
    let bound = n * eps.max(eps2);
    Ok(fit_and_certify(rho, &regions, eps, eps2, bound, bound, opts)?.0)
}

#[derive(Clone, Debug)]
pub struct LocalReconstruction {
    /// `H = −Σ_i (ln ρ_{X_iX_{i+1}} − ln ρ_{X_i})`.
    pub h_rec: Operator,
    /// `e^{−H} / Z`.
    pub pi: DensityMatrix,
    /// `ln Tr e^{−H}`.
    pub log_z: f64,
    /// Largest norm among the pair terms `ln ρ_{X_iX_{i+1}} − ln ρ_{X_i} ⊗ 1`.
    pub max_term_norm: f64,
    /// `S(ρ‖π)`.
    pub rel_entropy: f64,
}

/// Local Gibbs reconstruction from pair and single-block marginals.
///
/// On a closed chain every block is subtracted once; on an open chain the
/// end blocks are not subtracted, which makes the reconstruction exact for
/// exact Markov chains.
pub fn local_reconstruction(rho: &DensityMatrix, blocks: &[SiteSet], boundary: Boundary) -> Result<LocalReconstruction> {
    let n = blocks.len();
    if n < 2 {
        return domain("local reconstruction needs at least two blocks");
    }
    let log_of = |x: &SiteSet| -> Result<Operator> {
        let r = rho.reduce(x)?;
        let min = r.eigenvalues()?[0];
        if min <= EIG_CUTOFF {
            return Err(Error::NumericDomain(format!(
                "marginal on {x} is rank deficient (eigenvalue {min:.3e}); mix the state with the maximally mixed state first"
            )));
        }
        crate::hilbert::hermitian_fn(r.op(), MatFn::Log, 1.0, Support::Strict)
    };
    let all = rho.sites().clone();
    let dims = rho.dims().to_vec();
    let mut h = Operator::zeros(all.clone(), dims.clone());
    let mut max_term_norm: f64 = 0.0;
    let pairs: Vec<(usize, usize)> = match boundary {
        Boundary::Open => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Boundary::Closed => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    };
    for &(i, j) in &pairs {
        let xy = blocks[i].union(&blocks[j]);
        let lp = log_of(&xy)?;
        // Subtract the single-block log of the block shared with the previous pair.
        let shared = match boundary {
            Boundary::Open if i == 0 => None,
            _ => Some(i),
        };
        let term = match shared {
            Some(k) => lp.sub(&log_of(&blocks[k])?)?,
            None => lp,
        };
        max_term_norm = max_term_norm.max(term.op_norm()?);
        h.add_embedded(&term, -1.0)?;
    }
    let (log_z, pi_mat) = exp_normalized(&linalg::scale(h.as_ref(), -1.0))?;
    let pi = DensityMatrix::from_operator_unchecked(h.with_matrix(pi_mat)?);
    let rel_entropy = info::relative_entropy(rho, &pi)?;
    Ok(LocalReconstruction { h_rec: h, pi, log_z, max_term_norm, rel_entropy })
}

#[derive(Clone, Debug)]
pub struct FamilyDistance {
    /// `min_ω S(ρ‖ω)` over the pair family, evaluated as `S(σ_max) − S(ρ)`.
    pub min_rel_entropy: f64,
    /// Direct evaluation `S(ρ‖σ_max)`, equal to the above at the optimum.
    pub direct: f64,
    pub witness: MaxEntSolution,
}

/// Distance from `ρ` to the closure of the nearest-neighbour block Gibbs family.
pub fn gibbs_family_distance(
    rho: &DensityMatrix,
    blocks: &[SiteSet],
    boundary: Boundary,
    opts: MaxEntOptions,
) -> Result<FamilyDistance> {
    let family = MarginalFamily::from_state(rho, &pair_regions(blocks, boundary))?;
    let witness = maxent_state(&family, opts)?;
    let min_rel_entropy = info::entropy(&witness.sigma_max)? - info::entropy(rho)?;
    let direct = info::relative_entropy(rho, &witness.sigma_max)?;
    Ok(FamilyDistance { min_rel_entropy, direct, witness })
}

/// Explicit first-stage bound from the closed-chain reconstruction argument:
/// `(n−1)ε + 12(n−2)|X₁|√δ + 6√6|X₁|ε^{1/4} + 12|X₁|/√(2^N)`, `δ = 8√ε + 2^{−N}`.
pub fn reconstruction_bound(n_blocks: usize, eps: f64, x1_log_dim: f64, n_qubits: usize) -> f64 {
    let n = n_blocks as f64;
    let two_n = 2f64.powi(n_qubits as i32);
    let eps = eps.max(0.0);
    let delta = 8.0 * eps.sqrt() + 1.0 / two_n;
    (n - 1.0) * eps
        + 12.0 * (n - 2.0) * x1_log_dim * delta.sqrt()
        + 6.0 * 6f64.sqrt() * x1_log_dim * eps.powf(0.25)
        + 12.0 * x1_log_dim / two_n.sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct Thm3Record {
    pub cmi: f64,
    pub min_rel_entropy: f64,
    /// `min_rel_entropy − cmi`.
    pub delta: f64,
    /// Uniform Markov parameter of the input.
    pub epsilon: f64,
    /// `N^{3/2} ε^{1/32}` (the constant in front is not known).
    pub envelope_shape: f64,
    /// `reconstruction_bound` evaluated at the measured ε.
    pub proof_slack: f64,
    pub converged: bool,
}

/// Records `δ = min_ω S(ρ‖ω) − I(A:C|B)` for a ring of blocks.
pub fn thm3_delta(
    rho: &DensityMatrix,
    blocks: &[SiteSet],
    a: &SiteSet,
    b: &SiteSet,
    c: &SiteSet,
    opts: MaxEntOptions,
) -> Result<Thm3Record> {
    let cmi = info::cmi(rho, a, b, c)?;
    let fd = gibbs_family_distance(rho, blocks, Boundary::Closed, opts)?;
    let epsilon = info::markov_gap_scan(rho, blocks, CutConvention::Uniform)?.epsilon_nats;
    let n_sites = rho.sites().len();
    let x1 = blocks
        .iter()
        .map(|x| x.iter().map(|i| (rho.dims()[rho.sites().position(i).unwrap()] as f64).ln()).sum::<f64>())
        .fold(0.0f64, f64::max);
    Ok(Thm3Record {
        cmi,
        min_rel_entropy: fd.min_rel_entropy,
        delta: fd.min_rel_entropy - cmi,
        epsilon,
        envelope_shape: (n_sites as f64).powf(1.5) * epsilon.max(0.0).powf(1.0 / 32.0),
        proof_slack: reconstruction_bound(blocks.len(), epsilon, x1, n_sites),
        converged: fd.witness.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let m = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(i as f64, 0.0)
            } else if i < j {
                c64::new(1.0 + i as f64, j as f64)
            } else {
                c64::new(1.0 + j as f64, -(i as f64))
            }
        });
        let v = flatten(std::slice::from_ref(&m));
        assert_eq!(v.len(), 9);
        let back = unflatten(&v, &[3]);
        assert!((&back[0] - &m).norm_max() < 1e-15);
        // The coordinates are orthonormal for Re Tr(AB).
        let tr = linalg::trace_product(m.as_ref(), m.as_ref()).re;
        assert!((dot(&v, &v) - tr).abs() < 1e-12);
    }

    #[test]
    fn single_full_marginal_is_reproduced() {
        let mut r = crate::random::rng(3);
        let rho = crate::random::density(SiteSet::range(0, 2), vec![2, 2], 4, &mut r).unwrap();
        let fam = MarginalFamily::from_state(&rho, &[SiteSet::range(0, 2)]).unwrap();
        let sol = maxent_state(&fam, MaxEntOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(crate::hilbert::trace_distance(&rho, &sol.sigma_max).unwrap() < 1e-8);
    }

    #[test]
    fn inconsistent_family_is_rejected() {
        let a = DensityMatrix::pure(SiteSet::range(0, 2), vec![2, 2], &[c64::new(1.0, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)]).unwrap();
        let b = DensityMatrix::maximally_mixed(SiteSet::range(1, 3), vec![2, 2]);
        assert!(MarginalFamily::new(vec![a, b]).is_err());
    }
}
