//! Quantum belief propagation: the filtered perturbation `Φ_β`, the flow
//! operator `O` with its inverse, truncation of the flow to a region, and the
//! Araki expansional.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hilbert::{ChainGeometry, Operator, SiteSet};
use crate::linalg::{self, c64, CMat, Eigh};
use crate::thermal::Hamiltonian;

/// Default doubling limit for the flow integrator.
pub const MAX_STEPS: usize = 1 << 20;
const START_STEPS: usize = 8;

/// `tanh(βω/2)/(βω/2)`, equal to 1 at `ω = 0`.
pub fn filter_weight(beta: f64, omega: f64) -> f64 {
    let x = 0.5 * beta * omega;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

fn filter_in(e: &Eigh, v: &CMat, beta: f64) -> CMat {
    let mut m = e.to_eigenbasis(v.as_ref());
    let d = e.dim();
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] *= filter_weight(beta, e.values[i] - e.values[j]);
        }
    }
    e.from_eigenbasis(m.as_ref())
}

fn same_space(h: &Operator, v: &Operator) -> Result<Operator> {
    if !v.sites().is_subset(h.sites()) {
        return domain(format!("perturbation on {} is not inside {}", v.sites(), h.sites()));
    }
    v.extend_to(h.sites(), h.dims())
}

/// `Φ_β^H(V)`: matrix elements of `V` in the eigenbasis of `H` weighted by
/// `tanh(β(E_i−E_j)/2)/(β(E_i−E_j)/2)`.
pub fn bp_filter(h: &Operator, v: &Operator, beta: f64) -> Result<Operator> {
    let h = h.clone().hermitian()?;
    let v = same_space(&h, v)?;
    let e = linalg::eigh(h.as_ref())?;
    let out = filter_in(&e, v.matrix(), beta);
    let out = if v.is_hermitian() { linalg::hermitian_part(out.as_ref()) } else { out };
    h.with_matrix(out)
}

/// `e^{scale·(m − shift)}` for Hermitian `m`.
fn exp_shifted(m: &CMat, scale: f64, shift: f64) -> Result<CMat> {
    Ok(linalg::eigh(m.as_ref())?.map(|x| (scale * (x - shift)).exp()))
}

/// Integrated flow `e^{−β(H0+V)} = O e^{−βH0} O†` with `O_inv = O^{-1}`.
#[derive(Clone, Debug)]
pub struct BPFlow {
    pub h0: Operator,
    /// Perturbation embedded on the support of `h0`.
    pub v: Operator,
    /// Support of the perturbation as given.
    pub v_support: SiteSet,
    pub beta: f64,
    pub o: Operator,
    pub o_inv: Operator,
    pub ode_steps: usize,
    /// Relative trace-norm defect of the flow identity.
    pub ode_residual: f64,
}

impl BPFlow {
    /// `‖O·O_inv − 1‖`.
    pub fn inverse_residual(&self) -> Result<f64> {
        let p = linalg::matmul(self.o.as_ref(), self.o_inv.as_ref());
        linalg::op_norm((p - linalg::identity(self.o.dim())).as_ref())
    }
}

/// Generator `s ↦ Φ^{H0+sV}(V)`, optionally restricted to a region by the
/// normalized partial trace. Evaluations are cached by `s`; every grid point
/// is a dyadic rational, so refinements reuse earlier evaluations exactly.
struct Generator<'a> {
    h0: &'a Operator,
    v: &'a Operator,
    beta: f64,
    region: Option<SiteSet>,
    cache: HashMap<u64, CMat>,
}

impl Generator<'_> {
    fn at(&mut self, s: f64) -> Result<CMat> {
        if let Some(m) = self.cache.get(&s.to_bits()) {
            return Ok(m.clone());
        }
        let hs = self.h0.matrix() + self.v.matrix() * faer::Scale(c64::new(s, 0.0));
        let e = linalg::eigh(linalg::hermitian_part(hs.as_ref()).as_ref())?;
        let phi = linalg::hermitian_part(filter_in(&e, self.v.matrix(), self.beta).as_ref());
        let out = match &self.region {
            None => phi,
            Some(r) => {
                let full = self.h0.with_matrix(phi)?;
                let red = full.partial_trace(r)?;
                let rest = (full.dim() / red.dim()) as f64;
                red.scale(1.0 / rest).into_matrix()
            }
        };
        self.cache.insert(s.to_bits(), out.clone());
        Ok(out)
    }
}

/// Classical RK4 for `O' = −(β/2)ΦO` and `Õ' = (β/2)ÕΦ` on `[0, 1]`.
fn rk4(g: &mut Generator<'_>, steps: usize) -> Result<(CMat, CMat)> {
    let d = match &g.region {
        None => g.h0.dim(),
        Some(_) => g.at(0.0)?.nrows(),
    };
    let a = -0.5 * g.beta;
    let mut o = linalg::identity(d);
    let mut oi = linalg::identity(d);
    let n = steps as f64;
    let h = 1.0 / n;
    let axpy = |x: &CMat, k: &CMat, t: f64| x + k * faer::Scale(c64::new(t, 0.0));
    for k in 0..steps {
        let p0 = g.at(k as f64 / n)?;
        let pm = g.at((2 * k + 1) as f64 / (2.0 * n))?;
        let p1 = g.at((k + 1) as f64 / n)?;
        let f = |p: &CMat, x: &CMat| linalg::scale(linalg::matmul(p.as_ref(), x.as_ref()).as_ref(), a);
        let fi = |p: &CMat, x: &CMat| linalg::scale(linalg::matmul(x.as_ref(), p.as_ref()).as_ref(), -a);
        let k1 = f(&p0, &o);
        let k2 = f(&pm, &axpy(&o, &k1, h / 2.0));
        let k3 = f(&pm, &axpy(&o, &k2, h / 2.0));
        let k4 = f(&p1, &axpy(&o, &k3, h));
        let j1 = fi(&p0, &oi);
        let j2 = fi(&pm, &axpy(&oi, &j1, h / 2.0));
        let j3 = fi(&pm, &axpy(&oi, &j2, h / 2.0));
        let j4 = fi(&p1, &axpy(&oi, &j3, h));
        o = &o + (&k1 + &k2 * faer::Scale(c64::new(2.0, 0.0)) + &k3 * faer::Scale(c64::new(2.0, 0.0)) + &k4)
            * faer::Scale(c64::new(h / 6.0, 0.0));
        oi = &oi + (&j1 + &j2 * faer::Scale(c64::new(2.0, 0.0)) + &j3 * faer::Scale(c64::new(2.0, 0.0)) + &j4)
            * faer::Scale(c64::new(h / 6.0, 0.0));
    }
    Ok((o, oi))
}

/// Relative defect `‖e^{−β(H0+V)} − O e^{−βH0} O†‖₁ / ‖e^{−β(H0+V)}‖₁`.
pub fn flow_defect(h0: &Operator, v: &Operator, beta: f64, o: &Operator) -> Result<f64> {
    let v = same_space(h0, v)?;
    let h1 = linalg::hermitian_part((h0.matrix() + v.matrix()).as_ref());
    let shift = linalg::eigvalsh(h1.as_ref())?[0];
    let g1 = exp_shifted(&h1, -beta, shift)?;
    let g0 = exp_shifted(h0.matrix(), -beta, shift)?;
    defect_against(&g1, &g0, o.matrix())
}

fn defect_against(g1: &CMat, g0: &CMat, o: &CMat) -> Result<f64> {
    let approx = linalg::sandwich(o.as_ref(), g0.as_ref());
    Ok(linalg::trace_norm((g1 - approx).as_ref())? / linalg::trace_norm(g1.as_ref())?)
}

fn check_flow_inputs(h0: &Operator, v: &Operator, beta: f64) -> Result<(Operator, Operator)> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("inverse temperature {beta} must be finite and non-negative"));
    }
    let h0 = h0.clone().hermitian()?;
    let v = same_space(&h0, v)?.hermitian()?;
    Ok((h0, v))
}

/// Integrates the belief-propagation flow from `O(0) = 1` to `s = 1`, doubling
/// the number of RK4 steps from 8 until the flow-identity defect is at most
/// `ode_tol`.
pub fn bp_flow(h0: &Operator, v: &Operator, beta: f64, ode_tol: f64) -> Result<BPFlow> {
    bp_flow_with_limit(h0, v, beta, ode_tol, MAX_STEPS)
}

pub fn bp_flow_with_limit(h0: &Operator, v: &Operator, beta: f64, ode_tol: f64, max_steps: usize) -> Result<BPFlow> {
    let v_support = v.sites().clone();
    let (h0, v) = check_flow_inputs(h0, v, beta)?;
    let h1 = linalg::hermitian_part((h0.matrix() + v.matrix()).as_ref());
    let shift = linalg::eigvalsh(h1.as_ref())?[0];
    let g1 = exp_shifted(&h1, -beta, shift)?;
    let g0 = exp_shifted(h0.matrix(), -beta, shift)?;
    let mut g = Generator { h0: &h0, v: &v, beta, region: None, cache: HashMap::new() };
    let mut steps = START_STEPS;
    let mut best = f64::INFINITY;
    loop {
        let (o, oi) = rk4(&mut g, steps)?;
        let defect = defect_against(&g1, &g0, &o)?;
        best = best.min(defect);
        if defect <= ode_tol {
            return Ok(BPFlow {
                o: h0.with_matrix(o)?,
                o_inv: h0.with_matrix(oi)?,
                h0: h0.clone(),
                v: v.clone(),
                v_support,
                beta,
                ode_steps: steps,
                ode_residual: defect,
            });
        }
        if steps * 2 > max_steps {
            return Err(Error::Solver(format!(
                "flow did not reach defect {ode_tol:.1e} within {max_steps} steps (best {best:.3e})"
            )));
        }
        steps *= 2;
    }
}

/// Flow whose integrand is restricted to `region`; `o` and `o_inv` act on `region` only.
#[derive(Clone, Debug)]
pub struct LocalFlow {
    pub region: SiteSet,
    pub o: Operator,
    pub o_inv: Operator,
    pub steps: usize,
    /// Change in `O` between the last two step counts (op norm).
    pub refinement_change: f64,
}

fn region_template(h0: &Operator, region: &SiteSet) -> Result<Operator> {
    Ok(Operator::zeros(region.clone(), h0.dims_of(region)?))
}

fn check_region(h0: &Operator, v_support: &SiteSet, region: &SiteSet) -> Result<()> {
    if !region.is_subset(h0.sites()) {
        return domain(format!("region {region} is not inside {}", h0.sites()));
    }
    if !v_support.is_subset(region) {
        return domain(format!("region {region} does not contain the perturbation support {v_support}"));
    }
    Ok(())
}

fn integrate_local(h0: &Operator, v: &Operator, beta: f64, region: &SiteSet, steps: usize) -> Result<(Operator, Operator)> {
    let mut g = Generator { h0, v, beta, region: Some(region.clone()), cache: HashMap::new() };
    let (o, oi) = rk4(&mut g, steps)?;
    let t = region_template(h0, region)?;
    Ok((t.with_matrix(o)?, t.with_matrix(oi)?))
}

/// Localized flow with step doubling until successive refinements agree to `ode_tol`.
pub fn local_flow(h0: &Operator, v: &Operator, beta: f64, region: &SiteSet, ode_tol: f64) -> Result<LocalFlow> {
    let v_support = v.sites().clone();
    let (h0, v) = check_flow_inputs(h0, v, beta)?;
    check_region(&h0, &v_support, region)?;
    let mut g = Generator { h0: &h0, v: &v, beta, region: Some(region.clone()), cache: HashMap::new() };
    let mut steps = START_STEPS;
    let (mut o, mut oi) = rk4(&mut g, steps)?;
    loop {
        let (o2, oi2) = rk4(&mut g, steps * 2)?;
        steps *= 2;
        let change = linalg::op_norm((&o2 - &o).as_ref())?.max(linalg::op_norm((&oi2 - &oi).as_ref())?);
        o = o2;
        oi = oi2;
        if change <= ode_tol {
            let t = region_template(&h0, region)?;
            return Ok(LocalFlow { region: region.clone(), o: t.with_matrix(o)?, o_inv: t.with_matrix(oi)?, steps, refinement_change: change });
        }
        if steps * 2 > MAX_STEPS {
            return Err(Error::Solver(format!("localized flow did not settle to {ode_tol:.1e} (last change {change:.3e})")));
        }
    }
}

/// Constants of the truncation and recovery bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub beta: f64,
    /// Bound on `‖H_{B^M}‖`.
    pub j: f64,
    pub c_prime: f64,
    /// Lieb-Robinson velocity.
    pub v: f64,
    /// Correlation length.
    pub xi: f64,
}

impl BoundConstants {
    /// `c′ / (1 + c′vβ/π)`.
    pub fn q1(&self) -> f64 {
        self.c_prime / (1.0 + self.c_prime * self.v * self.beta / std::f64::consts::PI)
    }

    /// `(c′βJ/2) e^{(1+c′)βJ/2}`.
    pub fn k(&self) -> f64 {
        0.5 * self.c_prime * self.beta * self.j * ((1.0 + self.c_prime) * self.beta * self.j / 2.0).exp()
    }

    fn half(&self) -> f64 {
        (self.beta * self.j / 2.0).exp()
    }

    /// `4K(e^{βJ/2} + K)³`.
    pub fn c1(&self) -> f64 {
        4.0 * self.k() * (self.half() + self.k()).powi(3)
    }

    /// `2C₁/(1 − e^{−1})`.
    pub fn c2(&self) -> f64 {
        2.0 * self.c1() / (1.0 - (-1f64).exp())
    }

    /// `⌈(ln C₁ + 1)/q₁⌉`, at least 0.
    pub fn l0(&self) -> usize {
        let x = ((self.c1().ln() + 1.0) / self.q1()).ceil();
        if x.is_finite() && x > 0.0 {
            x as usize
        } else {
            0
        }
    }

    /// `K e^{−q₁l}`: truncation bound for `O` and `Õ`.
    pub fn truncation_bound(&self, l: usize) -> f64 {
        self.k() * (-self.q1() * l as f64).exp()
    }

    /// `C₁ e^{−q₁l}`: single-stage recovery bound.
    pub fn recovery_bound(&self, l: usize) -> f64 {
        self.c1() * (-self.q1() * l as f64).exp()
    }

    /// `C₂ e^{−q₁l}`: normalized recovery bound.
    pub fn normalized_recovery_bound(&self, l: usize) -> f64 {
        self.c2() * (-self.q1() * l as f64).exp()
    }

    /// `(1 − e^{−1}) / (e^{βJ/2} + K)⁴`: lower bound on the success probability.
    pub fn success_lower_bound(&self) -> f64 {
        (1.0 - (-1f64).exp()) / (self.half() + self.k()).powi(4)
    }

    /// `C₂e^{−q₁l} + 2(1−p)^l + l e^{−l/ξ}`: repeat-until-success bound.
    pub fn rus_bound(&self, l: usize, p: f64) -> f64 {
        let lf = l as f64;
        self.normalized_recovery_bound(l) + 2.0 * (1.0 - p).powi(l as i32) + lf * (-lf / self.xi).exp()
    }

    /// Constants reproducing a measured decay rate `q₁` at velocity `v`.
    pub fn from_rate(beta: f64, j: f64, q1: f64, v: f64, xi: f64) -> Result<Self> {
        let denom = 1.0 - q1 * v * beta / std::f64::consts::PI;
        if !(q1 > 0.0) || !(denom > 0.0) {
            return domain(format!("decay rate {q1} is not reachable with velocity {v} at β = {beta}"));
        }
        Ok(Self { beta, j, c_prime: q1 / denom, v, xi })
    }
}

/// Least-squares fit `ln err ≈ ln a − q·l` over points above `floor`.
/// Returns `(q, a)`, or `None` with fewer than two usable points.
pub fn fit_decay(points: &[(usize, f64)], floor: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > floor).map(|&(l, e)| (l as f64, e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((-slope, (my - slope * mx).exp()))
}

/// Truncated flow compared against the full one.
#[derive(Clone, Debug)]
pub struct Localization {
    pub local: LocalFlow,
    /// Sites the region extends beyond the perturbation on its shorter side.
    pub l: usize,
    /// `‖O − O_local ⊗ 1‖`.
    pub measured_err: f64,
    /// `‖Õ − Õ_local ⊗ 1‖`.
    pub measured_err_inv: f64,
    /// `K e^{−q₁l}`.
    pub predicted_err: f64,
}

/// Re-integrates `flow` with its integrand restricted to `region`, at the same step count.
pub fn localize_flow(flow: &BPFlow, geom: &ChainGeometry, region: &SiteSet, consts: &BoundConstants) -> Result<Localization> {
    check_region(&flow.h0, &flow.v_support, region)?;
    let (o, oi) = integrate_local(&flow.h0, &flow.v, flow.beta, region, flow.ode_steps)?;
    let rest = geom.all_sites().difference(region);
    let l = if rest.is_empty() { geom.n() } else { geom.set_distance(&flow.v_support, &rest).saturating_sub(1) };
    let full_o = o.extend_to(flow.h0.sites(), flow.h0.dims())?;
    let full_oi = oi.extend_to(flow.h0.sites(), flow.h0.dims())?;
    let measured_err = flow.o.sub(&full_o)?.op_norm()?;
    let measured_err_inv = flow.o_inv.sub(&full_oi)?.op_norm()?;
    Ok(Localization {
        local: LocalFlow { region: region.clone(), o, o_inv: oi, steps: flow.ode_steps, refinement_change: f64::NAN },
        l,
        measured_err,
        measured_err_inv,
        predicted_err: consts.truncation_bound(l),
    })
}

/// One row of a decay table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub l: usize,
    pub measured_err: f64,
    pub predicted_err: f64,
    pub q1: f64,
    pub k: f64,
}

/// Decay table as CSV with columns `l,measured_err,predicted_err,q1,K`.
pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut out = String::from("l,measured_err,predicted_err,q1,K\n");
    for r in rows {
        out.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{:.12e}\n", r.l, r.measured_err, r.predicted_err, r.q1, r.k));
    }
    out
}

/// `E_r(V; H) = e^{−β(H+V)/2} e^{βH/2}` and `E_l(V; H) = e^{−βH/2} e^{β(H+V)/2}`.
#[derive(Clone, Debug)]
pub struct Expansional {
    pub e_r: Operator,
    pub e_l: Operator,
}

impl Expansional {
    /// `‖E_r e^{−βH} E_r† − e^{−β(H+V)}‖₁ / ‖e^{−β(H+V)}‖₁`.
    pub fn identity_residual(&self, h: &Operator, v: &Operator, beta: f64) -> Result<f64> {
        flow_defect(h, v, beta, &self.e_r)
    }

    /// `‖E_r E_l − 1‖`.
    pub fn inverse_residual(&self) -> Result<f64> {
        let p = linalg::matmul(self.e_r.as_ref(), self.e_l.as_ref());
        linalg::op_norm((p - linalg::identity(self.e_r.dim())).as_ref())
    }
}

/// Both Araki expansionals by direct matrix exponentials.
pub fn araki_expansional(h: &Operator, v: &Operator, beta: f64) -> Result<Expansional> {
    let (h, v) = check_flow_inputs(h, v, beta)?;
    let hv = linalg::hermitian_part((h.matrix() + v.matrix()).as_ref());
    // A common shift leaves both products unchanged and keeps the factors bounded.
    let shift = linalg::eigvalsh(h.as_ref())?[0];
    let a = exp_shifted(&hv, -beta / 2.0, shift)?;
    let b = exp_shifted(h.matrix(), beta / 2.0, shift)?;
    let c = exp_shifted(h.matrix(), -beta / 2.0, shift)?;
    let d = exp_shifted(&hv, beta / 2.0, shift)?;
    Ok(Expansional {
        e_r: h.with_matrix(linalg::matmul(a.as_ref(), b.as_ref()))?,
        e_l: h.with_matrix(linalg::matmul(c.as_ref(), d.as_ref()))?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalityProfile {
    /// `(l, ‖E_r(V; H) − E_r(V; H_{X_l})‖)`.
    pub rows: Vec<(usize, f64)>,
    /// Errors at or below this are treated as converged.
    pub noise_floor: f64,
    /// Non-increasing in `l` (within the noise floor).
    pub monotone: bool,
    /// Strictly decreasing until the noise floor is reached.
    pub strictly_decreasing: bool,
    /// Second differences of `−ln err` non-negative above the floor.
    pub log_convex: bool,
}

/// Sites within distance `l` of `s`.
pub fn neighbourhood(geom: &ChainGeometry, s: &SiteSet, l: usize) -> SiteSet {
    geom.all_sites().iter().filter(|&i| s.iter().any(|j| geom.distance(i, j) <= l)).collect()
}

/// Truncation error of the right expansional when `H` is restricted to the
/// `l`-neighbourhood of the perturbation's support.
pub fn araki_locality_profile(h: &Hamiltonian, v: &Operator, beta: f64, ls: &[usize]) -> Result<LocalityProfile> {
    let geom = h.geometry();
    let all = geom.all_sites();
    let full_h = h.assemble()?;
    let full = araki_expansional(&full_h, v, beta)?;
    let scale = full.e_r.op_norm()?.max(1.0);
    let noise_floor = 1e-12 * scale * (0.5 * beta * full_h.op_norm()?).exp().max(1.0);
    let mut rows = Vec::with_capacity(ls.len());
    for &l in ls {
        let x = neighbourhood(geom, v.sites(), l);
        let err = if x == all {
            0.0
        } else {
            let hx = h.assemble_on(&x)?;
            let ex = araki_expansional(&hx, v, beta)?;
            let e = ex.e_r.extend_to(&all, geom.dims())?;
            full.e_r.sub(&e)?.op_norm()?
        };
        rows.push((l, err));
    }
    let mut monotone = true;
    let mut strictly = true;
    for w in rows.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if b > a + noise_floor {
            monotone = false;
        }
        if a > noise_floor && !(b < a) {
            strictly = false;
        }
    }
    let logs: Vec<f64> = rows.iter().filter(|r| r.1 > noise_floor).map(|r| -r.1.ln()).collect();
    let log_convex = logs.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-9);
    Ok(LocalityProfile { rows, noise_floor, monotone, strictly_decreasing: strictly, log_convex })
}

/// Closed form `e^{−βV/2}` of the flow when `[H0, V] = 0`.
pub fn commuting_flow(v: &Operator, beta: f64) -> Result<Operator> {
    let v = v.clone().hermitian()?;
    v.with_matrix(exp_shifted(v.matrix(), -beta / 2.0, 0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::pauli_matrix;

    fn qubit(m: CMat) -> Operator {
        Operator::new(SiteSet::single(0), vec![2], m).unwrap()
    }

    #[test]
    fn pauli_filter_value() {
        let phi = bp_filter(&qubit(pauli_matrix('z')), &qubit(pauli_matrix('x')), 1.0).unwrap();
        let t = 1f64.tanh();
        assert!((phi.matrix()[(0, 1)].re - t).abs() < 1e-14);
        assert!((phi.matrix()[(1, 0)].re - t).abs() < 1e-14);
        assert!(phi.matrix()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn filter_weight_is_continuous_at_zero() {
        let a = filter_weight(1.0, 2e-4 * (1.0 - 1e-9));
        let b = filter_weight(1.0, 2e-4 * (1.0 + 1e-9));
        assert!((a - b).abs() < 1e-14);
        assert_eq!(filter_weight(2.0, 0.0), 1.0);
    }

    #[test]
    fn zero_perturbation_gives_identity_flow() {
        let h = qubit(pauli_matrix('z'));
        let v = qubit(faer::Mat::zeros(2, 2));
        let f = bp_flow(&h, &v, 1.0, 1e-10).unwrap();
        assert!((f.o.matrix() - linalg::identity(2)).norm_max() < 1e-15);
    }

    #[test]
    fn bound_constants_relations() {
        let c = BoundConstants { beta: 1.0, j: 1.0, c_prime: 0.5, v: 2.0, xi: 1.0 };
        assert!((c.c2() - 2.0 * c.c1() / (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!(c.q1() > 0.0);
        let l0 = c.l0();
        assert!(c.recovery_bound(l0) <= (-1f64).exp() + 1e-12);
        let back = BoundConstants::from_rate(1.0, 1.0, c.q1(), 2.0, 1.0).unwrap();
        assert!((back.c_prime - 0.5).abs() < 1e-12);
    }
}
