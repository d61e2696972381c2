//! Belief-propagation flow and Araki expansional checks.

use mtlab_core::beliefprop::{self, BoundConstants};
use mtlab_core::hilbert::{Boundary, Operator, SiteSet};
use mtlab_core::linalg::{c64, CMat};
use mtlab_core::thermal::Hamiltonian;
use mtlab_core::random;
use serde::Deserialize;

use super::{derive_seed, Plan, Tol};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Row, Unit};

/// Random `(H0, V)` on 2 or 3 qubits, alternating with the instance index.
fn random_pair(seed: u64, k: usize) -> mtlab_core::Result<(Operator, Operator)> {
    let mut r = random::rng(seed);
    let n = 2 + k % 2;
    let d = 1 << n;
    let sites = SiteSet::range(0, n);
    let h0 = Operator::new(sites.clone(), vec![2; n], random::hermitian(d, &mut r))?;
    let v = Operator::new(sites, vec![2; n], random::hermitian_with_norm(d, 1.0, &mut r)?)?;
    Ok((h0, v))
}

fn diagonal_part(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { c64::new(m[(i, i)].re, 0.0) } else { c64::new(0.0, 0.0) })
}

/// The bond in the middle of an open chain and its term index.
fn middle_bond(h: &Hamiltonian) -> mtlab_core::Result<(SiteSet, usize)> {
    let n = h.geometry().n();
    let vs = SiteSet::new([n / 2 - 1, n / 2])?;
    let idx = h
        .terms()
        .iter()
        .position(|t| t.sites == vs)
        .ok_or_else(|| mtlab_core::Error::Domain(format!("no term on {vs}")))?;
    Ok((vs, idx))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BpParams {
    instances: usize,
    commuting: usize,
    ode_tol: f64,
    /// Integrator tolerance for the commuting comparisons, which are checked more tightly.
    commuting_ode_tol: f64,
    /// Inverse temperature of the localization table.
    table_beta: f64,
    ls: Vec<usize>,
    c_prime: f64,
    velocity: f64,
    xi: f64,
}

impl Default for BpParams {
    fn default() -> Self {
        Self { instances: 50, commuting: 10, ode_tol: 1e-7, commuting_ode_tol: 1e-11, table_beta: 1.0, ls: vec![0, 1, 2, 3], c_prime: 1.0, velocity: 2.0, xi: 1.0 }
    }
}

pub fn bp_locality(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: BpParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("defect", 1e-6), ("norm", 1e-6), ("inverse", 1e-6), ("commuting", 1e-8), ("monotone", 1e-9)])?;
    let betas = cfg.betas_or(&[0.5, 1.0, 2.0]);
    let mut plan = Plan::default();
    for k in 0..p.instances {
        let (betas, tol, ode_tol, seed) = (betas.clone(), tol.clone(), p.ode_tol, derive_seed(cfg.seed, k as u64));
        plan.point(format!("random/i{k}"), move || {
            let (h0, v) = random_pair(seed, k)?;
            let v_norm = v.op_norm()?;
            let mut rows = Vec::new();
            for &beta in &betas {
                let case = format!("random/i{k}/beta{beta}");
                let f = beliefprop::bp_flow(&h0, &v, beta, ode_tol)?;
                rows.push(Row::le(&case, "flow_defect", Unit::TraceNorm, f.ode_residual, 0.0, tol.get("defect")));
                rows.push(Row::le(&case, "o_norm", Unit::OpNorm, f.o.op_norm()?, (beta * v_norm / 2.0).exp(), tol.get("norm")));
                rows.push(Row::le(&case, "inverse_residual", Unit::OpNorm, f.inverse_residual()?, 0.0, tol.get("inverse")));
            }
            Ok(rows)
        });
    }
    for k in 0..p.commuting {
        let (betas, tol, ode_tol, seed) = (betas.clone(), tol.get("commuting"), p.commuting_ode_tol, derive_seed(cfg.seed, (1 << 20) + k as u64));
        plan.point(format!("commuting/i{k}"), move || {
            let (h0, v) = random_pair(seed, k)?;
            let h0 = h0.with_matrix(diagonal_part(h0.matrix()))?;
            let v = v.with_matrix(diagonal_part(v.matrix()))?;
            let mut rows = Vec::new();
            for &beta in &betas {
                let f = beliefprop::bp_flow(&h0, &v, beta, ode_tol)?;
                let exact = beliefprop::commuting_flow(&v, beta)?;
                rows.push(Row::le(format!("commuting/i{k}/beta{beta}"), "o_vs_closed_form", Unit::OpNorm, f.o.sub(&exact)?.op_norm()?, 0.0, tol));
            }
            Ok(rows)
        });
    }
    if cfg.model.is_some() && !p.ls.is_empty() {
        let h = cfg.hamiltonian()?;
        if h.geometry().boundary() != Boundary::Open || h.geometry().n() < 4 {
            return Err(cfg.invalid(1, "the localization table needs an open chain of at least 4 sites"));
        }
        let (ls, beta) = (p.ls.clone(), p.table_beta);
        let (ode_tol, mono) = (p.ode_tol, tol.get("monotone"));
        let consts = BoundConstants { beta, j: h.strength(), c_prime: p.c_prime, v: p.velocity, xi: p.xi };
        plan.point("table", move || {
            let (vs, mid) = middle_bond(&h)?;
            let v = h.assemble_terms(&[mid], &vs)?;
            let others: Vec<usize> = (0..h.terms().len()).filter(|&k| k != mid).collect();
            let h0 = h.assemble_terms(&others, &h.geometry().all_sites())?;
            let f = beliefprop::bp_flow(&h0, &v, beta, ode_tol)?;
            let mut rows = Vec::new();
            let mut prev: Option<f64> = None;
            for &l in &ls {
                let region = beliefprop::neighbourhood(h.geometry(), &vs, l);
                let loc = beliefprop::localize_flow(&f, h.geometry(), &region, &consts)?;
                let case = format!("table/l{l}");
                rows.push(Row::info(&case, "measured_err", Unit::OpNorm, loc.measured_err));
                rows.push(Row::info(&case, "measured_err_inverse", Unit::OpNorm, loc.measured_err_inv));
                rows.push(Row::info(&case, "predicted_err", Unit::OpNorm, loc.predicted_err));
                if let Some(p) = prev {
                    rows.push(Row::le(&case, "measured_err_vs_previous", Unit::OpNorm, loc.measured_err, p, mono));
                }
                prev = Some(loc.measured_err);
            }
            rows.push(Row::info("table", "q1", Unit::Plain, consts.q1()));
            rows.push(Row::info("table", "k", Unit::Plain, consts.k()));
            Ok(rows)
        });
    }
    Ok(plan)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ArakiParams {
    instances: usize,
    profile_beta: f64,
    ls: Vec<usize>,
}

impl Default for ArakiParams {
    fn default() -> Self {
        Self { instances: 50, profile_beta: 1.0, ls: vec![0, 1, 2, 3, 4] }
    }
}

pub fn araki_locality(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: ArakiParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("identity", 1e-9), ("inverse", 1e-9)])?;
    let betas = cfg.betas_or(&[0.5, 1.0, 2.0]);
    let mut plan = Plan::default();
    for k in 0..p.instances {
        let (betas, tol, seed) = (betas.clone(), tol.clone(), derive_seed(cfg.seed, k as u64));
        plan.point(format!("random/i{k}"), move || {
            let (h, v) = random_pair(seed, k)?;
            let mut rows = Vec::new();
            for &beta in &betas {
                let case = format!("random/i{k}/beta{beta}");
                let e = beliefprop::araki_expansional(&h, &v, beta)?;
                rows.push(Row::le(&case, "identity_residual", Unit::TraceNorm, e.identity_residual(&h, &v, beta)?, 0.0, tol.get("identity")));
                rows.push(Row::le(&case, "inverse_residual", Unit::OpNorm, e.inverse_residual()?, 0.0, tol.get("inverse")));
            }
            Ok(rows)
        });
    }
    if cfg.model.is_some() && !p.ls.is_empty() {
        let h = cfg.hamiltonian()?;
        if h.geometry().boundary() != Boundary::Open || h.geometry().n() < 4 {
            return Err(cfg.invalid(1, "the locality profile needs an open chain of at least 4 sites"));
        }
        let (ls, beta) = (p.ls.clone(), p.profile_beta);
        plan.point("profile", move || {
            let (vs, mid) = middle_bond(&h)?;
            let v = h.assemble_terms(&[mid], &vs)?;
            let prof = beliefprop::araki_locality_profile(&h, &v, beta, &ls)?;
            let mut rows: Vec<Row> = prof.rows.iter().map(|&(l, err)| Row::info(format!("profile/l{l}"), "truncation_err", Unit::OpNorm, err)).collect();
            rows.push(Row::info("profile", "noise_floor", Unit::OpNorm, prof.noise_floor));
            rows.push(Row::flag("profile", "strictly_decreasing_to_floor", prof.strictly_decreasing));
            rows.push(Row::flag("profile", "neg_log_err_convex", prof.log_convex));
            Ok(rows)
        });
    }
    Ok(plan)
}
