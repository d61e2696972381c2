//! Entropic profiles of Gibbs states along a chain.

use mtlab_core::beliefprop::fit_decay;
use mtlab_core::hilbert::SiteSet;
use mtlab_core::info::EntropyCache;
use mtlab_core::recovery::cmi_decay_experiment;
use mtlab_core::thermal::{self, Hamiltonian};
use serde::Deserialize;

use super::{label, Plan, Tol};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Row, Unit};

/// Widths `1..max` that leave a non-empty `C` beyond the shell around `a`.
fn default_widths(h: &Hamiltonian, a: &SiteSet) -> Vec<usize> {
    let g = h.geometry();
    let max = g.all_sites().iter().map(|x| g.set_distance(a, &SiteSet::single(x))).max().unwrap_or(0);
    (1..max).collect()
}

fn region(cfg: &ExperimentConfig, h: &Hamiltonian, sites: &[usize]) -> Result<SiteSet, ConfigError> {
    let a = SiteSet::new(sites.iter().copied()).map_err(|e| cfg.invalid(1, e.to_string()))?;
    h.geometry().check(&a).map_err(|e| cfg.invalid(1, e.to_string()))?;
    if a.is_empty() {
        return Err(cfg.invalid(1, "region A must be non-empty"));
    }
    Ok(a)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DecayParams {
    a: Vec<usize>,
    widths: Option<Vec<usize>>,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self { a: vec![0, 1], widths: None }
    }
}

pub fn cmi_decay(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: DecayParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("chain_rule", 1e-9), ("monotone", 1e-9)])?;
    let h = cfg.hamiltonian()?;
    let a = region(cfg, &h, &p.a)?;
    let widths = p.widths.unwrap_or_else(|| default_widths(&h, &a));
    if widths.len() < 2 {
        return Err(cfg.invalid(1, "cmi-decay needs at least two widths"));
    }
    let mut plan = Plan::default();
    for beta in cfg.betas_or(&[1.0]) {
        let (h, a, widths, tol) = (h.clone(), a.clone(), widths.clone(), tol.clone());
        let case = format!("beta{beta}/A{}", label(&a));
        plan.point(case.clone(), move || {
            let d = cmi_decay_experiment(&h, beta, &a, &widths)?;
            let mut rows = Vec::new();
            for r in &d.rows {
                let c = format!("{case}/l{}", r.l);
                rows.push(Row::info(&c, "cmi", Unit::Nats, r.cmi));
                rows.push(Row::info(&c, "mi", Unit::Nats, r.mi));
                if let (Some(inc), Some(cond)) = (r.increment, r.conditional) {
                    rows.push(Row::info(&c, "conditional_increment", Unit::Nats, cond));
                    rows.push(Row::le(&c, "chain_rule_residual", Unit::Nats, (inc - cond).abs(), 0.0, tol.get("chain_rule")));
                }
            }
            let conds: Vec<(usize, f64)> = d.rows.iter().filter_map(|r| r.conditional.map(|c| (r.l, c))).collect();
            for w in conds.windows(2) {
                rows.push(Row::le(format!("{case}/l{}", w[1].0), "conditional_increment_vs_previous", Unit::Nats, w[1].1, w[0].1, tol.get("monotone")));
            }
            let (first, last) = (&d.rows[0], &d.rows[d.rows.len() - 1]);
            rows.push(Row::gt(format!("{case}/l{}-l{}", first.l, last.l), "cmi_drop", Unit::Nats, first.cmi - last.cmi, 0.0));
            Ok(rows)
        });
    }
    Ok(plan)
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AreaParams {
    /// Longest region tested; defaults to half the chain.
    max_len: Option<usize>,
}

pub fn area_law(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: AreaParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("area", 1e-6)])?;
    let h = cfg.hamiltonian()?;
    let n = h.geometry().n();
    let max_len = p.max_len.unwrap_or(n / 2).clamp(1, n.saturating_sub(1).max(1));
    let mut plan = Plan::default();
    for beta in cfg.betas_or(&[0.5, 1.0, 2.0]) {
        let (h, t) = (h.clone(), tol.get("area"));
        plan.point(format!("beta{beta}"), move || {
            let g = h.geometry();
            let rho = thermal::gibbs_state(&h, beta)?.state;
            let all = g.all_sites();
            let mut cache = EntropyCache::new(&rho);
            let s_all = cache.s(&all)?;
            let scale = beta * h.strength() * h.range() as f64;
            let mut rows = Vec::new();
            for len in 1..=max_len {
                for start in 0..=n - len {
                    let a = SiteSet::range(start, start + len);
                    let rest = all.difference(&a);
                    if rest.is_empty() {
                        continue;
                    }
                    let mi = cache.s(&a)? + cache.s(&rest)? - s_all;
                    let bound = scale * g.boundary_bonds(&a) as f64;
                    let case = format!("beta{beta}/A{}", label(&a));
                    rows.push(Row::le(&case, "mutual_information", Unit::Nats, mi, bound, t));
                    rows.push(Row::info(&case, "saturation", Unit::Plain, if bound > 0.0 { mi / bound } else { 0.0 }));
                }
            }
            Ok(rows)
        });
    }
    Ok(plan)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConjectureParams {
    a: Vec<usize>,
    /// CMI values at or below this are left out of the fit.
    floor: f64,
}

impl Default for ConjectureParams {
    fn default() -> Self {
        Self { a: vec![0], floor: 1e-13 }
    }
}

pub fn conjecture_1d(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: ConjectureParams = cfg.params()?;
    // No checks use tolerances here, but unknown keys are still rejected.
    cfg.tolerances_over(&[])?;
    let h = cfg.hamiltonian()?;
    let a = region(cfg, &h, &p.a)?;
    let widths = default_widths(&h, &a);
    if widths.len() < 2 {
        return Err(cfg.invalid(1, "chain too short for a decay fit"));
    }
    let mut plan = Plan::default();
    for beta in cfg.betas_or(&[1.0]) {
        let (h, a, widths, floor) = (h.clone(), a.clone(), widths.clone(), p.floor);
        let case = format!("beta{beta}/A{}", label(&a));
        plan.point(case.clone(), move || {
            let d = cmi_decay_experiment(&h, beta, &a, &widths)?;
            let mut rows = Vec::new();
            // d(A, C) is one more than the shell width.
            let points: Vec<(usize, f64)> = d.rows.iter().map(|r| (r.l + 1, r.cmi)).collect();
            for &(dist, cmi) in &points {
                rows.push(Row::info(format!("{case}/d{dist}"), "cmi", Unit::Nats, cmi));
            }
            match fit_decay(&points, floor) {
                Some((rate, pre)) => {
                    rows.push(Row::gt(&case, "decay_rate", Unit::Plain, rate, 0.0));
                    rows.push(Row::info(&case, "prefactor", Unit::Nats, pre));
                    rows.push(Row::info(&case, "decay_length", Unit::Plain, 1.0 / rate));
                }
                None => rows.push(Row::flag(&case, "fit_available", false)),
            }
            Ok(rows)
        });
    }
    Ok(plan)
}
