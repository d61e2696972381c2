//! Recovery maps, repeat-until-success assembly and depth-two preparation.

use mtlab_core::hilbert::{channel_apply, Boundary, ChannelReport, DensityMatrix, Operator, SiteSet};
use mtlab_core::recovery::{self, DepthTwoLayout, LedgerEntry, RecoveryOptions, RusLayout};
use mtlab_core::thermal::{self, Hamiltonian};
use mtlab_core::{info, random, states};
use serde::Deserialize;

use super::{derive_seed, label, values, Plan, Tol};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Row, Unit};

fn set(xs: impl IntoIterator<Item = usize>) -> SiteSet {
    xs.into_iter().collect()
}

fn dist(rho: &DensityMatrix, out: &Operator) -> mtlab_core::Result<f64> {
    rho.op().sub(out)?.trace_norm()
}

fn channel_rows(case: &str, r: &ChannelReport, tp_tol: f64, choi_tol: f64) -> Vec<Row> {
    let mut rows = vec![Row::flag(case, "completely_positive", r.cp), Row::le(case, "tp_defect", Unit::OpNorm, r.tp_defect, 0.0, tp_tol)];
    if let Some(m) = r.choi_min_eig {
        rows.push(Row::ge(case, "choi_min_eigenvalue", Unit::Plain, m, 0.0, choi_tol));
    }
    rows
}

fn ledger_rows(case: &str, ledger: &[LedgerEntry]) -> Vec<Row> {
    ledger.iter().map(|e| Row::le(case, e.name.clone(), Unit::Plain, e.lhs, e.rhs, 0.0)).collect()
}

/// `‖ρ − Petz(ρ_AB)‖₁` and `‖ρ − κ(ρ_AB)‖₁` for a Gibbs state split `A | B | C`.
fn petz_and_kappa(h: &Hamiltonian, beta: f64, a: &SiteSet, b: &SiteSet, c: &SiteSet, ode_tol: f64) -> mtlab_core::Result<(f64, f64, recovery::Kappa)> {
    let rho = thermal::gibbs_state(h, beta)?.state;
    let ab = rho.reduce(&a.union(b))?;
    let petz = recovery::petz_recovery(&rho.reduce(&b.union(c))?, b)?;
    let k = recovery::bp_recovery_kappa(h, beta, a, b, c, ode_tol)?;
    Ok((dist(&rho, &channel_apply(&petz, &ab)?)?, dist(&rho, &channel_apply(&k.channel, &ab)?)?, k))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SingleParams {
    markov_seeds: usize,
    a_len: usize,
    widths: Vec<usize>,
    ode_tol: f64,
    /// `|B|` in the success-probability sweep, with `A = {0}`.
    sweep_b: usize,
    sweep_c: Vec<usize>,
}

impl Default for SingleParams {
    fn default() -> Self {
        Self { markov_seeds: 5, a_len: 2, widths: vec![2, 4, 6], ode_tol: 1e-7, sweep_b: 4, sweep_c: vec![1, 2, 3] }
    }
}

pub fn recover_single(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: SingleParams = cfg.params()?;
    let tol = Tol::new(
        cfg,
        &[("exact", 1e-7), ("decoupled", 1e-9), ("tp", 1e-9), ("choi", 1e-9), ("p_variation", 0.1), ("monotone", 1e-12)],
    )?;
    let beta = cfg.betas_or(&[1.0])[0];
    let mut plan = Plan::default();

    for s in 0..p.markov_seeds {
        let (seed, t) = (derive_seed(cfg.seed, s as u64), tol.get("exact"));
        plan.point(format!("markov/s{s}"), move || {
            let rho = states::markov_triple(1, 2, &mut random::rng(seed))?;
            let (a, b, c) = (set([0]), set([1, 2]), set([3, 4]));
            let petz = recovery::petz_recovery(&rho.reduce(&b.union(&c))?, &b)?;
            let e = dist(&rho, &channel_apply(&petz, &rho.reduce(&a.union(&b))?)?)?;
            Ok(vec![Row::le(format!("markov/s{s}"), "petz_error", Unit::TraceNorm, e, 0.0, t)])
        });
    }
    let ode_tol = p.ode_tol;
    {
        let t = tol.get("exact");
        plan.point("classical-ising", move || {
            let h = thermal::classical_ising(6, 1.0, 0.3, Boundary::Open)?;
            let (pe, ke, _) = petz_and_kappa(&h, beta, &set([0, 1]), &set([2, 3]), &set([4, 5]), ode_tol)?;
            Ok(vec![
                Row::le("classical-ising", "petz_error", Unit::TraceNorm, pe, 0.0, t),
                Row::le("classical-ising", "kappa_error", Unit::TraceNorm, ke, 0.0, t),
            ])
        });
    }
    {
        let t = tol.get("decoupled");
        plan.point("decoupled", move || {
            let h = thermal::uncoupled(6, 0.7, Boundary::Open)?;
            let (a, b, c) = (set([0, 1]), set([2, 3]), set([4, 5]));
            let (pe, ke, k) = petz_and_kappa(&h, beta, &a, &b, &c, ode_tol)?;
            let rho = thermal::gibbs_state(&h, beta)?.state;
            let inst = recovery::normalize_instrument(&k, &rho.reduce(&a.union(&b))?)?;
            Ok(vec![
                Row::le("decoupled", "petz_error", Unit::TraceNorm, pe, 0.0, t),
                Row::le("decoupled", "kappa_error", Unit::TraceNorm, ke, 0.0, t),
                Row::eq("decoupled", "p_success", Unit::Probability, inst.p_success, 1.0, t),
            ])
        });
    }
    plan.point("ghz", || {
        let g = states::ghz(3)?;
        let (a, b, c) = (set([0]), set([1]), set([2]));
        let petz = recovery::petz_recovery(&g.reduce(&b.union(&c))?, &b)?;
        let m = recovery::recovery_metrics(&g, &channel_apply(&petz, &g.reduce(&a.union(&b))?)?)?;
        Ok(vec![
            Row::info("ghz", "cmi", Unit::Nats, info::cmi(&g, &a, &b, &c)?),
            Row::info("ghz", "petz_error", Unit::TraceNorm, m.trace_distance),
            Row::info("ghz", "petz_neg_log_fidelity", Unit::Nats, m.neg_log_fidelity),
        ])
    });

    if cfg.model.is_some() {
        let h = cfg.hamiltonian()?;
        let n = h.geometry().n();
        if let Some(&w) = p.widths.iter().find(|&&w| p.a_len + w >= n) {
            return Err(cfg.invalid(1, format!("|A| + |B| = {} leaves no C on {n} sites", p.a_len + w)));
        }
        for &w in &p.widths {
            let (h, a_len, tp, choi) = (h.clone(), p.a_len, tol.get("tp"), tol.get("choi"));
            let case = format!("width/b{w}");
            plan.point(case.clone(), move || {
                let (a, b, c) = (SiteSet::range(0, a_len), SiteSet::range(a_len, a_len + w), SiteSet::range(a_len + w, n));
                let rho = thermal::gibbs_state(&h, beta)?.state;
                let ab = rho.reduce(&a.union(&b))?;
                let k = recovery::bp_recovery_kappa(&h, beta, &a, &b, &c, ode_tol)?;
                let err = dist(&rho, &channel_apply(&k.channel, &ab)?)?;
                let inst = recovery::normalize_instrument(&k, &ab)?;
                let mut rows = vec![
                    Row::info(&case, "kappa_error", Unit::TraceNorm, err),
                    Row::info(&case, "p_success", Unit::Probability, inst.p_success),
                    Row::info(&case, "lambda_max", Unit::Plain, inst.lambda_max),
                ];
                rows.extend(channel_rows(&format!("{case}/instrument"), &inst.report, tp, choi));
                Ok(rows)
            });
        }
        for &cw in &p.sweep_c {
            let len = 1 + p.sweep_b + cw;
            let hc = cfg.preset_sized(len)?;
            let b_len = p.sweep_b;
            let case = format!("sweep/c{cw}");
            plan.point(case.clone(), move || {
                let (a, b, c) = (set([0]), SiteSet::range(1, 1 + b_len), SiteSet::range(1 + b_len, len));
                let rho = thermal::gibbs_state(&hc, beta)?.state;
                let k = recovery::bp_recovery_kappa(&hc, beta, &a, &b, &c, ode_tol)?;
                let inst = recovery::normalize_instrument(&k, &rho.reduce(&a.union(&b))?)?;
                Ok(vec![Row::info(&case, "p_success", Unit::Probability, inst.p_success)])
            });
        }
    }
    let (mono, var) = (tol.get("monotone"), tol.get("p_variation"));
    plan.finish(move |rows| {
        let mut out = Vec::new();
        let errs = values(rows, "width/", "kappa_error");
        for w in errs.windows(2) {
            out.push(Row::le(format!("{}-vs-previous", w[1].0), "kappa_error_trend", Unit::TraceNorm, w[1].1, w[0].1, mono));
        }
        let ps: Vec<f64> = values(rows, "sweep/", "p_success").into_iter().map(|x| x.1).collect();
        if ps.len() >= 2 {
            let (lo, hi) = ps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            out.push(Row::le("sweep", "p_success_relative_spread", Unit::Plain, (hi - lo) / hi, var, 0.0));
        }
        out
    });
    Ok(plan)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RusParams {
    a: Vec<usize>,
    b: Vec<usize>,
    c: Vec<usize>,
    stages: usize,
    block: usize,
    buffer: usize,
    ode_tol: f64,
}

impl Default for RusParams {
    fn default() -> Self {
        Self { a: vec![0, 1], b: (2..7).collect(), c: vec![7, 8, 9], stages: 2, block: 2, buffer: 1, ode_tol: 1e-7 }
    }
}

pub fn recover_rus(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: RusParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("tp", 1e-8), ("choi", 1e-9), ("single_stage", 1e-12), ("decoupled", 1e-9)])?;
    let beta = cfg.betas_or(&[1.0])[0];
    let sets = |v: &[usize]| SiteSet::new(v.iter().copied()).map_err(|e| cfg.invalid(1, e.to_string()));
    let (a, b, c) = (sets(&p.a)?, sets(&p.b)?, sets(&p.c)?);
    let layout = RusLayout { stages: p.stages, block: p.block, buffer: p.buffer };
    let opts = RecoveryOptions { ode_tol: p.ode_tol, seed: cfg.seed };
    let mut plan = Plan::default();

    {
        let (t, tp, choi, seed) = (tol.get("single_stage"), tol.get("tp"), tol.get("choi"), derive_seed(cfg.seed, 0));
        plan.point("single-stage", move || {
            let h = thermal::tfim(6, 1.0, Boundary::Open)?;
            let (a, b, c) = (set([0, 1]), set([2, 3]), set([4, 5]));
            let one = RusLayout { stages: 1, block: 2, buffer: 0 };
            let plan = recovery::rus_recovery(&h, beta, &a, &b, &c, one, opts)?;
            let total = plan.stages[0].instrument.total()?;
            let sigma = random::density(a.union(&b), vec![2; 4], 16, &mut random::rng(seed))?;
            let diff = channel_apply(&plan.channel, &sigma)?.sub(&channel_apply(&total, &sigma)?)?.op_norm()?;
            let mut rows = vec![Row::le("single-stage", "rus_vs_instrument_sum", Unit::OpNorm, diff, 0.0, t)];
            rows.extend(channel_rows("single-stage", &plan.report, tp, choi));
            Ok(rows)
        });
    }
    if cfg.model.is_some() {
        let h = cfg.hamiltonian()?;
        let n = h.geometry().n();
        let (tp, choi) = (tol.get("tp"), tol.get("choi"));
        let case = format!("model/A{}/B{}/C{}", label(&a), label(&b), label(&c));
        let (ma, mb, mc) = (a.clone(), b.clone(), c.clone());
        plan.point(case.clone(), move || {
            let plan = recovery::rus_recovery(&h, beta, &ma, &mb, &mc, layout, opts)?;
            let mut rows = vec![Row::info(&case, "rus_error", Unit::TraceNorm, plan.error), Row::info(&case, "assembled_bound", Unit::TraceNorm, plan.bound)];
            for (i, s) in plan.stages.iter().enumerate() {
                let sc = format!("{case}/stage{}", i + 1);
                rows.push(Row::info(&sc, "p_success", Unit::Probability, s.instrument.p_success));
                rows.push(Row::info(&sc, "normalized_error", Unit::TraceNorm, s.normalized_err));
            }
            rows.extend(channel_rows(&case, &plan.report, tp, choi));
            rows.extend(ledger_rows(&format!("{case}/ledger"), &plan.ledger));
            Ok(rows)
        });
        let t = tol.get("decoupled");
        plan.point("decoupled", move || {
            let free = thermal::uncoupled(n, 0.4, Boundary::Open)?;
            let plan = recovery::rus_recovery(&free, beta, &a, &b, &c, layout, opts)?;
            Ok(vec![Row::le("decoupled", "rus_error", Unit::TraceNorm, plan.error, 0.0, t)])
        });
    }
    Ok(plan)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Depth2Params {
    k: usize,
    ls: Vec<usize>,
    /// Inner buffer width; fitted from the correlation length when absent.
    c: Option<usize>,
    /// Distances used in the correlation-length fit.
    fit_distances: usize,
}

impl Default for Depth2Params {
    fn default() -> Self {
        Self { k: 2, ls: vec![1, 2], c: None, fit_distances: 4 }
    }
}

/// `(ξ, c)` with `c = max(1, round(ξ ln d))` unless `c` is fixed.
fn buffer_width(h: &Hamiltonian, beta: f64, fixed: Option<usize>, distances: usize) -> mtlab_core::Result<(f64, usize)> {
    let pairs: Vec<(SiteSet, SiteSet)> = (1..=distances).map(|d| (SiteSet::single(0), SiteSet::single(d))).collect();
    let fit = thermal::correlation_length_fit(h, beta, &pairs)?;
    let d = h.geometry().dims()[0];
    Ok((fit.xi, fixed.unwrap_or_else(|| recovery::default_buffer_width(fit.xi, d))))
}

pub fn prepare_depth2(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: Depth2Params = cfg.params()?;
    let tol = Tol::new(cfg, &[("tp", 1e-8), ("choi", 1e-9), ("exact", 1e-9)])?;
    let beta = cfg.betas_or(&[0.5])[0];
    let h = cfg.hamiltonian()?;
    let n = h.geometry().n();
    if p.fit_distances < 3 || p.fit_distances >= n {
        return Err(cfg.invalid(1, format!("fit_distances must be in 3..{n}")));
    }
    let mut plan = Plan::default();
    let (fixed, fd) = (p.c, p.fit_distances);
    {
        let h = h.clone();
        plan.point("buffer", move || {
            let (xi, c) = buffer_width(&h, beta, fixed, fd)?;
            Ok(vec![Row::info("buffer", "correlation_length", Unit::Plain, xi), Row::info("buffer", "c", Unit::Count, c as f64)])
        });
    }
    for &l in &p.ls {
        let (h, k, tp, choi) = (h.clone(), p.k, tol.get("tp"), tol.get("choi"));
        let case = format!("k{k}/l{l}");
        plan.point(case.clone(), move || {
            let (_, c) = buffer_width(&h, beta, fixed, fd)?;
            let d = recovery::depth_two_prepare(&h, beta, DepthTwoLayout::fit(n, k, l, c)?)?;
            let mut rows = vec![Row::info(&case, "preparation_error", Unit::TraceNorm, d.error)];
            rows.extend(channel_rows(&case, &d.report, tp, choi));
            rows.extend(ledger_rows(&format!("{case}/ledger"), &d.ledger));
            Ok(rows)
        });
    }
    {
        let (t, tp, choi) = (tol.get("exact"), tol.get("tp"), tol.get("choi"));
        let h1 = cfg.preset_sized(4)?;
        plan.point("k1", move || {
            let d = recovery::depth_two_prepare(&h1, beta, DepthTwoLayout::fit(4, 1, 2, 0)?)?;
            let mut rows = vec![Row::le("k1", "preparation_error", Unit::TraceNorm, d.error, 0.0, t)];
            rows.extend(channel_rows("k1", &d.report, tp, choi));
            Ok(rows)
        });
        let k = p.k;
        plan.point("decoupled", move || {
            let free = thermal::uncoupled(n, 0.5, Boundary::Open)?;
            let d = recovery::depth_two_prepare(&free, beta, DepthTwoLayout::fit(n, k, 1, 1)?)?;
            let mut rows = vec![Row::le("decoupled", "preparation_error", Unit::TraceNorm, d.error, 0.0, t)];
            rows.extend(channel_rows("decoupled", &d.report, tp, choi));
            Ok(rows)
        });
    }
    plan.finish(|rows| {
        let errs = values(rows, "k", "preparation_error").into_iter().filter(|(c, _)| c.contains("/l")).collect::<Vec<_>>();
        errs.windows(2).map(|w| Row::gt(format!("{}-vs-previous", w[1].0), "preparation_error_drop", Unit::TraceNorm, w[0].1 - w[1].1, 0.0)).collect()
    });
    Ok(plan)
}
