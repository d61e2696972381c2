//! GHZ suite and the max-entropy Markov certificates.

use std::sync::Arc;

use mtlab_core::hilbert::{Boundary, DensityMatrix, Operator, SiteSet};
use mtlab_core::info::{self, EntropyCache};
use mtlab_core::maxent::{self, CertificateOptions, MarginalFamily, MarkovCertificate, MaxEntOptions, RingVariant};
use mtlab_core::recovery::thm3_states;
use mtlab_core::{random, states, thermal};
use serde::Deserialize;

use super::{contiguous_blocks, derive_seed, label, singles, Plan, Tol};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Row, Unit};

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GhzParams {
    sizes: Vec<usize>,
}

impl Default for GhzParams {
    fn default() -> Self {
        Self { sizes: vec![4, 6, 8] }
    }
}

/// Every split of `sites` (in order) into non-empty consecutive `A | B | C`.
fn tripartitions(sites: &[usize]) -> Vec<(SiteSet, SiteSet, SiteSet)> {
    let n = sites.len();
    let set = |r: &[usize]| r.iter().copied().collect::<SiteSet>();
    let mut out = Vec::new();
    for a in 1..n.saturating_sub(1) {
        for b in a + 1..n {
            out.push((set(&sites[..a]), set(&sites[a..b]), set(&sites[b..])));
        }
    }
    out
}

pub fn ghz_suite(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: GhzParams = cfg.params()?;
    let tol = Tol::new(cfg, &[("cmi", 1e-9)])?;
    if let Some(&n) = p.sizes.iter().find(|&&n| !(3..=12).contains(&n)) {
        return Err(cfg.invalid(1, format!("ghz size {n} outside 3..=12")));
    }
    let mut plan = Plan::default();
    for n in p.sizes {
        let tol = tol.get("cmi");
        plan.point(format!("n{n}"), move || {
            let g = states::ghz(n)?;
            let all: Vec<usize> = (0..n).collect();
            let mut rows = Vec::new();
            let mut cache = EntropyCache::new(&g);
            for (a, b, c) in tripartitions(&all) {
                let case = format!("n{n}/open/A{}/B{}/C{}", label(&a), label(&b), label(&c));
                rows.push(Row::eq(case, "cmi", Unit::Nats, cache.cmi(&a, &b, &c)?, LN2, tol));
            }
            for q in 0..n {
                let rest: Vec<usize> = all.iter().copied().filter(|&x| x != q).collect();
                let traced = g.reduce(&rest.iter().copied().collect())?;
                let mut cache = EntropyCache::new(&traced);
                for (a, b, c) in tripartitions(&rest) {
                    let case = format!("n{n}/traced{q}/A{}/B{}/C{}", label(&a), label(&b), label(&c));
                    rows.push(Row::le(case, "cmi", Unit::Nats, cache.cmi(&a, &b, &c)?, 0.0, tol));
                }
            }
            Ok(rows)
        });
    }
    Ok(plan)
}

fn certificate_options(tol: &Tol) -> CertificateOptions {
    CertificateOptions { solver: MaxEntOptions { tol: tol.get("solver"), ..MaxEntOptions::default() }, slack: tol.get("slack") }
}

fn certificate_rows(case: &str, c: &MarkovCertificate) -> Vec<Row> {
    vec![
        Row::le(case, "entropy_gap", Unit::Nats, c.entropy_gap_nats, c.bound_nats, c.slack),
        Row::le(case, "rel_entropy_to_witness", Unit::Nats, c.rel_entropy_to_witness_nats, c.total_bound_nats, c.slack),
        Row::flag(case, "solver_converged", c.converged),
        Row::info(case, "epsilon", Unit::Nats, c.epsilon_nats),
        Row::info(case, "marginal_residual", Unit::TraceNorm, c.residual),
    ]
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thm1Params {
    random_states: usize,
    n: usize,
    blocks: usize,
    rank: usize,
    markov: bool,
    /// Operator norm of the random multipliers defining the comparison state ω.
    omega_norm: f64,
}

impl Default for Thm1Params {
    fn default() -> Self {
        Self { random_states: 20, n: 6, blocks: 3, rank: 8, markov: true, omega_norm: 0.5 }
    }
}

pub fn thm1(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: Thm1Params = cfg.params()?;
    let tol = Tol::new(cfg, &[("solver", 1e-8), ("slack", 1e-7), ("rel_entropy", 1e-5), ("pythagorean", 1e-6), ("identity", 1e-6)])?;
    if p.blocks < 2 || p.n < p.blocks {
        return Err(cfg.invalid(1, format!("need 2 <= blocks <= n, got blocks = {} and n = {}", p.blocks, p.n)));
    }
    let opts = certificate_options(&tol);
    let mut plan = Plan::default();
    let blocks = Arc::new(contiguous_blocks(p.n, p.blocks));
    for s in 0..p.random_states {
        let (n, rank, seed, blocks) = (p.n, p.rank, derive_seed(cfg.seed, s as u64), blocks.clone());
        plan.point(format!("random/s{s}"), move || {
            let mut r = random::rng(seed);
            let rho = random::density(SiteSet::range(0, n), vec![2; n], rank, &mut r)?;
            let c = maxent::thm1_certificate(&rho, &blocks, opts)?;
            Ok(certificate_rows(&format!("random/s{s}"), &c))
        });
    }
    if p.markov {
        let seed = derive_seed(cfg.seed, 1 << 20);
        let rel_tol = tol.get("rel_entropy");
        plan.point("markov", move || {
            let mut r = random::rng(seed);
            let rho = states::markov_triple(2, 2, &mut r)?;
            let blocks = contiguous_blocks(6, 3);
            let c = maxent::thm1_certificate(&rho, &blocks, opts)?;
            let mut rows = certificate_rows("markov", &c);
            rows.push(Row::le("markov", "rel_entropy_to_fit", Unit::Nats, c.rel_entropy_to_witness_nats, 0.0, rel_tol));
            Ok(rows)
        });
    }
    if cfg.model.is_some() {
        let h = cfg.hamiltonian()?;
        for (k, beta) in cfg.betas_or(&[0.5, 1.0]).into_iter().enumerate() {
            let (h, tol, omega_norm) = (h.clone(), tol.clone(), p.omega_norm);
            let seed = derive_seed(cfg.seed, (2 << 20) + k as u64);
            let case = format!("gibbs/beta{beta}");
            plan.point(case.clone(), move || {
                let n = h.geometry().n();
                let rho = thermal::gibbs_state(&h, beta)?.state;
                let family = MarginalFamily::from_state(&rho, &maxent::pair_regions(&singles(n), h.geometry().boundary()))?;
                let sol = maxent::maxent_state(&family, MaxEntOptions { tol: tol.get("solver"), ..MaxEntOptions::default() })?;
                let rel = info::relative_entropy(&rho, &sol.sigma_max)?;
                let gap = info::entropy(&sol.sigma_max)? - info::entropy(&rho)?;
                let mut r = random::rng(seed);
                let mut multipliers = Vec::new();
                for x in family.regions() {
                    let d = 1 << x.len();
                    multipliers.push(Operator::new(x.clone(), vec![2; x.len()], random::hermitian_with_norm(d, omega_norm, &mut r)?)?);
                }
                let omega = maxent::family_gibbs(&multipliers, rho.sites(), rho.dims())?;
                let pyth = maxent::pythagorean_residual(&rho, &sol, &omega)?;
                Ok(vec![
                    Row::le(&case, "rel_entropy_to_fit", Unit::Nats, rel, 0.0, tol.get("rel_entropy")),
                    Row::le(&case, "pythagorean_residual", Unit::Nats, pyth, 0.0, tol.get("pythagorean")),
                    Row::le(&case, "entropy_identity_residual", Unit::Nats, (gap - rel).abs(), 0.0, tol.get("identity")),
                    Row::flag(&case, "solver_converged", sol.converged),
                    Row::info(&case, "iterations", Unit::Count, sol.iterations as f64),
                ])
            });
        }
    }
    Ok(plan)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thm2Params {
    block: usize,
    ghz_n: usize,
}

impl Default for Thm2Params {
    fn default() -> Self {
        Self { block: 2, ghz_n: 6 }
    }
}

fn variant_name(v: RingVariant) -> &'static str {
    match v {
        RingVariant::MutualInfo => "mutual-info",
        RingVariant::Uniform => "uniform",
    }
}

pub fn thm2(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: Thm2Params = cfg.params()?;
    let tol = Tol::new(cfg, &[("solver", 1e-8), ("slack", 1e-7)])?;
    let opts = certificate_options(&tol);
    let mut plan = Plan::default();
    let variants = [RingVariant::MutualInfo, RingVariant::Uniform];
    if cfg.model.is_some() {
        let h = cfg.hamiltonian()?;
        let n = h.geometry().n();
        if h.geometry().boundary() != Boundary::Closed || p.block == 0 || n % p.block != 0 || n / p.block < 4 {
            return Err(cfg.invalid(1, format!("thm2-certify needs a closed chain split into at least 4 blocks of {}", p.block)));
        }
        for beta in cfg.betas_or(&[1.0]) {
            for v in variants {
                let (h, block) = (h.clone(), p.block);
                let case = format!("ring/beta{beta}/{}", variant_name(v));
                plan.point(case.clone(), move || {
                    let rho = thermal::gibbs_state(&h, beta)?.state;
                    let c = maxent::thm2_certificate(&rho, &contiguous_blocks(n, n / block), v, opts)?;
                    Ok(ring_rows(&case, &c))
                });
            }
        }
    }
    if p.ghz_n > 0 {
        for v in variants {
            let n = p.ghz_n;
            let case = format!("ghz-ring/n{n}/{}", variant_name(v));
            plan.point(case.clone(), move || {
                let g = states::full_rank_mixed(&states::ghz(n)?)?;
                let c = maxent::thm2_certificate(&g, &singles(n), v, opts)?;
                Ok(ring_rows(&case, &c))
            });
        }
    }
    Ok(plan)
}

fn ring_rows(case: &str, c: &MarkovCertificate) -> Vec<Row> {
    let mut rows = certificate_rows(case, c);
    rows.push(Row::info(case, "epsilon_variant", Unit::Nats, c.epsilon_variant_nats));
    rows.push(Row::flag(case, "certificate", c.pass));
    rows
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Thm3Params {
    ghz_n: usize,
}

impl Default for Thm3Params {
    fn default() -> Self {
        Self { ghz_n: 6 }
    }
}

/// `A = {0}`, `B = {1, n−1}`, `C` the rest, on a ring of `n` sites.
fn ring_split(n: usize) -> (SiteSet, SiteSet, SiteSet) {
    (SiteSet::single(0), [1, n - 1].into_iter().collect(), SiteSet::range(2, n - 1))
}

pub fn thm3(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p: Thm3Params = cfg.params()?;
    let tol = Tol::new(cfg, &[("solver", 1e-8), ("in_family", 1e-4)])?;
    let solver = MaxEntOptions { tol: tol.get("solver"), ..MaxEntOptions::default() };
    let mut plan = Plan::default();
    if p.ghz_n > 0 {
        let n = p.ghz_n;
        if n < 6 {
            return Err(cfg.invalid(1, "ghz_n must be at least 6"));
        }
        let case = format!("ghz-ring/n{n}");
        plan.point(case.clone(), move || {
            let g = states::full_rank_mixed(&states::ghz(n)?)?;
            let (a, b, c) = ring_split(n);
            let rec = maxent::thm3_delta(&g, &singles(n), &a, &b, &c, solver)?;
            let half = 0.5 * std::f64::consts::LN_2;
            let mut rows = vec![
                Row::le(&case, "family_distance_minus_cmi", Unit::Nats, rec.delta.abs(), rec.proof_slack, 0.0),
                Row::ge(&case, "cmi", Unit::Nats, rec.cmi, half, 0.0),
                Row::ge(&case, "family_distance", Unit::Nats, rec.min_rel_entropy, half, 0.0),
                Row::info(&case, "epsilon", Unit::Nats, rec.epsilon),
                Row::info(&case, "envelope_shape", Unit::Plain, rec.envelope_shape),
                Row::flag(&case, "solver_converged", rec.converged),
            ];
            let b1: SiteSet = [1, n - 1].into_iter().collect();
            let b2: SiteSet = [2, n - 2].into_iter().collect();
            let c = SiteSet::range(3, n - 2);
            let st = thm3_states(&g, &SiteSet::single(0), &b1, &b2, &c)?;
            for e in &st.ledger {
                let unit = if e.name.starts_with("cmi") { Unit::Nats } else { Unit::TraceNorm };
                rows.push(Row::le(format!("{case}/states"), e.name.clone(), unit, e.lhs, e.rhs, 0.0));
            }
            Ok(rows)
        });
    }
    if cfg.model.is_some() {
        let h = cfg.hamiltonian()?;
        if h.geometry().boundary() != Boundary::Closed || h.geometry().n() < 5 {
            return Err(cfg.invalid(1, "thm3-pipeline needs a closed chain of at least 5 sites"));
        }
        for beta in cfg.betas_or(&[1.0]) {
            let (h, t) = (h.clone(), tol.get("in_family"));
            let case = format!("in-family/beta{beta}");
            plan.point(case.clone(), move || {
                let n = h.geometry().n();
                let rho: DensityMatrix = thermal::gibbs_state(&h, beta)?.state;
                let (a, b, c) = ring_split(n);
                let rec = maxent::thm3_delta(&rho, &singles(n), &a, &b, &c, solver)?;
                Ok(vec![
                    Row::le(&case, "cmi", Unit::Nats, rec.cmi, 0.0, t),
                    Row::le(&case, "family_distance", Unit::Nats, rec.min_rel_entropy, 0.0, t),
                    Row::info(&case, "epsilon", Unit::Nats, rec.epsilon),
                    Row::info(&case, "proof_slack", Unit::Nats, rec.proof_slack),
                ])
            });
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tripartition_count() {
        assert_eq!(tripartitions(&[0, 1, 2, 3]).len(), 3);
        assert_eq!(tripartitions(&[0, 1, 2, 3, 4, 5]).len(), 10);
        assert!(tripartitions(&[0, 1]).is_empty());
    }
}
