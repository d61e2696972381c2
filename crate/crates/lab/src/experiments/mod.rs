//! The twelve experiments. Each builds a [`Plan`] of independent points from a
//! config; points run on the worker pool and an optional `finish` step derives
//! cross-point rows (trends, spreads) from the merged result.

use std::collections::BTreeMap;
use std::time::Instant;

use mtlab_core::hilbert::SiteSet;
use mtlab_core::linalg;

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::pool;
use crate::report::{Report, Row};

mod chains;
mod locality;
mod markov;
mod recovery;

pub type Job = Box<dyn Fn() -> mtlab_core::Result<Vec<Row>> + Send + Sync>;
pub type Finish = Box<dyn Fn(&[Row]) -> Vec<Row>>;

pub struct Point {
    pub label: String,
    pub job: Job,
}

#[derive(Default)]
pub struct Plan {
    pub points: Vec<Point>,
    pub finish: Option<Finish>,
}

impl Plan {
    fn point(&mut self, label: impl Into<String>, job: impl Fn() -> mtlab_core::Result<Vec<Row>> + Send + Sync + 'static) {
        self.points.push(Point { label: label.into(), job: Box::new(job) });
    }

    fn finish(&mut self, f: impl Fn(&[Row]) -> Vec<Row> + 'static) {
        self.finish = Some(Box::new(f));
    }
}

/// Effective tolerances, looked up by name.
#[derive(Clone, Debug)]
pub struct Tol(BTreeMap<String, f64>);

impl Tol {
    fn new(cfg: &ExperimentConfig, defaults: &[(&str, f64)]) -> Result<Self, ConfigError> {
        cfg.tolerances_over(defaults).map(Tol)
    }

    pub fn get(&self, k: &str) -> f64 {
        self.0[k]
    }
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    match cfg.experiment {
        Experiment::GhzSuite => markov::ghz_suite(cfg),
        Experiment::Thm1Certify => markov::thm1(cfg),
        Experiment::Thm2Certify => markov::thm2(cfg),
        Experiment::Thm3Pipeline => markov::thm3(cfg),
        Experiment::CmiDecay => chains::cmi_decay(cfg),
        Experiment::AreaLawSaturation => chains::area_law(cfg),
        Experiment::Conjecture1d => chains::conjecture_1d(cfg),
        Experiment::BpLocality => locality::bp_locality(cfg),
        Experiment::ArakiLocality => locality::araki_locality(cfg),
        Experiment::RecoverSingle => recovery::recover_single(cfg),
        Experiment::RecoverRus => recovery::recover_rus(cfg),
        Experiment::PrepareDepth2 => recovery::prepare_depth2(cfg),
    }
}

/// Runs every point and merges rows in plan order.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    linalg::use_sequential_kernels();
    let plan = plan(cfg)?;
    let results = pool::map_ordered(&plan.points, cfg.workers, |p| {
        let t = Instant::now();
        let r = (p.job)();
        (r, t.elapsed().as_secs_f64())
    });
    let mut rows = Vec::new();
    let mut timings = Vec::with_capacity(results.len());
    for (p, (r, secs)) in plan.points.iter().zip(results) {
        match r {
            Ok(rs) => rows.extend(rs),
            Err(e) => rows.push(Row::error(&p.label, e.to_string())),
        }
        timings.push((p.label.clone(), secs));
    }
    if let Some(f) = &plan.finish {
        let extra = f(&rows);
        rows.extend(extra);
    }
    Ok(Report { experiment: cfg.experiment.name().to_string(), seed: cfg.seed, config_hash: cfg.hash(), rows, timings })
}

/// Independent stream `k` of a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, k: u64) -> u64 {
    let mut z = base ^ k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `0..3` for ranges, `0+1+5` otherwise. Keeps commas out of case labels.
pub fn label(s: &SiteSet) -> String {
    let v = s.as_slice();
    match (v.first(), v.last()) {
        (None, _) | (_, None) => "none".into(),
        (Some(&a), Some(&b)) if b + 1 - a == v.len() => format!("{a}..{}", b + 1),
        _ => v.iter().map(usize::to_string).collect::<Vec<_>>().join("+"),
    }
}

fn singles(n: usize) -> Vec<SiteSet> {
    (0..n).map(SiteSet::single).collect()
}

fn contiguous_blocks(n: usize, count: usize) -> Vec<SiteSet> {
    let w = n / count;
    (0..count).map(|i| if i + 1 == count { SiteSet::range(i * w, n) } else { SiteSet::range(i * w, (i + 1) * w) }).collect()
}

/// Rows of `quantity` in cases starting with `prefix`, in order.
fn values(rows: &[Row], prefix: &str, quantity: &str) -> Vec<(String, f64)> {
    rows.iter().filter(|r| r.case.starts_with(prefix) && r.quantity == quantity).map(|r| (r.case.clone(), r.lhs)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(label(&SiteSet::range(2, 5)), "2..5");
        assert_eq!(label(&SiteSet::new([1, 5]).unwrap()), "1+5");
        assert_eq!(label(&SiteSet::empty()), "none");
    }

    #[test]
    fn seeds_are_distinct() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|k| derive_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
    }

    #[test]
    fn every_experiment_plans_with_defaults() {
        for e in Experiment::ALL {
            let model = match e {
                Experiment::GhzSuite => "",
                Experiment::Thm2Certify => r#","model":{"preset":"random-nn","n":8,"boundary":"closed"}"#,
                Experiment::Thm3Pipeline => r#","model":{"preset":"classical-ising","n":6,"boundary":"closed"}"#,
                Experiment::RecoverSingle | Experiment::RecoverRus => r#","model":{"preset":"tfim","n":10}"#,
                _ => r#","model":{"preset":"tfim","n":8}"#,
            };
            let text = format!(r#"{{"experiment":"{}"{model}}}"#, e.name());
            let cfg = ExperimentConfig::parse(&text).unwrap();
            let p = plan(&cfg).unwrap_or_else(|err| panic!("{e}: {err}"));
            assert!(!p.points.is_empty(), "{e}");
        }
    }
}
