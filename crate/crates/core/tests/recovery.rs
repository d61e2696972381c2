use std::time::Instant;

use mtlab_core::hilbert::{channel_apply, Boundary, DensityMatrix, SiteSet};
use mtlab_core::recovery::{self, DepthTwoLayout, RecoveryOptions, RusLayout};
use mtlab_core::{info, random, states, thermal};

fn set(xs: impl IntoIterator<Item = usize>) -> SiteSet {
    xs.into_iter().collect()
}

fn dist(a: &DensityMatrix, out: &mtlab_core::hilbert::Operator) -> f64 {
    a.op().sub(out).unwrap().trace_norm().unwrap()
}

#[test]
fn petz_is_exact_on_markov_triples() {
    for seed in 0..5 {
        let mut r = random::rng(seed);
        let rho = states::markov_triple(1, 2, &mut r).unwrap();
        let (a, b, c) = (set([0]), set([1, 2]), set([3, 4]));
        let petz = recovery::petz_recovery(&rho.reduce(&b.union(&c)).unwrap(), &b).unwrap();
        let out = channel_apply(&petz, &rho.reduce(&a.union(&b)).unwrap()).unwrap();
        assert!(dist(&rho, &out) < 1e-8, "seed {seed}: {}", dist(&rho, &out));
    }
}

#[test]
fn petz_on_ghz_records_both_sides() {
    let g = states::ghz(3).unwrap();
    let (a, b, c) = (set([0]), set([1]), set([2]));
    let petz = recovery::petz_recovery(&g.reduce(&b.union(&c)).unwrap(), &b).unwrap();
    let out = channel_apply(&petz, &g.reduce(&a.union(&b)).unwrap()).unwrap();
    let m = recovery::recovery_metrics(&g, &out).unwrap();
    let cmi = info::cmi(&g, &a, &b, &c).unwrap();
    assert!((cmi - 2f64.ln()).abs() < 1e-10);
    assert!(m.trace_distance > 0.1);
    assert!(m.neg_log_fidelity.is_finite());
}

#[test]
fn kappa_exact_for_commuting_and_decoupled_models() {
    let (a, b, c) = (set([0, 1]), set([2, 3]), set([4, 5]));
    let ising = thermal::classical_ising(6, 1.0, 0.3, Boundary::Open).unwrap();
    let k = recovery::bp_recovery_kappa(&ising, 1.0, &a, &b, &c, 1e-9).unwrap();
    let rho = thermal::gibbs_state(&ising, 1.0).unwrap().state;
    let out = channel_apply(&k.channel, &rho.reduce(&a.union(&b)).unwrap()).unwrap();
    assert!(dist(&rho, &out) < 1e-7, "{}", dist(&rho, &out));

    let free = thermal::uncoupled(6, 0.7, Boundary::Open).unwrap();
    let k = recovery::bp_recovery_kappa(&free, 1.0, &a, &b, &c, 1e-9).unwrap();
    let rho = thermal::gibbs_state(&free, 1.0).unwrap().state;
    let input = rho.reduce(&a.union(&b)).unwrap();
    assert!(dist(&rho, &channel_apply(&k.channel, &input).unwrap()) < 1e-9);
    assert!((k.lambda_max - 1.0).abs() < 1e-9);
    let inst = recovery::normalize_instrument(&k, &input).unwrap();
    assert!((inst.p_success - 1.0).abs() < 1e-9);
}

#[test]
fn kappa_at_infinite_temperature() {
    let h = thermal::tfim(5, 1.0, Boundary::Open).unwrap();
    let (a, b, c) = (set([0]), set([1, 2]), set([3, 4]));
    let k = recovery::bp_recovery_kappa(&h, 0.0, &a, &b, &c, 1e-9).unwrap();
    let tau = DensityMatrix::maximally_mixed(set(0..5), vec![2; 5]);
    let out = channel_apply(&k.channel, &tau.reduce(&set(0..3)).unwrap()).unwrap();
    assert!(dist(&tau, &out) < 1e-12);
}

#[test]
fn instrument_on_tfim_is_cptp() {
    let t = Instant::now();
    let h = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let (a, b, c) = (set([0, 1]), set(2..6), set([6, 7]));
    let k = recovery::bp_recovery_kappa(&h, 1.0, &a, &b, &c, 1e-8).unwrap();
    let rho = thermal::gibbs_state(&h, 1.0).unwrap().state;
    let inst = recovery::normalize_instrument(&k, &rho.reduce(&a.union(&b)).unwrap()).unwrap();
    assert!(inst.p_success > 0.0 && inst.p_success <= 1.0 + 1e-12);
    assert!(inst.report.cp && inst.report.tp_defect <= 1e-9, "{:?}", inst.report);
    eprintln!("p {} λ {} literal {:?} {:?}", inst.p_success, inst.lambda_max, inst.literal_completion_choi_min, t.elapsed());
}

#[test]
fn kappa_error_shrinks_with_buffer() {
    let h = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let rho = thermal::gibbs_state(&h, 1.0).unwrap().state;
    let a = set([0]);
    let mut errs = Vec::new();
    for w in [2, 4, 6] {
        let b = set(1..1 + w);
        let c = set(1 + w..8);
        let k = recovery::bp_recovery_kappa(&h, 1.0, &a, &b, &c, 1e-8).unwrap();
        errs.push(dist(&rho, &channel_apply(&k.channel, &rho.reduce(&a.union(&b)).unwrap()).unwrap()));
    }
    eprintln!("{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn single_stage_rus_is_the_instrument() {
    let h = thermal::tfim(6, 1.0, Boundary::Open).unwrap();
    let (a, b, c) = (set([0, 1]), set([2, 3]), set([4, 5]));
    let layout = RusLayout { stages: 1, block: 2, buffer: 0 };
    let plan = recovery::rus_recovery(&h, 1.0, &a, &b, &c, layout, RecoveryOptions::default()).unwrap();
    let inst = &plan.stages[0].instrument;
    let total = inst.total().unwrap();
    let mut r = random::rng(3);
    let sigma = random::density(a.union(&b), vec![2; 4], 16, &mut r).unwrap();
    let x = channel_apply(&plan.channel, &sigma).unwrap();
    let y = channel_apply(&total, &sigma).unwrap();
    assert!(x.sub(&y).unwrap().op_norm().unwrap() < 1e-14);
    assert!(plan.report.cp && plan.report.tp_defect < 1e-8);
}

#[test]
fn two_stage_rus_on_tfim() {
    let t = Instant::now();
    let h = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let (a, b, c) = (set([0]), set(1..6), set([6, 7]));
    let layout = RusLayout { stages: 2, block: 2, buffer: 1 };
    let plan = recovery::rus_recovery(&h, 1.0, &a, &b, &c, layout, RecoveryOptions::default()).unwrap();
    assert!(plan.report.cp && plan.report.tp_defect < 1e-8, "{:?}", plan.report);
    for e in &plan.ledger {
        assert!(e.satisfied, "{e:?}");
    }
    eprintln!("rus err {} bound {} {:?}", plan.error, plan.bound, t.elapsed());

    let free = thermal::uncoupled(8, 0.4, Boundary::Open).unwrap();
    let plan = recovery::rus_recovery(&free, 1.0, &a, &b, &c, layout, RecoveryOptions::default()).unwrap();
    assert!(plan.error < 1e-9);
}

#[test]
fn rus_rejects_wrong_block_count() {
    let h = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let r = recovery::rus_recovery(&h, 1.0, &set([0]), &set(1..5), &set(5..8), RusLayout::standard(2), RecoveryOptions::default());
    assert!(r.is_err());
}

#[test]
fn cmi_decay_chain_rule() {
    let h = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let d = recovery::cmi_decay_experiment(&h, 1.0, &set([0, 1]), &[1, 2, 3, 4, 5]).unwrap();
    assert!(d.chain_rule_residual < 1e-9);
    assert!(d.increments_non_increasing);
    assert!(d.rows[0].cmi > d.rows[4].cmi);

    let free = thermal::uncoupled(6, 0.4, Boundary::Open).unwrap();
    let d = recovery::cmi_decay_experiment(&free, 1.0, &set([0]), &[1, 2, 3]).unwrap();
    assert!(d.rows.iter().all(|r| r.cmi.abs() < 1e-10 && r.mi.abs() < 1e-10));
    let d = recovery::cmi_decay_experiment(&h, 0.0, &set([0]), &[1, 2]).unwrap();
    assert!(d.rows.iter().all(|r| r.cmi.abs() < 1e-10));
}

#[test]
fn depth_two_trivial_cases() {
    let h = thermal::tfim(4, 1.0, Boundary::Open).unwrap();
    let d = recovery::depth_two_prepare(&h, 1.0, DepthTwoLayout::fit(4, 1, 2, 0).unwrap()).unwrap();
    assert!(d.error < 1e-12);
    let free = thermal::uncoupled(7, 0.5, Boundary::Open).unwrap();
    let d = recovery::depth_two_prepare(&free, 1.0, DepthTwoLayout::fit(7, 2, 1, 1).unwrap()).unwrap();
    assert!(d.error < 1e-9);
    assert!(d.report.cp && d.report.tp_defect < 1e-8);
}

#[test]
fn depth_two_on_tfim() {
    let t = Instant::now();
    let h = thermal::tfim(7, 1.0, Boundary::Open).unwrap();
    let d = recovery::depth_two_prepare(&h, 0.5, DepthTwoLayout::fit(7, 2, 1, 1).unwrap()).unwrap();
    assert!(d.report.cp && d.report.tp_defect < 1e-8);
    for e in &d.ledger {
        assert!(e.satisfied, "{e:?}");
    }
    eprintln!("depth two err {} {:?}", d.error, t.elapsed());
}

#[test]
fn thm3_states_on_markov_and_product() {
    let free = thermal::uncoupled(6, 0.5, Boundary::Closed).unwrap();
    let rho = thermal::gibbs_state(&free, 1.0).unwrap().state;
    let (a, b1, b2, c) = (set([0]), set([5, 1]), set([4, 2]), set([3]));
    let s = recovery::thm3_states(&rho, &a, &b1, &b2, &c).unwrap();
    assert!(dist(&rho, s.rho_tilde_prime.op()) < 1e-8);
    assert!(mtlab_core::hilbert::trace_distance(&s.rho_tilde, &s.rho_tilde_prime).unwrap() <= 2f64.powi(-5));

    let g = states::full_rank_mixed(&states::ghz(6).unwrap()).unwrap();
    let s = recovery::thm3_states(&g, &a, &b1, &b2, &c).unwrap();
    assert!(s.ledger.iter().all(|e| e.lhs.is_finite()));
    let min = s.rho_tilde.eigenvalues().unwrap()[0];
    assert!(min >= 2f64.powi(-5) / 64.0 - 1e-15);
}

#[test]
fn depth_two_block_sweep_at_fixed_buffer() {
    let h = thermal::tfim(9, 1.0, Boundary::Open).unwrap();
    let pairs: Vec<_> = (1..5).map(|d| (set([0]), set([d]))).collect();
    let fit = thermal::correlation_length_fit(&h, 0.5, &pairs).unwrap();
    let c = recovery::default_buffer_width(fit.xi, 2);
    eprintln!("xi {} c {c}", fit.xi);
    assert_eq!(c, 1);
    let errs: Vec<f64> = [1, 2]
        .iter()
        .map(|&l| recovery::depth_two_prepare(&h, 0.5, DepthTwoLayout::fit(9, 2, l, c).unwrap()).unwrap().error)
        .collect();
    eprintln!("{errs:?}");
    assert!(errs[1] < errs[0]);
}

#[test]
fn depth_two_layout_fit() {
    let l = DepthTwoLayout::fit(9, 2, 1, 1).unwrap();
    assert_eq!((l.tail, l.len()), (4, 9));
    assert!(DepthTwoLayout::fit(9, 2, 2, 2).is_err());
    assert!(DepthTwoLayout::fit(9, 2, 1, 0).is_err());
    assert_eq!(DepthTwoLayout::fit(4, 1, 2, 7).unwrap().tail, 0);
}
