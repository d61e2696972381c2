use mtlab_core::hilbert::{
    channel_apply, fidelity, psd_power, trace_distance, Boundary, Channel, DensityMatrix, Operator, Register, SiteSet,
};
use mtlab_core::linalg::{self, CMat};
use mtlab_core::{beliefprop, info, io, random, recovery, thermal};
use proptest::prelude::*;
use rand::Rng;

fn qubits(n: usize) -> (SiteSet, Vec<usize>) {
    (SiteSet::range(0, n), vec![2; n])
}

fn random_state(n: usize, seed: u64) -> DensityMatrix {
    let mut r = random::rng(seed);
    let rank = r.gen_range(1..=1usize << n);
    let (s, d) = qubits(n);
    random::density(s, d, rank, &mut r).unwrap()
}

/// Random CPTP map on `reg` with `k` Kraus operators, `K_i = G_i S^{-1/2}`.
fn random_channel(reg: Register, k: usize, seed: u64) -> Channel {
    let mut r = random::rng(seed);
    let d = reg.dim();
    let gs: Vec<CMat> = (0..k).map(|_| random::ginibre(d, d, &mut r)).collect();
    let mut s = CMat::zeros(d, d);
    for g in &gs {
        s += g.adjoint() * g;
    }
    let s = Operator::new(reg.sites.clone(), reg.dims.clone(), s).unwrap().hermitian().unwrap();
    let inv = psd_power(&s, -0.5).unwrap().into_matrix();
    Channel::kraus(reg.clone(), reg, gs.iter().map(|g| g * &inv).collect()).unwrap()
}

fn split3(n: usize, cut1: usize, cut2: usize) -> (SiteSet, SiteSet, SiteSet) {
    (SiteSet::range(0, cut1), SiteSet::range(cut1, cut2), SiteSet::range(cut2, n))
}

#[test]
fn strong_subadditivity_on_random_states() {
    let mut worst = f64::INFINITY;
    for seed in 0..500u64 {
        let n = 3 + (seed % 4) as usize;
        let rho = random_state(n, seed);
        let mut r = random::rng(seed ^ 0xabc);
        let perm = {
            let mut v: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            v.shuffle(&mut r);
            v
        };
        let k1 = r.gen_range(1..n - 1);
        let k2 = r.gen_range(k1 + 1..n);
        let a: SiteSet = perm[..k1].iter().copied().collect();
        let b: SiteSet = perm[k1..k2].iter().copied().collect();
        let c: SiteSet = perm[k2..].iter().copied().collect();
        worst = worst.min(info::cmi(&rho, &a, &b, &c).unwrap());
    }
    assert!(worst >= -1e-9, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn partial_traces_compose(seed in any::<u64>(), n in 3usize..=6) {
        let rho = random_state(n, seed);
        let keep = SiteSet::range(0, 1);
        let mid = SiteSet::range(0, n - 1);
        let staged = rho.op().partial_trace(&mid).unwrap().partial_trace(&keep).unwrap();
        let direct = rho.op().partial_trace(&keep).unwrap();
        prop_assert!(staged.max_abs_diff(&direct).unwrap() < 1e-12);
        prop_assert!((direct.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_then_tracing_is_unital(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = random::rng(seed);
        let x = Operator::new(SiteSet::range(0, 1), vec![2], random::hermitian(2, &mut r)).unwrap();
        let (all, dims) = qubits(n);
        let back = x.extend_to(&all, &dims).unwrap().partial_trace(x.sites()).unwrap().scale(1.0 / (1 << (n - 1)) as f64);
        prop_assert!(back.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn fuchs_van_de_graaf(s1 in any::<u64>(), s2 in any::<u64>(), n in 1usize..=4) {
        let (a, b) = (random_state(n, s1), random_state(n, s2));
        let f = fidelity(&a, &b).unwrap();
        let half = trace_distance(&a, &b).unwrap() / 2.0;
        prop_assert!(1.0 - f <= half + 1e-9);
        prop_assert!(half <= (1.0 - f * f).max(0.0).sqrt() + 1e-9);
    }

    #[test]
    fn channel_composition_is_associative(seed in any::<u64>()) {
        let (s, d) = qubits(2);
        let reg = Register::new(s, d).unwrap();
        let (e, f) = (random_channel(reg.clone(), 2, seed), random_channel(reg.clone(), 3, seed.wrapping_add(1)));
        let rho = random_state(2, seed.wrapping_add(2));
        let composed = Channel::compose(vec![e.clone(), f.clone()]).unwrap();
        let staged = f.apply(&channel_apply(&e, &rho).unwrap()).unwrap();
        prop_assert!(channel_apply(&composed, &rho).unwrap().max_abs_diff(&staged).unwrap() < 1e-12);
        let rep = composed.validate().unwrap();
        prop_assert!(rep.cp && rep.tp_defect < 1e-10);
    }

    #[test]
    fn cmi_invariant_under_local_unitaries(seed in any::<u64>()) {
        let rho = random_state(4, seed);
        let (a, b, c) = split3(4, 1, 3);
        let mut r = random::rng(seed.wrapping_add(7));
        let u = random::unitary(2, &mut r).unwrap();
        let ub = random::unitary(4, &mut r).unwrap();
        let uc = random::unitary(2, &mut r).unwrap();
        let full = linalg::kron(linalg::kron(u.as_ref(), ub.as_ref()).as_ref(), uc.as_ref());
        let rotated = rho.op().with_matrix(linalg::hermitian_part(linalg::sandwich(full.as_ref(), rho.matrix().as_ref()).as_ref())).unwrap();
        let rotated = DensityMatrix::normalized(rotated).unwrap();
        let d = info::cmi(&rho, &a, &b, &c).unwrap() - info::cmi(&rotated, &a, &b, &c).unwrap();
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn cmi_chain_rule(seed in any::<u64>()) {
        let rho = random_state(5, seed);
        let (a, b1, b2, c) = (SiteSet::range(0, 1), SiteSet::range(1, 2), SiteSet::range(2, 4), SiteSet::range(4, 5));
        let lhs = info::cmi(&rho, &a, &b1, &b2.union(&c)).unwrap();
        let rhs = info::cmi(&rho, &a, &b1, &b2).unwrap() + info::cmi(&rho, &a, &b1.union(&b2), &c).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
        let mi_small = info::mutual_information(&rho, &a, &b1).unwrap();
        let mi_big = info::mutual_information(&rho, &a, &b1.union(&b2)).unwrap();
        prop_assert!(mi_small <= mi_big + 1e-9);
    }

    #[test]
    fn relative_entropy_dominates_log_fidelity(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random_state(2, s1);
        let b = mtlab_core::states::mix_with_identity(&random_state(2, s2), 0.05).unwrap();
        let d = info::relative_entropy(&a, &b).unwrap();
        let f = fidelity(&a, &b).unwrap();
        prop_assert!(d >= -2.0 * f.ln() - 1e-9);
    }

    #[test]
    fn gibbs_state_ignores_constant_shift(seed in any::<u64>(), c in -5.0f64..5.0, beta in 0.1f64..2.0) {
        let h = thermal::random_nn(4, 1.0, seed, Boundary::Open).unwrap();
        let a = thermal::gibbs_state(&h, beta).unwrap().state;
        let b = thermal::gibbs_state(&h.shifted(c).unwrap(), beta).unwrap().state;
        prop_assert!(a.op().max_abs_diff(b.op()).unwrap() < 1e-10);
    }

    #[test]
    fn area_law_for_contiguous_regions(seed in any::<u64>(), beta in 0.1f64..2.0, start in 0usize..5, len in 1usize..4) {
        let h = thermal::random_nn(6, 1.0, seed, Boundary::Open).unwrap();
        let rho = thermal::gibbs_state(&h, beta).unwrap().state;
        let a = SiteSet::range(start.min(5), (start + len).min(6));
        let rest = h.geometry().all_sites().difference(&a);
        prop_assume!(!rest.is_empty());
        let mi = info::mutual_information(&rho, &a, &rest).unwrap();
        let bonds = h.geometry().boundary_bonds(&a) as f64;
        prop_assert!(mi <= beta * h.strength() * h.range() as f64 * bonds + 1e-6, "{mi}");
    }

    #[test]
    fn restriction_keeps_existing_terms(seed in any::<u64>(), lo in 0usize..4, hi in 1usize..6) {
        let h = thermal::random_nn(6, 1.0, seed, Boundary::Closed).unwrap();
        let x = SiteSet::range(lo.min(hi), hi.max(lo + 1).min(6));
        let r = h.restrict(&x).unwrap();
        for t in r.terms() {
            prop_assert!(t.sites.is_subset(&x));
            prop_assert!(h.terms().iter().any(|u| u.sites == t.sites && u.matrix == t.matrix));
        }
    }

    #[test]
    fn correlation_bounds_are_ordered(seed in any::<u64>()) {
        let rho = random_state(3, seed);
        let rep = thermal::correlation(&rho, &SiteSet::range(0, 1), &SiteSet::range(2, 3), 2, seed).unwrap();
        prop_assert!(rep.cor_lower <= rep.cor_upper + 1e-12);
    }

    #[test]
    fn filter_and_flow_bounds(seed in any::<u64>(), beta in 0.1f64..2.0) {
        let mut r = random::rng(seed);
        let (s, d) = qubits(2);
        let h = Operator::new(s.clone(), d.clone(), random::hermitian(4, &mut r)).unwrap();
        let v = Operator::new(s, d, random::hermitian_with_norm(4, 1.0, &mut r).unwrap()).unwrap();
        let phi = beliefprop::bp_filter(&h, &v, beta).unwrap();
        prop_assert!(phi.op_norm().unwrap() <= v.op_norm().unwrap() + 1e-9);
        let tol = 1e-8;
        let flow = beliefprop::bp_flow(&h, &v, beta, tol).unwrap();
        prop_assert!(flow.ode_residual <= tol);
        prop_assert!(flow.inverse_residual().unwrap() <= 10.0 * tol);
        prop_assert!(flow.o.op_norm().unwrap() <= (beta * v.op_norm().unwrap() / 2.0).exp() + 1e-6);
        let ex = beliefprop::araki_expansional(&h, &v, beta).unwrap();
        let g0 = thermal::gibbs_of_operator(&h, beta).unwrap().state;
        let via_flow = linalg::sandwich(flow.o.as_ref(), g0.matrix().as_ref());
        let via_araki = linalg::sandwich(ex.e_r.as_ref(), g0.matrix().as_ref());
        let diff = g0.op().with_matrix(via_flow - via_araki).unwrap();
        prop_assert!(diff.trace_norm().unwrap() <= 10.0 * tol);
    }

    #[test]
    fn petz_fixed_point(seed in any::<u64>(), n in 2usize..=4) {
        let rho = random_state(n, seed);
        let b = SiteSet::range(0, 1);
        let petz = recovery::petz_recovery(&rho, &b).unwrap();
        let out = channel_apply(&petz, &rho.reduce(&b).unwrap()).unwrap();
        prop_assert!(out.max_abs_diff(rho.op()).unwrap() < 1e-9);
        let rep = petz.validate().unwrap();
        prop_assert!(rep.choi_min_eig.unwrap_or(0.0) >= -1e-9);
    }

    #[test]
    fn binary_matrix_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let mut r = random::rng(seed);
        let m = random::ginibre(rows, cols, &mut r);
        prop_assert_eq!(io::decode_matrix(&io::encode_matrix(&m)).unwrap(), m.clone());
        prop_assert_eq!(io::matrix_from_json_str(&io::matrix_to_json_string(&m)).unwrap().nrows(), rows);
    }
}
