use mtlab_core::beliefprop::{self, BoundConstants};
use mtlab_core::hilbert::{Boundary, Operator, SiteSet};
use mtlab_core::random;
use mtlab_core::thermal;

#[test]
fn random_flows_satisfy_identity_and_norm_bound() {
    let t = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for seed in 0..50u64 {
        let mut r = random::rng(seed);
        let n = 2 + (seed % 2) as usize;
        let d = 1 << n;
        let sites = SiteSet::range(0, n);
        let h0 = Operator::new(sites.clone(), vec![2; n], random::hermitian(d, &mut r)).unwrap();
        let v = Operator::new(sites.clone(), vec![2; n], random::hermitian_with_norm(d, 1.0, &mut r).unwrap()).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let f = beliefprop::bp_flow(&h0, &v, beta, 1e-7).unwrap();
            worst = worst.max(f.ode_residual);
            steps = steps.max(f.ode_steps);
            assert!(f.o.op_norm().unwrap() <= (beta * v.op_norm().unwrap() / 2.0).exp() + 1e-6);
            assert!(f.inverse_residual().unwrap() <= 1e-6);
        }
    }
    eprintln!("worst {worst:e} steps {steps} {:?}", t.elapsed());
}

#[test]
fn tfim_locality_profiles() {
    let h = thermal::tfim(10, 1.0, Boundary::Open).unwrap();
    let mid = h.terms().iter().position(|t| t.sites == SiteSet::new([4, 5]).unwrap()).unwrap();
    let v = h.assemble_terms(&[mid], &SiteSet::new([4, 5]).unwrap()).unwrap();
    let t = std::time::Instant::now();
    let p = beliefprop::araki_locality_profile(&h, &v, 1.0, &[0, 1, 2, 3, 4, 5]).unwrap();
    eprintln!("{p:?} {:?}", t.elapsed());

    let h8 = thermal::tfim(8, 1.0, Boundary::Open).unwrap();
    let vs = SiteSet::new([3, 4]).unwrap();
    let mid = h8.terms().iter().position(|t| t.sites == vs).unwrap();
    let v = h8.assemble_terms(&[mid], &vs).unwrap();
    let others: Vec<usize> = (0..h8.terms().len()).filter(|&k| k != mid).collect();
    let h0 = h8.assemble_terms(&others, &h8.geometry().all_sites()).unwrap();
    let t = std::time::Instant::now();
    let f = beliefprop::bp_flow(&h0, &v, 1.0, 1e-8).unwrap();
    eprintln!("flow steps {} res {:e} {:?}", f.ode_steps, f.ode_residual, t.elapsed());
    let c = BoundConstants { beta: 1.0, j: 1.0, c_prime: 1.0, v: 2.0, xi: 1.0 };
    for l in 0..4 {
        let region = beliefprop::neighbourhood(h8.geometry(), &vs, l);
        let loc = beliefprop::localize_flow(&f, h8.geometry(), &region, &c).unwrap();
        eprintln!("l {} err {:e} inv {:e}", loc.l, loc.measured_err, loc.measured_err_inv);
    }
}
