use mtlab_core::hilbert::{Boundary, SiteSet};
use mtlab_core::info;
use mtlab_core::maxent::{self, MarginalFamily, MaxEntOptions};
use mtlab_core::thermal;

fn singles(n: usize) -> Vec<SiteSet> {
    (0..n).map(SiteSet::single).collect()
}

#[test]
fn nearest_neighbour_gibbs_state_is_its_own_maxent_fit() {
    for (seed, beta) in [(1u64, 0.5), (2, 1.0)] {
        let h = thermal::random_nn(8, 1.0, seed, Boundary::Open).unwrap();
        let rho = thermal::gibbs_state(&h, beta).unwrap().state;
        let fam = MarginalFamily::from_state(&rho, &maxent::pair_regions(&singles(8), Boundary::Open)).unwrap();
        let t = std::time::Instant::now();
        let sol = maxent::maxent_state(&fam, MaxEntOptions::default()).unwrap();
        let rel = info::relative_entropy(&rho, &sol.sigma_max).unwrap();
        eprintln!("iters {} res {:e} rel {:e} {:?}", sol.iterations, sol.marginal_residual, rel, t.elapsed());
        assert!(sol.converged);
        assert!(rel <= 1e-5);
        let gap = info::entropy(&sol.sigma_max).unwrap() - info::entropy(&rho).unwrap();
        assert!((gap - rel).abs() <= 1e-6);
        for w in sol.dual_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (w[0].abs() + 1.0));
        }
    }
}

fn pairs_of(n: usize, k: usize) -> Vec<SiteSet> {
    (0..n / k).map(|i| SiteSet::range(i * k, (i + 1) * k)).collect()
}

#[test]
fn thm1_on_random_and_markov_states() {
    let opts = maxent::CertificateOptions::default();
    let blocks = pairs_of(6, 2);
    let t = std::time::Instant::now();
    for seed in 0..20 {
        let mut r = mtlab_core::random::rng(seed);
        let rho = mtlab_core::random::density(SiteSet::range(0, 6), vec![2; 6], 8, &mut r).unwrap();
        let c = maxent::thm1_certificate(&rho, &blocks, opts).unwrap();
        assert!(c.pass, "{c:?}");
    }
    eprintln!("20 random {:?}", t.elapsed());
    let mut r = mtlab_core::random::rng(99);
    let rho = mtlab_core::states::markov_triple(2, 2, &mut r).unwrap();
    let c = maxent::thm1_certificate(&rho, &blocks, opts).unwrap();
    eprintln!("{c:?}");
    assert!(c.rel_entropy_to_witness_nats <= 1e-5);
    let ghz = mtlab_core::states::ghz(6).unwrap();
    let t = std::time::Instant::now();
    let c = maxent::thm1_certificate(&ghz, &singles(6), opts).unwrap();
    eprintln!("ghz {c:?} {:?}", t.elapsed());
    assert!(c.pass);
}

#[test]
fn thm2_and_thm3_on_rings() {
    let opts = maxent::CertificateOptions::default();
    let h = thermal::random_nn(8, 1.0, 4, Boundary::Closed).unwrap();
    let rho = thermal::gibbs_state(&h, 1.0).unwrap().state;
    for v in [maxent::RingVariant::MutualInfo, maxent::RingVariant::Uniform] {
        let t = std::time::Instant::now();
        let c = maxent::thm2_certificate(&rho, &pairs_of(8, 2), v, opts).unwrap();
        eprintln!("ring {v:?} {c:?} {:?}", t.elapsed());
        assert!(c.pass);
    }
    let g = mtlab_core::states::full_rank_mixed(&mtlab_core::states::ghz(6).unwrap()).unwrap();
    for v in [maxent::RingVariant::MutualInfo, maxent::RingVariant::Uniform] {
        let t = std::time::Instant::now();
        let c = maxent::thm2_certificate(&g, &singles(6), v, opts).unwrap();
        eprintln!("ghz ring {v:?} {c:?} {:?}", t.elapsed());
        assert!(c.pass);
    }
    let t = std::time::Instant::now();
    let rec = maxent::thm3_delta(&g, &singles(6), &SiteSet::single(0), &SiteSet::new([1, 5]).unwrap(), &SiteSet::range(2, 5), MaxEntOptions::default()).unwrap();
    eprintln!("thm3 {rec:?} {:?}", t.elapsed());
}
