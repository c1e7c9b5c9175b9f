use proptest::prelude::*;
use zerolab::currents::volume_sandwich;
use zerolab::deviations::{run_hole_experiment, wilson_interval, ExperimentConfig, Z95};
use zerolab::domain::DomainSpec;
use zerolab::kernel::fs_distance;
use zerolab::quadrature::QuadratureGrid;
use zerolab::rng::{Purpose, TrialRng};
use zerolab::zeros::{count_in_domain, find_roots, nevanlinna_count, roots_of};
use zerolab::{sample_section, ChartPoint, Complex64, EnsembleSpec};

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn disk(r: f64) -> DomainSpec {
    DomainSpec::disk(Complex64::new(0.0, 0.0), r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chart_round_trip(coords in prop::collection::vec(complex(), 1..4), target in 0usize..4) {
        let m = coords.len();
        let p = ChartPoint::new(0, coords.clone()).unwrap();
        let target = target % (m + 1);
        if let Some(q) = p.to_chart(target) {
            let back = q.to_chart(0).unwrap();
            for (a, b) in back.coords().iter().zip(&coords) {
                prop_assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()));
            }
            prop_assert!(fs_distance(&p, &q) < 1e-7);
            prop_assert!(fs_distance(&p, &p.to_best_chart()) < 1e-7);
        }
    }

    #[test]
    fn roots_invariant_under_scaling(a in prop::collection::vec(complex(), 3..16), scale in complex()) {
        prop_assume!(scale.norm() > 1e-3);
        prop_assume!(a.last().unwrap().norm() > 1e-2 && a[0].norm() > 1e-2);
        let scaled: Vec<Complex64> = a.iter().map(|c| c * scale).collect();
        let r1 = roots_of(&a).unwrap();
        let r2 = roots_of(&scaled).unwrap();
        prop_assert_eq!(r1.total(), r2.total());
        for z in &r1.roots {
            let nearest = r2.roots.iter().map(|w| fs_distance(z, w)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest < 1e-6, "nearest {}", nearest);
        }
    }

    #[test]
    fn nevanlinna_count_is_monotone(n in 1usize..40, trial in 0u64..1000, r1 in 0.01..5.0f64, dr in 0.0..5.0f64) {
        let spec = EnsembleSpec::new(1, n, 11).unwrap();
        let roots = find_roots(&sample_section(&spec, trial)).unwrap();
        let (a, b) = (nevanlinna_count(&roots, r1), nevanlinna_count(&roots, r1 + dr));
        prop_assert!(a <= b);
        prop_assert!(b <= n);
    }

    #[test]
    fn hole_in_larger_disk_is_hole_in_smaller(n in 1usize..20, trial in 0u64..1000, r1 in 0.01..2.0f64, dr in 0.0..2.0f64) {
        let spec = EnsembleSpec::new(1, n, 12).unwrap();
        let roots = find_roots(&sample_section(&spec, trial)).unwrap();
        if count_in_domain(&roots, &disk(r1 + dr)) == 0 {
            prop_assert_eq!(count_in_domain(&roots, &disk(r1)), 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sandwich_brackets_the_count(n in 2usize..12, trial in 0u64..1000, r in 0.3..2.0f64) {
        let spec = EnsembleSpec::new(1, n, 13).unwrap();
        let s = sample_section(&spec, trial);
        let domain = disk(r);
        let grid = QuadratureGrid::for_log_integrand(n);
        let (lo, hi) = volume_sandwich(&s, &domain, 0.1, &grid).unwrap();
        let count = count_in_domain(&find_roots(&s).unwrap(), &domain) as f64;
        let tol = 1e-3 * n as f64;
        prop_assert!(lo <= count + tol, "lo {} count {}", lo, count);
        prop_assert!(count <= hi + tol, "count {} hi {}", count, hi);
    }
}

#[test]
fn wilson_interval_coverage() {
    for (k, &(p, n)) in [(0.05, 200u64), (0.3, 500), (0.01, 1000)].iter().enumerate() {
        let mut covered = 0;
        for stream in 0..1000u64 {
            let mut rng = TrialRng::new(77 + k as u64, Purpose::Synthetic, stream);
            let hits = (0..n).filter(|_| rng.bernoulli(p)).count() as u64;
            let (lo, hi) = wilson_interval(hits, n, Z95);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 930, "p = {p}, n = {n}: coverage {covered}/1000");
    }
}

#[test]
fn hole_probability_decreases_with_radius() {
    let p: Vec<f64> = [0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&r| run_hole_experiment(&ExperimentConfig::new(1, vec![6], 5, disk(r), 5000)).unwrap().estimates[0].tail.p_hat)
        .collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]), "{p:?}");
}
