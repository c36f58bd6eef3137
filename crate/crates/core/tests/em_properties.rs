use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salmix_core::em::{
    anneal_init, e_step, fit_em, frozen_shift_update, m_step, Engine, EStepQuantities, FitConfig, FitStatus,
    GaussianFamily, SalFamily,
};
use salmix_core::gmm::{anneal_init_gmm, fit_gmm};
use salmix_core::simulate::{generate_one, paper_sim_spec, SimComponents};
use salmix_core::{DataSet, Mixture, SalComponent};

fn assert_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "log-likelihood fell from {} to {}", w[0], w[1]);
    }
}

fn observed_log_lik(data: &DataSet, m: &Mixture<SalComponent>) -> f64 {
    data.rows().map(|x| m.log_density(x).unwrap()).sum()
}

fn random_problem(seed: u64, n: usize, p: usize, groups: usize) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..groups).map(|_| (0..p).map(|_| rng.random_range(-6.0..6.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c = &centres[i % groups];
            // Exponential scale times a Gaussian gives a skewed, heavy-ish cloud.
            let w = -(1.0 - rng.random::<f64>()).ln();
            c.iter().map(|m| m + w * 0.8 + w.sqrt() * rng.random_range(-1.5..1.5)).collect()
        })
        .collect();
    DataSet::from_rows(&rows).unwrap()
}

fn paper_truth() -> Mixture<SalComponent> {
    let SimComponents::Sal(c) = paper_sim_spec(0).components else { unreachable!() };
    Mixture::new(vec![0.5, 0.5], c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sal_em_never_decreases_the_likelihood(seed in 0u64..10_000, p in 1usize..3, g in 1usize..4) {
        let data = random_problem(seed, 90, p, 2);
        let mut cfg = FitConfig::new(g, seed);
        cfg.max_iter = 60;
        cfg.annealing.restarts = 3;
        let Ok(init) = anneal_init(&data, &cfg) else { return Err(TestCaseError::reject("no usable start")) };
        let Ok(r) = fit_em(&data, &cfg, init) else { return Err(TestCaseError::reject("component emptied")) };
        assert_monotone(&r.log_lik_trace);
    }

    #[test]
    fn gaussian_em_never_decreases_the_likelihood(seed in 0u64..10_000, p in 1usize..3, g in 1usize..4) {
        let data = random_problem(seed, 90, p, 2);
        let mut cfg = FitConfig::new(g, seed);
        cfg.max_iter = 60;
        cfg.annealing.restarts = 3;
        let Ok(init) = anneal_init_gmm(&data, &cfg) else { return Err(TestCaseError::reject("no usable start")) };
        let Ok(r) = fit_gmm(&data, &cfg, init) else { return Err(TestCaseError::reject("component emptied")) };
        assert_monotone(&r.log_lik_trace);
    }

    #[test]
    fn e_step_rows_are_simplices(seed in 0u64..10_000) {
        let data = random_problem(seed, 40, 2, 2);
        let cfg = FitConfig::new(3, seed);
        let Ok(m) = anneal_init(&data, &cfg) else { return Err(TestCaseError::reject("no usable start")) };
        let e = e_step(&data, &m).unwrap();
        for i in 0..data.n() {
            let s: f64 = e.tau.row(i).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for g in 0..3 {
                prop_assert!(e.tau[(i, g)] >= 0.0);
                prop_assert!(e.e_w[(i, g)] > 0.0 && e.e_inv_w[(i, g)] > 0.0);
                prop_assert!(e.e_w[(i, g)] * e.e_inv_w[(i, g)] >= 1.0 - 1e-12);
            }
        }
    }
}

#[test]
fn one_iteration_from_truth_does_not_lower_the_likelihood() {
    let data = generate_one(&paper_sim_spec(31), 0).unwrap();
    let truth = paper_truth();
    let next = m_step(&data, &e_step(&data, &truth).unwrap()).unwrap();
    let (before, after) = (observed_log_lik(&data, &truth), observed_log_lik(&data, &next));
    assert!(after >= before, "{before} -> {after}");
}

#[test]
fn point_near_second_shift_belongs_to_second_component() {
    let truth = paper_truth();
    let x = [0.1, 5.1];
    let data = DataSet::from_rows(&[x.to_vec(), vec![0.0, -1.0]]).unwrap();
    let e = e_step(&data, &truth).unwrap();
    let dens = |c: &SalComponent| salmix_oracle::sal_log_density(&x, c.mu().as_slice(), c.alpha().as_slice(), &[c.sigma().row(0).iter().copied().collect(), c.sigma().row(1).iter().copied().collect()]);
    let [c1, c2] = truth.components() else { unreachable!() };
    let want = 1.0 / (1.0 + (dens(c1) - dens(c2)).exp());
    assert!(e.tau[(0, 1)] > 0.99);
    assert!((e.tau[(0, 1)] - want).abs() < 1e-9, "{} vs {want}", e.tau[(0, 1)]);
}

#[test]
fn unit_scale_moments_give_the_gaussian_update() {
    let data = random_problem(4, 50, 2, 1);
    let n = data.n();
    let ones = DMatrix::from_element(n, 1, 1.0);
    let e = EStepQuantities { tau: ones.clone(), e_w: ones.clone(), e_inv_w: ones };
    let m = m_step(&data, &e).unwrap();
    let c = &m.components()[0];
    assert!((c.mu() - data.mean()).amax() < 1e-12);
    assert_eq!(c.alpha(), &DVector::zeros(2));
    assert!((c.sigma() - data.covariance()).amax() < 1e-12);
}

#[test]
fn hard_labels_give_class_proportions() {
    let data = random_problem(8, 30, 1, 2);
    let n = data.n();
    let mut tau = DMatrix::zeros(n, 2);
    for i in 0..n {
        tau[(i, usize::from(i < 12))] = 1.0;
    }
    let ones = DMatrix::from_element(n, 2, 1.0);
    let e = EStepQuantities { tau, e_w: ones.clone() * 1.5, e_inv_w: ones };
    let m = m_step(&data, &e).unwrap();
    assert!((m.weights()[0] - 18.0 / 30.0).abs() < 1e-15);
    assert!((m.weights()[1] - 12.0 / 30.0).abs() < 1e-15);
}

#[test]
fn permuting_initial_components_permutes_the_fit() {
    let data = generate_one(&paper_sim_spec(5), 1).unwrap();
    let mut cfg = FitConfig::new(2, 5);
    cfg.max_iter = 40;
    let init = anneal_init(&data, &cfg).unwrap();
    let (w, c) = init.clone().into_parts();
    let swapped = Mixture::new(vec![w[1], w[0]], vec![c[1].clone(), c[0].clone()]).unwrap();
    let a = fit_em(&data, &cfg, init).unwrap();
    let b = fit_em(&data, &cfg, swapped).unwrap();
    assert_eq!(a.iterations, b.iterations);
    for (k, j) in [(0, 1), (1, 0)] {
        let (ca, cb) = (&a.mixture.components()[k], &b.mixture.components()[j]);
        assert!((ca.mu() - cb.mu()).amax() < 1e-9);
        assert!((ca.alpha() - cb.alpha()).amax() < 1e-9);
        assert!((ca.sigma() - cb.sigma()).amax() < 1e-9);
        assert!((a.mixture.weights()[k] - b.mixture.weights()[j]).abs() < 1e-12);
    }
    assert!(a.map_labels.iter().zip(&b.map_labels).all(|(x, y)| *x == 1 - *y));
}

#[test]
fn single_component_recovers_generating_moments() {
    let c = SalComponent::new(
        DVector::from_vec(vec![1.0, -1.0]),
        DVector::from_vec(vec![1.5, 0.5]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]),
    )
    .unwrap();
    let x = salmix_core::sal::sample_sal(&c, 10_000, 21);
    let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    let data = DataSet::from_rows(&rows).unwrap();
    let cfg = FitConfig::new(1, 2);
    let r = fit_em(&data, &cfg, anneal_init(&data, &cfg).unwrap()).unwrap();
    let fit = &r.mixture.components()[0];
    // The mean is μ + α and the covariance Σ + α α'; the sample moments are consistent for both.
    let mean_fit = fit.mu() + fit.alpha();
    let cov_fit = fit.sigma() + fit.alpha() * fit.alpha().transpose();
    assert!((&mean_fit - data.mean()).amax() < 0.05, "{mean_fit} vs {}", data.mean());
    assert!((&cov_fit - data.covariance()).amax() < 0.25, "{cov_fit} vs {}", data.covariance());
    assert!((fit.mu() - c.mu()).amax() < 0.15);
    assert!((fit.alpha() - c.alpha()).amax() < 0.15);
    assert!((fit.sigma() - c.sigma()).amax() < 0.2);
}

/// Sixty spread points plus twenty near-copies of 2.0; a shift started near
/// them walks onto the cluster.
fn engineered_degenerate_data() -> DataSet {
    let mut rows: Vec<Vec<f64>> = (0..60).map(|i| vec![-3.0 + 6.0 * ((i as f64 * 0.618034) % 1.0)]).collect();
    rows.extend((0..20).map(|i| vec![2.0 + 1e-9 * i as f64]));
    DataSet::from_rows(&rows).unwrap()
}

#[test]
fn shift_walking_onto_data_is_frozen() {
    let data = engineered_degenerate_data();
    let init = Mixture::new(
        vec![1.0],
        vec![SalComponent::new(DVector::from_vec(vec![1.5]), DVector::from_vec(vec![0.2]), DMatrix::from_element(1, 1, 1.0)).unwrap()],
    )
    .unwrap();
    let cfg = FitConfig::new(1, 0);
    let r = fit_em(&data, &cfg, init).unwrap();
    assert!(matches!(r.status, FitStatus::DegenerateFrozen { ref components, .. } if components == &[0]));
    assert!(r.log_lik_trace.iter().all(|l| l.is_finite()));
    assert_monotone(&r.log_lik_trace);
    let mu_star = r.mixture.components()[0].mu().clone();
    assert!((mu_star[0] - 2.0).abs() < 1e-2);

    // Hard labels with unit scale moments: α* is the class mean minus μ*.
    let n = data.n();
    let ones = DMatrix::from_element(n, 1, 1.0);
    let e = EStepQuantities { tau: ones.clone(), e_w: ones.clone(), e_inv_w: ones };
    let c = frozen_shift_update(&data, &e, 0, &mu_star).unwrap();
    assert!((c.alpha()[0] - (data.mean()[0] - mu_star[0])).abs() < 1e-12);
}

#[test]
fn both_families_start_from_the_same_draws() {
    let data = generate_one(&paper_sim_spec(12), 0).unwrap();
    let cfg = FitConfig::new(3, 77);
    let sal = Engine::<SalFamily>::new(&data, &cfg, None).unwrap();
    let gauss = Engine::<GaussianFamily>::new(&data, &cfg, None).unwrap();
    for restart in 0..cfg.annealing.restarts {
        let (a, b) = (sal.start(restart).unwrap(), gauss.start(restart).unwrap());
        assert_eq!(a.weights(), b.weights());
        for (ca, cb) in a.components().iter().zip(b.components()) {
            assert_eq!(ca.mu(), cb.mean());
            assert_eq!(ca.sigma(), cb.covariance());
            assert!(ca.alpha().iter().all(|&v| v == 0.0));
        }
    }
    assert_ne!(sal.start(0).unwrap().weights(), sal.start(1).unwrap().weights());
}

fn old_faithful() -> DataSet {
    let rows: Vec<Vec<f64>> = include_str!("../../cli/tests/data/faithful.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    DataSet::from_rows(&rows).unwrap()
}

#[test]
fn annealing_without_jitter_merges_gaussian_components() {
    let data = old_faithful();
    let mut cfg = FitConfig::new(2, 1);
    cfg.annealing.jitter = 0.0;
    let engine = Engine::<GaussianFamily>::new(&data, &cfg, None).unwrap();
    let (m, _) = engine.anneal_restart(0).unwrap();
    let [a, b] = m.components() else { unreachable!() };
    assert!((a.mean() - b.mean()).amax() < 1e-5, "{} vs {}", a.mean(), b.mean());
    let r = engine.fit(m).unwrap();
    assert!(r.log_lik() < -1289.0);
}

#[test]
fn jittered_annealing_reaches_the_bimodal_optimum() {
    let data = old_faithful();
    let cfg = FitConfig::new(2, 1);
    let r = Engine::<GaussianFamily>::new(&data, &cfg, None).unwrap().anneal_and_fit().unwrap();
    // Two-component unrestricted Gaussian optimum for these data.
    assert!((r.log_lik() + 1130.264).abs() < 1e-3, "{}", r.log_lik());
}
