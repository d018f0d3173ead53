use ahr_core::diagnostics::{
    bernstein_bound, bernstein_check, covariance_deviation, grad_supnorm_at_truth, lre_estimate, prop3_bound,
    prop3_terms, truncated_tail_bound, truncated_tail_sum, DirectionMode, GradientBoundInputs, LreQuery,
};
use ahr_core::huber::{Problem, TruthSpec};
use ahr_core::markov::{
    generate_dataset, generate_dataset_replicate, make_chain_with_gamma, moment_vdelta, CovariateMap, Dataset,
    ErrorFamily, ErrorModel,
};
use ahr_core::rng::{stream_rng, Component};
use ndarray::{array, Array1, Array2};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn bare(x: Array2<f64>, eps: Array1<f64>, beta: Array1<f64>) -> Dataset {
    let y = x.dot(&beta) + &eps;
    let n = y.len();
    Dataset {
        z: vec![0; n],
        problem: Problem::new(x, y).unwrap(),
        eps: Some(eps),
        truth: Some(TruthSpec::new(beta).unwrap()),
        provenance: None,
    }
}

fn inputs() -> GradientBoundInputs {
    GradientBoundInputs {
        n: 1000,
        d: 100,
        gamma: 0.0,
        tau: 14.736,
        delta: 1.0,
        sigma2: 1.0,
        v: 1.0,
        c: 1.0,
    }
}

#[test]
fn gradient_bound_worked_example() {
    let [a, b, c] = prop3_terms(&inputs()).unwrap();
    assert!((a - 0.09597).abs() < 5e-5, "{a}");
    assert!((b - 1.3573).abs() < 5e-4, "{b}");
    assert!((c - 0.06786).abs() < 5e-5, "{c}");
    assert!((prop3_bound(&inputs()).unwrap() - 1.5211).abs() < 5e-4);
}

#[test]
fn gradient_bound_terms_isolate() {
    let base = inputs();
    let only_first = prop3_terms(&GradientBoundInputs { c: 0.0, ..base }).unwrap();
    assert_eq!(only_first[2], 0.0);
    let no_first = prop3_terms(&GradientBoundInputs { v: 0.0, ..base }).unwrap();
    assert_eq!(no_first[0], 0.0);
    let total = prop3_bound(&base).unwrap();
    let [a, b, c] = prop3_terms(&base).unwrap();
    assert_eq!(total, a + b + c);
    // gamma enters both prefactors as (1 + gamma) / (1 - gamma)
    let g = prop3_terms(&GradientBoundInputs { gamma: 0.5, ..base }).unwrap();
    assert!((g[0] / a - 3f64.sqrt()).abs() < 1e-12);
    assert!((g[1] / b - 3.0).abs() < 1e-12);
    assert_eq!(g[2], c);
    // large tau with delta = 1: linear term dominates and grows
    let big = |tau| prop3_bound(&GradientBoundInputs { tau, ..base }).unwrap();
    assert!(big(1e4) < big(2e4));
    assert!(prop3_terms(&GradientBoundInputs { gamma: 1.0, ..base }).is_err());
}

#[test]
fn gradient_at_truth_examples() {
    let ds = bare(array![[1.0]], array![2.0], array![0.5]);
    assert_eq!(grad_supnorm_at_truth(&ds, 1.0).unwrap(), 1.0);
    let ds = bare(array![[1.0, 2.0], [3.0, -1.0]], array![0.0, 0.0], array![1.0, 0.0]);
    assert_eq!(grad_supnorm_at_truth(&ds, 0.1).unwrap(), 0.0);
    let mut no_truth = ds.clone();
    no_truth.truth = None;
    assert!(grad_supnorm_at_truth(&no_truth, 1.0).is_err());
}

#[test]
fn clipping_shrinks_single_sign_gradients() {
    let mut rng = stream_rng(1, Component::Diagnostics, 0);
    use rand::Rng;
    for _ in 0..20 {
        let x = Array2::from_shape_simple_fn((40, 6), || rng.random::<f64>());
        let eps = Array1::from_shape_simple_fn(40, || rng.random::<f64>() * 10.0);
        let ds = bare(x, eps, Array1::zeros(6));
        let full = grad_supnorm_at_truth(&ds, f64::INFINITY).unwrap();
        for tau in [0.1, 1.0, 5.0] {
            assert!(grad_supnorm_at_truth(&ds, tau).unwrap() <= full);
        }
    }
}

fn indicator_dataset(n: usize, tau_noise: f64) -> (Dataset, Array1<f64>) {
    let d = 6;
    let chain = make_chain_with_gamma(d, 0.0).unwrap();
    let scales = array![1.0, 2.0, 0.5, 3.0, 1.5, 0.8];
    let cov = CovariateMap::indicators(scales.view(), chain.stationary()).unwrap();
    let err = ErrorModel::homoskedastic(ErrorFamily::Gaussian, d, 1.0).unwrap();
    let err = ErrorModel::new(err.family(), Array1::from_elem(d, tau_noise), 1.0).unwrap();
    let truth = TruthSpec::new(array![1.0, -1.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
    (generate_dataset(&chain, &cov, &err, &truth, n, 5).unwrap(), scales)
}

#[test]
fn lre_on_indicator_design() {
    let (ds, scales) = indicator_dataset(6000, 1.0);
    let x = ds.problem.x();
    let n = ds.n() as f64;
    let diag: Vec<f64> = (0..6).map(|j| x.column(j).dot(&x.column(j)) / n).collect();
    let support = [0usize, 1, 3];
    let min_s = support.iter().map(|&j| diag[j]).fold(f64::INFINITY, f64::min);
    let min_all = diag.iter().copied().fold(f64::INFINITY, f64::min);

    let mut q = LreQuery::new(1.0);
    q.mode = DirectionMode::Coordinate;
    let coord = lre_estimate(&ds, f64::INFINITY, &q).unwrap();
    assert!((coord - min_s).abs() <= 1e-12 * min_s, "{coord} vs {min_s}");
    // population value min_j pi_j f(j,j)^2 over S
    let pop = support.iter().map(|&j| scales[j] * scales[j] / 6.0).fold(f64::INFINITY, f64::min);
    assert!((coord / pop - 1.0).abs() < 0.1);

    q.mode = DirectionMode::Sampled;
    q.num_directions = 200;
    let sampled = lre_estimate(&ds, f64::INFINITY, &q).unwrap();
    assert!(sampled <= coord + 1e-15);
    assert!(sampled >= min_all - 1e-12);
}

#[test]
fn lre_degenerate_cases() {
    let (ds, _) = indicator_dataset(500, 1.0);
    let mut q = LreQuery::new(0.5);
    q.num_directions = 50;
    // every residual is nonzero, so nothing survives a vanishing tau
    assert_eq!(lre_estimate(&ds, 1e-300, &q).unwrap(), 0.0);

    let mut empty = ds.clone();
    empty.truth = Some(TruthSpec::new(Array1::zeros(6)).unwrap());
    assert!(lre_estimate(&empty, 1.0, &q).is_err());
    assert_eq!(lre_estimate(&ds, 1.0, &q).unwrap(), lre_estimate(&ds, 1.0, &q).unwrap());
}

#[test]
fn lre_is_nonincreasing_in_radius() {
    let chain = make_chain_with_gamma(30, 0.5).unwrap();
    let mut rng = stream_rng(4, Component::Covariates, 0);
    let cov = CovariateMap::gaussian(30, 10, chain.stationary(), &mut rng).unwrap();
    let err = ErrorModel::homoskedastic(ErrorFamily::StudentT { nu: 3.0 }, 30, 1.0).unwrap();
    let truth = TruthSpec::new(array![1.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let ds = generate_dataset(&chain, &cov, &err, &truth, 400, 4).unwrap();
    let mut last = f64::INFINITY;
    for r in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let mut q = LreQuery::new(r);
        q.pool_radius = Some(4.0);
        q.num_centers = 20;
        q.num_directions = 100;
        let v = lre_estimate(&ds, 1.5, &q).unwrap();
        assert!(v <= last, "r = {r}: {v} > {last}");
        last = v;
    }
}

fn iid_covariance_dataset(n: usize, gamma: f64, rep: u64) -> (Dataset, CovariateMap, ahr_core::markov::ChainSpec) {
    let m = 4;
    let chain = make_chain_with_gamma(m, gamma).unwrap();
    let mut rng = stream_rng(12, Component::Covariates, 0);
    let cov = CovariateMap::gaussian(m, 3, chain.stationary(), &mut rng).unwrap();
    let err = ErrorModel::new(ErrorFamily::Gaussian, Array1::zeros(m), 1.0).unwrap();
    let truth = TruthSpec::new(Array1::zeros(3)).unwrap();
    let ds = generate_dataset_replicate(&chain, &cov, &err, &truth, n, 12, rep).unwrap();
    (ds, cov, chain)
}

#[test]
fn covariance_deviation_constant_design_is_zero() {
    let one = make_chain_with_gamma(1, 0.0).unwrap();
    let cov = CovariateMap::new(vec![array![[1.0, -2.0, 0.5]]], one.stationary()).unwrap();
    let err = ErrorModel::homoskedastic(ErrorFamily::Gaussian, 1, 1.0).unwrap();
    let truth = TruthSpec::new(array![1.0, 0.0, 0.0]).unwrap();
    let ds = generate_dataset(&one, &cov, &err, &truth, 100, 1).unwrap();
    assert_eq!(covariance_deviation(&ds, &cov, &one).unwrap(), 0.0);
}

#[test]
fn covariance_deviation_iid_rate() {
    let n = 1_000_000;
    let reps = 200;
    let limit = 5.0 * (3f64.ln() / n as f64).sqrt();
    let within = (0..reps)
        .filter(|&k| {
            let (ds, cov, chain) = iid_covariance_dataset(n, 0.0, k);
            covariance_deviation(&ds, &cov, &chain).unwrap() <= limit
        })
        .count();
    assert!(within as f64 >= 0.95 * reps as f64, "{within}/{reps}");
}

#[test]
fn covariance_deviation_scales_as_root_n() {
    let grid = [1000usize, 4000, 16000, 64000];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &n in &grid {
        let devs: Vec<f64> = (0..60)
            .map(|k| {
                let (ds, cov, chain) = iid_covariance_dataset(n, 0.5, k);
                covariance_deviation(&ds, &cov, &chain).unwrap()
            })
            .collect();
        lx.push((n as f64).ln());
        ly.push(median(devs).ln());
    }
    let s = slope(&lx, &ly);
    assert!((s + 0.5).abs() <= 0.1, "slope {s}");
}

#[test]
fn truncated_tail_sum_limits_and_bound() {
    let m = 5;
    let d = 10;
    let chain = make_chain_with_gamma(m, 0.0).unwrap();
    let mut rng = stream_rng(6, Component::Covariates, 0);
    let cov = CovariateMap::gaussian(m, d, chain.stationary(), &mut rng).unwrap();
    let err = ErrorModel::homoskedastic(ErrorFamily::SymmetricPareto { alpha: 2.5 }, m, 1.0).unwrap();
    let truth = TruthSpec::new(Array1::zeros(d)).unwrap();
    let n = 2000;
    let ds = generate_dataset(&chain, &cov, &err, &truth, n, 6).unwrap();
    assert_eq!(truncated_tail_sum(&ds, &cov, 1e300).unwrap(), 0.0);
    let env = cov.envelope();
    let all = ds.z.iter().map(|&s| env[s] * env[s]).sum::<f64>() / n as f64;
    assert!((truncated_tail_sum(&ds, &cov, 1e-300).unwrap() - all).abs() <= 1e-12 * all);

    let tau = 8.0;
    let v = moment_vdelta(&err).unwrap();
    let bound = truncated_tail_bound(cov.sigma2(), tau, 1.0, v) + 3.0 * ((d as f64).ln() / n as f64).sqrt();
    let sums: Vec<f64> = (0..200)
        .map(|k| {
            let ds = generate_dataset_replicate(&chain, &cov, &err, &truth, n, 6, k).unwrap();
            truncated_tail_sum(&ds, &cov, tau).unwrap()
        })
        .collect();
    let med = median(sums);
    assert!(med <= bound, "{med} > {bound}");
}

#[test]
fn bernstein_formula_arithmetic() {
    // 2 exp(-1000 * 0.04 / (1 + 2))
    let expected = 2.0 * (-40.0f64 / 3.0).exp();
    assert!((bernstein_bound(1000, 0.0, 1.0, 1.0, 0.2) - expected).abs() <= 1e-18);
    assert!((expected - 3.2392e-6).abs() < 1e-10);
    assert_eq!(bernstein_bound(10, 0.0, 1.0, 1.0, 0.01), 1.0);
}

#[test]
fn bernstein_iid_rademacher() {
    let chain = make_chain_with_gamma(2, 0.0).unwrap();
    let f = array![1.0, -1.0];
    let r = bernstein_check(&chain, f.view(), 1.0, 1000, 10_000, &[0.2], 1).unwrap();
    assert_eq!(r.empirical_tail, vec![0.0]);
    assert!(!r.any_flagged());

    let constant = array![0.5, 0.5];
    let r = bernstein_check(&chain, constant.view(), 1.0, 100, 200, &[0.01, 0.1], 1).unwrap();
    assert!(r.empirical_tail.iter().all(|&p| p == 0.0));

    assert!(bernstein_check(&chain, array![2.0, -1.0].view(), 1.0, 100, 10, &[0.1], 1).is_err());
    assert!(bernstein_check(&chain, array![f64::INFINITY, 0.0].view(), f64::INFINITY, 100, 10, &[0.1], 1).is_err());
}

#[test]
fn tails_grow_with_gamma() {
    let f = array![1.0, -1.0];
    let grid = [0.02, 0.05, 0.1, 0.15, 0.2];
    let tails: Vec<Vec<f64>> = [0.0, 0.5, 0.9]
        .iter()
        .map(|&g| {
            let chain = make_chain_with_gamma(2, g).unwrap();
            bernstein_check(&chain, f.view(), 1.0, 500, 2000, &grid, 3).unwrap().empirical_tail
        })
        .collect();
    let ordered = (0..grid.len())
        .filter(|&k| tails[0][k] <= tails[1][k] && tails[1][k] <= tails[2][k])
        .count();
    assert!(ordered * 2 > grid.len(), "{tails:?}");
}
