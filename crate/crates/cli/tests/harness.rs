#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use ahr_cli::config::{Estimator, SweepConfig};
use ahr_cli::fit::{error_metrics, fit_estimators, tuning_parameters, RowContext, Tuning};
use ahr_cli::rates::{rate_fit, rates_csv, GroupKey, XAxis, YAxis};
use ahr_cli::results::{results_csv, ResultRow, RESULTS_HEADER};
use ahr_cli::scenario::{cells, generate_cell, truth_vector, Cell};
use ahr_cli::stats::{median, quantile};
use ahr_cli::sweep::{run_sweep, SweepOptions};
use ahr_core::huber::{HuberConfig, TruthSpec};
use ahr_core::solver::{fit, SolverConfig};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(n: usize, gamma: f64, l2: f64) -> ResultRow {
    ResultRow {
        rep: 0,
        n,
        d: 10,
        s: 2,
        delta: 1.0,
        gamma,
        estimator: Estimator::Ahr,
        tau: 1.0,
        lambda: 0.1,
        l1_error: 2.0 * l2,
        l2_error: l2,
        support_precision: 1.0,
        support_recall: 1.0,
        kkt_residual: 0.0,
        converged: true,
        seed: 1,
        wall_time_ms: 0.0,
    }
}

fn small_config() -> SweepConfig {
    SweepConfig::from_text(
        "n_grid = 60, 120\nd = 12\ns = 2\ngamma_list = 0, 0.6\nreplicates = 2\nestimators = ahr, lasso\nbase_seed = 5\n",
    )
    .unwrap()
}

#[test]
fn exact_power_law_slope() {
    let ns = [100, 400, 1600, 6400];
    let mut rows = Vec::new();
    for &n in &ns {
        // three replicates whose median is 3 n^{-1/2}
        for k in [0.5, 1.0, 7.0] {
            rows.push(row(n, 0.5, 3.0 * k * (n as f64).powf(-0.5)));
        }
    }
    let t = rate_fit(&rows, &[GroupKey::Estimator], XAxis::N, YAxis::L2);
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0].points, 4);
    assert!((t.rows[0].slope + 0.5).abs() < 1e-12, "{}", t.rows[0].slope);
    assert!((t.rows[0].intercept - 3f64.ln()).abs() < 1e-10);
    assert!(t.rows[0].std_error < 1e-10);

    // l1 is twice l2: same slope
    let t1 = rate_fit(&rows, &[GroupKey::Estimator], XAxis::N, YAxis::L1);
    assert!((t1.rows[0].slope + 0.5).abs() < 1e-12);

    // constant errors have slope zero
    let flat: Vec<_> = ns.iter().map(|&n| row(n, 0.0, 0.25)).collect();
    let t = rate_fit(&flat, &[], XAxis::N, YAxis::L2);
    assert!(t.rows[0].slope.abs() < 1e-12);
}

#[test]
fn groups_with_few_sizes_are_skipped() {
    let rows = vec![row(100, 0.0, 1.0), row(200, 0.0, 0.5), row(100, 0.5, 1.0), row(200, 0.5, 0.7), row(400, 0.5, 0.5)];
    let t = rate_fit(&rows, &[GroupKey::Gamma], XAxis::N, YAxis::L2);
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.skipped.len(), 1);
    let csv = rates_csv(&t, "n", "l2_error");
    assert!(csv.starts_with("estimator,d,s,delta,gamma,x,y,points,slope,std_error,intercept\n"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn effective_sample_axis() {
    // at gamma = 0.5, n_eff = n / 3
    let rows: Vec<_> = [300, 600, 1200].iter().map(|&n| row(n, 0.5, (n as f64 / 3.0).powf(-0.25))).collect();
    let t = rate_fit(&rows, &[], XAxis::NEff, YAxis::L2);
    assert!((t.rows[0].slope + 0.25).abs() < 1e-12);
    assert!(t.rows[0].intercept.abs() < 1e-10);
}

#[test]
fn quantiles_follow_linear_interpolation() {
    let v = [4.0, 1.0, 3.0, 2.0, f64::NAN];
    assert_eq!(median(&v), 2.5);
    assert_eq!(quantile(&v, 0.25), 1.75);
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert!(median(&[]).is_nan());
}

#[test]
fn adaptive_parameters_follow_closed_form() {
    for (n, d, delta, gamma) in [(500, 200, 1.0, 0.5), (2000, 50, 0.5, 0.0), (1000, 1000, 3.0, 0.9)] {
        let (tau, lambda) = tuning_parameters(
            Tuning::Adaptive {
                c_tau: 2.0,
                c_lambda: 0.5,
            },
            n,
            d,
            delta,
            gamma,
        )
        .unwrap();
        let de = f64::min(delta, 1.0);
        let n_eff = n as f64 * (1.0 - gamma) / (1.0 + gamma);
        let ln_d = (d as f64).ln();
        let tau_ref = 2.0 * (n_eff / ln_d).powf(1.0 / (1.0 + de));
        let lambda_ref = 0.5 * (ln_d / n_eff).powf(de / (1.0 + de));
        assert!((tau / tau_ref - 1.0).abs() < 1e-14);
        assert!((lambda / lambda_ref - 1.0).abs() < 1e-14);
    }
}

#[test]
fn lasso_matches_squared_loss_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let (p, _) = oracle::random_problem(&mut rng, 40, 8);
        let lambda = rng.random_range(0.05..0.3);
        let ctx = RowContext {
            rep: 0,
            delta: 1.0,
            gamma: 0.0,
            seed: 0,
            timing: false,
        };
        let fits = fit_estimators(
            &p,
            None,
            &[Estimator::Lasso],
            Tuning::Fixed { tau: 1.0, lambda },
            ctx,
            &SolverConfig::default(),
        )
        .unwrap();
        let lasso = &fits[0].result.beta_hat;
        assert!(fits[0].row.tau.is_infinite());
        let cd = oracle::coordinate_descent(&p, f64::INFINITY, lambda, 1_000_000);
        let gap = (lasso - &cd).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gap < 1e-6, "{gap}");

        // a tau above every residual of the lasso fit leaves the minimizer unchanged
        let r = p.residuals(lasso.view()).unwrap();
        let big = 2.0 * r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ahr = fit(&p, &HuberConfig::new(big, lambda).unwrap(), &SolverConfig::default(), None).unwrap();
        let gap = (ahr.objective - fits[0].result.objective).abs();
        assert!(gap < 1e-10, "{gap}");
        let inf = fit(&p, &HuberConfig::new(f64::INFINITY, lambda).unwrap(), &SolverConfig::default(), None).unwrap();
        assert!((inf.objective - fits[0].result.objective).abs() < 1e-10);
    }
}

#[test]
fn error_metric_invariants() {
    let cfg = small_config();
    let rows = run_sweep(&cfg, SweepOptions::default()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
    let sqrt_d = (cfg.d as f64).sqrt();
    for r in &rows {
        assert!(r.converged);
        assert!(r.kkt_residual <= 1e-8);
        assert!(r.l2_error <= r.l1_error + 1e-15);
        assert!(r.l1_error <= sqrt_d * r.l2_error + 1e-12);
        assert!((0.0..=1.0).contains(&r.support_precision));
        assert!((0.0..=1.0).contains(&r.support_recall));
        assert_eq!(r.wall_time_ms, 0.0);
    }
    // lasso and AHR share lambda in every cell
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].estimator, Estimator::Ahr);
        assert_eq!(pair[1].estimator, Estimator::Lasso);
        assert_eq!(pair[0].lambda, pair[1].lambda);
        assert!(pair[1].tau.is_infinite());
    }
}

#[test]
fn support_metrics_on_known_vectors() {
    let truth = TruthSpec::new(Array1::from(vec![1.0, -1.0, 0.0, 0.0])).unwrap();
    let m = error_metrics(Array1::from(vec![1.0, 0.0, 0.5, 0.0]).view(), &truth);
    assert_eq!(m.precision, 0.5);
    assert_eq!(m.recall, 0.5);
    assert_eq!(m.l1, 1.5);
    assert!((m.l2 - 1.25f64.sqrt()).abs() < 1e-15);
    let empty = error_metrics(Array1::zeros(4).view(), &truth);
    assert_eq!((empty.precision, empty.recall), (1.0, 0.0));
}

#[test]
fn results_csv_layout() {
    let cfg = small_config();
    let rows = run_sweep(&cfg, SweepOptions::default()).unwrap();
    let csv = results_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rep,n,d,s,delta,gamma,estimator,tau,lambda,l1_error,l2_error,support_precision,support_recall,kkt_residual,converged,seed,wall_time_ms"
    );
    assert_eq!(RESULTS_HEADER.split(',').count(), 17);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 17);
    assert_eq!(first[4], "1.0000000000000000e0");
    assert_eq!(first[6], "ahr");
    assert_eq!(first[14], "true");
    // every real parses back bit-exactly
    for r in &rows {
        assert_eq!(&ResultRow::from_csv(&r.to_csv()).unwrap(), r);
    }
}

#[test]
fn sweep_order_and_prefix_consistency() {
    let cfg = small_config();
    let order = cells(&cfg);
    assert_eq!(order.len(), 4);
    assert_eq!((order[0].gamma, order[0].n), (0.0, 60));
    assert_eq!((order[1].gamma, order[1].n), (0.0, 120));
    // the same replicate at a larger n extends the smaller sample
    let (_, short) = generate_cell(&cfg, Cell { n: 60, delta: 1.0, gamma: 0.6 }, 1).unwrap();
    let (_, long) = generate_cell(&cfg, Cell { n: 120, delta: 1.0, gamma: 0.6 }, 1).unwrap();
    assert_eq!(short.problem.x(), long.problem.x().slice(ndarray::s![..60, ..]));
    assert_eq!(short.problem.y(), long.problem.y().slice(ndarray::s![..60]));
    assert_eq!(truth_vector(6, 3, 2.0).to_vec(), vec![2.0, -2.0, 2.0, 0.0, 0.0, 0.0]);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small_config();
    let one = run_sweep(&cfg, SweepOptions { threads: Some(1), timing: false }).unwrap();
    let four = run_sweep(&cfg, SweepOptions { threads: Some(4), timing: false }).unwrap();
    assert_eq!(results_csv(&one), results_csv(&four));
}
