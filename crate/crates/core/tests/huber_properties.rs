mod support;

use ahr_core::huber::{huber_deriv, huber_value, loss_gradient, loss_value, truncate, Problem};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use support::oracle::{finite_difference_gradient, random_problem};

fn problem_strategy() -> impl Strategy<Value = (Problem, Array1<f64>, Array1<f64>)> {
    (1usize..12, 1usize..6, any::<u64>()).prop_map(|(n, d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_problem(&mut rng, n, d);
        let b1 = Array1::from_shape_simple_fn(d, || 3.0 * rng.sample::<f64, _>(StandardNormal));
        let b2 = Array1::from_shape_simple_fn(d, || 3.0 * rng.sample::<f64, _>(StandardNormal));
        (p, b1, b2)
    })
}

proptest! {
    #[test]
    fn loss_is_convex((p, b1, b2) in problem_strategy(), theta in 0.0f64..=1.0, tau in 0.05f64..20.0) {
        let mix = &b1 * theta + &b2 * (1.0 - theta);
        let lhs = loss_value(mix.view(), &p, tau).unwrap();
        let rhs = theta * loss_value(b1.view(), &p, tau).unwrap()
            + (1.0 - theta) * loss_value(b2.view(), &p, tau).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn huber_monotone_in_w_and_tau(w in -50.0f64..50.0, scale in 1.0f64..3.0, tau in 0.01f64..10.0, grow in 1.0f64..5.0) {
        let a = huber_value(w, tau).unwrap();
        prop_assert!(huber_value(w * scale, tau).unwrap() >= a);
        prop_assert!(huber_value(w, tau * grow).unwrap() >= a);
        prop_assert!(a >= 0.0);
        prop_assert!(huber_value(w, tau).unwrap() <= huber_value(w, f64::INFINITY).unwrap());
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for tau in [0.5, 2.0, f64::INFINITY] {
        for _ in 0..20 {
            let (p, _) = random_problem(&mut rng, 50, 10);
            let beta = Array1::from_shape_simple_fn(10, || rng.sample::<f64, _>(StandardNormal));
            let g = loss_gradient(beta.view(), &p, tau).unwrap();
            let fd = finite_difference_gradient(&p, beta.view(), tau, 1e-6);
            let err = (&g - &fd).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-6 * scale, "tau {tau}: {err} vs {scale}");
        }
    }
}

#[test]
fn compensated_path_agrees_with_plain_sum() {
    // n above the compensation threshold
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Array2::from_shape_simple_fn((n, 3), || rng.sample::<f64, _>(StandardNormal));
    let y = Array1::from_shape_simple_fn(n, || 1e3 * rng.sample::<f64, _>(StandardNormal));
    let p = Problem::new(x, y).unwrap();
    let beta = Array1::from(vec![0.5, -0.25, 2.0]);
    let g = loss_gradient(beta.view(), &p, 5.0).unwrap();
    let fd = finite_difference_gradient(&p, beta.view(), 5.0, 1e-5);
    let err = (&g - &fd).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err < 1e-6, "{err}");
}

#[test]
fn derivative_is_truncation() {
    for k in 0..10_000 {
        let w = -25.0 + k as f64 * 5e-3;
        for tau in [0.3, 1.0, 7.5, f64::INFINITY] {
            assert_eq!(huber_deriv(w, tau).unwrap(), truncate(w, tau).unwrap());
        }
    }
}
