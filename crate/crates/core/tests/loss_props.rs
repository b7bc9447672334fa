use driftopt::LossCurve;
use proptest::prelude::*;

fn curves() -> Vec<LossCurve> {
    vec![
        LossCurve::exp_decay(1.0, 1.0).unwrap(),
        LossCurve::exp_decay(2.0, 0.3).unwrap(),
        LossCurve::shifted_power(0.5).unwrap(),
        LossCurve::shifted_power(2.0).unwrap(),
        LossCurve::pure_power(0.5).unwrap(),
        LossCurve::linear(0.2, 1.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn convex(i in 0usize..6, x in 0.01f64..10.0, y in 0.01f64..10.0, lambda in 0.0f64..1.0) {
        let g = &curves()[i];
        let mid = g.value(lambda * x + (1.0 - lambda) * y).unwrap();
        let chord = lambda * g.value(x).unwrap() + (1.0 - lambda) * g.value(y).unwrap();
        prop_assert!(mid <= chord + 1e-12, "{g}: {mid} > {chord}");
    }

    #[test]
    fn decreasing_and_nonnegative(i in 0usize..6, x in 0.01f64..10.0) {
        let g = &curves()[i];
        prop_assert!(g.value(x).unwrap() >= 0.0);
        if g.clamp_point() != Some(x) {
            prop_assert!(g.derivative(x).unwrap() <= 0.0);
        }
    }

    #[test]
    fn exp_decay_self_similar(alpha in 0.1f64..5.0, beta in 0.1f64..5.0, x in 0.0f64..5.0, c in 0.0f64..5.0) {
        let g = LossCurve::exp_decay(alpha, beta).unwrap();
        let lhs = g.value(x + c).unwrap();
        let rhs = g.value(x).unwrap() * (-beta * c).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}
