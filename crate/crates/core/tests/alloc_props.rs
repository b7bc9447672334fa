mod common;

use common::*;
use driftopt::alloc::{
    back_loading_switch, cost_rate, delayed_block, front_loading_switch, pmp_verify, time_average_loss,
    time_average_loss_quadrature, SignPattern,
};
use driftopt::{AllocationPolicy, BudgetSpec, LossCurve};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn objective_convex_in_policy(
        i in dist_index(),
        j in loss_index(),
        e1 in policy(),
        e2 in policy(),
        lambda in 0.0f64..1.0,
    ) {
        let r = check_loss_convexity(&families()[i], &losses()[j], &e1, &e2, lambda);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn bang_bang_policies_spend_the_budget(i in dist_index(), frac in 0.01f64..0.99) {
        let d = &families()[i];
        let spec = BudgetSpec::new(frac * 20.0, 1.0, 20.0).unwrap();
        let front = AllocationPolicy::front_loading(20.0, front_loading_switch(d, &spec).unwrap()).unwrap();
        let c = cost_rate(&front, d, 1.0);
        prop_assert!((c - spec.budget).abs() <= 1e-9 * spec.budget, "front {d}: {c}");
        let sw = back_loading_switch(d, &spec).unwrap();
        prop_assert!(!sw.never_allocates);
        let back = AllocationPolicy::back_loading(20.0, sw.time).unwrap();
        let c = cost_rate(&back, d, 1.0);
        prop_assert!((c - spec.budget).abs() <= 1e-9 * spec.budget, "back {d}: {c}");
    }

    #[test]
    fn dmrl_front_loading_is_certified(i in 0usize..4, j in 0usize..3, frac in 0.02f64..0.95) {
        let d = [exp1(), weibull(2.0), weibull(1.5), erlang2()][i].clone();
        assert!(d.classify_aging(&d.default_aging_grid()).unwrap().is_dmrl_or_constant());
        let g = &losses()[j];
        let spec = BudgetSpec::new(frac * 20.0, 1.0, 20.0).unwrap();
        let front = AllocationPolicy::front_loading(20.0, front_loading_switch(&d, &spec).unwrap()).unwrap();
        let r = pmp_verify(&front, g, &d, &spec, None).unwrap();
        prop_assert_eq!(r.sign_pattern, SignPattern::NegThenPos, "{} {} B={}", d, g, spec.budget);
    }

    #[test]
    fn quadrature_matches_closed_form(e in policy(), beta in 0.2f64..3.0) {
        let d = exp1();
        let g = LossCurve::exp_decay(1.0, beta).unwrap();
        let exact = time_average_loss(&e, &g, &d).unwrap().value();
        let quad = time_average_loss_quadrature(&e, &g, &d).unwrap().value();
        prop_assert!((exact - quad).abs() <= 1e-10, "{exact} vs {quad}");
    }
}

fn delay_losses(k: f64) -> Vec<f64> {
    let d = weibull(k);
    let g = LossCurve::exp_decay(1.0, 1.0).unwrap();
    let spec = BudgetSpec::new(0.1, 1.0, 20.0).unwrap();
    (0..=10)
        .map(|i| {
            let blk = delayed_block(&d, &spec, i as f64 / 10.0).unwrap();
            time_average_loss(&blk.policy, &g, &d).unwrap().value()
        })
        .collect()
}

#[test]
fn delay_hurts_under_dmrl() {
    let l = delay_losses(2.0);
    assert!(l.windows(2).all(|w| w[1] >= w[0]), "{l:?}");
}

#[test]
fn delay_helps_under_imrl() {
    let l = delay_losses(0.5);
    let argmin = l.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(argmin > 0, "{l:?}");
}
