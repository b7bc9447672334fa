use driftopt::alloc::{front_loading_switch, time_average_loss};
use driftopt::deploy::randomize_to_rate;
use driftopt::sim::{self, DeploymentPlan};
use driftopt::{AllocationPolicy, BudgetSpec, DeploymentSchedule, DurationModel, Execution, LossCurve, SimConfig};

fn exp1() -> DurationModel {
    DurationModel::exponential(1.0).unwrap()
}

fn g1() -> LossCurve {
    LossCurve::exp_decay(1.0, 1.0).unwrap()
}

fn front() -> AllocationPolicy {
    let spec = BudgetSpec::new(10.0, 1.0, 20.0).unwrap();
    AllocationPolicy::front_loading(20.0, front_loading_switch(&exp1(), &spec).unwrap()).unwrap()
}

#[test]
fn front_loading_server_loss_at_a_million_cycles() {
    let mut cfg = SimConfig::new(1_000_000, 1, exp1(), g1(), front());
    cfg.keep_records = false;
    let out = sim::simulate(&cfg).unwrap();
    let exact = time_average_loss(&cfg.policy, &cfg.loss, &cfg.duration)
        .unwrap()
        .value();
    assert!(out.server_loss.z_score(exact) < 3.0, "{:?} vs {exact}", out.server_loss);
    assert!(out.cost_rate.z_score(10.0) < 3.0, "{:?}", out.cost_rate);
}

#[test]
fn randomized_plan_at_three_quarters() {
    let mix = randomize_to_rate(&exp1(), &g1(), 0.75).unwrap();
    assert!((mix.gamma - 0.5).abs() < 1e-9);
    let mut cfg = SimConfig::new(1_000_000, 2, exp1(), g1(), AllocationPolicy::fixed(1.0).unwrap());
    cfg.keep_records = false;
    let out = sim::simulate_randomized(&cfg, &mix).unwrap();
    assert!(
        out.deployments_per_concept.z_score(0.75) < 3.0,
        "{:?}",
        out.deployments_per_concept
    );
    assert!(
        out.client_loss.z_score(0.708_333_333_333_333_3) < 3.0,
        "{:?}",
        out.client_loss
    );
}

#[test]
fn identical_configs_give_identical_outcomes() {
    let mix = randomize_to_rate(&exp1(), &g1(), 1.3).unwrap();
    let mut cfg = SimConfig::new(
        20_000,
        9,
        DurationModel::weibull_with_mean(2.0, 1.0).unwrap(),
        g1(),
        front(),
    );
    cfg.deployment = DeploymentPlan::from(&mix);
    let a = sim::simulate(&cfg).unwrap();
    let b = sim::simulate(&cfg).unwrap();
    cfg.execution = Execution::Sequential;
    let c = sim::simulate(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.records, c.records);
}

#[test]
fn staleness_never_helps_within_a_cycle() {
    let s = DeploymentSchedule::new(vec![0.0, 0.3, 0.9, 2.0]).unwrap();
    for policy in [
        front(),
        AllocationPolicy::fixed(1.0).unwrap(),
        "steps(t=0:0.5,e=0:4)".parse().unwrap(),
    ] {
        let mut cfg = SimConfig::new(5_000, 4, DurationModel::erlang(2, 2.0).unwrap(), g1(), policy);
        cfg.deployment = DeploymentPlan::Fixed(s.clone());
        let out = sim::simulate(&cfg).unwrap();
        for r in &out.records {
            assert!(r.client_cycle_loss >= r.server_cycle_loss - 1e-12 * r.duration, "{r:?}");
        }
    }
}

#[test]
fn cost_matches_analytic_rate() {
    for d in [exp1(), DurationModel::weibull_with_mean(0.5, 1.0).unwrap()] {
        let policy: AllocationPolicy = "steps(t=0:0.2:1.1,e=3:0:7)".parse().unwrap();
        let mut cfg = SimConfig::new(100_000, 8, d, g1(), policy);
        cfg.price = 2.5;
        cfg.keep_records = false;
        let out = sim::simulate(&cfg).unwrap();
        let a = sim::analytic(&cfg).unwrap();
        assert!(
            out.cost_rate.z_score(a.cost_rate) < 3.0,
            "{:?} vs {}",
            out.cost_rate,
            a.cost_rate
        );
    }
}
