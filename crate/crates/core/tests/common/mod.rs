//! Fixtures, strategies and checks shared by the property suites and the
//! acceptance runner.
#![allow(dead_code)]

use driftopt::alloc::time_average_loss;
use driftopt::deploy::client_time_average_loss;
use driftopt::{AllocationPolicy, DeploymentSchedule, DurationModel, HazardRate, LossCurve};
use proptest::prelude::*;

pub fn exp1() -> DurationModel {
    DurationModel::exponential(1.0).unwrap()
}

pub fn weibull(k: f64) -> DurationModel {
    DurationModel::weibull_with_mean(k, 1.0).unwrap()
}

pub fn erlang2() -> DurationModel {
    DurationModel::erlang(2, 2.0).unwrap()
}

pub fn hyperexp() -> DurationModel {
    DurationModel::hyper_exponential(vec![0.3, 0.7], vec![0.5, 2.0]).unwrap()
}

/// Every absolutely continuous family, with mean near 1.
pub fn families() -> Vec<DurationModel> {
    vec![exp1(), weibull(2.0), weibull(0.5), weibull(1.5), erlang2(), hyperexp()]
}

pub fn convex_survival_families() -> Vec<DurationModel> {
    let out: Vec<_> = vec![exp1(), weibull(0.5), weibull(0.8), hyperexp()];
    assert!(out.iter().all(|d| d.survival_is_convex()));
    out
}

pub fn losses() -> Vec<LossCurve> {
    vec![
        LossCurve::exp_decay(1.0, 1.0).unwrap(),
        LossCurve::exp_decay(0.5, 7.5).unwrap(),
        LossCurve::shifted_power(0.5).unwrap(),
        LossCurve::linear(0.05, 1.0).unwrap(),
    ]
}

pub fn dist_index() -> impl Strategy<Value = usize> {
    0..families().len()
}

pub fn loss_index() -> impl Strategy<Value = usize> {
    0..losses().len()
}

/// Piecewise-constant policies with up to five pieces on `[0, 4)` and
/// levels in `[0, 20]`.
pub fn policy() -> impl Strategy<Value = AllocationPolicy> {
    (
        prop::collection::vec(0.01f64..4.0, 0..5),
        prop::collection::vec(0.0f64..20.0, 5),
    )
        .prop_map(|(mut cuts, levels)| {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut breaks = vec![0.0];
            breaks.extend(cuts);
            let levels = levels[..breaks.len()].to_vec();
            AllocationPolicy::new(breaks, levels).unwrap()
        })
}

/// Two schedules with the same number of deployments whose offsets are
/// ordered component-wise.
pub fn ordered_schedule_pair() -> impl Strategy<Value = (DeploymentSchedule, DeploymentSchedule)> {
    (1usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(0.02f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(|(gaps, extra)| {
                let lo = DeploymentSchedule::from_gaps(&gaps).unwrap();
                // Larger offsets: add a non-decreasing shift so order is kept.
                let mut shift = 0.0;
                let mut hi_offsets = vec![0.0];
                for (o, e) in lo.offsets()[1..].iter().zip(&extra) {
                    shift += e * 0.5;
                    hi_offsets.push(o + shift);
                }
                (lo, DeploymentSchedule::new(hi_offsets).unwrap())
            })
    })
}

pub fn combine(a: &DeploymentSchedule, b: &DeploymentSchedule, lambda: f64) -> DeploymentSchedule {
    let offsets = a
        .offsets()
        .iter()
        .zip(b.offsets())
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect();
    DeploymentSchedule::new(offsets).unwrap()
}

/// `J(λe₁+(1−λ)e₂) ≤ λJ(e₁)+(1−λ)J(e₂) + 1e-9`.
pub fn check_loss_convexity(
    d: &DurationModel,
    g: &LossCurve,
    e1: &AllocationPolicy,
    e2: &AllocationPolicy,
    lambda: f64,
) -> Result<(), String> {
    let j = |p: &AllocationPolicy| time_average_loss(p, g, d).map(|o| o.value()).map_err(|e| e.to_string());
    let mixed = j(&e1.mix(e2, lambda).map_err(|e| e.to_string())?)?;
    let chord = lambda * j(e1)? + (1.0 - lambda) * j(e2)?;
    if mixed <= chord + 1e-9 {
        Ok(())
    } else {
        Err(format!(
            "{d} {g}: J(mix) = {mixed} exceeds chord {chord} (λ = {lambda}, e1 = {e1}, e2 = {e2})"
        ))
    }
}

/// Loss at a convex combination of ordered schedules is at most the larger
/// endpoint loss plus `1e-9`.
pub fn check_quasi_convexity(
    d: &DurationModel,
    g: &LossCurve,
    a: &DeploymentSchedule,
    b: &DeploymentSchedule,
    lambda: f64,
) -> Result<(), String> {
    let l = |s: &DeploymentSchedule| client_time_average_loss(s, g, d).map_err(|e| e.to_string());
    let mid = l(&combine(a, b, lambda))?;
    let top = l(a)?.max(l(b)?);
    if mid <= top + 1e-9 {
        Ok(())
    } else {
        Err(format!("{d}: loss {mid} at λ = {lambda} exceeds endpoint max {top}"))
    }
}

/// Central difference of the mean residual life against `h·m − 1`, relative
/// to the size of the terms.
pub fn check_mrl_identity(d: &DurationModel, t: f64) -> Result<(), String> {
    let step = 1e-4 * t.max(1e-2);
    let m = |x: f64| d.mrl(x).map_err(|e| e.to_string());
    let fd = (m(t + step)? - m(t - step)?) / (2.0 * step);
    let h = match d.hazard(t).map_err(|e| e.to_string())? {
        HazardRate::Finite(h) => h,
        HazardRate::Infinite => return Err(format!("{d}: infinite hazard at {t}")),
    };
    let rhs = h * m(t)? - 1.0;
    let scale = (h * m(t)?).abs().max(1.0);
    if (fd - rhs).abs() <= 1e-5 * scale {
        Ok(())
    } else {
        Err(format!("{d} at t = {t}: m' = {fd}, h·m − 1 = {rhs}"))
    }
}
