//! Sweeps and reports shared by the command-line runner and the
//! acceptance suite.

use serde::{Deserialize, Serialize};

use crate::alloc::{self, delayed_block, front_loading_switch, AllocationPolicy, BudgetSpec, SignPattern};
use crate::deploy::{self, DeploymentSchedule};
use crate::dist::{geometric_grid, AgingTag, DurationModel, Family};
use crate::error::{Error, Result};
use crate::loss::LossCurve;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocRow {
    #[serde(rename = "B")]
    pub budget: f64,
    pub t_star: f64,
    pub loss_fixed: f64,
    pub loss_opt: f64,
    pub reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocSweep {
    pub rows: Vec<AllocRow>,
    pub aging: AgingTag,
    pub warning: Option<String>,
}

/// 40 log-spaced budgets from `0.01 Mσ_e` to `0.999 Mσ_e`.
pub fn default_budget_grid(price: f64, max_level: f64) -> Vec<f64> {
    let top = price * max_level;
    geometric_grid(0.01 * top, 0.999 * top, 40)
}

fn reduction_pct(baseline: f64, better: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - better) / baseline
    }
}

/// Front-loading against the fixed `B/σ_e` baseline for each budget.
pub fn alloc_sweep(
    d: &DurationModel,
    g: &LossCurve,
    price: f64,
    max_level: f64,
    budgets: &[f64],
    exec: Execution,
) -> Result<AllocSweep> {
    if budgets.is_empty() {
        return Err(Error::domain("budget grid is empty"));
    }
    let aging = d.classify_aging(&d.default_aging_grid())?;
    let warning = (!aging.is_dmrl_or_constant()).then(|| {
        format!(
            "durations are {} rather than DMRL; front-loading is not certified optimal",
            aging.tag
        )
    });
    let rows = par::map_slice(budgets, exec, |&b| -> Result<AllocRow> {
        let spec = BudgetSpec::new(b, price, max_level)?;
        let fixed = AllocationPolicy::fixed_for_budget(&spec)?;
        let loss_fixed = alloc::time_average_loss(&fixed, g, d)?.value();
        let t_star = front_loading_switch(d, &spec)?;
        let front = AllocationPolicy::front_loading(max_level, t_star)?;
        let loss_opt = alloc::time_average_loss(&front, g, d)?.value();
        Ok(AllocRow {
            budget: b,
            t_star,
            loss_fixed,
            loss_opt,
            reduction_pct: reduction_pct(loss_fixed, loss_opt),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(AllocSweep {
        rows,
        aging: aging.tag,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub dist: String,
    pub z: f64,
    #[serde(rename = "T_z")]
    pub t_z: f64,
    pub loss: f64,
    pub slack: bool,
    pub argmin: bool,
}

/// Delays `0, 0.1, …, 1.0`.
pub fn default_delay_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Delayed-block loss over a delay grid for each distribution; the grid
/// minimum per distribution is flagged. Losses within `1e-9` relative of
/// the minimum are ties and the earliest delay wins.
pub fn delay_sweep(
    dists: &[DurationModel],
    g: &LossCurve,
    budget: &BudgetSpec,
    delays: &[f64],
    exec: Execution,
) -> Result<Vec<DelayRow>> {
    if delays.is_empty() || dists.is_empty() {
        return Err(Error::domain(
            "delay sweep needs at least one delay and one distribution",
        ));
    }
    if !budget.binding() {
        return Err(Error::domain("delay sweep needs a binding budget (B < M σ_e)"));
    }
    let mut out = Vec::new();
    for d in dists {
        let mut rows = par::map_slice(delays, exec, |&z| -> Result<DelayRow> {
            let blk = delayed_block(d, budget, z)?;
            Ok(DelayRow {
                dist: d.to_string(),
                z,
                t_z: blk.end,
                loss: alloc::time_average_loss(&blk.policy, g, d)?.value(),
                slack: blk.slack,
                argmin: false,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let min = rows.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        if let Some(r) = rows.iter_mut().find(|r| r.loss <= min * (1.0 + 1e-9)) {
            r.argmin = true;
        }
        out.extend(rows);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeployRow {
    pub r_d: f64,
    pub loss_periodic: f64,
    pub loss_optimal: f64,
    pub loss_randomized: f64,
    pub gamma: f64,
    pub n_low: usize,
    pub optimal_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployCompare {
    pub rows: Vec<DeployRow>,
    pub survival_convex: bool,
    pub note: Option<String>,
}

impl DeployCompare {
    /// Largest reduction of the optimal schedule against the periodic one,
    /// in percent.
    pub fn max_reduction_pct(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| reduction_pct(r.loss_periodic, r.loss_optimal))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest relative excess of the randomized over the optimal loss.
    pub fn max_randomized_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.loss_randomized - r.loss_optimal) / r.loss_optimal)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rates `r_e(N)/E[Y]` of the fixed-count optima for `N = 1..=n_max`.
pub fn fixed_n_rate_grid(d: &DurationModel, g: &LossCurve, n_max: usize) -> Result<Vec<f64>> {
    (1..=n_max)
        .map(|n| deploy::fixed_n_solution(d, g, n).map(|s| s.count / d.mean()))
        .collect()
}

/// Periodic, best deterministic and randomized schedules at each rate. The
/// periodic period is matched to the effective rate of the deterministic
/// schedule.
pub fn deploy_compare(d: &DurationModel, g: &LossCurve, rates: &[f64], exec: Execution) -> Result<DeployCompare> {
    if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::domain("rate grid must be non-empty and positive"));
    }
    let rows = par::map_slice(rates, exec, |&r| -> Result<DeployRow> {
        let target = r * d.mean();
        let mix = deploy::randomize_to_count(d, g, target)?;
        let best = deploy::best_deterministic_for_count(d, g, target)?;
        let periodic = deploy::periodic_for_count(d, best.count)?;
        Ok(DeployRow {
            r_d: r,
            loss_periodic: deploy::client_time_average_loss(&periodic, g, d)?,
            loss_optimal: best.loss,
            loss_randomized: mix.mixture_loss(),
            gamma: mix.gamma,
            n_low: mix.n_low(),
            optimal_count: best.count,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let survival_convex = d.survival_is_convex();
    Ok(DeployCompare {
        rows,
        survival_convex,
        note: (!survival_convex).then(|| {
            "survival is not convex: randomized-vs-optimal gap expected; constrained schedule is heuristic".to_string()
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub dist: String,
    pub loss: String,
    pub aging: AgingTag,
    pub t_star: f64,
    pub pmp: Option<SignPattern>,
    pub pmp_certified: bool,
    pub phi_at_tstar: Option<f64>,
    pub pmp_error: Option<String>,
    pub n_max: usize,
    pub kkt_residual_max: Vec<f64>,
    pub chain_vs_solver_max_delta: Option<f64>,
    pub survival_convex: bool,
    pub constrained_kkt: String,
}

/// Aging class, switching-function certificate, stationarity residuals of
/// the fixed-count solutions and, for `αe^{-βx}` with exponential
/// durations, agreement with the closed-form chain.
pub fn verify(d: &DurationModel, g: &LossCurve, budget: &BudgetSpec, n_max: usize) -> Result<VerifyReport> {
    let aging = d.classify_aging(&d.default_aging_grid())?;
    let t_star = front_loading_switch(d, budget)?;
    let (pmp, pmp_certified, phi_at_tstar, pmp_error) = match AllocationPolicy::front_loading(budget.max_level, t_star)
        .and_then(|p| alloc::pmp_verify(&p, g, d, budget, None))
    {
        Ok(r) => (Some(r.sign_pattern), r.certified, Some(r.phi_at_switch), None),
        Err(e) => (None, false, None, Some(e.to_string())),
    };
    let mut kkt_residual_max = Vec::new();
    let mut chain_delta: Option<f64> = None;
    for n in 1..=n_max {
        let s = deploy::solve_fixed_n(d, g, n)?;
        kkt_residual_max.push(deploy::max_abs(&deploy::stationarity_residuals(&s, g, d)?));
        if let (LossCurve::ExpDecay { beta, .. }, Family::Exponential { rate }) = (g, d.family()) {
            let chain = deploy::chain_exponential(*beta, *rate, n)?;
            let delta = max_offset_delta(&chain, &s);
            chain_delta = Some(chain_delta.map_or(delta, |c| c.max(delta)));
        }
    }
    let survival_convex = d.survival_is_convex();
    Ok(VerifyReport {
        dist: d.to_string(),
        loss: g.to_string(),
        aging: aging.tag,
        t_star,
        pmp,
        pmp_certified,
        phi_at_tstar,
        pmp_error,
        n_max,
        kkt_residual_max,
        chain_vs_solver_max_delta: chain_delta,
        survival_convex,
        constrained_kkt: if survival_convex { "exact" } else { "heuristic" }.to_string(),
    })
}

pub fn max_offset_delta(a: &DeploymentSchedule, b: &DeploymentSchedule) -> f64 {
    if a.offsets().len() != b.offsets().len() {
        return f64::INFINITY;
    }
    a.offsets()
        .iter()
        .zip(b.offsets())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
