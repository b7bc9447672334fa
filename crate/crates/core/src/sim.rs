//! Renewal-reward Monte Carlo of the concept-drift loss process.
//!
//! Each cycle (concept) draws its duration from its own ChaCha8 stream,
//! indexed by the cycle number under one root seed, so results do not
//! depend on how cycles are scheduled across threads. Within a cycle the
//! loss integrals are exact; the only error is sampling error.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::AllocationPolicy;
use crate::deploy::{DeploymentSchedule, RandomizedSchedule};
use crate::dist::DurationModel;
use crate::error::{Error, Result};
use crate::loss::LossCurve;
use crate::par::{self, Execution};

/// Word position of the schedule coin inside a cycle's stream, far past
/// anything the duration sampler consumes.
const COIN_WORD: u128 = 1 << 32;

/// How deployments are scheduled within each concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentPlan {
    /// The client always runs the current server model.
    Continuous,
    Fixed(DeploymentSchedule),
    /// `low` with probability `gamma`, else `high`, drawn per concept.
    Randomized {
        low: DeploymentSchedule,
        high: DeploymentSchedule,
        gamma: f64,
    },
}

impl From<&RandomizedSchedule> for DeploymentPlan {
    fn from(r: &RandomizedSchedule) -> Self {
        DeploymentPlan::Randomized {
            low: r.low.schedule.clone(),
            high: r.high.schedule.clone(),
            gamma: r.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_concepts: usize,
    pub seed: u64,
    pub duration: DurationModel,
    pub loss: LossCurve,
    pub policy: AllocationPolicy,
    /// Resource price `σ_e`.
    pub price: f64,
    pub deployment: DeploymentPlan,
    #[serde(default)]
    pub execution: Execution,
    /// Keep per-cycle records in the outcome.
    #[serde(default = "default_true")]
    pub keep_records: bool,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(
        n_concepts: usize,
        seed: u64,
        duration: DurationModel,
        loss: LossCurve,
        policy: AllocationPolicy,
    ) -> Self {
        SimConfig {
            n_concepts,
            seed,
            duration,
            loss,
            policy,
            price: 1.0,
            deployment: DeploymentPlan::Continuous,
            execution: Execution::default(),
            keep_records: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_concepts == 0 {
            return Err(Error::domain("n_concepts must be at least 1"));
        }
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(Error::param("price must be positive"));
        }
        self.loss.validate()?;
        if let DeploymentPlan::Randomized { gamma, .. } = self.deployment {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::domain("mixture probability must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub duration: f64,
    pub server_cycle_loss: f64,
    pub client_cycle_loss: f64,
    pub cost: f64,
    pub deployments: usize,
    /// Whether the randomized plan picked its low schedule.
    #[serde(skip)]
    pub picked_low: bool,
}

/// Ratio estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean - reference|` in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.mean - reference).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n_concepts: usize,
    pub seed: u64,
    pub total_time: f64,
    pub server_loss: Estimate,
    pub client_loss: Estimate,
    pub cost_rate: Estimate,
    pub deployment_rate: Estimate,
    /// Plain average of redeployments per concept.
    pub deployments_per_concept: Estimate,
    pub total_deployments: u64,
    /// Fraction of concepts that used the low schedule of a randomized plan.
    pub low_fraction: f64,
    /// Some cycle had an infinite loss integral.
    pub divergent: bool,
    #[serde(skip)]
    pub records: Vec<CycleRecord>,
}

impl SimOutcome {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("outcome serializes")
    }

    /// Per-cycle CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)
                .map_err(|e| Error::Unsupported(format!("csv write failed: {e}")))?;
        }
        if self.records.is_empty() {
            w.write_record([
                "cycle",
                "duration",
                "server_cycle_loss",
                "client_cycle_loss",
                "cost",
                "deployments",
            ])
            .map_err(|e| Error::Unsupported(format!("csv write failed: {e}")))?;
        }
        w.flush()
            .map_err(|e| Error::Unsupported(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// The rng for one cycle: root seed, stream = cycle index.
pub fn cycle_rng(seed: u64, cycle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cycle as u64);
    rng
}

/// `∫_0^y ḡ(x(t)) dt` along the policy.
fn server_integral(policy: &AllocationPolicy, g: &LossCurve, y: f64) -> f64 {
    let mut total = 0.0;
    for seg in policy.segments() {
        if seg.start >= y {
            break;
        }
        let end = seg.end.min(y);
        total += if seg.level == 0.0 {
            g.eval(seg.progress) * (end - seg.start)
        } else {
            g.progress_integral(seg.progress, seg.progress_at(end)) / seg.level
        };
    }
    total
}

fn cost_integral(policy: &AllocationPolicy, y: f64) -> f64 {
    policy
        .segments()
        .iter()
        .filter(|s| s.start < y)
        .map(|s| s.level * (s.end.min(y) - s.start))
        .sum()
}

/// Staircase integral: model deployed at `δ_j` serves until the next
/// deployment or the end of the concept.
fn client_integral(policy: &AllocationPolicy, g: &LossCurve, s: &DeploymentSchedule, y: f64) -> (f64, usize) {
    let o = s.offsets();
    let mut total = 0.0;
    for j in 0..o.len() {
        if o[j] >= y {
            break;
        }
        let end = o.get(j + 1).copied().unwrap_or(f64::INFINITY).min(y);
        total += g.eval(policy.progress_at(o[j])) * (end - o[j]);
    }
    (total, s.deployments_before(y))
}

fn run_cycle(cfg: &SimConfig, cycle: usize) -> CycleRecord {
    let mut rng = cycle_rng(cfg.seed, cycle);
    let y = cfg.duration.sample(&mut rng);
    let server = server_integral(&cfg.policy, &cfg.loss, y);
    let cost = cfg.price * cost_integral(&cfg.policy, y);
    let (client, deployments, picked_low) = match &cfg.deployment {
        DeploymentPlan::Continuous => (server, 0, false),
        DeploymentPlan::Fixed(s) => {
            let (c, n) = client_integral(&cfg.policy, &cfg.loss, s, y);
            (c, n, false)
        }
        DeploymentPlan::Randomized { low, high, gamma } => {
            let mut coin = cycle_rng(cfg.seed, cycle);
            coin.set_word_pos(COIN_WORD);
            let u: f64 = coin.random();
            let picked_low = u < *gamma;
            let s = if picked_low { low } else { high };
            let (c, n) = client_integral(&cfg.policy, &cfg.loss, s, y);
            (c, n, picked_low)
        }
    };
    CycleRecord {
        cycle,
        duration: y,
        server_cycle_loss: server,
        client_cycle_loss: client,
        cost,
        deployments,
        picked_low,
    }
}

/// Ratio estimator `Σa/Σy` with a delete-one jackknife standard error.
fn ratio_estimate(a: &[f64], y: &[f64]) -> Estimate {
    let n = a.len();
    let sa: f64 = a.iter().sum();
    let sy: f64 = y.iter().sum();
    let mean = sa / sy;
    if n < 2 || !mean.is_finite() {
        return Estimate { mean, se: f64::NAN };
    }
    let loo: Vec<f64> = a.iter().zip(y).map(|(ai, yi)| (sa - ai) / (sy - yi)).collect();
    let bar = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|r| (r - bar) * (r - bar)).sum();
    Estimate {
        mean,
        se: ((n as f64 - 1.0) / n as f64 * ss).sqrt(),
    }
}

fn mean_estimate(a: &[f64]) -> Estimate {
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Renewal-reward values the simulation should converge to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub server_loss: f64,
    pub client_loss: f64,
    pub cost_rate: f64,
    pub deployments_per_concept: f64,
    pub deployment_rate: f64,
}

/// `(1/E[Y]) Σ_j ḡ(x(δ_j)) ∫_{δ_j}^{δ_{j+1}} F̄` under an arbitrary policy.
pub fn client_loss_under_policy(
    s: &DeploymentSchedule,
    policy: &AllocationPolicy,
    g: &LossCurve,
    d: &DurationModel,
) -> f64 {
    let o = s.offsets();
    let mut total = 0.0;
    for j in 0..o.len() {
        let next = o.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let mass = d.isf(o[j], next);
        if mass > 0.0 {
            total += g.eval(policy.progress_at(o[j])) * mass;
        }
    }
    total / d.mean()
}

pub fn analytic(cfg: &SimConfig) -> Result<Analytic> {
    cfg.validate()?;
    let d = &cfg.duration;
    let server_loss = crate::alloc::time_average_loss(&cfg.policy, &cfg.loss, d)?.value();
    let one = |s: &DeploymentSchedule| {
        (
            client_loss_under_policy(s, &cfg.policy, &cfg.loss, d),
            crate::deploy::effective_count(s, d),
        )
    };
    let (client_loss, count) = match &cfg.deployment {
        DeploymentPlan::Continuous => (server_loss, 0.0),
        DeploymentPlan::Fixed(s) => one(s),
        DeploymentPlan::Randomized { low, high, gamma } => {
            let (la, ca) = one(low);
            let (lb, cb) = one(high);
            (gamma * la + (1.0 - gamma) * lb, gamma * ca + (1.0 - gamma) * cb)
        }
    };
    Ok(Analytic {
        server_loss,
        client_loss,
        cost_rate: crate::alloc::cost_rate(&cfg.policy, d, cfg.price),
        deployments_per_concept: count,
        deployment_rate: count / d.mean(),
    })
}

/// Simulates `n_concepts` renewal cycles.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let records = par::map_range(cfg.n_concepts, cfg.execution, |i| run_cycle(cfg, i));
    let y: Vec<f64> = records.iter().map(|r| r.duration).collect();
    let server: Vec<f64> = records.iter().map(|r| r.server_cycle_loss).collect();
    let client: Vec<f64> = records.iter().map(|r| r.client_cycle_loss).collect();
    let cost: Vec<f64> = records.iter().map(|r| r.cost).collect();
    let deps: Vec<f64> = records.iter().map(|r| r.deployments as f64).collect();
    let divergent = server.iter().chain(&client).any(|v| !v.is_finite());
    let low = records.iter().filter(|r| r.picked_low).count();
    Ok(SimOutcome {
        n_concepts: cfg.n_concepts,
        seed: cfg.seed,
        total_time: y.iter().sum(),
        server_loss: ratio_estimate(&server, &y),
        client_loss: ratio_estimate(&client, &y),
        cost_rate: ratio_estimate(&cost, &y),
        deployment_rate: ratio_estimate(&deps, &y),
        deployments_per_concept: mean_estimate(&deps),
        total_deployments: records.iter().map(|r| r.deployments as u64).sum(),
        low_fraction: low as f64 / cfg.n_concepts as f64,
        divergent,
        records: if cfg.keep_records { records } else { Vec::new() },
    })
}

/// Simulates with a per-concept coin between the two schedules of `mix`.
pub fn simulate_randomized(cfg: &SimConfig, mix: &RandomizedSchedule) -> Result<SimOutcome> {
    let mut cfg = cfg.clone();
    cfg.deployment = DeploymentPlan::from(mix);
    simulate(&cfg)
}
