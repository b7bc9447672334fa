//! `driftopt` command-line runner.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use driftopt::alloc::{back_loading_switch, delayed_block, front_loading_switch};
use driftopt::deploy;
use driftopt::experiments;
use driftopt::sim::{self, DeploymentPlan};
use driftopt::{AllocationPolicy, BudgetSpec, DeploymentSchedule, DurationModel, Execution, LossCurve, SimConfig};

use config::Settings;

#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: "config".into(),
            message: message.into(),
        }
    }

    fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError {
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<driftopt::Error> for CliError {
    fn from(e: driftopt::Error) -> Self {
        CliError {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "driftopt",
    version,
    about = "Retraining and redeployment schedules under concept drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Front-loading against the fixed allocation over a budget grid.
    AllocSweep(Opts),
    /// Delayed-block loss over a grid of delays.
    DelaySweep(Opts),
    /// Periodic, optimal and randomized deployment over a rate grid.
    DeployCompare(Opts),
    /// Monte Carlo of a policy and deployment plan.
    Simulate(Opts),
    /// Aging class, switching-function and stationarity checks.
    Verify(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Duration model, e.g. `exp(rate=1)`; repeatable for delay-sweep.
    #[arg(long)]
    dist: Vec<String>,
    /// Loss curve, e.g. `expdecay(alpha=1,beta=1)`.
    #[arg(long)]
    loss: Option<String>,
    /// Budget, or a comma list for alloc-sweep.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long = "sigma-e")]
    sigma_e: Option<String>,
    #[arg(long = "max-rate")]
    max_rate: Option<String>,
    /// Comma list of deployment rates.
    #[arg(long = "rate-grid")]
    rate_grid: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    #[arg(long = "n-concepts")]
    n_concepts: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// Comma list of delays for delay-sweep.
    #[arg(long)]
    delays: Option<String>,
    /// `front-loading`, `back-loading`, `fixed-budget`, `delayed(z=..)` or a policy literal.
    #[arg(long)]
    policy: Option<String>,
    /// Deployment offsets, one per line.
    #[arg(long)]
    schedule: Option<String>,
    /// Randomized deployment at this rate.
    #[arg(long = "deploy-rate")]
    deploy_rate: Option<String>,
    /// Per-cycle records for simulate.
    #[arg(long = "cycles-csv")]
    cycles_csv: Option<String>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Opts {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(p) => Settings::parse(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
            None => Settings::default(),
        };
        s.set_flag("dist", self.dist.clone());
        let single = [
            ("loss", &self.loss),
            ("budget", &self.budget),
            ("sigma-e", &self.sigma_e),
            ("max-rate", &self.max_rate),
            ("rate-grid", &self.rate_grid),
            ("n-max", &self.n_max),
            ("n-concepts", &self.n_concepts),
            ("seed", &self.seed),
            ("out", &self.out),
            ("delays", &self.delays),
            ("policy", &self.policy),
            ("schedule", &self.schedule),
            ("deploy-rate", &self.deploy_rate),
            ("cycles-csv", &self.cycles_csv),
        ];
        for (key, v) in single {
            if let Some(v) = v {
                s.set_flag(key, vec![v.clone()]);
            }
        }
        Ok(s)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

struct Ctx {
    s: Settings,
    exec: Execution,
}

impl Ctx {
    fn dists(&self, default: &[&str]) -> Result<Vec<DurationModel>, CliError> {
        let given = self.s.all("dist");
        if given.is_empty() {
            return Ok(default
                .iter()
                .map(|t| t.parse().expect("built-in default parses"))
                .collect());
        }
        given
            .into_iter()
            .map(|(text, origin)| {
                text.parse::<DurationModel>()
                    .map_err(|e| CliError::config(format!("{origin}: `dist` = `{text}`: {e}")))
            })
            .collect()
    }

    fn dist(&self) -> Result<DurationModel, CliError> {
        let mut all = self.dists(&["exp(rate=1)"])?;
        if all.len() > 1 {
            return Err(CliError::config("this command takes a single --dist"));
        }
        Ok(all.remove(0))
    }

    fn loss(&self) -> Result<LossCurve, CliError> {
        Ok(self
            .s
            .get::<LossCurve>("loss")?
            .unwrap_or(LossCurve::exp_decay(1.0, 1.0)?))
    }

    fn price(&self) -> Result<f64, CliError> {
        self.s.get_or("sigma-e", 1.0)
    }

    fn max_level(&self) -> Result<f64, CliError> {
        self.s.get_or("max-rate", 20.0)
    }

    fn budget(&self, default: f64) -> Result<BudgetSpec, CliError> {
        let b = self.s.get_or("budget", default)?;
        Ok(BudgetSpec::new(b, self.price()?, self.max_level()?)?)
    }

    fn out(&self) -> Result<Box<dyn Write>, CliError> {
        open_out(self.s.raw("out").map(|(p, _)| p.as_str()))
    }
}

fn open_out(path: Option<&str>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None | Some("-") => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let path = PathBuf::from(p);
            let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
    }
}

fn write_csv<T: Serialize>(out: Box<dyn Write>, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::config(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| CliError::config(format!("write failed: {e}")))?;
    Ok(())
}

fn write_json(mut out: Box<dyn Write>, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::config(format!("write failed: {e}")))
}

fn alloc_sweep(ctx: &Ctx) -> Result<(), CliError> {
    let d = ctx.dist()?;
    let g = ctx.loss()?;
    let (price, m) = (ctx.price()?, ctx.max_level()?);
    let budgets = ctx
        .s
        .grid("budget")?
        .unwrap_or_else(|| experiments::default_budget_grid(price, m));
    let sweep = experiments::alloc_sweep(&d, &g, price, m, &budgets, ctx.exec)?;
    if let Some(w) = &sweep.warning {
        eprintln!("warning: {w}");
    }
    write_csv(ctx.out()?, &sweep.rows)
}

fn delay_sweep(ctx: &Ctx) -> Result<(), CliError> {
    let dists = ctx.dists(&["weibull(k=2,mean=1)", "weibull(k=0.5,mean=1)", "exp(rate=1)"])?;
    let g = ctx.loss()?;
    let budget = ctx.budget(0.1)?;
    let delays = ctx.s.grid("delays")?.unwrap_or_else(experiments::default_delay_grid);
    let rows = experiments::delay_sweep(&dists, &g, &budget, &delays, ctx.exec)?;
    write_csv(ctx.out()?, &rows)
}

#[derive(Serialize)]
struct DeployCsvRow {
    #[serde(rename = "r_D")]
    r_d: f64,
    loss_periodic: f64,
    loss_optimal: f64,
    loss_randomized: f64,
    gamma: f64,
    #[serde(rename = "N_low")]
    n_low: usize,
}

fn deploy_compare(ctx: &Ctx) -> Result<(), CliError> {
    let d = ctx.dist()?;
    let g = ctx.loss()?;
    let rates = match ctx.s.grid("rate-grid")? {
        Some(r) => r,
        None => experiments::fixed_n_rate_grid(&d, &g, ctx.s.get_or("n-max", 10usize)?)?,
    };
    let cmp = experiments::deploy_compare(&d, &g, &rates, ctx.exec)?;
    if let Some(note) = &cmp.note {
        eprintln!("warning: {note}");
    }
    let rows: Vec<DeployCsvRow> = cmp
        .rows
        .iter()
        .map(|r| DeployCsvRow {
            r_d: r.r_d,
            loss_periodic: r.loss_periodic,
            loss_optimal: r.loss_optimal,
            loss_randomized: r.loss_randomized,
            gamma: r.gamma,
            n_low: r.n_low,
        })
        .collect();
    write_csv(ctx.out()?, &rows)
}

fn parse_policy(text: &str, d: &DurationModel, budget: &BudgetSpec) -> Result<AllocationPolicy, CliError> {
    let t = text.trim();
    Ok(match t {
        "front-loading" => AllocationPolicy::front_loading(budget.max_level, front_loading_switch(d, budget)?)?,
        "back-loading" => {
            let sw = back_loading_switch(d, budget)?;
            if sw.never_allocates {
                AllocationPolicy::zero()
            } else {
                AllocationPolicy::back_loading(budget.max_level, sw.time)?
            }
        }
        "fixed-budget" => AllocationPolicy::fixed_for_budget(budget)?,
        _ if t.starts_with("delayed(") && t.ends_with(')') => {
            let inner = &t["delayed(".len()..t.len() - 1];
            let z = inner
                .trim()
                .strip_prefix("z=")
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::config(format!("policy `{t}`: expected delayed(z=<delay>)")))?;
            delayed_block(d, budget, z)?.policy
        }
        _ => t.parse::<AllocationPolicy>()?,
    })
}

fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    let d = ctx.dist()?;
    let g = ctx.loss()?;
    let half = ctx.price()? * ctx.max_level()? / 2.0;
    let budget = ctx.budget(half)?;
    let policy = parse_policy(&ctx.s.get_or("policy", "front-loading".to_string())?, &d, &budget)?;
    let deployment = match (ctx.s.raw("schedule"), ctx.s.get::<f64>("deploy-rate")?) {
        (Some(_), Some(_)) => return Err(CliError::config("give either --schedule or --deploy-rate, not both")),
        (Some((p, _)), None) => {
            let path = PathBuf::from(p);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            DeploymentPlan::Fixed(text.parse::<DeploymentSchedule>()?)
        }
        (None, Some(rate)) => DeploymentPlan::from(&deploy::randomize_to_rate(&d, &g, rate)?),
        (None, None) => DeploymentPlan::Continuous,
    };
    let mut cfg = SimConfig::new(
        ctx.s.get_or("n-concepts", 10_000usize)?,
        ctx.s.get_or("seed", 0u64)?,
        d,
        g,
        policy,
    );
    cfg.price = budget.price;
    cfg.deployment = deployment;
    cfg.execution = ctx.exec;
    let csv_path = ctx.s.raw("cycles-csv").map(|(p, _)| p.clone());
    cfg.keep_records = csv_path.is_some();
    let analytic = sim::analytic(&cfg)?;
    let outcome = sim::simulate(&cfg)?;
    if let Some(p) = csv_path {
        outcome.write_csv(open_out(Some(&p))?)?;
    }
    let summary = serde_json::json!({
        "dist": cfg.duration.to_string(),
        "loss": cfg.loss.to_string(),
        "policy": cfg.policy.to_string(),
        "simulated": outcome.summary_json(),
        "analytic": analytic,
    });
    write_json(ctx.out()?, &summary)
}

fn verify(ctx: &Ctx) -> Result<(), CliError> {
    let d = ctx.dist()?;
    let g = ctx.loss()?;
    let half = ctx.price()? * ctx.max_level()? / 2.0;
    let budget = ctx.budget(half)?;
    let report = experiments::verify(&d, &g, &budget, ctx.s.get_or("n-max", 4usize)?)?;
    write_json(ctx.out()?, &serde_json::to_value(&report).expect("report serializes"))
}

type Runner = fn(&Ctx) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (opts, f): (&Opts, Runner) = match &cli.command {
        Command::AllocSweep(o) => (o, alloc_sweep),
        Command::DelaySweep(o) => (o, delay_sweep),
        Command::DeployCompare(o) => (o, deploy_compare),
        Command::Simulate(o) => (o, simulate),
        Command::Verify(o) => (o, verify),
    };
    let ctx = Ctx {
        s: opts.settings()?,
        exec: opts.execution(),
    };
    f(&ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind, "message": e.message });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
