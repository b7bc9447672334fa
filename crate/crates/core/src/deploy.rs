//! Deployment schedules: client-side renewal-average loss, effective
//! deployment count, the fixed-count stationarity solver, the exponential
//! chain, the randomized rate-matching mixture and the periodic baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{DurationModel, Family, SURVIVAL_FLOOR, TRUNCATION_MASS};
use crate::error::{Error, Result};
use crate::loss::LossCurve;
use crate::quad;

/// Offsets `δ_0 = 0 < δ_1 < … < δ_N` relative to the concept start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DeploymentSchedule {
    offsets: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DeploymentSchedule {
    type Error = Error;

    fn try_from(offsets: Vec<f64>) -> Result<Self> {
        Self::new(offsets)
    }
}

impl From<DeploymentSchedule> for Vec<f64> {
    fn from(s: DeploymentSchedule) -> Vec<f64> {
        s.offsets
    }
}

impl DeploymentSchedule {
    pub fn new(offsets: Vec<f64>) -> Result<Self> {
        if offsets.first() != Some(&0.0) {
            return Err(Error::domain("schedule must start with the offset 0"));
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::domain("schedule offsets must be finite"));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("schedule offsets must be strictly increasing"));
        }
        Ok(DeploymentSchedule { offsets })
    }

    /// Only the initial deployment at the concept start.
    pub fn initial_only() -> Self {
        DeploymentSchedule { offsets: vec![0.0] }
    }

    /// Builds a schedule from the gaps `Δ_1, …, Δ_N`.
    pub fn from_gaps(gaps: &[f64]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(gaps.len() + 1);
        offsets.push(0.0);
        let mut t = 0.0;
        for &g in gaps {
            t += g;
            offsets.push(t);
        }
        Self::new(offsets)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Number of redeployments `N`, not counting `δ_0`.
    pub fn count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the model serving at concept age `t`.
    pub fn active_index(&self, t: f64) -> usize {
        self.offsets.partition_point(|&o| o <= t).saturating_sub(1)
    }

    /// Deployments with `δ_j < y`, excluding `δ_0`.
    pub fn deployments_before(&self, y: f64) -> usize {
        self.offsets.partition_point(|&o| o < y).saturating_sub(1)
    }

    /// Plain-text form: one offset per line, starting with 0.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for o in &self.offsets {
            out.push_str(&o.to_string());
            out.push('\n');
        }
        out
    }
}

impl FromStr for DeploymentSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut offsets = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = line
                .parse::<f64>()
                .map_err(|_| Error::parse(s, format!("line {}: `{line}` is not a number", i + 1)))?;
            offsets.push(v);
        }
        Self::new(offsets)
    }
}

impl fmt::Display for DeploymentSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `(1/E[Y]) Σ_j ḡ(δ_j) ∫_{δ_j}^{δ_{j+1}} F̄`, with `δ_{N+1} = ∞`.
pub fn client_time_average_loss(s: &DeploymentSchedule, g: &LossCurve, d: &DurationModel) -> Result<f64> {
    g.validate()?;
    let o = &s.offsets;
    let mut total = 0.0;
    for j in 0..o.len() {
        let next = o.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let mass = d.isf(o[j], next);
        if mass > 0.0 {
            total += g.value(o[j])? * mass;
        }
    }
    Ok(total / d.mean())
}

/// Expected redeployments per concept, `Σ_{j≥1} F̄(δ_j)`.
pub fn effective_count(s: &DeploymentSchedule, d: &DurationModel) -> f64 {
    s.offsets[1..].iter().map(|&t| d.sf(t)).sum()
}

/// Long-run deployment rate, the effective count over `E[Y]`.
pub fn effective_rate(s: &DeploymentSchedule, d: &DurationModel) -> f64 {
    effective_count(s, d) / d.mean()
}

fn check_solvable(d: &DurationModel, g: &LossCurve) -> Result<()> {
    g.validate()?;
    if !d.is_absolutely_continuous() {
        return Err(Error::NotAbsolutelyContinuous {
            family: "deterministic",
        });
    }
    if g.integrable_singularity() {
        return Err(Error::Unsupported(
            "deployment solver needs a loss curve finite at the origin".into(),
        ));
    }
    Ok(())
}

enum Shot {
    /// Backward recursion reached `δ_0 > 0`; the guess for `δ_N` is too late.
    Landed(Vec<f64>),
    /// Some offset would have to be negative; the guess is too early.
    Short,
    /// Survival underflow at the guess; treated as too late.
    Overflow,
}

impl Shot {
    fn too_late(&self) -> bool {
        !matches!(self, Shot::Short)
    }
}

/// Right-hand side of the stationarity condition at `δ_k`: the loss level
/// `ḡ(δ_{k-1})` must equal this.
fn stationarity_level(d: &DurationModel, g: &LossCurve, dk: f64, next: f64, nu: f64) -> Option<f64> {
    let sk = d.sf(dk);
    if sk <= SURVIVAL_FLOOR {
        return None;
    }
    let ratio = if next.is_infinite() {
        d.tail(dk) / sk
    } else {
        d.isf(dk, next) / sk
    };
    let hazard_term = if nu > 0.0 { nu * d.hz(dk) } else { 0.0 };
    Some(g.eval(dk) - g.slope(dk) * ratio + hazard_term)
}

fn shoot(d: &DurationModel, g: &LossCurve, n: usize, last: f64, nu: f64) -> Shot {
    let g0 = g.initial();
    let mut offsets = vec![0.0; n + 1];
    offsets[n] = last;
    for k in (1..=n).rev() {
        let next = offsets.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let Some(level) = stationarity_level(d, g, offsets[k], next, nu) else {
            return Shot::Overflow;
        };
        if !(level < g0) {
            return Shot::Short;
        }
        match g.inverse(level) {
            Ok(x) if x > 0.0 && x < offsets[k] => offsets[k - 1] = x,
            _ => return Shot::Short,
        }
    }
    Shot::Landed(offsets)
}

/// Smallest `δ_N` whose backward shot lands at `δ_0 >= 0`, and the landed
/// offsets with `δ_0` snapped to 0.
fn solve_shot(
    d: &DurationModel,
    g: &LossCurve,
    n: usize,
    nu: f64,
    lo: f64,
    hi_start: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let mut hi = hi_start;
    let cap = 1e6 * d.mean();
    let mut shot = shoot(d, g, n, hi, nu);
    while !shot.too_late() {
        hi *= 2.0;
        if hi > cap {
            return Ok(None);
        }
        shot = shoot(d, g, n, hi, nu);
    }
    let mut lo = lo;
    let mut landed = match shot {
        Shot::Landed(o) => Some(o),
        _ => None,
    };
    for _ in 0..quad::BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(d, g, n, mid, nu) {
            Shot::Short => lo = mid,
            Shot::Landed(o) => {
                hi = mid;
                landed = Some(o);
            }
            Shot::Overflow => hi = mid,
        }
    }
    Ok(landed.map(|mut o| {
        o[0] = 0.0;
        (hi, o)
    }))
}

/// Loss-minimizing schedule with exactly `n` redeployments and no rate
/// constraint, found by shooting on `δ_N` and recursing the stationarity
/// conditions backward to `δ_0`.
pub fn solve_fixed_n(d: &DurationModel, g: &LossCurve, n: usize) -> Result<DeploymentSchedule> {
    check_solvable(d, g)?;
    if n == 0 {
        return Ok(DeploymentSchedule::initial_only());
    }
    let (_, offsets) = solve_shot(d, g, n, 0.0, 0.0, d.mean())?.ok_or(Error::NoBracket("fixed-count shooting"))?;
    DeploymentSchedule::new(offsets)
}

/// Closed-form optimal gaps for `ḡ = αe^{-βx}` and exponential durations:
/// `Δ_N = ln(1 + β/λ)/β` and `Δ_k = ln(1 + (β/λ)(1 - e^{-λΔ_{k+1}}))/β`.
pub fn chain_exponential(beta: f64, lambda: f64, n: usize) -> Result<DeploymentSchedule> {
    if !(beta.is_finite() && beta > 0.0 && lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("chain rates must be positive"));
    }
    let mut gaps = vec![0.0; n];
    let r = beta / lambda;
    let mut next: Option<f64> = None;
    for k in (0..n).rev() {
        let gap = match next {
            None => r.ln_1p() / beta,
            Some(after) => (r * -(-lambda * after).exp_m1()).ln_1p() / beta,
        };
        gaps[k] = gap;
        next = Some(gap);
    }
    DeploymentSchedule::from_gaps(&gaps)
}

/// Residuals of the stationarity conditions `k = 1..N` with rate
/// multiplier `ν` (zero for the unconstrained problem), relative to `ḡ(0)`.
pub fn kkt_residuals(s: &DeploymentSchedule, g: &LossCurve, d: &DurationModel, nu: f64) -> Result<Vec<f64>> {
    check_solvable(d, g)?;
    if nu < 0.0 {
        return Err(Error::domain("rate multiplier must be non-negative"));
    }
    let o = &s.offsets;
    let scale = g.initial();
    (1..o.len())
        .map(|k| {
            let next = o.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let level = stationarity_level(d, g, o[k], next, nu).ok_or(Error::SurvivalUnderflow { t: o[k] })?;
            Ok((g.eval(o[k - 1]) - level) / scale)
        })
        .collect()
}

pub fn stationarity_residuals(s: &DeploymentSchedule, g: &LossCurve, d: &DurationModel) -> Result<Vec<f64>> {
    kkt_residuals(s, g, d, 0.0)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Fixed-count optimum with its count and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedNSolution {
    pub n: usize,
    pub schedule: DeploymentSchedule,
    pub count: f64,
    pub loss: f64,
}

pub fn fixed_n_solution(d: &DurationModel, g: &LossCurve, n: usize) -> Result<FixedNSolution> {
    let schedule = solve_fixed_n(d, g, n)?;
    Ok(FixedNSolution {
        n,
        count: effective_count(&schedule, d),
        loss: client_time_average_loss(&schedule, g, d)?,
        schedule,
    })
}

/// Largest count the ladder search will try before giving up.
pub const MAX_DEPLOYMENTS: usize = 400;

/// Per-concept coin between two fixed-count optima: `low` with probability
/// `γ`, `high` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSchedule {
    pub low: FixedNSolution,
    pub high: FixedNSolution,
    pub gamma: f64,
    pub target: f64,
}

impl RandomizedSchedule {
    pub fn n_low(&self) -> usize {
        self.low.n
    }

    pub fn mixture_count(&self) -> f64 {
        self.gamma * self.low.count + (1.0 - self.gamma) * self.high.count
    }

    pub fn mixture_loss(&self) -> f64 {
        self.gamma * self.low.loss + (1.0 - self.gamma) * self.high.loss
    }

    /// A degenerate mixture that always uses `schedule`.
    pub fn pure(schedule: FixedNSolution) -> Self {
        RandomizedSchedule {
            target: schedule.count,
            high: schedule.clone(),
            low: schedule,
            gamma: 1.0,
        }
    }
}

fn check_target(target: f64) -> Result<()> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::domain(format!(
            "deployment target must be positive, got {target}"
        )));
    }
    Ok(())
}

/// Mixes the two fixed-count optima that bracket the target count
/// `B₂ = r_D E[Y]`, matching it exactly in expectation.
pub fn randomize_to_count(d: &DurationModel, g: &LossCurve, target: f64) -> Result<RandomizedSchedule> {
    check_target(target)?;
    let mut low = fixed_n_solution(d, g, 0)?;
    for n in 1..=MAX_DEPLOYMENTS {
        let high = fixed_n_solution(d, g, n)?;
        if high.count <= low.count {
            return Err(Error::NoConvergence {
                what: "effective count ladder (not increasing)",
                iterations: n,
            });
        }
        if high.count > target {
            let gamma = ((high.count - target) / (high.count - low.count)).clamp(0.0, 1.0);
            return Ok(RandomizedSchedule {
                low,
                high,
                gamma,
                target,
            });
        }
        low = high;
    }
    Err(Error::NoConvergence {
        what: "effective count ladder",
        iterations: MAX_DEPLOYMENTS,
    })
}

pub fn randomize_to_rate(d: &DurationModel, g: &LossCurve, rate: f64) -> Result<RandomizedSchedule> {
    check_target(rate)?;
    randomize_to_count(d, g, rate * d.mean())
}

fn periodic_offsets(d: &DurationModel, period: f64) -> Vec<f64> {
    let mut offsets = vec![0.0];
    let mut j = 1.0;
    loop {
        let t = j * period;
        if d.sf(t) < TRUNCATION_MASS {
            break;
        }
        offsets.push(t);
        j += 1.0;
    }
    offsets
}

fn periodic_count(d: &DurationModel, period: f64) -> f64 {
    let mut sum = 0.0;
    let mut j = 1.0;
    loop {
        let s = d.sf(j * period);
        if s < TRUNCATION_MASS {
            return sum;
        }
        sum += s;
        j += 1.0;
    }
}

/// Evenly spaced schedule whose effective count equals `target`; offsets
/// stop once the survival drops below `1e-12`.
pub fn periodic_for_count(d: &DurationModel, target: f64) -> Result<DeploymentSchedule> {
    check_target(target)?;
    let mut hi = d.mean();
    while periodic_count(d, hi) > target {
        hi *= 2.0;
    }
    let mut lo = d.mean();
    while periodic_count(d, lo) < target {
        lo *= 0.5;
        if lo < 1e-9 * d.mean() {
            return Err(Error::NoBracket("periodic count"));
        }
    }
    let period = quad::bisect(|p| periodic_count(d, p) - target, lo, hi.max(lo), 0.0)?;
    DeploymentSchedule::new(periodic_offsets(d, period))
}

pub fn periodic_for_rate(d: &DurationModel, rate: f64) -> Result<DeploymentSchedule> {
    check_target(rate)?;
    periodic_for_count(d, rate * d.mean())
}

pub fn periodic(d: &DurationModel, period: f64) -> Result<DeploymentSchedule> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::domain("period must be positive"));
    }
    DeploymentSchedule::new(periodic_offsets(d, period))
}

/// A stationary point of the count-constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSolution {
    pub schedule: DeploymentSchedule,
    pub nu: f64,
    pub count: f64,
    pub loss: f64,
}

/// For a fixed last offset, the multiplier `ν >= 0` that makes the
/// backward recursion land on `δ_0 = 0`.
fn land_with_multiplier(d: &DurationModel, g: &LossCurve, n: usize, last: f64) -> Option<(f64, Vec<f64>)> {
    let mut landed = match shoot(d, g, n, last, 0.0) {
        Shot::Landed(o) => o,
        _ => return None,
    };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    loop {
        match shoot(d, g, n, last, hi) {
            Shot::Short => break,
            Shot::Landed(o) => {
                lo = hi;
                landed = o;
                hi *= 4.0;
            }
            Shot::Overflow => return None,
        }
        if hi > 1e12 {
            return None;
        }
    }
    for _ in 0..quad::BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        match shoot(d, g, n, last, mid) {
            Shot::Landed(o) => {
                lo = mid;
                landed = o;
            }
            _ => hi = mid,
        }
    }
    landed[0] = 0.0;
    Some((lo, landed))
}

/// Stationary schedules with `n` redeployments whose effective count equals
/// `target`. The last offset is scanned from the unconstrained optimum out
/// to the truncation horizon; every crossing of the target is refined by
/// bisection and the lowest-loss one is returned.
pub fn solve_count_constrained(
    d: &DurationModel,
    g: &LossCurve,
    n: usize,
    target: f64,
) -> Result<Option<ConstrainedSolution>> {
    check_solvable(d, g)?;
    check_target(target)?;
    if n == 0 {
        return Ok(None);
    }
    let free = solve_fixed_n(d, g, n)?;
    let start = *free.offsets.last().unwrap();
    let end = d.horizon();
    if !(end > start) {
        return Ok(None);
    }
    let count_at = |last: f64| -> Option<(f64, f64, Vec<f64>)> {
        let (nu, offsets) = land_with_multiplier(d, g, n, last)?;
        let s = DeploymentSchedule::new(offsets.clone()).ok()?;
        Some((effective_count(&s, d) - target, nu, offsets))
    };

    const SCAN: usize = 48;
    let mut samples: Vec<(f64, f64)> = vec![(start, effective_count(&free, d) - target)];
    let ratio = (end / start).ln() / SCAN as f64;
    for i in 1..=SCAN {
        let last = start * (ratio * i as f64).exp();
        if let Some((c, _, _)) = count_at(last) {
            samples.push((last, c));
        }
    }

    let mut best: Option<ConstrainedSolution> = None;
    for w in samples.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if fa == 0.0 || fa.signum() != fb.signum() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..quad::BISECTION_CAP {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match count_at(mid) {
                    Some((c, _, _)) if c.signum() == fa.signum() && c != 0.0 => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            let pick = if fa == 0.0 { a } else { hi };
            let found = if pick == start {
                Some((0.0, 0.0, free.offsets.clone()))
            } else {
                count_at(pick)
            };
            if let Some((gap, nu, offsets)) = found {
                if gap.abs() > 1e-9 * target.max(1.0) {
                    continue;
                }
                let schedule = DeploymentSchedule::new(offsets)?;
                let loss = client_time_average_loss(&schedule, g, d)?;
                if best.as_ref().map_or(true, |b| loss < b.loss) {
                    best = Some(ConstrainedSolution {
                        count: effective_count(&schedule, d),
                        schedule,
                        nu,
                        loss,
                    });
                }
            }
        }
    }
    Ok(best)
}

/// Best deterministic schedule found for a count budget, plus how it was
/// obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicChoice {
    pub schedule: DeploymentSchedule,
    pub loss: f64,
    pub count: f64,
    pub nu: f64,
    /// True when the stationarity conditions are sufficient for this
    /// duration family (convex survival); otherwise only a local candidate.
    pub exact: bool,
}

/// Lowest-loss deterministic schedule with effective count at most
/// `target`: the largest fixed-count optimum that fits, or a stationary
/// schedule of the constrained problem with a few more redeployments.
pub fn best_deterministic_for_count(d: &DurationModel, g: &LossCurve, target: f64) -> Result<DeterministicChoice> {
    let mix = randomize_to_count(d, g, target)?;
    let exact = d.survival_is_convex();
    let mut best = DeterministicChoice {
        count: mix.low.count,
        loss: mix.low.loss,
        schedule: mix.low.schedule.clone(),
        nu: 0.0,
        exact,
    };
    for n in mix.high.n..mix.high.n + 3 {
        if let Some(sol) = solve_count_constrained(d, g, n, target)? {
            if sol.loss < best.loss {
                best = DeterministicChoice {
                    schedule: sol.schedule,
                    loss: sol.loss,
                    count: sol.count,
                    nu: sol.nu,
                    exact,
                };
            }
        }
    }
    Ok(best)
}

/// Whether the rate-constrained stationarity conditions certify optimality
/// for this duration family.
pub fn constrained_kkt_exact(d: &DurationModel) -> bool {
    d.survival_is_convex()
}

/// Exponential-duration check used by callers that want the closed-form
/// chain instead of shooting.
pub fn exponential_rate(d: &DurationModel) -> Option<f64> {
    match d.family() {
        Family::Exponential { rate } => Some(*rate),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn exp1() -> DurationModel {
        DurationModel::exponential(1.0).unwrap()
    }

    fn g1() -> LossCurve {
        LossCurve::exp_decay(1.0, 1.0).unwrap()
    }

    #[test]
    fn schedule_validation_and_text() {
        assert!(DeploymentSchedule::new(vec![0.1, 1.0]).is_err());
        assert!(DeploymentSchedule::new(vec![0.0, 1.0, 1.0]).is_err());
        let s = DeploymentSchedule::new(vec![0.0, 0.25, 1.5]).unwrap();
        let back: DeploymentSchedule = s.to_text().parse().unwrap();
        assert_eq!(s, back);
        assert!("0\n2\n1\n".parse::<DeploymentSchedule>().is_err());
        assert!("0\nx\n".parse::<DeploymentSchedule>().is_err());
        assert_eq!(s.deployments_before(1.5), 1);
        assert_eq!(s.deployments_before(1.6), 2);
        assert_eq!(s.active_index(0.3), 1);
    }

    #[test]
    fn loss_examples() {
        let only = DeploymentSchedule::initial_only();
        assert_eq!(client_time_average_loss(&only, &g1(), &exp1()).unwrap(), 1.0);
        let p = periodic(&exp1(), LN_2).unwrap();
        assert!((client_time_average_loss(&p, &g1(), &exp1()).unwrap() - 2.0 / 3.0).abs() < 1e-11);
        let chain = DeploymentSchedule::new(vec![0.0, 1.5f64.ln(), 3f64.ln()]).unwrap();
        assert!((client_time_average_loss(&chain, &g1(), &exp1()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn count_examples() {
        assert_eq!(effective_count(&DeploymentSchedule::initial_only(), &exp1()), 0.0);
        let p = periodic(&exp1(), LN_2).unwrap();
        assert!((effective_count(&p, &exp1()) - 1.0).abs() < 1e-11);
        let chain = DeploymentSchedule::new(vec![0.0, 1.5f64.ln(), 3f64.ln()]).unwrap();
        assert!((effective_count(&chain, &exp1()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_n_examples() {
        let one = solve_fixed_n(&exp1(), &g1(), 1).unwrap();
        assert!((one.offsets()[1] - LN_2).abs() < 1e-12);
        let three = solve_fixed_n(&exp1(), &g1(), 3).unwrap();
        let expected = [(4.0f64 / 3.0).ln(), 1.5f64.ln(), LN_2];
        for (g, e) in three.gaps().iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        let erl = DurationModel::erlang(2, 2.0).unwrap();
        let g = LossCurve::exp_decay(1.0, 0.5).unwrap();
        let s = solve_fixed_n(&erl, &g, 2).unwrap();
        assert!(max_abs(&stationarity_residuals(&s, &g, &erl).unwrap()) < 1e-8);
        assert_eq!(s.count(), 2);
    }

    #[test]
    fn chain_examples() {
        let c = chain_exponential(1.0, 1.0, 1).unwrap();
        assert!((c.offsets()[1] - LN_2).abs() < 1e-15);
        let c = chain_exponential(2.0, 1.0, 1).unwrap();
        assert!((c.offsets()[1] - 0.5 * 3f64.ln()).abs() < 1e-15);
        let short = chain_exponential(0.5, 2.0, 4).unwrap().gaps();
        let long = chain_exponential(0.5, 2.0, 5).unwrap().gaps();
        for (a, b) in short.iter().zip(&long[1..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn randomized_examples() {
        let mix = randomize_to_count(&exp1(), &g1(), 0.75).unwrap();
        assert_eq!(mix.n_low(), 1);
        assert!((mix.low.count - 0.5).abs() < 1e-12);
        assert!((mix.high.count - 1.0).abs() < 1e-12);
        assert!((mix.gamma - 0.5).abs() < 1e-12);
        assert!((mix.mixture_loss() - 0.708_333_333_333_333_4).abs() < 1e-11);
        assert!((mix.mixture_count() - 0.75).abs() < 1e-12);

        let exact = randomize_to_count(&exp1(), &g1(), mix.high.count).unwrap();
        assert_eq!(exact.gamma, 1.0);
        assert_eq!(exact.n_low(), 2);

        let tiny = randomize_to_count(&exp1(), &g1(), 0.1).unwrap();
        assert_eq!(tiny.n_low(), 0);
        assert_eq!(tiny.low.schedule, DeploymentSchedule::initial_only());
    }

    #[test]
    fn periodic_examples() {
        let p = periodic_for_count(&exp1(), 1.0).unwrap();
        assert!((p.offsets()[1] - LN_2).abs() < 1e-12);
        let w = DurationModel::weibull_with_mean(2.0, 1.0).unwrap();
        let s = periodic_for_count(&w, 1.0).unwrap();
        assert!((effective_count(&s, &w) - 1.0).abs() < 1e-9);
        let dense = periodic_for_count(&w, 50.0).unwrap();
        assert!(dense.offsets()[1] < s.offsets()[1]);
    }

    #[test]
    fn dense_limit_matches_server_side() {
        let p = periodic(&exp1(), 1e-3).unwrap();
        let client = client_time_average_loss(&p, &g1(), &exp1()).unwrap();
        let unit = crate::alloc::AllocationPolicy::fixed(1.0).unwrap();
        let server = crate::alloc::time_average_loss(&unit, &g1(), &exp1()).unwrap().value();
        assert!((client - server).abs() < 1e-3);
        assert!(client >= server);
    }

    #[test]
    fn constrained_matches_fixed_n_at_its_count() {
        let free = fixed_n_solution(&exp1(), &g1(), 2).unwrap();
        let sol = solve_count_constrained(&exp1(), &g1(), 2, free.count).unwrap().unwrap();
        assert!((sol.loss - free.loss).abs() < 1e-9);
        assert!(sol.nu < 1e-6);
    }

    #[test]
    fn constrained_solution_satisfies_kkt() {
        let g = LossCurve::exp_decay(1.0, 7.5).unwrap();
        let d = exp1();
        let target = 1.3;
        let sol = solve_count_constrained(&d, &g, 2, target).unwrap().unwrap();
        assert!((sol.count - target).abs() < 1e-9);
        assert!(sol.nu > 0.0);
        assert!(max_abs(&kkt_residuals(&sol.schedule, &g, &d, sol.nu).unwrap()) < 1e-8);
        let best = best_deterministic_for_count(&d, &g, target).unwrap();
        let mix = randomize_to_count(&d, &g, target).unwrap();
        assert!(best.loss <= mix.low.loss);
        assert!(best.count <= target + 1e-9);
    }
}
