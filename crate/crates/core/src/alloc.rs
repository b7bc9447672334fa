//! Training-resource allocation policies: construction, renewal-average
//! loss and cost, and a numerical check of the maximum-principle switching
//! conditions.

use serde::{Deserialize, Serialize};

use crate::dist::{geometric_grid, DurationModel, Family};
use crate::error::{Error, Result};
use crate::loss::LossCurve;
use crate::quad;
use crate::textform::Call;

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;

/// Cost-rate budget `B`, resource price `σ_e` and resource cap `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub budget: f64,
    pub price: f64,
    pub max_level: f64,
}

impl BudgetSpec {
    pub fn new(budget: f64, price: f64, max_level: f64) -> Result<Self> {
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::domain(format!(
                "budget must be a non-negative finite number, got {budget}"
            )));
        }
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::param(format!("price must be positive, got {price}")));
        }
        if !(max_level.is_finite() && max_level > 0.0) {
            return Err(Error::param(format!(
                "max resource level must be positive, got {max_level}"
            )));
        }
        Ok(BudgetSpec {
            budget,
            price,
            max_level,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.budget, self.price, self.max_level).map(|_| ())
    }

    /// The budget binds when running at full level forever would exceed it.
    pub fn binding(&self) -> bool {
        self.budget < self.max_level * self.price
    }

    /// Resource-time per concept the budget pays for, `B·E[Y]/σ_e`.
    pub fn normalized(&self, d: &DurationModel) -> f64 {
        self.budget * d.mean() / self.price
    }

    /// Survival mass the full-level block must cover, `E[Y]·B/(M σ_e)`.
    pub fn block_mass(&self, d: &DurationModel) -> f64 {
        d.mean() * self.budget / (self.max_level * self.price)
    }
}

/// Piecewise-constant resource level `e(t)`: `levels[i]` applies on
/// `[breakpoints[i], breakpoints[i+1])` and the last level on
/// `[breakpoints[n], ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

/// One constant-level piece of a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub level: f64,
    /// Training progress at `start`.
    pub progress: f64,
}

impl Segment {
    pub fn progress_at(&self, t: f64) -> f64 {
        self.progress + self.level * (t - self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    FrontLoading,
    BackLoading,
}

impl AllocationPolicy {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != levels.len() {
            return Err(Error::domain("policy needs one level per breakpoint"));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::domain("first breakpoint must be 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::domain("breakpoints must be finite and strictly increasing"));
        }
        if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::domain("levels must be finite and non-negative"));
        }
        Ok(Self::merged(breakpoints, levels))
    }

    /// Drops breakpoints that do not change the level.
    fn merged(breakpoints: Vec<f64>, levels: Vec<f64>) -> Self {
        let mut b = vec![breakpoints[0]];
        let mut l = vec![levels[0]];
        for (&t, &e) in breakpoints.iter().zip(&levels).skip(1) {
            if e != *l.last().unwrap() {
                b.push(t);
                l.push(e);
            }
        }
        AllocationPolicy {
            breakpoints: b,
            levels: l,
        }
    }

    pub fn fixed(level: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![level])
    }

    pub fn zero() -> Self {
        AllocationPolicy {
            breakpoints: vec![0.0],
            levels: vec![0.0],
        }
    }

    /// The baseline `e(t) = B/σ_e`.
    pub fn fixed_for_budget(budget: &BudgetSpec) -> Result<Self> {
        Self::fixed(budget.budget / budget.price)
    }

    /// Level `m` on `[0, t*)`, then nothing.
    pub fn front_loading(m: f64, switch: f64) -> Result<Self> {
        if switch.is_nan() || switch < 0.0 {
            return Err(Error::domain("switch time must be non-negative"));
        }
        if switch == 0.0 {
            return Ok(Self::zero());
        }
        if switch.is_infinite() {
            return Self::fixed(m);
        }
        Self::new(vec![0.0, switch], vec![m, 0.0])
    }

    /// Nothing on `[0, t*)`, then level `m`.
    pub fn back_loading(m: f64, switch: f64) -> Result<Self> {
        if switch.is_nan() || switch < 0.0 {
            return Err(Error::domain("switch time must be non-negative"));
        }
        if switch == 0.0 {
            return Self::fixed(m);
        }
        if switch.is_infinite() {
            return Ok(Self::zero());
        }
        Self::new(vec![0.0, switch], vec![0.0, m])
    }

    /// Level `m` on `[start, end)`, zero elsewhere; `end` may be infinite.
    pub fn block(m: f64, start: f64, end: f64) -> Result<Self> {
        if start.is_nan() || start < 0.0 || !(end > start) {
            return Err(Error::domain(format!("invalid block [{start}, {end})")));
        }
        match (start == 0.0, end.is_infinite()) {
            (true, _) => Self::front_loading(m, end),
            (false, true) => Self::back_loading(m, start),
            (false, false) => Self::new(vec![0.0, start, end], vec![0.0, m, 0.0]),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn max_level(&self) -> f64 {
        self.levels.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|&l| l == 0.0)
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.levels.len());
        let mut x = 0.0;
        for i in 0..self.levels.len() {
            let start = self.breakpoints[i];
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
            out.push(Segment {
                start,
                end,
                level: self.levels[i],
                progress: x,
            });
            if end.is_finite() {
                x += self.levels[i] * (end - start);
            }
        }
        out
    }

    fn index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn level_at(&self, t: f64) -> f64 {
        self.levels[self.index(t)]
    }

    /// Cumulative progress `x(t) = ∫_0^t e`.
    pub fn progress_at(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let segs = self.segments();
        segs[self.index(t)].progress_at(t)
    }

    /// First time the progress reaches `x`, or `∞` if it never does.
    pub fn time_to_reach(&self, x: f64) -> f64 {
        for seg in self.segments() {
            if x <= seg.progress {
                return seg.start;
            }
            if seg.level > 0.0 {
                let t = seg.start + (x - seg.progress) / seg.level;
                if t < seg.end {
                    return t;
                }
            }
        }
        f64::INFINITY
    }

    /// Pointwise `λ e_1 + (1 - λ) e_2`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::domain("mixing weight must lie in [0, 1]"));
        }
        let mut cuts: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let levels = cuts
            .iter()
            .map(|&t| lambda * self.level_at(t) + (1.0 - lambda) * other.level_at(t))
            .collect();
        Self::new(cuts, levels)
    }

    /// Recognizes single-switch bang-bang policies, returning the kind, the
    /// switch time and the active level.
    pub fn single_switch(&self) -> Option<(SwitchKind, f64, f64)> {
        match (self.levels.as_slice(), self.breakpoints.as_slice()) {
            ([m, z], [_, t]) if *m > 0.0 && *z == 0.0 => Some((SwitchKind::FrontLoading, *t, *m)),
            ([z, m], [_, t]) if *m > 0.0 && *z == 0.0 => Some((SwitchKind::BackLoading, *t, *m)),
            _ => None,
        }
    }
}

impl std::str::FromStr for AllocationPolicy {
    type Err = Error;

    /// `zero()`, `fixed(e=1)`, `front(m=20,t=0.69)`, `back(m=20,t=0.69)`,
    /// `block(m=20,z=0.5,t=0.68)` or `steps(t=0:1,e=2:0)`.
    fn from_str(s: &str) -> Result<Self> {
        let call = Call::parse(s)?;
        match call.name.as_str() {
            "zero" => {
                call.only(&[])?;
                Ok(Self::zero())
            }
            "fixed" => {
                call.only(&["e"])?;
                Self::fixed(call.num("e")?)
            }
            "front" => {
                call.only(&["m", "t"])?;
                Self::front_loading(call.num("m")?, call.num("t")?)
            }
            "back" => {
                call.only(&["m", "t"])?;
                Self::back_loading(call.num("m")?, call.num("t")?)
            }
            "block" => {
                call.only(&["m", "z", "t"])?;
                Self::block(call.num("m")?, call.num("z")?, call.num("t")?)
            }
            "steps" => {
                call.only(&["t", "e"])?;
                Self::new(call.list("t")?, call.list("e")?)
            }
            other => Err(call.error(format!("unknown policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for AllocationPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "steps(t={},e={})",
            crate::textform::join(&self.breakpoints),
            crate::textform::join(&self.levels)
        )
    }
}

/// Progress over which `ḡ` changes appreciably from `x`.
fn loss_scale(g: &LossCurve, x: f64) -> f64 {
    match g {
        LossCurve::ExpDecay { beta, .. } => 1.0 / beta,
        LossCurve::ShiftedPower { .. } => 1.0 + x,
        LossCurve::PurePower { .. } => x.max(1e-6),
        LossCurve::Linear { beta, g0 } => (g0 / beta - x).max(1e-6),
    }
}

fn survival_breaks(d: &DurationModel) -> Vec<f64> {
    match d.family() {
        Family::Deterministic { value } => vec![*value],
        _ => Vec::new(),
    }
}

/// Solves `∫_0^{t*} F̄ = E[Y] B/(M σ_e)`. Infinite when the budget does not
/// bind, zero when it is zero.
pub fn front_loading_switch(d: &DurationModel, budget: &BudgetSpec) -> Result<f64> {
    budget.validate()?;
    if !budget.binding() {
        return Ok(f64::INFINITY);
    }
    if budget.budget == 0.0 {
        return Ok(0.0);
    }
    let target = budget.block_mass(d);
    if let Family::Exponential { rate } = d.family() {
        return Ok(-(-target * rate).ln_1p() / rate);
    }
    let mut hi = d.horizon();
    while d.head(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoBracket("front-loading switch"));
        }
    }
    quad::bisect(|t| d.head(t) - target, 0.0, hi, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackLoadingSwitch {
    pub time: f64,
    /// Set for a zero budget: the policy idles forever.
    pub never_allocates: bool,
}

/// Solves `∫_{t*}^∞ F̄ = E[Y] B/(M σ_e)`.
pub fn back_loading_switch(d: &DurationModel, budget: &BudgetSpec) -> Result<BackLoadingSwitch> {
    budget.validate()?;
    if !budget.binding() {
        return Ok(BackLoadingSwitch {
            time: 0.0,
            never_allocates: false,
        });
    }
    if budget.budget == 0.0 {
        return Ok(BackLoadingSwitch {
            time: f64::INFINITY,
            never_allocates: true,
        });
    }
    let target = budget.block_mass(d);
    let time = if let Family::Exponential { rate } = d.family() {
        -(target * rate).ln() / rate
    } else {
        let mut hi = d.horizon();
        while d.tail(hi) > target {
            hi *= 2.0;
        }
        quad::bisect(|t| d.tail(t) - target, 0.0, hi, 0.0)?
    };
    Ok(BackLoadingSwitch {
        time,
        never_allocates: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedBlock {
    pub policy: AllocationPolicy,
    pub start: f64,
    /// `T(z)`; infinite when the block never closes.
    pub end: f64,
    /// The remaining survival mass after `z` cannot absorb the budget.
    pub slack: bool,
}

/// Full-level block starting at delay `z` and lasting until the budget is
/// spent.
pub fn delayed_block(d: &DurationModel, budget: &BudgetSpec, z: f64) -> Result<DelayedBlock> {
    budget.validate()?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::domain(format!(
            "delay must be a non-negative finite number, got {z}"
        )));
    }
    let m = budget.max_level;
    if budget.budget == 0.0 {
        return Ok(DelayedBlock {
            policy: AllocationPolicy::zero(),
            start: z,
            end: z,
            slack: false,
        });
    }
    let target = budget.block_mass(d);
    let remaining = d.tail(z);
    if !budget.binding() || remaining <= target {
        return Ok(DelayedBlock {
            policy: if z == 0.0 {
                AllocationPolicy::fixed(m)?
            } else {
                AllocationPolicy::back_loading(m, z)?
            },
            start: z,
            end: f64::INFINITY,
            slack: remaining < target,
        });
    }
    let end = if z == 0.0 {
        front_loading_switch(d, budget)?
    } else if let Family::Exponential { rate } = d.family() {
        -((remaining - target) * rate).ln() / rate
    } else {
        let goal = remaining - target;
        let mut hi = d.horizon().max(z * 2.0);
        while d.tail(hi) > goal {
            hi *= 2.0;
        }
        quad::bisect(|t| d.tail(t) - goal, z, hi, 0.0)?
    };
    Ok(DelayedBlock {
        policy: AllocationPolicy::block(m, z, end)?,
        start: z,
        end,
        slack: false,
    })
}

/// Renewal-average objective; divergent for a singular curve left idle at
/// the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Finite(f64),
    Divergent,
}

impl Objective {
    pub fn value(self) -> f64 {
        match self {
            Objective::Finite(v) => v,
            Objective::Divergent => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Objective::Finite(_))
    }
}

/// `(1/E[Y]) ∫_0^∞ ḡ(x(t)) F̄(t) dt`.
pub fn time_average_loss(policy: &AllocationPolicy, g: &LossCurve, d: &DurationModel) -> Result<Objective> {
    average_loss(policy, g, d, true)
}

/// Same objective with every active segment integrated numerically; used to
/// cross-check the closed forms.
pub fn time_average_loss_quadrature(policy: &AllocationPolicy, g: &LossCurve, d: &DurationModel) -> Result<Objective> {
    average_loss(policy, g, d, false)
}

fn average_loss(policy: &AllocationPolicy, g: &LossCurve, d: &DurationModel, closed: bool) -> Result<Objective> {
    g.validate()?;
    let segs = policy.segments();
    if g.integrable_singularity() && segs[0].level == 0.0 {
        return Ok(Objective::Divergent);
    }
    let horizon = d.horizon();
    let sbreaks = survival_breaks(d);
    let early = d.quantile(0.01).unwrap_or(d.mean()).max(1e-9 * d.mean());
    let mut total = 0.0;
    for seg in &segs {
        if seg.start >= horizon {
            total += g.eval(seg.progress) * d.tail(seg.start);
            break;
        }
        let e = seg.level;
        if e == 0.0 {
            total += g.eval(seg.progress) * d.isf(seg.start, seg.end);
            continue;
        }
        if closed {
            if let (LossCurve::ExpDecay { alpha, beta }, Family::Exponential { rate }) = (g, d.family()) {
                let k = beta * e + rate;
                let span = seg.end - seg.start;
                let frac = if span.is_infinite() { 1.0 } else { -(-k * span).exp_m1() };
                total += alpha * (-beta * seg.progress - rate * seg.start).exp() * frac / k;
                continue;
            }
        }
        let end = seg.end.min(horizon);
        let mut breaks = sbreaks.clone();
        let scale = (loss_scale(g, seg.progress) / e).min(early);
        breaks.extend(quad::doubling_breaks(seg.start, end, scale));
        if let Some(c) = g.clamp_point() {
            let tc = seg.start + (c - seg.progress) / e;
            breaks.push(tc);
        }
        let singular = seg.progress == 0.0 && g.integrable_singularity();
        let piece = if singular {
            // ḡ(x)F̄(t) = ḡ(x)F̄(a) + ḡ(x)(F̄(t) - F̄(a)); the first part is exact
            let s0 = d.sf(seg.start);
            let exact = s0 * g.progress_integral(0.0, e * (end - seg.start)) / e;
            let rest = quad::integrate_pieces(
                |t| {
                    let x = e * (t - seg.start);
                    g.eval(x) * (d.sf(t) - s0)
                },
                seg.start,
                end,
                &breaks,
                QUAD_ABS,
                QUAD_REL,
            )?;
            exact + rest.value
        } else {
            quad::integrate_pieces(
                |t| g.eval(seg.progress_at(t)) * d.sf(t),
                seg.start,
                end,
                &breaks,
                QUAD_ABS,
                QUAD_REL,
            )?
            .value
        };
        total += piece;
        if seg.end > horizon {
            total += g.eval(seg.progress_at(horizon)) * d.tail(horizon);
            break;
        }
    }
    Ok(Objective::Finite(total / d.mean()))
}

/// `σ_e ∫_0^∞ e(t) F̄(t) dt / E[Y]`.
pub fn cost_rate(policy: &AllocationPolicy, d: &DurationModel, price: f64) -> f64 {
    let spent: f64 = policy
        .segments()
        .iter()
        .filter(|s| s.level > 0.0)
        .map(|s| s.level * d.isf(s.start, s.end))
        .sum();
    price * spent / d.mean()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SignPattern {
    NegThenPos,
    PosThenNeg,
    AllNeg,
    AllPos,
    Inconsistent,
}

impl std::fmt::Display for SignPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignPattern::NegThenPos => "NEG_THEN_POS",
            SignPattern::PosThenNeg => "POS_THEN_NEG",
            SignPattern::AllNeg => "ALL_NEG",
            SignPattern::AllPos => "ALL_POS",
            SignPattern::Inconsistent => "INCONSISTENT",
        })
    }
}

/// Relative threshold under which `φ` counts as zero.
pub const PHI_ZERO_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpReport {
    pub kind: SwitchKind,
    pub switch_time: f64,
    pub nu: f64,
    pub grid: Vec<(f64, f64)>,
    pub sign_pattern: SignPattern,
    /// `|φ(t*)|` divided by the scale of `φ`.
    pub phi_at_switch: f64,
    pub certified: bool,
    /// Longest run of grid points where `φ` vanishes, if any.
    pub singular_interval: Option<(f64, f64)>,
}

/// Default verification grid: 512 geometric points up to the 0.999 quantile.
pub fn default_pmp_grid(d: &DurationModel) -> Vec<f64> {
    let hi = d.quantile(0.999).unwrap_or(10.0 * d.mean());
    geometric_grid(hi * 1e-4, hi, 512)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Neg,
    Pos,
    Zero,
    Mixed,
}

fn side(values: &[f64], tol: f64) -> Side {
    let neg = values.iter().any(|&v| v < -tol);
    let pos = values.iter().any(|&v| v > tol);
    match (neg, pos) {
        (true, true) => Side::Mixed,
        (true, false) => Side::Neg,
        (false, true) => Side::Pos,
        (false, false) => Side::Zero,
    }
}

/// Evaluates the switching function `φ(t) = ∫_t^∞ ḡ'(x(s))F̄(s)ds + νF̄(t)`
/// of a single-switch policy and reports its sign pattern.
pub fn pmp_verify(
    policy: &AllocationPolicy,
    g: &LossCurve,
    d: &DurationModel,
    budget: &BudgetSpec,
    grid: Option<&[f64]>,
) -> Result<PmpReport> {
    let (kind, t_star, m) = policy
        .single_switch()
        .ok_or_else(|| Error::Unsupported("switching-function check needs a single-switch policy".into()))?;
    if g.integrable_singularity() {
        return Err(Error::Unsupported(
            "switching-function check on a curve singular at the origin".into(),
        ));
    }
    if !budget.binding() {
        return Err(Error::Unsupported(
            "switching-function check needs a binding budget".into(),
        ));
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_pmp_grid(d);
            &owned
        }
    };
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("grid times must be finite and non-negative"));
    }
    // a clamped linear curve only has the constant slope before the clamp
    let clamp_time = g.clamp_point().map(|c| policy.time_to_reach(c));
    let restricted: Vec<f64>;
    let grid = match clamp_time {
        Some(tc) => {
            restricted = grid.iter().copied().filter(|&t| t < tc).collect();
            &restricted[..]
        }
        None => grid,
    };

    let horizon = d.horizon().max(t_star);
    let segs = policy.segments();
    let seg_of = |t: f64| segs[policy.index(t)];

    let mut knots: Vec<f64> = grid.iter().copied().filter(|&t| t < horizon).collect();
    knots.push(t_star);
    knots.push(horizon);
    if let Some(tc) = clamp_time.filter(|t| t.is_finite() && *t < horizon) {
        knots.push(tc);
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    // p(t) = ∫_t^∞ ḡ'(x(s)) F̄(s) ds, accumulated backward over the knots
    let mut p = vec![0.0; knots.len()];
    let last = knots.len() - 1;
    p[last] = g.slope(policy.progress_at(horizon)) * d.tail(horizon);
    for i in (0..last).rev() {
        let (a, b) = (knots[i], knots[i + 1]);
        let seg = seg_of(a);
        let piece = if seg.level == 0.0 {
            g.slope(seg.progress) * d.isf(a, b)
        } else {
            quad::integrate(
                |s| g.slope(seg.progress_at(s)) * d.sf(s),
                a,
                b,
                QUAD_ABS * 1e-2,
                QUAD_REL,
            )?
            .value
        };
        p[i] = p[i + 1] + piece;
    }
    let p_at = |t: f64| -> f64 {
        let i = knots.partition_point(|&k| k < t);
        if i < knots.len() && knots[i] == t {
            p[i]
        } else {
            // beyond the horizon the remaining mass is negligible
            g.slope(policy.progress_at(t)) * d.tail(t)
        }
    };

    let s_star = d.sf(t_star);
    let nu = match kind {
        SwitchKind::FrontLoading => -g.slope(m * t_star) * d.mrl_unchecked(t_star)?,
        SwitchKind::BackLoading => {
            if s_star <= crate::dist::SURVIVAL_FLOOR {
                return Err(Error::SurvivalUnderflow { t: t_star });
            }
            -p_at(t_star) / s_star
        }
    }
    .max(0.0);

    let phi = |t: f64| p_at(t) + nu * d.sf(t);
    let values: Vec<(f64, f64)> = grid.iter().map(|&t| (t, phi(t))).collect();
    let scale = values
        .iter()
        .map(|(_, v)| v.abs())
        .fold(nu * d.sf(0.0), f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = PHI_ZERO_TOLERANCE * scale;
    let phi_at_switch = phi(t_star).abs() / scale;

    let pre: Vec<f64> = values.iter().filter(|(t, _)| *t < t_star).map(|p| p.1).collect();
    let post: Vec<f64> = values.iter().filter(|(t, _)| *t > t_star).map(|p| p.1).collect();
    use Side::*;
    let sign_pattern = match (side(&pre, tol), side(&post, tol)) {
        (Neg, Pos) | (Neg, Zero) | (Zero, Pos) => SignPattern::NegThenPos,
        (Pos, Neg) | (Pos, Zero) | (Zero, Neg) => SignPattern::PosThenNeg,
        (Neg, Neg) => SignPattern::AllNeg,
        (Pos, Pos) => SignPattern::AllPos,
        _ => SignPattern::Inconsistent,
    };
    let expected = match kind {
        SwitchKind::FrontLoading => SignPattern::NegThenPos,
        SwitchKind::BackLoading => SignPattern::PosThenNeg,
    };

    let mut singular_interval = None;
    let mut best = 0usize;
    let mut run_start = None;
    for (i, (_, v)) in values.iter().enumerate() {
        if v.abs() <= tol {
            let s = *run_start.get_or_insert(i);
            if i - s + 1 > best && i > s {
                best = i - s + 1;
                singular_interval = Some((values[s].0, values[i].0));
            }
        } else {
            run_start = None;
        }
    }

    Ok(PmpReport {
        kind,
        switch_time: t_star,
        nu,
        grid: values,
        sign_pattern,
        phi_at_switch,
        certified: sign_pattern == expected && phi_at_switch < PHI_ZERO_TOLERANCE,
        singular_interval,
    })
}
