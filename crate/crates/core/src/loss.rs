//! Expected loss curves `ḡ(x)` as a function of accumulated training
//! progress `x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textform::Call;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum LossCurve {
    /// `α e^{-βx}`
    ExpDecay { alpha: f64, beta: f64 },
    /// `(1 + x)^{-a}`
    ShiftedPower { a: f64 },
    /// `x^{-a}` with `0 < a < 1`; integrable singularity at the origin.
    PurePower { a: f64 },
    /// `max(g0 - βx, 0)`
    Linear { beta: f64, g0: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "{name} must be a positive finite number, got {v}"
        )))
    }
}

impl LossCurve {
    pub fn exp_decay(alpha: f64, beta: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        Ok(LossCurve::ExpDecay { alpha, beta })
    }

    pub fn shifted_power(a: f64) -> Result<Self> {
        positive("a", a)?;
        Ok(LossCurve::ShiftedPower { a })
    }

    pub fn pure_power(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param(format!("pure power exponent must lie in (0, 1), got {a}")));
        }
        Ok(LossCurve::PurePower { a })
    }

    pub fn linear(beta: f64, g0: f64) -> Result<Self> {
        positive("beta", beta)?;
        positive("g0", g0)?;
        Ok(LossCurve::Linear { beta, g0 })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossCurve::ExpDecay { alpha, beta } => Self::exp_decay(alpha, beta).map(|_| ()),
            LossCurve::ShiftedPower { a } => Self::shifted_power(a).map(|_| ()),
            LossCurve::PurePower { a } => Self::pure_power(a).map(|_| ()),
            LossCurve::Linear { beta, g0 } => Self::linear(beta, g0).map(|_| ()),
        }
    }

    /// True for curves that diverge at `x = 0` but remain integrable.
    pub fn integrable_singularity(&self) -> bool {
        matches!(self, LossCurve::PurePower { .. })
    }

    /// Progress where the linear curve reaches zero.
    pub fn clamp_point(&self) -> Option<f64> {
        match *self {
            LossCurve::Linear { beta, g0 } => Some(g0 / beta),
            _ => None,
        }
    }

    fn check(x: f64) -> Result<()> {
        if x.is_nan() || x < 0.0 {
            Err(Error::domain(format!(
                "training progress must be non-negative, got {x}"
            )))
        } else {
            Ok(())
        }
    }

    /// `ḡ(x)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        if x == 0.0 && self.integrable_singularity() {
            return Err(Error::SingularAtOrigin);
        }
        Ok(self.eval(x))
    }

    /// `ḡ(x)`, returning `+∞` at the singular origin instead of an error.
    pub fn value_marked(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok(self.eval(x))
    }

    /// `ḡ(0)`, or `+∞` for the pure power curve.
    pub fn initial(&self) -> f64 {
        self.eval(0.0)
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        match *self {
            LossCurve::ExpDecay { alpha, beta } => alpha * (-beta * x).exp(),
            LossCurve::ShiftedPower { a } => (1.0 + x).powf(-a),
            LossCurve::PurePower { a } => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(-a)
                }
            }
            LossCurve::Linear { beta, g0 } => (g0 - beta * x).max(0.0),
        }
    }

    /// `ḡ'(x)`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        if x == 0.0 && self.integrable_singularity() {
            return Err(Error::SingularAtOrigin);
        }
        if let Some(c) = self.clamp_point() {
            if x == c {
                return Err(Error::Kink { x });
            }
        }
        Ok(self.slope(x))
    }

    /// Derivative defined almost everywhere; at the linear clamp point the
    /// right derivative (zero) is returned.
    pub(crate) fn slope(&self, x: f64) -> f64 {
        match *self {
            LossCurve::ExpDecay { alpha, beta } => -alpha * beta * (-beta * x).exp(),
            LossCurve::ShiftedPower { a } => -a * (1.0 + x).powf(-a - 1.0),
            LossCurve::PurePower { a } => -a * x.powf(-a - 1.0),
            LossCurve::Linear { beta, g0 } => {
                if x < g0 / beta {
                    -beta
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{x0}^{x1} ḡ(x) dx` in closed form, for `0 <= x0 <= x1`.
    pub fn progress_integral(&self, x0: f64, x1: f64) -> f64 {
        if x1 <= x0 {
            return 0.0;
        }
        match *self {
            LossCurve::ExpDecay { alpha, beta } => {
                // e^{-βx0}(1 - e^{-β(x1-x0)}) avoids cancellation for short spans
                alpha / beta * (-beta * x0).exp() * -(-beta * (x1 - x0)).exp_m1()
            }
            LossCurve::ShiftedPower { a } => {
                if (a - 1.0).abs() < 1e-12 {
                    ((1.0 + x1) / (1.0 + x0)).ln()
                } else {
                    ((1.0 + x1).powf(1.0 - a) - (1.0 + x0).powf(1.0 - a)) / (1.0 - a)
                }
            }
            LossCurve::PurePower { a } => (x1.powf(1.0 - a) - x0.powf(1.0 - a)) / (1.0 - a),
            LossCurve::Linear { beta, g0 } => {
                let c = g0 / beta;
                let hi = x1.min(c);
                if hi <= x0 {
                    0.0
                } else {
                    (hi - x0) * (g0 - 0.5 * beta * (x0 + hi))
                }
            }
        }
    }

    /// Smallest progress `x` with `ḡ(x) <= y`, for `y` below `ḡ(0)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            if y == 0.0 {
                if let Some(c) = self.clamp_point() {
                    return Ok(c);
                }
            }
            return Err(Error::domain(format!("loss level {y} is not attained")));
        }
        if y >= self.initial() {
            return Ok(0.0);
        }
        Ok(match *self {
            LossCurve::ExpDecay { alpha, beta } => (alpha / y).ln() / beta,
            LossCurve::ShiftedPower { a } => y.powf(-1.0 / a) - 1.0,
            LossCurve::PurePower { a } => y.powf(-1.0 / a),
            LossCurve::Linear { beta, g0 } => (g0 - y) / beta,
        })
    }
}

impl FromStr for LossCurve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = Call::parse(s)?;
        match call.name.as_str() {
            "expdecay" | "exp" => {
                call.only(&["alpha", "beta"])?;
                let alpha = if call.has("alpha") { call.num("alpha")? } else { 1.0 };
                Self::exp_decay(alpha, call.num("beta")?)
            }
            "shiftedpower" => {
                call.only(&["a"])?;
                Self::shifted_power(call.num("a")?)
            }
            "purepower" => {
                call.only(&["a"])?;
                Self::pure_power(call.num("a")?)
            }
            "linear" => {
                call.only(&["beta", "g0"])?;
                let g0 = if call.has("g0") { call.num("g0")? } else { 1.0 };
                Self::linear(call.num("beta")?, g0)
            }
            other => Err(call.error(format!("unknown loss curve `{other}`"))),
        }
    }
}

impl fmt::Display for LossCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossCurve::ExpDecay { alpha, beta } => write!(f, "expdecay(alpha={alpha},beta={beta})"),
            LossCurve::ShiftedPower { a } => write!(f, "shiftedpower(a={a})"),
            LossCurve::PurePower { a } => write!(f, "purepower(a={a})"),
            LossCurve::Linear { beta, g0 } => write!(f, "linear(beta={beta},g0={g0})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn curves() -> Vec<LossCurve> {
        vec![
            LossCurve::exp_decay(1.0, 1.0).unwrap(),
            LossCurve::exp_decay(2.0, 0.5).unwrap(),
            LossCurve::shifted_power(0.5).unwrap(),
            LossCurve::shifted_power(1.0).unwrap(),
            LossCurve::pure_power(0.3).unwrap(),
            LossCurve::linear(0.3, 1.0).unwrap(),
        ]
    }

    #[test]
    fn value_examples() {
        let g = LossCurve::exp_decay(1.0, 1.0).unwrap();
        assert_eq!(g.value(0.0).unwrap(), 1.0);
        assert!((g.value(LN_2).unwrap() - 0.5).abs() < 1e-15);
        let s = LossCurve::shifted_power(0.5).unwrap();
        assert!((s.value(3.0).unwrap() - 0.5).abs() < 1e-15);
        let p = LossCurve::pure_power(0.3).unwrap();
        assert_eq!(p.value(0.0), Err(Error::SingularAtOrigin));
        assert_eq!(p.value_marked(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn derivative_examples() {
        let g = LossCurve::exp_decay(1.0, 1.0).unwrap();
        assert_eq!(g.derivative(0.0).unwrap(), -1.0);
        let l = LossCurve::linear(0.3, 1.0).unwrap();
        assert_eq!(l.derivative(1.0).unwrap(), -0.3);
        assert!(matches!(l.derivative(1.0 / 0.3), Err(Error::Kink { .. })));
        assert_eq!(l.derivative(10.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for g in curves() {
            let h = 1e-5;
            let fd = (g.eval(1.0 + h) - g.eval(1.0 - h)) / (2.0 * h);
            let d = g.derivative(1.0).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs(), "{g}: {fd} vs {d}");
        }
    }

    #[test]
    fn progress_integral_matches_quadrature() {
        for g in curves() {
            for (a, b) in [(0.1, 0.7), (0.5, 4.0), (2.0, 9.0)] {
                let q = crate::quad::integrate(|x| g.eval(x), a, b, 1e-13, 0.0).unwrap().value;
                assert!((q - g.progress_integral(a, b)).abs() < 1e-11, "{g} [{a},{b}]");
            }
        }
    }

    #[test]
    fn self_similarity() {
        let g = LossCurve::exp_decay(1.7, 0.8).unwrap();
        for (x, c) in [(0.0, 1.0), (0.3, 2.5), (4.0, 0.1)] {
            assert!((g.eval(x + c) - g.eval(x) * (-0.8 * c).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        for g in curves() {
            for x in [0.2, 1.0, 3.0] {
                let y = g.eval(x);
                if y > 0.0 {
                    assert!((g.inverse(y).unwrap() - x).abs() < 1e-9, "{g}");
                }
            }
        }
    }

    #[test]
    fn text_form() {
        for text in [
            "expdecay(alpha=1,beta=1)",
            "shiftedpower(a=0.5)",
            "purepower(a=0.3)",
            "linear(beta=0.3,g0=1)",
        ] {
            let g: LossCurve = text.parse().unwrap();
            assert_eq!(g.to_string().parse::<LossCurve>().unwrap(), g);
        }
        for bad in ["purepower(a=1.2)", "expdecay(beta=0)", "cubic(a=1)", "linear(g0=1)"] {
            assert!(bad.parse::<LossCurve>().is_err(), "{bad}");
        }
    }
}
