//! DC surrogates of the ℓ0 function and their majorizers.
//!
//! Every penalty is written as `g(x) = η|x| − g⁻(x)` with `g⁻` convex and
//! continuously differentiable.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    /// `1 − e^{−θ|x|}`.
    Exp,
    /// `(|x| + ε)^{1/θ} − ε^{1/θ}`, i.e. ℓp with `p = 1/θ`, shifted so that `g(0) = 0`.
    LpPlus { eps: f64 },
    /// `1 − (θ|x| + 1)^p` with `p < 0`.
    LpMinus { p: f64 },
    /// Piecewise-quadratic SCAD with knee parameter `a > 1`.
    Scad { a: f64 },
    /// `log(1 + θ|x|) / log(1 + θ)`.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcPenalty {
    kind: PenaltyKind,
    theta: f64,
}

pub const SCAD_DEFAULT_A: f64 = 3.7;

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl DcPenalty {
    pub fn new(kind: PenaltyKind, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            bail!(Config, "penalty theta must be positive, got {theta}");
        }
        match kind {
            PenaltyKind::LpPlus { eps } => {
                if !(eps > 0.0) || !(theta > 1.0) {
                    bail!(Config, "lp_plus needs eps > 0 and theta > 1");
                }
            }
            PenaltyKind::LpMinus { p } => {
                if !(p < 0.0) {
                    bail!(Config, "lp_minus needs p < 0, got {p}");
                }
            }
            PenaltyKind::Scad { a } => {
                if !(a > 1.0) {
                    bail!(Config, "scad needs a > 1, got {a}");
                }
            }
            PenaltyKind::Exp | PenaltyKind::Log => {}
        }
        Ok(Self { kind, theta })
    }

    pub fn exp(theta: f64) -> Result<Self> {
        Self::new(PenaltyKind::Exp, theta)
    }

    pub fn lp_plus(theta: f64, eps: f64) -> Result<Self> {
        Self::new(PenaltyKind::LpPlus { eps }, theta)
    }

    pub fn lp_minus(theta: f64, p: f64) -> Result<Self> {
        Self::new(PenaltyKind::LpMinus { p }, theta)
    }

    pub fn scad(theta: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad { a }, theta)
    }

    pub fn scad_default(theta: f64) -> Result<Self> {
        Self::scad(theta, SCAD_DEFAULT_A)
    }

    pub fn log(theta: f64) -> Result<Self> {
        Self::new(PenaltyKind::Log, theta)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `g(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let t = self.theta;
        let ax = x.abs();
        match self.kind {
            PenaltyKind::Exp => -(-t * ax).exp_m1(),
            PenaltyKind::LpPlus { eps } => (ax + eps).powf(1.0 / t) - eps.powf(1.0 / t),
            PenaltyKind::LpMinus { p } => 1.0 - (t * ax + 1.0).powf(p),
            PenaltyKind::Scad { a } => {
                if ax <= 1.0 / t {
                    2.0 * t / (a + 1.0) * ax
                } else if ax <= a / t {
                    (-t * t * ax * ax + 2.0 * a * t * ax - 1.0) / (a * a - 1.0)
                } else {
                    1.0
                }
            }
            PenaltyKind::Log => (t * ax).ln_1p() / t.ln_1p(),
        }
    }

    /// `η(θ)`, the slope of `g` at `0⁺`.
    pub fn eta(&self) -> f64 {
        let t = self.theta;
        match self.kind {
            PenaltyKind::Exp => t,
            PenaltyKind::LpPlus { eps } => eps.powf(1.0 / t - 1.0) / t,
            PenaltyKind::LpMinus { p } => -p * t,
            PenaltyKind::Scad { a } => 2.0 * t / (a + 1.0),
            PenaltyKind::Log => t / t.ln_1p(),
        }
    }

    /// `g⁻(x) = η|x| − g(x)`.
    pub fn g_minus(&self, x: f64) -> f64 {
        self.eta() * x.abs() - self.value(x)
    }

    /// `dg⁻/dx`, zero at the origin.
    pub fn dg_minus(&self, x: f64) -> f64 {
        let t = self.theta;
        let ax = x.abs();
        let s = sign(x);
        match self.kind {
            PenaltyKind::Exp => -s * t * (-t * ax).exp_m1(),
            PenaltyKind::LpPlus { eps } => {
                s / t * (eps.powf(1.0 / t - 1.0) - (ax + eps).powf(1.0 / t - 1.0))
            }
            PenaltyKind::LpMinus { p } => -s * p * t * (1.0 - (1.0 + t * ax).powf(p - 1.0)),
            PenaltyKind::Scad { a } => {
                if ax <= 1.0 / t {
                    0.0
                } else if ax <= a / t {
                    s * 2.0 * t * (t * ax - 1.0) / (a * a - 1.0)
                } else {
                    s * 2.0 * t / (a + 1.0)
                }
            }
            PenaltyKind::Log => s * t * t * ax / (t.ln_1p() * (1.0 + t * ax)),
        }
    }

    /// `dg/dx` for `x ≠ 0`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.eta() * sign(x) - self.dg_minus(x)
    }

    /// Convex majorizer obtained by linearizing `−g⁻` at `y`.
    pub fn majorize_dc(&self, x: f64, y: f64) -> f64 {
        self.eta() * x.abs() - self.dg_minus(y) * (x - y) - self.g_minus(y)
    }

    /// Weight `w(y)` of the weighted-ℓ1 majorizers available for `log` and `lp_plus`.
    pub fn adhoc_weight(&self, y: f64) -> Result<f64> {
        let t = self.theta;
        match self.kind {
            PenaltyKind::Log => Ok(t / (t.ln_1p() * (1.0 + t * y.abs()))),
            PenaltyKind::LpPlus { eps } => Ok((y.abs() + eps).powf(1.0 / t - 1.0) / t),
            _ => bail!(Config, "no tailored majorizer for {:?}", self.kind),
        }
    }

    /// Weighted-ℓ1 majorizer `w(y)|x|` shifted by the constant `g(y) − w(y)|y|`
    /// so that it touches `g` at `y`.
    pub fn majorize_concave_adhoc(&self, x: f64, y: f64) -> Result<f64> {
        let w = self.adhoc_weight(y)?;
        Ok(w * x.abs() + self.value(y) - w * y.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::diagnostics::fd_derivative;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn catalogue() -> Vec<DcPenalty> {
        vec![
            DcPenalty::exp(2.0).unwrap(),
            DcPenalty::exp(7.5).unwrap(),
            DcPenalty::lp_plus(2.0, 1.0).unwrap(),
            DcPenalty::lp_plus(3.0, 0.1).unwrap(),
            DcPenalty::lp_minus(2.0, -0.5).unwrap(),
            DcPenalty::lp_minus(5.0, -2.0).unwrap(),
            DcPenalty::scad(3.0, 4.0).unwrap(),
            DcPenalty::scad_default(2.0).unwrap(),
            DcPenalty::log(9.0).unwrap(),
            DcPenalty::log(0.5).unwrap(),
        ]
    }

    #[test]
    fn value_examples() {
        let log9 = DcPenalty::log(9.0).unwrap();
        assert_eq!(log9.value(0.0), 0.0);
        assert!((log9.value(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(DcPenalty::exp(2.0).unwrap().value(0.0), 0.0);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(DcPenalty::exp(2.0).unwrap().eta(), 2.0);
        assert!((DcPenalty::log(9.0).unwrap().eta() - 3.908650337).abs() < 1e-8);
        assert!((DcPenalty::scad(3.0, 4.0).unwrap().eta() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn majorizer_examples() {
        let log9 = DcPenalty::log(9.0).unwrap();
        assert_eq!(log9.majorize_dc(0.7, 0.7), log9.value(0.7));
        assert!((log9.majorize_dc(0.5, 0.0) - 1.954325168).abs() < 1e-8);
        assert!(log9.majorize_dc(2.0, 1.0) >= log9.value(2.0));
        assert!((log9.majorize_concave_adhoc(1.0, 0.0).unwrap() - 3.908650337).abs() < 1e-8);
        assert_eq!(log9.majorize_concave_adhoc(0.0, 0.0).unwrap(), 0.0);
        let lp = DcPenalty::lp_plus(2.0, 1.0).unwrap();
        assert!((lp.majorize_concave_adhoc(4.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(DcPenalty::exp(1.0).unwrap().majorize_concave_adhoc(1.0, 0.0).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DcPenalty::exp(0.0).is_err());
        assert!(DcPenalty::scad(1.0, 1.0).is_err());
        assert!(DcPenalty::lp_minus(1.0, 0.5).is_err());
        assert!(DcPenalty::lp_plus(0.5, 1.0).is_err());
        assert!(DcPenalty::lp_plus(2.0, 0.0).is_err());
    }

    #[test]
    fn large_theta_approaches_indicator() {
        for p in [
            DcPenalty::exp(1e6).unwrap(),
            DcPenalty::lp_minus(1e6, -1.0).unwrap(),
            DcPenalty::scad_default(1e6).unwrap(),
        ] {
            assert_eq!(p.value(0.0), 0.0);
            for x in [-2.0, -0.1, 0.01, 0.5, 3.0] {
                assert!((p.value(x) - 1.0).abs() < 1e-3, "{:?} at {x}", p.kind());
            }
        }
    }

    #[test]
    fn scad_is_continuous_at_knees() {
        let p = DcPenalty::scad(3.0, 4.0).unwrap();
        for knee in [1.0 / 3.0, 4.0 / 3.0] {
            assert!((p.value(knee - 1e-12) - p.value(knee + 1e-12)).abs() < 1e-10);
            assert!((p.dg_minus(knee - 1e-12) - p.dg_minus(knee + 1e-12)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn even_and_zero_at_origin(x in -5.0f64..5.0) {
            for p in catalogue() {
                prop_assert_eq!(p.value(0.0), 0.0);
                prop_assert!((p.value(x) - p.value(-x)).abs() <= 1e-15);
                prop_assert!((p.g_minus(x) - (p.eta() * x.abs() - p.value(x))).abs() <= 1e-15);
            }
        }

        #[test]
        fn g_minus_is_midpoint_convex(a in -5.0f64..5.0, b in -5.0f64..5.0, l in 0.0f64..1.0) {
            for p in catalogue() {
                let m = l * a + (1.0 - l) * b;
                let rhs = l * p.g_minus(a) + (1.0 - l) * p.g_minus(b);
                prop_assert!(p.g_minus(m) <= rhs + 1e-12);
            }
        }

        #[test]
        fn dg_minus_matches_finite_differences(x in 0.05f64..5.0, neg in proptest::bool::ANY) {
            let x = if neg { -x } else { x };
            for p in catalogue() {
                // SCAD has kinks in its second derivative; keep away from them.
                if let PenaltyKind::Scad { a } = p.kind() {
                    let t = p.theta();
                    if (x.abs() - 1.0 / t).abs() < 1e-3 || (x.abs() - a / t).abs() < 1e-3 {
                        continue;
                    }
                }
                let fd = fd_derivative(|v| p.g_minus(v), x, 1e-6);
                let an = p.dg_minus(x);
                prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{:?}: {} vs {}", p.kind(), fd, an);
            }
        }

        #[test]
        fn majorizers_upper_bound_and_touch(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            for p in catalogue() {
                prop_assert!(p.majorize_dc(x, y) >= p.value(x) - 1e-12);
                prop_assert!((p.majorize_dc(y, y) - p.value(y)).abs() <= 1e-12);
                if let Ok(v) = p.majorize_concave_adhoc(x, y) {
                    prop_assert!(v >= p.value(x) - 1e-12);
                    prop_assert!((p.majorize_concave_adhoc(y, y).unwrap() - p.value(y)).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn majorizer_slope_matches_g_at_base(y in 0.05f64..4.0) {
            for p in catalogue() {
                if let PenaltyKind::Scad { a } = p.kind() {
                    let t = p.theta();
                    if (y - 1.0 / t).abs() < 1e-3 || (y - a / t).abs() < 1e-3 {
                        continue;
                    }
                }
                let d = fd_derivative(|v| p.majorize_dc(v, y), y, 1e-7);
                prop_assert!((d - p.derivative(y)).abs() <= 1e-5);
            }
        }
    }
}
