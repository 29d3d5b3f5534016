//! Step-size policies.

use alloc::sync::Arc;
use core::fmt;

use crate::error::{bail, Result};

/// Nonnegative sequence indexed by `k ≥ 1`.
pub type SeqFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ScheduleKind {
    Constant(f64),
    /// `γᵏ = γᵏ⁻¹(1 − ε γᵏ⁻¹)`.
    Recursive { gamma0: f64, eps: f64 },
    /// `γᵏ = (γᵏ⁻¹ + α(k)) / (1 + β(k))` with `γ⁰ = 1`.
    Ratio { alpha: SeqFn, beta: SeqFn },
    /// Backtracking `γ = γ₀ δᵗ`; the engine runs the search, the schedule stores the parameters.
    Armijo { alpha: f64, delta: f64, gamma0: f64 },
    /// `γᵏ = γᵏ⁻¹(1 − min{1, 10⁻⁴/re} θ γᵏ⁻¹)`, driven by a relative-error merit.
    Guarded { gamma0: f64, theta: f64 },
}

impl fmt::Debug for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(g) => write!(f, "Constant({g})"),
            Self::Recursive { gamma0, eps } => write!(f, "Recursive(gamma0={gamma0}, eps={eps})"),
            Self::Ratio { .. } => write!(f, "Ratio"),
            Self::Armijo { alpha, delta, gamma0 } => {
                write!(f, "Armijo(alpha={alpha}, delta={delta}, gamma0={gamma0})")
            }
            Self::Guarded { gamma0, theta } => write!(f, "Guarded(gamma0={gamma0}, theta={theta})"),
        }
    }
}

/// A step-size policy with its running state.
#[derive(Clone, Debug)]
pub struct Schedule {
    kind: ScheduleKind,
    gamma: f64,
    k: usize,
}

fn in_unit(g: f64) -> bool {
    g > 0.0 && g <= 1.0
}

impl Schedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        if !in_unit(gamma) {
            bail!(Config, "constant step-size must lie in (0,1], got {gamma}");
        }
        Ok(Self { kind: ScheduleKind::Constant(gamma), gamma, k: 0 })
    }

    pub fn recursive(gamma0: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            bail!(Config, "recursive rule needs eps in (0,1), got {eps}");
        }
        if !in_unit(gamma0) || gamma0 >= 1.0 / eps {
            bail!(Config, "recursive rule needs gamma0 in (0,1] and below 1/eps, got {gamma0}");
        }
        Ok(Self { kind: ScheduleKind::Recursive { gamma0, eps }, gamma: gamma0, k: 0 })
    }

    /// Ratio rule; conditions `0 ≤ α(k) ≤ β(k)` are checked on `k = 1..=10⁴`.
    pub fn ratio(alpha: SeqFn, beta: SeqFn) -> Result<Self> {
        for k in 1..=10_000 {
            let (a, b) = (alpha(k), beta(k));
            if !(a >= 0.0 && a <= b && b.is_finite()) {
                bail!(Config, "ratio rule needs 0 <= alpha(k) <= beta(k); fails at k={k}");
            }
        }
        let r1 = alpha(1) / beta(1);
        let rbig = alpha(1_000_000) / beta(1_000_000);
        if r1.is_finite() && rbig.is_finite() && rbig >= r1 && r1 > 0.0 {
            bail!(Config, "ratio rule needs alpha(k)/beta(k) to vanish");
        }
        Ok(Self { kind: ScheduleKind::Ratio { alpha, beta }, gamma: 1.0, k: 0 })
    }

    /// Ratio rule with `α(k) = a` and `β(k) = b·k`.
    pub fn ratio_harmonic(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0 && a <= b) {
            bail!(Config, "need 0 < a <= b < 1, got a={a}, b={b}");
        }
        Self::ratio(Arc::new(move |_| a), Arc::new(move |k| b * k as f64))
    }

    pub fn armijo(alpha: f64, delta: f64, gamma0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && delta > 0.0 && delta < 1.0) {
            bail!(Config, "Armijo needs alpha, delta in (0,1)");
        }
        if !in_unit(gamma0) {
            bail!(Config, "Armijo gamma0 must lie in (0,1], got {gamma0}");
        }
        Ok(Self { kind: ScheduleKind::Armijo { alpha, delta, gamma0 }, gamma: gamma0, k: 0 })
    }

    /// Armijo with the default `α = 0.1`, `δ = 0.5`.
    pub fn armijo_default(gamma0: f64) -> Result<Self> {
        Self::armijo(0.1, 0.5, gamma0)
    }

    pub fn guarded(gamma0: f64, theta: f64) -> Result<Self> {
        if !in_unit(gamma0) || !(theta > 0.0 && theta < 1.0) {
            bail!(Config, "guarded rule needs gamma0 in (0,1] and theta in (0,1)");
        }
        Ok(Self { kind: ScheduleKind::Guarded { gamma0, theta }, gamma: gamma0, k: 0 })
    }

    /// The LASSO setting `γ⁰ = 0.9`, `θ = 10⁻⁷`.
    pub fn guarded_default() -> Self {
        Self::guarded(0.9, 1e-7).expect("valid defaults")
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// The step-size for the current iteration.
    pub fn current(&self) -> f64 {
        self.gamma
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn is_armijo(&self) -> bool {
        matches!(self.kind, ScheduleKind::Armijo { .. })
    }

    pub fn is_diminishing(&self) -> bool {
        matches!(
            self.kind,
            ScheduleKind::Recursive { .. } | ScheduleKind::Ratio { .. } | ScheduleKind::Guarded { .. }
        )
    }

    /// Advance the counter and return `γᵏ⁺¹`. The guarded rule is treated as if `re ≥ 10⁻⁴`.
    pub fn next_stepsize(&mut self) -> f64 {
        self.advance_with_merit(f64::INFINITY)
    }

    /// Advance using the relative-error merit `re` (only the guarded rule reads it).
    pub fn advance_with_merit(&mut self, re: f64) -> f64 {
        self.k += 1;
        let g = self.gamma;
        self.gamma = match &self.kind {
            ScheduleKind::Constant(c) => *c,
            ScheduleKind::Recursive { eps, .. } => g * (1.0 - eps * g),
            ScheduleKind::Ratio { alpha, beta } => (g + alpha(self.k)) / (1.0 + beta(self.k)),
            ScheduleKind::Armijo { gamma0, .. } => *gamma0,
            ScheduleKind::Guarded { theta, .. } => {
                let guard = if re > 0.0 { (1e-4 / re).min(1.0) } else { 1.0 };
                g * (1.0 - guard * theta * g)
            }
        };
        self.gamma
    }

    /// Restart from `γ⁰`.
    pub fn reset(&mut self) {
        self.k = 0;
        self.gamma = match &self.kind {
            ScheduleKind::Constant(c) => *c,
            ScheduleKind::Recursive { gamma0, .. }
            | ScheduleKind::Armijo { gamma0, .. }
            | ScheduleKind::Guarded { gamma0, .. } => *gamma0,
            ScheduleKind::Ratio { .. } => 1.0,
        };
    }

    /// Cap the current and all later step-sizes by `cap` (used for nonseparable `G`).
    pub fn capped(&self, cap: f64) -> f64 {
        self.gamma.min(cap)
    }
}
